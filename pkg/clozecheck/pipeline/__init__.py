"""Orchestration of the command-line workflow."""
