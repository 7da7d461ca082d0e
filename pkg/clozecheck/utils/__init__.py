"""Utility helpers: logging and seeding."""
