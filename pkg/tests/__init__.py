"""Tests for clozecheck."""
