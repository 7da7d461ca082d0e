"""Synthetic line images: procedural glyphs, rendering, padding and PGM files."""
