"""Corpus generation, negative augmentation, manifests and batching."""
