"""Domain types, vocabulary, alignment and run configuration."""
