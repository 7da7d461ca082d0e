"""clozecheck - multimodal correction of handwritten fill-in-the-blank answers."""

__version__ = "0.1.0"
