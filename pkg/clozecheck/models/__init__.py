"""Recognition backbone, CTC, multimodal correction model and their checkpoints."""
