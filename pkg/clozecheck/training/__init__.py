"""Two-stage training: OCR pretraining with CTC, then the multimodal correction model."""
