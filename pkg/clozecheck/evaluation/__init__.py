"""Metrics, batched inference, reports and attention export."""
