"""Tensor container and checkpoint persistence."""
