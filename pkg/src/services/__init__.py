"""Noise synthesis, training, evaluation and verification services."""
