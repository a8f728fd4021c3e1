"""Adversarial self-training for recommendation under selection bias."""

__version__ = "0.1.0"
