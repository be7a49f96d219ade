"""Diverse instance generation for few-shot detection data augmentation."""

__version__ = "0.1.0"
