"""Detector/segmenter adapter for the omnimask masking pipeline."""

__version__ = "0.1.0"
