"""Convolutional encoder-decoder toolkit for grammatical error correction."""

__version__ = "0.1.0"
