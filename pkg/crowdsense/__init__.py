"""Entropy-based detection of anomalous days in urban crowd dynamics."""

__version__ = "0.3.0"
