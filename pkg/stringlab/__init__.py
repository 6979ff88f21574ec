"""Spectral laboratory for strings with δ′-like concentrated mass perturbations."""

__version__ = "0.1.0"
