"""Semantic-shift measurement, shift-aware feature selection, and prevalence monitoring."""

__version__ = "0.1.0"
