"""Misspelling attacks, a word-recognition defense, and robustness metrics."""

__version__ = "0.1.0"
