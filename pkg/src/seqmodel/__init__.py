"""Opponent modeling over sequence-form strategy polytopes."""

__version__ = "0.1.0"
