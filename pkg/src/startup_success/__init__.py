"""Predicting startup success from funding, founder, investor and news history."""

__version__ = "0.1.0"
