"""Certified sensitivity bounds for fairness parity metrics under measurement bias."""

__version__ = "0.1.0"
