"""Harmonic current prediction, analysis and active-filter simulation."""

__version__ = "0.1.0"
