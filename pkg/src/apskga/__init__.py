"""Genetic optimization of APSK constellations over a nonlinear satellite channel."""

__version__ = "0.1.0"
