"""Numerical laboratory for purity dynamics of two linearly coupled
harmonic oscillators in Gaussian states."""

__version__ = "0.1.0"
