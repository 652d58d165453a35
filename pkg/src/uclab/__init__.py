"""Numerical laboratory for propagation of smallness of gradients of harmonic functions."""

__version__ = "0.1.0"
