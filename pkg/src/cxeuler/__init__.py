"""Numerics for the complex Euler equations and non-hyperbolic first-order systems."""

__version__ = "0.1.0"
