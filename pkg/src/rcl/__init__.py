"""Riesz capacity lab: equilibrium measures, capacities and potentials of convex bodies."""

__version__ = "0.1.0"
