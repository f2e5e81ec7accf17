"""Numerical unstable topological pressure for partially hyperbolic torus maps."""

__version__ = "0.1.0"
