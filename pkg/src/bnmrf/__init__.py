"""Boundary integral solvers with random-feature densities for Laplace and Helmholtz problems."""

__version__ = "0.1.0"
