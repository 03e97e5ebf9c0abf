"""Finite-dimensional laboratory for spectral-action perturbation theory and
Weyl quantization of abelian lattice gauge fields."""

from nclab.config import TOL, Tolerances, make_rng

__all__ = ["TOL", "Tolerances", "make_rng"]
__version__ = "0.1.0"
