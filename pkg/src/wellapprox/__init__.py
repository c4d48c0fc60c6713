"""Finite-stage construction and numerical verification of Fourier-decaying
measures on psi-well-approximable numbers."""

__version__ = "0.1.0"
