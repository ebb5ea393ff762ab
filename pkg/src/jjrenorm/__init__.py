"""Renormalization of two-sided Jacobi matrices over polynomial Julia sets,
with independent measure-side oracles and a quadratic factorization suite."""

__version__ = "0.1.0"
