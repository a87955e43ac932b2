"""Finite-scale semantics of dependent type theory: polynomials, ML-algebras, presheaves."""

__version__ = "0.1.0"
