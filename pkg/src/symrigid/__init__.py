"""Cotangent lifts, moment maps and rigidity checks for integrable Hamiltonian systems."""

from symrigid.kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
