"""Adaptive MCTDH propagation driven by the local-in-time error (LITE)."""

from .mctdh import MctdhState, TangentVector, eom_rhs, reconstruct
from .models import SopHamiltonian, coupled_oscillators, henon_heiles
from .lite import LiteReport, lite

__all__ = [
    "MctdhState",
    "TangentVector",
    "eom_rhs",
    "reconstruct",
    "SopHamiltonian",
    "coupled_oscillators",
    "henon_heiles",
    "LiteReport",
    "lite",
]

__version__ = "0.1.0"
