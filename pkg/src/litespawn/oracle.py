"""Ground truth on the full product basis: exact propagation and state geometry."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from .models import SopHamiltonian, assemble_dense
from .numerics import EigenSystem, hermitian_eig

NORM_TOL = 1e-10


class EnergyMoments(NamedTuple):
    mean: float
    second_moment: float
    variance: float


class AnandanCheck(NamedTuple):
    lhs: float
    rhs: float


def _check_normalized(psi: NDArray, name: str = "state") -> None:
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"{name} is not normalized (norm = {norm:.15g})")


def spectrum(ham: SopHamiltonian) -> EigenSystem:
    """Eigendecomposition of the dense Hamiltonian, computed once per Hamiltonian."""
    cached = ham._cache.get("eig")
    if cached is None:
        cached = hermitian_eig(assemble_dense(ham))
        ham._cache["eig"] = cached
    return cached


class ExactPropagator:
    """``exp(-i H t / hbar) psi0`` for many ``t``, reusing one projection onto the eigenbasis."""

    def __init__(self, psi0: NDArray, ham: SopHamiltonian, hbar: float = 1.0):
        self.eig = spectrum(ham)
        self.hbar = hbar
        self._coeffs = self.eig.vectors.conj().T @ np.asarray(psi0, dtype=np.complex128)

    def __call__(self, t: float) -> NDArray[np.complex128]:
        phases = np.exp(-1j * self.eig.values * (t / self.hbar))
        return self.eig.vectors @ (phases * self._coeffs)


def propagate_exact(psi: NDArray, ham: SopHamiltonian, t: float, hbar: float = 1.0) -> NDArray[np.complex128]:
    _check_normalized(psi)
    return ExactPropagator(psi, ham, hbar)(t)


def fs_distance(a: NDArray, b: NDArray) -> float:
    """Fubini-Study distance ``sqrt(2 (1 - |<a|b>|))`` between normalized states."""
    _check_normalized(a, "first state")
    _check_normalized(b, "second state")
    return float(np.sqrt(max(2.0 * (1.0 - abs(np.vdot(a, b))), 0.0)))


def fs_distance_sq(a: NDArray, b: NDArray) -> float:
    _check_normalized(a, "first state")
    _check_normalized(b, "second state")
    return max(2.0 * (1.0 - abs(np.vdot(a, b))), 0.0)


def energy_moments(psi: NDArray, ham: SopHamiltonian) -> EnergyMoments:
    _check_normalized(psi)
    hpsi = ham.apply(psi)
    mean = float(np.vdot(psi, hpsi).real)
    second = float(np.vdot(hpsi, hpsi).real)
    return EnergyMoments(mean, second, second - mean**2)


def anandan_rate_check(psi: NDArray, ham: SopHamiltonian, dt: float, hbar: float = 1.0) -> AnandanCheck:
    """Squared FS distance travelled by the exact state in `dt` versus ``dE^2 dt^2 / hbar^2``."""
    _check_normalized(psi)
    evolved = propagate_exact(psi, ham, dt, hbar)
    moments = energy_moments(psi, ham)
    return AnandanCheck(fs_distance_sq(psi, evolved), moments.variance * dt**2 / hbar**2)
