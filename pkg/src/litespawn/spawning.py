"""Optimal spawning of unoccupied single-particle functions.

For one DOF ``k`` the search space is spanned by products of an unoccupied
spf ``eta`` with the hole configurations ``Phi_J^(k)``. Two Hermitian
single-particle operators rank candidate spfs:

* ``Delta^(k) = sum_J <Phi_J|Q H|Psi><Psi|H Q|Phi_J>`` on the full
  unoccupied space, whose top eigenvectors give the largest reduction of
  the squared LITE;
* ``Gamma^(k) = sum_J <Phi_J|H|Psi><Psi|H|Phi_J>`` on the subspace that is
  also orthogonal to the current spf derivatives, where it coincides with
  ``Delta^(k)`` and so gives eigenvalues bounded above by those of
  ``Delta^(k)``.

A third, ``residual`` operator traces ``Q H Psi`` over the complete
primitive space of the other DOFs. It is used to seed a spf when
single-DOF spawning has no first-order gain (for example from a Hartree
product, where ``Q H Psi`` contains only multiply-excited configurations).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray

from .mctdh import (
    DEFAULT_EPS_REG,
    ORTHO_TOL,
    MctdhState,
    TangentVector,
    apply_complement_projector,
    eom_rhs,
    density_matrix,
    hole_functions,
    reconstruct,
    rotate_spfs,
)
from .models import SopHamiltonian
from .numerics import EmptyComplementError, fix_phases, hermitian_eig, multi_mode_contract, orthonormal_complement

KINDS = ("delta", "gamma", "residual")


class NoSpawnSpaceError(ValueError):
    """Raised when the admissible unoccupied subspace for spawning is empty."""


@dataclass(frozen=True, eq=False)
class SpawnOperator:
    k: int
    kind: str
    matrix: NDArray[np.complex128]
    subspace_basis: NDArray[np.complex128]
    hbar: float = 1.0

    @property
    def dim(self) -> int:
        return self.subspace_basis.shape[1]

    def eigenvalues(self) -> NDArray[np.float64]:
        """Eigenvalues, descending."""
        return hermitian_eig(self.matrix).values[::-1]


@dataclass(frozen=True)
class SpawnCandidate:
    k: int
    eigenvalue: float
    spf: NDArray[np.complex128] = field(repr=False)


@dataclass(frozen=True)
class SpawnEvent:
    time: float
    k: int
    kind: str
    eigenvalues_taken: tuple[float, ...]
    error_reduction_predicted: float
    error_reduction_quadform: float
    error_reduction_realized: float
    df_condition_residual: float
    new_m: int

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "dof": self.k,
            "kind": self.kind,
            "eigenvalues_taken": list(self.eigenvalues_taken),
            "error_reduction_predicted": self.error_reduction_predicted,
            "error_reduction_quadform": self.error_reduction_quadform,
            "error_reduction_realized": self.error_reduction_realized,
            "df_condition_residual": self.df_condition_residual,
            "new_m": self.new_m,
        }


def _check_dof(state: MctdhState, k: int) -> None:
    if not 0 <= k < state.ndof:
        raise ValueError(f"invalid DOF index {k}")


def _unoccupied_basis(state: MctdhState, k: int, extra: NDArray | None = None) -> NDArray[np.complex128]:
    block = state.spfs[k] if extra is None else np.column_stack([state.spfs[k], extra])
    try:
        return orthonormal_complement(block, state.n[k])
    except EmptyComplementError:
        raise NoSpawnSpaceError(f"no unoccupied space left for DOF {k}") from None


def _partial_density(rows: NDArray) -> NDArray[np.complex128]:
    """``sum_J v_J v_J^H`` for the rows ``v_J`` of `rows`."""
    return rows.T @ rows.conj()


def _restrict(full: NDArray, basis: NDArray) -> NDArray[np.complex128]:
    m = basis.conj().T @ full @ basis
    return 0.5 * (m + m.conj().T)


def delta_matrix_full(state: MctdhState, ham: SopHamiltonian, k: int,
                      eps_reg: float = DEFAULT_EPS_REG) -> NDArray[np.complex128]:
    """``Delta^(k)`` in the primitive basis of DOF `k` (not yet restricted)."""
    hpsi = ham.apply(reconstruct(state))
    q_hpsi = apply_complement_projector(state, hpsi, eps_reg)
    return _partial_density(hole_functions(state, k, q_hpsi))


def gamma_matrix_full(state: MctdhState, ham: SopHamiltonian, k: int) -> NDArray[np.complex128]:
    """``Gamma^(k)`` in the primitive basis of DOF `k` (no complement projector)."""
    hpsi = ham.apply(reconstruct(state))
    return _partial_density(hole_functions(state, k, hpsi))


def build_delta_operator(state: MctdhState, ham: SopHamiltonian, k: int, eps_reg: float = DEFAULT_EPS_REG,
                         hbar: float = 1.0) -> SpawnOperator:
    _check_dof(state, k)
    basis = _unoccupied_basis(state, k)
    full = delta_matrix_full(state, ham, k, eps_reg)
    return SpawnOperator(k, "delta", _restrict(full, basis), basis, hbar)


def gamma_subspace(state: MctdhState, k: int, tangent: TangentVector) -> NDArray[np.complex128]:
    """Orthonormal basis orthogonal to both the occupied spfs of DOF `k` and their time derivatives."""
    return _unoccupied_basis(state, k, tangent.spf_dots[k])


def build_gamma_operator(state: MctdhState, ham: SopHamiltonian, k: int, eps_reg: float = DEFAULT_EPS_REG,
                         hbar: float = 1.0, tangent: TangentVector | None = None) -> SpawnOperator:
    _check_dof(state, k)
    tv = eom_rhs(state, ham, eps_reg, hbar) if tangent is None else tangent
    basis = gamma_subspace(state, k, tv)
    full = gamma_matrix_full(state, ham, k)
    return SpawnOperator(k, "gamma", _restrict(full, basis), basis, hbar)


def build_residual_operator(state: MctdhState, ham: SopHamiltonian, k: int, eps_reg: float = DEFAULT_EPS_REG,
                            hbar: float = 1.0) -> SpawnOperator:
    """Reduced density of ``Q H Psi`` for DOF `k`, traced over the full primitive space of the others."""
    _check_dof(state, k)
    basis = _unoccupied_basis(state, k)
    hpsi = ham.apply(reconstruct(state))
    q_hpsi = apply_complement_projector(state, hpsi, eps_reg).reshape(state.n)
    rows = np.moveaxis(q_hpsi, k, -1).reshape(-1, state.n[k])
    return SpawnOperator(k, "residual", _restrict(_partial_density(rows), basis), basis, hbar)


def build_operator(kind: str, state: MctdhState, ham: SopHamiltonian, k: int, eps_reg: float = DEFAULT_EPS_REG,
                   hbar: float = 1.0, tangent: TangentVector | None = None) -> SpawnOperator:
    if kind == "delta":
        return build_delta_operator(state, ham, k, eps_reg, hbar)
    if kind == "gamma":
        return build_gamma_operator(state, ham, k, eps_reg, hbar, tangent)
    if kind == "residual":
        return build_residual_operator(state, ham, k, eps_reg, hbar)
    raise ValueError(f"unknown spawn operator kind {kind!r}")


def select_candidates(op: SpawnOperator, count: int) -> list[SpawnCandidate]:
    """Top-`count` eigenpairs of `op`, mapped back to the primitive basis.

    Ties in the eigenvalue are broken by ascending index in the subspace
    eigen-ordering, so equal inputs always select the same spfs.
    """
    if not 1 <= count <= op.dim:
        raise ValueError(f"cannot select {count} candidates from a {op.dim}-dimensional subspace")
    eig = hermitian_eig(op.matrix)
    order = np.lexsort((np.arange(op.dim), -eig.values))[:count]
    spfs = fix_phases(op.subspace_basis @ eig.vectors[:, order])
    return [SpawnCandidate(op.k, float(max(eig.values[i], 0.0)), spfs[:, j]) for j, i in enumerate(order)]


def _as_columns(spfs) -> NDArray[np.complex128]:
    if isinstance(spfs, np.ndarray):
        cols = spfs if spfs.ndim == 2 else spfs[:, np.newaxis]
    else:
        cols = np.column_stack([getattr(s, "spf", s) for s in spfs])
    return np.asarray(cols, dtype=np.complex128)


def _check_admissible(state: MctdhState, k: int, cols: NDArray) -> None:
    if cols.shape[0] != state.n[k]:
        raise ValueError(f"spawned spfs have length {cols.shape[0]}, DOF {k} has {state.n[k]} primitives")
    gram = cols.conj().T @ cols
    if np.max(np.abs(gram - np.eye(cols.shape[1]))) > ORTHO_TOL:
        raise ValueError("spawned spfs are not orthonormal")
    if np.max(np.abs(state.spfs[k].conj().T @ cols)) > ORTHO_TOL:
        raise ValueError("spawned spfs are not orthogonal to the occupied spfs")


def extend_manifold(state: MctdhState, k: int, spfs) -> MctdhState:
    """Append unoccupied spfs to DOF `k`, zero-padding the coefficient tensor."""
    _check_dof(state, k)
    cols = _as_columns(spfs)
    _check_admissible(state, k, cols)
    new_m = state.m[k] + cols.shape[1]
    if new_m > state.n[k]:
        raise ValueError(f"DOF {k} would have {new_m} spfs but only {state.n[k]} primitives")
    pad = [(0, 0)] * state.ndof
    pad[k] = (0, cols.shape[1])
    new_spfs = list(state.spfs)
    new_spfs[k] = np.column_stack([state.spfs[k], cols])
    return MctdhState(np.pad(state.A, pad), tuple(new_spfs))


class ErrorReduction(NamedTuple):
    via_derivative: float
    via_quadform: float
    df_condition_residual: float


def error_reduction(state: MctdhState, ham: SopHamiltonian, k: int, spfs, eps_reg: float = DEFAULT_EPS_REG,
                    hbar: float = 1.0) -> ErrorReduction:
    """Reduction of the squared LITE from spawning `spfs` into DOF `k`, by two routes.

    ``via_derivative`` is ``Im<dPsi_s|H|Psi> / hbar`` with ``dPsi_s`` the change of
    the variational derivative on the extended manifold, ``via_quadform`` is
    ``sum_a <eta_a|Delta^(k)|eta_a> / hbar^2``. The returned
    ``|<dPsi_s|dPsi>|`` measures how well the orthogonality that makes the two
    agree is satisfied.
    """
    cols = _as_columns(spfs)
    _check_admissible(state, k, cols)
    extended = extend_manifold(state, k, cols)
    tv0 = eom_rhs(state, ham, eps_reg, hbar)
    tvs = eom_rhs(extended, ham, eps_reg, hbar)
    delta_s = tvs.dense - tv0.dense
    hpsi = ham.apply(reconstruct(state))
    via_derivative = float(np.vdot(delta_s, hpsi).imag) / hbar
    full = delta_matrix_full(state, ham, k, eps_reg)
    via_quad = float(np.trace(cols.conj().T @ full @ cols).real) / hbar**2
    df = float(abs(np.vdot(delta_s, tv0.dense)))
    return ErrorReduction(via_derivative, via_quad, df)


def apply_omega(state: MctdhState, k: int, spfs, v: NDArray) -> NDArray[np.complex128]:
    """``Omega_k v``: projection onto ``span{eta_a (x) Phi_J^(k)}``."""
    cols = _as_columns(spfs)
    holes = hole_functions(state, k, v)  # (J, n_k)
    coeffs = holes @ cols.conj()  # (J, alpha)
    other = [state.m[j] for j in range(state.ndof) if j != k]
    tensor = coeffs.reshape(*other, cols.shape[1])
    tensor = np.moveaxis(tensor, -1, k)
    mats = list(state.spfs)
    mats[k] = cols
    return multi_mode_contract(tensor, mats).reshape(-1)


def _natural_rotation(state: MctdhState, k: int) -> tuple[MctdhState, NDArray[np.float64]]:
    """Rotate DOF `k` to natural orbitals ordered by descending population."""
    rho = density_matrix(state, k)
    values, vectors = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    order = np.argsort(values, kind="stable")[::-1]
    vectors = vectors[:, order]
    return rotate_spfs(state, k, vectors.conj()), values[order]


def prune_manifold(state: MctdhState, k: int, tau_remove: float) -> MctdhState:
    """Drop natural orbitals of DOF `k` with population below `tau_remove`."""
    return prune_with_report(state, k, tau_remove)[0]


def prune_with_report(state: MctdhState, k: int, tau_remove: float) -> tuple[MctdhState, float]:
    """Like :func:`prune_manifold`, also returning the total dropped population."""
    _check_dof(state, k)
    if state.m[k] < 2:
        raise ValueError("pruning needs at least two spfs on the DOF")
    rotated, pops = _natural_rotation(state, k)
    keep = np.maximum(pops, 0.0) >= tau_remove
    if not np.any(keep):
        raise ValueError(f"all natural populations of DOF {k} are below {tau_remove}; refusing to prune")
    if np.all(keep):
        return rotated, 0.0
    dropped = float(np.sum(np.maximum(pops[~keep], 0.0)))
    idx = np.flatnonzero(keep)
    spfs = list(rotated.spfs)
    spfs[k] = spfs[k][:, idx]
    A = np.take(rotated.A, idx, axis=k)
    return MctdhState(A, tuple(spfs)), dropped


def spawn_eigenvalues(state: MctdhState, ham: SopHamiltonian, k: int, kind: str,
                      eps_reg: float = DEFAULT_EPS_REG, hbar: float = 1.0,
                      tangent: TangentVector | None = None) -> NDArray[np.float64] | None:
    """Descending eigenvalues of the chosen operator, or ``None`` if its subspace is empty."""
    try:
        return build_operator(kind, state, ham, k, eps_reg, hbar, tangent).eigenvalues()
    except NoSpawnSpaceError:
        return None
