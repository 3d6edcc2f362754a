"""The MCTDH variational manifold.

A state is ``Psi = sum_J A_J prod_k phi^(k)_{j_k}``: a coefficient tensor
``A`` of extents ``(m_1, ..., m_f)`` and one ``n_k x m_k`` matrix of
orthonormal single-particle functions (spfs) per DOF. Derivatives use the
gauge in which spf time derivatives are orthogonal to the occupied spfs.

Hole multi-indices ``J`` for DOF ``k`` run over the occupied spfs of all
other DOFs in row-major order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from math import prod
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .models import SopHamiltonian
from .numerics import mode_contract, multi_mode_contract, partial_trace_contract, regularized_inverse

DEFAULT_EPS_REG = 1e-10
ORTHO_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MctdhState:
    A: NDArray[np.complex128]
    spfs: tuple[NDArray[np.complex128], ...]

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.complex128)
        spfs = tuple(np.asarray(s, dtype=np.complex128) for s in self.spfs)
        if A.ndim != len(spfs):
            raise ValueError(f"coefficient tensor has {A.ndim} modes but {len(spfs)} spf matrices given")
        for k, s in enumerate(spfs):
            if s.ndim != 2 or s.shape[1] != A.shape[k]:
                raise ValueError(f"spf matrix {k} has shape {s.shape}, expected (n, {A.shape[k]})")
            if not 1 <= s.shape[1] <= s.shape[0]:
                raise ValueError(f"DOF {k}: need 1 <= m <= n, got m={s.shape[1]}, n={s.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "spfs", spfs)

    @property
    def ndof(self) -> int:
        return self.A.ndim

    @property
    def m(self) -> tuple[int, ...]:
        return self.A.shape

    @property
    def n(self) -> tuple[int, ...]:
        return tuple(s.shape[0] for s in self.spfs)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.A))

    def spf_defect(self) -> float:
        """Largest deviation of any spf Gram matrix from the identity."""
        return max(float(np.max(np.abs(s.conj().T @ s - np.eye(s.shape[1])))) for s in self.spfs)

    def replace(self, A=None, spfs=None) -> "MctdhState":
        return MctdhState(self.A if A is None else A, self.spfs if spfs is None else spfs)

    def to_json(self) -> str:
        return json.dumps(state_to_dict(self))

    @classmethod
    def from_json(cls, text: str) -> "MctdhState":
        return state_from_dict(json.loads(text))


def _complex_to_pairs(arr: NDArray) -> list:
    flat = np.asarray(arr).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


def _pairs_to_complex(pairs, shape) -> NDArray[np.complex128]:
    data = np.array(pairs, dtype=float).reshape(-1, 2)
    return (data[:, 0] + 1j * data[:, 1]).reshape(shape)


def state_to_dict(state: MctdhState) -> dict:
    """Snapshot: extents, spf matrices (row-major re/im pairs) and the coefficient tensor."""
    return {
        "extents": list(state.m),
        "primitive_dims": list(state.n),
        "spfs": [_complex_to_pairs(s) for s in state.spfs],
        "A": _complex_to_pairs(state.A),
    }


def state_from_dict(data: dict) -> MctdhState:
    m = tuple(data["extents"])
    n = tuple(data["primitive_dims"])
    spfs = tuple(_pairs_to_complex(s, (nk, mk)) for s, nk, mk in zip(data["spfs"], n, m))
    return MctdhState(_pairs_to_complex(data["A"], m), spfs)


def hartree_product(columns: Sequence[NDArray]) -> MctdhState:
    """Single-configuration state from one (normalized) column per DOF."""
    spfs = []
    for c in columns:
        c = np.asarray(c, dtype=np.complex128)
        spfs.append((c / np.linalg.norm(c))[:, np.newaxis])
    return MctdhState(np.ones((1,) * len(spfs), dtype=np.complex128), tuple(spfs))


def reconstruct(state: MctdhState) -> NDArray[np.complex128]:
    """Dense amplitude vector over the primitive product basis."""
    return multi_mode_contract(state.A, state.spfs).reshape(-1)


def density_matrix(state: MctdhState, k: int) -> NDArray[np.complex128]:
    """``rho[a, b] = sum_J conj(A[J; a]) A[J; b]`` over the hole index of DOF `k`."""
    if not 0 <= k < state.ndof:
        raise ValueError(f"invalid DOF index {k}")
    return partial_trace_contract(state.A, state.A, k)


def natural_populations(state: MctdhState, k: int) -> NDArray[np.float64]:
    """Eigenvalues of the DOF-`k` density matrix, descending."""
    return np.sort(np.linalg.eigvalsh(density_matrix(state, k)))[::-1]


def min_natural_population(state: MctdhState) -> float:
    return min(float(natural_populations(state, k)[-1]) for k in range(state.ndof))


def hole_functions(state: MctdhState, k: int, v: NDArray) -> NDArray[np.complex128]:
    """Partial overlaps ``<Phi_J^(k)|v>``: one row (length ``n_k``) per hole index ``J``."""
    if not 0 <= k < state.ndof:
        raise ValueError(f"invalid DOF index {k}")
    t = np.asarray(v, dtype=np.complex128).reshape(state.n)
    adj = [s.conj().T for s in state.spfs]
    t = multi_mode_contract(t, adj, skip=k)
    return np.moveaxis(t, k, -1).reshape(-1, state.n[k])


def _single_hole_overlaps(state: MctdhState, k: int, v: NDArray) -> NDArray[np.complex128]:
    """``g[b] = <Psi_b^(k)|v>`` (partial over all DOFs but `k`), shape ``(m_k, n_k)``."""
    holes = hole_functions(state, k, v)
    A = np.moveaxis(state.A, k, -1).reshape(-1, state.m[k])
    return A.conj().T @ holes


@dataclass(frozen=True, eq=False)
class TangentVector:
    state: MctdhState
    A_dot: NDArray[np.complex128]
    spf_dots: tuple[NDArray[np.complex128], ...]
    min_population: float = field(default=float("nan"))

    @cached_property
    def dense(self) -> NDArray[np.complex128]:
        """Product-rule realization of ``d/dt reconstruct(state)``."""
        st = self.state
        out = multi_mode_contract(self.A_dot, st.spfs)
        for k, dot in enumerate(self.spf_dots):
            if not np.any(dot):
                continue
            mats = list(st.spfs)
            mats[k] = dot
            out = out + multi_mode_contract(st.A, mats)
        return out.reshape(-1)


def _term_matrices(state: MctdhState, ham: SopHamiltonian):
    """Per term: ``h phi`` (n x m) and ``phi^H h phi`` (m x m); ``None`` marks an identity factor."""
    hphi, htil = [], []
    for term in ham.terms:
        hp = [None] * state.ndof
        ht = [None] * state.ndof
        for k, mat in term.factors.items():
            hp[k] = mat @ state.spfs[k]
            ht[k] = state.spfs[k].conj().T @ hp[k]
        hphi.append(hp)
        htil.append(ht)
    return hphi, htil


def eom_rhs(state: MctdhState, ham: SopHamiltonian, eps_reg: float = DEFAULT_EPS_REG,
            hbar: float = 1.0) -> TangentVector:
    """Variational time derivative from mean fields of the SOP Hamiltonian.

    ``i hbar dA/dt = <Phi_J|H|Psi>`` and
    ``i hbar dphi^(k)/dt = (1 - P_k) <H>^(k) rho_k^{-1}``, where the density
    inverse has its eigenvalues floored at `eps_reg`.
    """
    if eps_reg <= 0:
        raise ValueError("eps_reg must be positive")
    if ham.dims != state.n:
        raise ValueError(f"Hamiltonian dims {ham.dims} do not match state {state.n}")
    A = state.A
    hphi, htil = _term_matrices(state, ham)
    scale = 1.0 / (1j * hbar)

    A_dot = np.zeros_like(A)
    for term, ht in zip(ham.terms, htil):
        A_dot += term.coeff * multi_mode_contract(A, ht)
    A_dot *= scale

    spf_dots = []
    min_pop = np.inf
    for k, phi in enumerate(state.spfs):
        n_k, m_k = phi.shape
        rho = density_matrix(state, k)
        inv, pops = regularized_inverse(rho, eps_reg)
        min_pop = min(min_pop, float(pops[0]))
        if m_k == n_k:
            spf_dots.append(np.zeros_like(phi))
            continue
        mean_field = np.zeros((n_k, m_k), dtype=np.complex128)
        for term, hp, ht in zip(ham.terms, hphi, htil):
            B = multi_mode_contract(A, ht, skip=k)
            mf = partial_trace_contract(A, B, k)  # mf[b, a] = <Psi_b| h_rest |Psi_a>
            left = phi if hp[k] is None else hp[k]
            mean_field += term.coeff * (left @ mf.T)
        proj = mean_field - phi @ (phi.conj().T @ mean_field)
        spf_dots.append(scale * (proj @ inv.T))
    return TangentVector(state, A_dot, tuple(spf_dots), min_pop)


def _projector_pieces(state: MctdhState, v: NDArray, eps_reg: float):
    t = np.asarray(v, dtype=np.complex128).reshape(state.n)
    adj = [s.conj().T for s in state.spfs]
    coeffs = multi_mode_contract(t, adj)
    pieces = [multi_mode_contract(coeffs, state.spfs)]
    for k, phi in enumerate(state.spfs):
        if phi.shape[1] == phi.shape[0]:
            continue
        inv, _ = regularized_inverse(density_matrix(state, k), eps_reg)
        g = _single_hole_overlaps(state, k, v)  # (m_k, n_k)
        x = g.T @ inv.T
        x -= phi @ (phi.conj().T @ x)
        mats = list(state.spfs)
        mats[k] = x
        pieces.append(multi_mode_contract(state.A, mats))
    return pieces


def apply_tangent_projector(state: MctdhState, v: NDArray, eps_reg: float = DEFAULT_EPS_REG) -> NDArray[np.complex128]:
    """Orthogonal projection of a dense vector onto the tangent space at `state`.

    ``P = P_conf + sum_k (1 - P_k) (x) P_hole^(k)``, the pieces being mutually
    orthogonal; ``P_hole^(k)`` projects onto the single-hole functions.
    """
    v = np.asarray(v, dtype=np.complex128)
    if v.shape != (prod(state.n),):
        raise ValueError(f"vector of length {v.size} does not match dense dimension {prod(state.n)}")
    return sum(_projector_pieces(state, v, eps_reg)).reshape(-1)


def apply_complement_projector(state: MctdhState, v: NDArray, eps_reg: float = DEFAULT_EPS_REG) -> NDArray[np.complex128]:
    """``Q v = v - P v``."""
    return np.asarray(v, dtype=np.complex128) - apply_tangent_projector(state, v, eps_reg)


def rotate_spfs(state: MctdhState, k: int, unitary: NDArray) -> MctdhState:
    """Gauge rotation ``phi -> phi U`` with ``A -> A x_k U^H`` (dense state unchanged)."""
    spfs = list(state.spfs)
    spfs[k] = spfs[k] @ unitary
    return MctdhState(mode_contract(state.A, unitary.conj().T, k), tuple(spfs))


def reorthonormalize(state: MctdhState) -> MctdhState:
    """QR every spf matrix and absorb the triangular factor into ``A``."""
    A = state.A
    spfs = []
    for k, phi in enumerate(state.spfs):
        q, r = np.linalg.qr(phi)
        spfs.append(q)
        A = mode_contract(A, r, k)
    return MctdhState(A, tuple(spfs))
