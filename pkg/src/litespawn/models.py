"""Sum-of-products Hamiltonians over harmonic-oscillator primitive bases.

Each degree of freedom (DOF) carries an ``n``-level truncated oscillator
basis. A Hamiltonian is a list of terms ``coeff * prod_k h_k`` where the
factors ``h_k`` act on single DOFs and identity factors are simply left
out. Dense vectors use C (row-major) ordering of the primitive indices,
DOF 0 slowest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from .numerics import hermiticity_defect, mode_contract

DEFAULT_DENSE_CAP = 4096


class DimensionCapError(ValueError):
    """Raised when a dense object would exceed the dense-dimension cap."""


@dataclass(frozen=True)
class PrimitiveBasisSpec:
    dims: tuple[int, ...]
    omegas: tuple[float, ...]
    dense_cap: int = DEFAULT_DENSE_CAP

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))
        if len(self.dims) != len(self.omegas):
            raise ValueError("dims and omegas must have the same length")
        if not self.dims:
            raise ValueError("at least one degree of freedom is required")
        if any(n < 2 for n in self.dims):
            raise ValueError(f"every primitive dimension must be >= 2, got {self.dims}")
        if any(w <= 0 for w in self.omegas):
            raise ValueError("frequencies must be positive")
        if self.dense_dim > self.dense_cap:
            raise DimensionCapError(f"dense dimension {self.dense_dim} exceeds cap {self.dense_cap}")

    @property
    def ndof(self) -> int:
        return len(self.dims)

    @property
    def dense_dim(self) -> int:
        return prod(self.dims)


@dataclass(frozen=True)
class Term:
    """``coeff * prod_k factors[k]``; DOFs missing from `factors` carry the identity."""

    coeff: float
    factors: Mapping[int, NDArray]


@dataclass(frozen=True, eq=False)
class SopHamiltonian:
    terms: tuple[Term, ...]
    dims: tuple[int, ...]
    dense_cap: int = DEFAULT_DENSE_CAP
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        for term in self.terms:
            for k, mat in term.factors.items():
                if not 0 <= k < len(self.dims):
                    raise ValueError(f"factor on DOF {k} but only {len(self.dims)} DOFs")
                if mat.shape != (self.dims[k], self.dims[k]):
                    raise ValueError(f"factor on DOF {k} has shape {mat.shape}, expected {(self.dims[k],) * 2}")

    @property
    def ndof(self) -> int:
        return len(self.dims)

    @property
    def dense_dim(self) -> int:
        return prod(self.dims)

    def __add__(self, other: "SopHamiltonian") -> "SopHamiltonian":
        if self.dims != other.dims:
            raise ValueError("cannot add Hamiltonians over different bases")
        return SopHamiltonian(self.terms + other.terms, self.dims, self.dense_cap)

    def scaled(self, factor: float) -> "SopHamiltonian":
        terms = tuple(Term(factor * t.coeff, t.factors) for t in self.terms)
        return SopHamiltonian(terms, self.dims, self.dense_cap)

    def shifted(self, constant: float) -> "SopHamiltonian":
        """``H + constant * I``."""
        return SopHamiltonian(self.terms + (Term(float(constant), {}),), self.dims, self.dense_cap)

    def apply(self, vec: NDArray) -> NDArray[np.complex128]:
        """``H @ vec`` term by term through mode products, without forming the dense matrix."""
        tensor = np.asarray(vec, dtype=np.complex128).reshape(self.dims)
        out = np.zeros(self.dims, dtype=np.complex128)
        for term in self.terms:
            piece = tensor
            for k, mat in term.factors.items():
                piece = mode_contract(piece, mat, k)
            out += term.coeff * piece
        return out.reshape(-1)


def ho_ladder_operators(n: int) -> dict[str, NDArray[np.complex128]]:
    """Truncated oscillator matrices ``q = (a + a^H)/sqrt2``, ``p = i(a^H - a)/sqrt2`` and ``n``."""
    if n < 2:
        raise ValueError(f"oscillator basis needs n >= 2, got {n}")
    a = np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(np.complex128)
    ad = a.conj().T
    return {
        "a": a,
        "q": (a + ad) / np.sqrt(2.0),
        "p": 1j * (ad - a) / np.sqrt(2.0),
        "number": np.diag(np.arange(n, dtype=float)).astype(np.complex128),
    }


def _oscillator_terms(basis: PrimitiveBasisSpec) -> list[Term]:
    terms = []
    for k, (n, w) in enumerate(zip(basis.dims, basis.omegas)):
        num = ho_ladder_operators(n)["number"]
        terms.append(Term(w, {k: num + 0.5 * np.eye(n)}))
    return terms


def coupled_oscillators(dims: Sequence[int], omegas: Sequence[float], coupling: float,
                        dense_cap: int = DEFAULT_DENSE_CAP) -> SopHamiltonian:
    """``sum_k w_k (n_k + 1/2) + coupling * sum_{k<l} q_k q_l``."""
    basis = PrimitiveBasisSpec(tuple(dims), tuple(omegas), dense_cap)
    if basis.ndof < 2:
        raise ValueError("coupled_oscillators needs at least two DOFs")
    terms = _oscillator_terms(basis)
    if coupling != 0.0:
        qs = [ho_ladder_operators(n)["q"] for n in basis.dims]
        for k in range(basis.ndof):
            for l in range(k + 1, basis.ndof):
                terms.append(Term(float(coupling), {k: qs[k], l: qs[l]}))
    return SopHamiltonian(tuple(terms), basis.dims, dense_cap)


def henon_heiles(dims: Sequence[int], omegas: Sequence[float], coupling: float,
                 dense_cap: int = DEFAULT_DENSE_CAP) -> SopHamiltonian:
    """Oscillators plus ``coupling * sum_k (q_k^2 q_{k+1} - q_{k+1}^3 / 3)`` along the chain."""
    basis = PrimitiveBasisSpec(tuple(dims), tuple(omegas), dense_cap)
    if basis.ndof < 2:
        raise ValueError("henon_heiles needs at least two DOFs")
    terms = _oscillator_terms(basis)
    if coupling != 0.0:
        qs = [ho_ladder_operators(n)["q"] for n in basis.dims]
        for k in range(basis.ndof - 1):
            terms.append(Term(float(coupling), {k: qs[k] @ qs[k], k + 1: qs[k + 1]}))
            terms.append(Term(-float(coupling) / 3.0, {k + 1: qs[k + 1] @ qs[k + 1] @ qs[k + 1]}))
    return SopHamiltonian(tuple(terms), basis.dims, dense_cap)


MODEL_PRESETS = {
    "coupled_ho": coupled_oscillators,
    "henon_heiles": henon_heiles,
}


def build_model(name: str, dims: Sequence[int], omegas: Sequence[float], coupling: float,
                dense_cap: int = DEFAULT_DENSE_CAP) -> SopHamiltonian:
    try:
        factory = MODEL_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; known: {sorted(MODEL_PRESETS)}") from None
    return factory(dims, omegas, coupling, dense_cap=dense_cap)


def assemble_dense(ham: SopHamiltonian) -> NDArray[np.complex128]:
    """Dense matrix by Kronecker products of the (identity-padded) factors. Cached per Hamiltonian."""
    cached = ham._cache.get("dense")
    if cached is not None:
        return cached
    if ham.dense_dim > ham.dense_cap:
        raise DimensionCapError(f"dense dimension {ham.dense_dim} exceeds cap {ham.dense_cap}")
    dense = np.zeros((ham.dense_dim, ham.dense_dim), dtype=np.complex128)
    for term in ham.terms:
        mat = np.ones((1, 1), dtype=np.complex128)
        for k, n in enumerate(ham.dims):
            mat = np.kron(mat, term.factors.get(k, np.eye(n)))
        dense += term.coeff * mat
    if hermiticity_defect(dense) > 1e-12:
        raise ValueError("assembled Hamiltonian is not Hermitian")
    dense.setflags(write=False)
    ham._cache["dense"] = dense
    return dense


def parity_operator(dims: Sequence[int]) -> NDArray[np.complex128]:
    """Total oscillator parity ``prod_k (-1)^{n_k}`` as a dense diagonal matrix."""
    diag = np.ones(1)
    for n in dims:
        diag = np.kron(diag, (-1.0) ** np.arange(n))
    return np.diag(diag).astype(np.complex128)
