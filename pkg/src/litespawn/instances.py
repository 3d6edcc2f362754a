"""Seeded random Hamiltonians and MCTDH states for identity checks."""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

from .mctdh import MctdhState, min_natural_population
from .models import SopHamiltonian, Term

DEFAULT_SIZES = tuple(range(4, 13))


@dataclass(frozen=True, eq=False)
class Instance:
    ham: SopHamiltonian
    state: MctdhState
    hbar: float = 1.0


def random_hermitian(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = 0.5 * (x + x.conj().T)
    return scale * h / np.linalg.norm(h, 2)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(x)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_isometry(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    return random_unitary(rng, n)[:, :m]


def random_hamiltonian(rng: np.random.Generator, dims: Sequence[int], n_coupling: int = 3,
                       coupling_scale: float = 0.5) -> SopHamiltonian:
    """One-body term per DOF plus a few random product couplings (unit spectral-norm factors)."""
    f = len(dims)
    terms = [Term(1.0, {k: random_hermitian(rng, n)}) for k, n in enumerate(dims)]
    if f > 1:
        for _ in range(n_coupling):
            size = int(rng.integers(2, f + 1))
            dofs = sorted(rng.choice(f, size=size, replace=False).tolist())
            coeff = float(coupling_scale * rng.uniform(0.3, 1.0) * rng.choice([-1.0, 1.0]))
            terms.append(Term(coeff, {k: random_hermitian(rng, dims[k]) for k in dofs}))
    return SopHamiltonian(tuple(terms), tuple(dims))


def random_spf_counts(rng: np.random.Generator, dims: Sequence[int]) -> tuple[int, ...]:
    """Under-resolved counts ``m_k < n_k`` that keep every density matrix full rank."""
    f = len(dims)
    if f == 1:
        return (1,)
    for _ in range(100):
        m = [int(rng.integers(1, n)) for n in dims]
        if all(m[k] <= prod(m[:k] + m[k + 1:]) for k in range(f)):
            return tuple(m)
    return (1,) * f


def random_state(rng: np.random.Generator, dims: Sequence[int], m: Sequence[int],
                 min_population: float = 1e-2) -> MctdhState:
    """Normalized state with random spfs; resampled until natural populations exceed `min_population`."""
    for _ in range(200):
        A = rng.normal(size=tuple(m)) + 1j * rng.normal(size=tuple(m))
        A /= np.linalg.norm(A)
        spfs = tuple(random_isometry(rng, n, mk) for n, mk in zip(dims, m))
        state = MctdhState(A, spfs)
        if min_natural_population(state) >= min_population:
            return state
    return state


def random_instance(rng: np.random.Generator, ndof: int | None = None, sizes: Sequence[int] = DEFAULT_SIZES,
                    max_dense: int = 4096, hbar: float = 1.0, m: Sequence[int] | None = None) -> Instance:
    """A random SOP Hamiltonian with an under-resolved random state on top of it."""
    f = int(rng.integers(1, 4)) if ndof is None else ndof
    for _ in range(100):
        dims = tuple(int(rng.choice(sizes)) for _ in range(f))
        if prod(dims) <= max_dense:
            break
    counts = random_spf_counts(rng, dims) if m is None else tuple(m)
    ham = random_hamiltonian(rng, dims)
    # rank-deficient densities are unavoidable when some m_k exceeds the product of the others
    min_pop = 1e-2 if all(mk <= prod(counts[:k] + counts[k + 1:]) for k, mk in enumerate(counts)) else 0.0
    return Instance(ham, random_state(rng, dims, counts, min_pop), hbar)
