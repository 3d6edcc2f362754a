"""Shared fixtures and independent dense oracles used across the test modules."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from litespawn.instances import random_instance
from litespawn.mctdh import MctdhState, reconstruct
from litespawn.numerics import multi_mode_contract


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def jacobian_columns(state: MctdhState) -> np.ndarray:
    """Derivatives of the dense state with respect to every entry of A and of each spf matrix."""
    cols = []
    for J in itertools.product(*[range(m) for m in state.m]):
        E = np.zeros(state.m, dtype=complex)
        E[J] = 1.0
        cols.append(reconstruct(MctdhState(E, state.spfs)))
    for k in range(state.ndof):
        n, m = state.spfs[k].shape
        for i in range(n):
            for a in range(m):
                X = np.zeros((n, m), dtype=complex)
                X[i, a] = 1.0
                mats = list(state.spfs)
                mats[k] = X
                cols.append(multi_mode_contract(state.A, mats).reshape(-1))
    return np.stack(cols, axis=1)


def dense_tangent_projector(state: MctdhState, rtol: float = 1e-10) -> np.ndarray:
    """Orthogonal projector onto the complex span of the manifold Jacobian (SVD based)."""
    u, s, _ = np.linalg.svd(jacobian_columns(state), full_matrices=False)
    r = int(np.sum(s > rtol * s[0]))
    return u[:, :r] @ u[:, :r].conj().T


def small_instances(seed: int, count: int, ndof=None, sizes=range(3, 7)):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, ndof=ndof, sizes=sizes) for _ in range(count)]
