import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from litespawn.instances import random_hamiltonian
from litespawn.models import (
    DimensionCapError,
    PrimitiveBasisSpec,
    SopHamiltonian,
    Term,
    assemble_dense,
    build_model,
    coupled_oscillators,
    henon_heiles,
    ho_ladder_operators,
    parity_operator,
)


def test_ladder_matrix_elements():
    ops = ho_ladder_operators(6)
    assert ops["q"][1, 0] == pytest.approx(1 / np.sqrt(2))
    comm = ops["q"] @ ops["p"] - ops["p"] @ ops["q"]
    assert_allclose(comm[:5, :5], 1j * np.eye(5), atol=1e-14)
    for k in range(6):
        e = np.eye(6)[:, k]
        assert np.vdot(e, ops["number"] @ e).real == pytest.approx(k)


def test_ladder_rejects_tiny_basis():
    with pytest.raises(ValueError):
        ho_ladder_operators(1)


def test_basis_spec_validation():
    with pytest.raises(ValueError):
        PrimitiveBasisSpec((1, 4), (1.0, 1.0))
    with pytest.raises(ValueError):
        PrimitiveBasisSpec((4, 4), (1.0, -1.0))
    with pytest.raises(DimensionCapError):
        PrimitiveBasisSpec((100, 100), (1.0, 1.0))


def test_separable_spectrum():
    dims, omegas = (3, 4), (1.0, 1.7)
    h = coupled_oscillators(dims, omegas, 0.0)
    expected = sorted(sum(w * (k + 0.5) for w, k in zip(omegas, ks))
                      for ks in itertools.product(*(range(n) for n in dims)))
    assert_allclose(np.linalg.eigvalsh(assemble_dense(h)), expected, atol=1e-12)


def test_coupled_ground_state_matches_normal_modes():
    h = coupled_oscillators((8, 8), (1.0, 1.0), 0.1)
    e0 = np.linalg.eigvalsh(assemble_dense(h))[0]
    exact = 0.5 * (np.sqrt(1.1) + np.sqrt(0.9))
    assert abs(e0 - exact) <= 1e-6


def test_dense_is_hermitian_and_matches_apply(rng):
    h = random_hamiltonian(rng, (3, 4, 2))
    d = assemble_dense(h)
    assert np.max(np.abs(d - d.conj().T)) <= 1e-12 * np.max(np.abs(d))
    v = rng.normal(size=24) + 1j * rng.normal(size=24)
    assert_allclose(h.apply(v), d @ v, atol=1e-13)


def test_single_term_identity_and_single_dof(rng):
    ident = SopHamiltonian((Term(1.0, {}),), (3, 2))
    assert_allclose(assemble_dense(ident), np.eye(6))
    m = rng.normal(size=(4, 4))
    m = m + m.T
    single = SopHamiltonian((Term(2.5, {0: m}),), (4,))
    assert_allclose(assemble_dense(single), 2.5 * m)


def test_bilinear_term_matches_elementwise_kron():
    q3, q4 = ho_ladder_operators(3)["q"], ho_ladder_operators(4)["q"]
    h = SopHamiltonian((Term(1.0, {0: q3, 1: q4}),), (3, 4))
    naive = np.zeros((12, 12), dtype=complex)
    for i, j, k, l in itertools.product(range(3), range(4), range(3), range(4)):
        naive[i * 4 + j, k * 4 + l] = q3[i, k] * q4[j, l]
    assert_allclose(assemble_dense(h), naive, atol=1e-15)


def test_dense_is_linear_in_terms(rng):
    h1, h2 = random_hamiltonian(rng, (3, 3)), random_hamiltonian(rng, (3, 3))
    assert np.max(np.abs(assemble_dense(h1 + h2) - assemble_dense(h1) - assemble_dense(h2))) <= 1e-14


def test_scaled_and_shifted(rng):
    h = random_hamiltonian(rng, (3, 2))
    assert_allclose(assemble_dense(h.scaled(2.0)), 2 * assemble_dense(h), atol=1e-14)
    assert_allclose(assemble_dense(h.shifted(0.3)), assemble_dense(h) + 0.3 * np.eye(6), atol=1e-14)


def test_bilinear_preset_conserves_parity():
    h = coupled_oscillators((5, 4, 3), (1.0, 1.2, 0.8), 0.2)
    d, par = assemble_dense(h), parity_operator((5, 4, 3))
    assert np.max(np.abs(d @ par - par @ d)) <= 1e-12


def test_henon_heiles_truncation_converges():
    # the lowest level barely moves once the basis is generous
    e8 = np.linalg.eigvalsh(assemble_dense(henon_heiles((8, 8), (1.0, 1.0), 0.05)))[0]
    e12 = np.linalg.eigvalsh(assemble_dense(henon_heiles((12, 12), (1.0, 1.0), 0.05)))[0]
    assert abs(e8 - e12) < 1e-5
    assert e12 < 1.0


def test_build_model_dispatch():
    h = build_model("coupled_ho", (4, 4), (1.0, 1.0), 0.1)
    assert len(h.terms) == 3
    with pytest.raises(ValueError, match="unknown model"):
        build_model("nope", (4, 4), (1.0, 1.0), 0.1)
    with pytest.raises(ValueError):
        coupled_oscillators((4,), (1.0,), 0.1)


def test_factor_shape_checked():
    with pytest.raises(ValueError, match="shape"):
        SopHamiltonian((Term(1.0, {0: np.eye(3)}),), (4,))


def test_dense_cap_enforced():
    with pytest.raises(DimensionCapError):
        coupled_oscillators((8, 8), (1.0, 1.0), 0.1, dense_cap=32)
    h = coupled_oscillators((8, 8), (1.0, 1.0), 0.1)
    with pytest.raises(DimensionCapError):
        assemble_dense(SopHamiltonian(h.terms, (8, 8), dense_cap=32))
