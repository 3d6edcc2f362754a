import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from litespawn.instances import random_hermitian, random_unitary
from litespawn.numerics import (
    EmptyComplementError,
    fix_phases,
    hermitian_eig,
    mode_contract,
    multi_mode_contract,
    orthonormal_complement,
    orthonormalize,
    partial_trace_contract,
    regularized_inverse,
    relative_deviation,
)


def test_eig_identity_gives_canonical_basis():
    eig = hermitian_eig(np.eye(3))
    assert_allclose(eig.values, [1, 1, 1])
    assert_allclose(eig.vectors, np.eye(3), atol=1e-15)


def test_eig_pauli_x():
    eig = hermitian_eig(np.array([[0, 1], [1, 0]], dtype=complex))
    assert_allclose(eig.values, [-1, 1], atol=1e-15)


@pytest.mark.parametrize("n", [8, 64, 256])
def test_eig_reconstructs_random_hermitian(rng, n):
    m = random_hermitian(rng, n)
    eig = hermitian_eig(m)
    assert np.all(np.diff(eig.values) >= 0)
    v = eig.vectors
    assert_allclose(v.conj().T @ v, np.eye(n), atol=1e-12)
    assert np.linalg.norm(m @ v - v * eig.values) <= 1e-10 * np.linalg.norm(m, 2) * np.sqrt(n)
    recon = (v * eig.values) @ v.conj().T
    assert np.linalg.norm(recon - m) <= 1e-10 * np.linalg.norm(m)


def test_eig_phase_fix_and_determinism(rng):
    m = random_hermitian(rng, 6)
    a, b = hermitian_eig(m), hermitian_eig(m.copy())
    assert np.array_equal(a.vectors, b.vectors)
    idx = np.argmax(np.abs(a.vectors), axis=0)
    pivots = a.vectors[idx, np.arange(6)]
    assert_allclose(pivots.imag, 0, atol=1e-15)
    assert np.all(pivots.real >= 0)


def test_eig_rejects_bad_input(rng):
    with pytest.raises(ValueError, match="square"):
        hermitian_eig(np.zeros((2, 3)))
    m = random_hermitian(rng, 4)
    m[0, 1] += 1e-6
    with pytest.raises(ValueError, match="Hermitian"):
        hermitian_eig(m)


def test_fix_phases_keeps_columns_up_to_phase(rng):
    v = random_unitary(rng, 5)
    f = fix_phases(v)
    overlaps = np.abs(np.sum(v.conj() * f, axis=0))
    assert_allclose(overlaps, 1.0, atol=1e-14)


def test_orthonormalize_drops_dependent_columns(rng):
    a = rng.normal(size=(6, 2)) + 1j * rng.normal(size=(6, 2))
    block = np.column_stack([a, a[:, 0] + 2 * a[:, 1], np.zeros(6)])
    q, dropped = orthonormalize(block)
    assert q.shape == (6, 2)
    assert dropped == [2, 3]
    assert_allclose(q.conj().T @ q, np.eye(2), atol=1e-14)


def test_complement_of_canonical_columns():
    comp = orthonormal_complement(np.eye(4)[:, :2])
    assert comp.shape == (4, 2)
    proj = comp @ comp.conj().T
    assert_allclose(proj, np.diag([0, 0, 1, 1]), atol=1e-15)


def test_complement_empty_raises():
    with pytest.raises(EmptyComplementError, match="empty complement"):
        orthonormal_complement(np.eye(3))


def test_complement_accepts_overcomplete_block(rng):
    a = rng.normal(size=(4, 3)) + 1j * rng.normal(size=(4, 3))
    comp = orthonormal_complement(np.column_stack([a, a]))
    assert comp.shape == (4, 1)
    assert np.max(np.abs(a.conj().T @ comp)) < 1e-12


def test_complement_completes_random_block(rng):
    block = rng.normal(size=(10, 4)) + 1j * rng.normal(size=(10, 4))
    q, _ = orthonormalize(block)
    comp = orthonormal_complement(block)
    assert comp.shape == (10, 6)
    full = np.column_stack([q, comp])
    assert_allclose(full.conj().T @ full, np.eye(10), atol=1e-12)
    assert_allclose(q @ q.conj().T + comp @ comp.conj().T, np.eye(10), atol=1e-12)


def test_complement_is_deterministic(rng):
    block = rng.normal(size=(7, 3)) + 0j
    assert np.array_equal(orthonormal_complement(block), orthonormal_complement(block.copy()))


def test_mode_contract_identity_and_rank1(rng):
    t = rng.normal(size=(3, 4, 5)) + 1j * rng.normal(size=(3, 4, 5))
    assert_allclose(mode_contract(t, np.eye(4), 1), t)
    vecs = [rng.normal(size=n) for n in (3, 4, 5)]
    rank1 = np.einsum("i,j,k->ijk", *vecs)
    m = rng.normal(size=(2, 3))
    assert_allclose(mode_contract(rank1, m, 0), np.einsum("i,j,k->ijk", m @ vecs[0], vecs[1], vecs[2]))


def test_mode_contract_unitary_roundtrip(rng):
    t = rng.normal(size=(3, 4, 5)) + 1j * rng.normal(size=(3, 4, 5))
    u = random_unitary(rng, 4)
    back = mode_contract(mode_contract(t, u, 1), u.conj().T, 1)
    assert_allclose(back, t, atol=1e-12)


def test_mode_contract_matches_einsum(rng):
    t = rng.normal(size=(3, 4, 5))
    m = rng.normal(size=(6, 5))
    assert_allclose(mode_contract(t, m, 2), np.einsum("ak,ijk->ija", m, t))


def test_mode_contract_extent_mismatch(rng):
    with pytest.raises(ValueError, match="extent mismatch"):
        mode_contract(np.zeros((2, 3)), np.zeros((2, 2)), 1)
    with pytest.raises(ValueError, match="out of range"):
        mode_contract(np.zeros((2, 3)), np.zeros((2, 2)), 2)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), mode=st.integers(0, 2))
def test_mode_contract_is_bilinear(seed, mode):
    r = np.random.default_rng(seed)
    shape = (2, 3, 4)
    t1, t2 = r.normal(size=shape), r.normal(size=shape)
    m1, m2 = r.normal(size=(3, shape[mode])), r.normal(size=(3, shape[mode]))
    assert_allclose(mode_contract(t1 + t2, m1, mode), mode_contract(t1, m1, mode) + mode_contract(t2, m1, mode),
                    atol=1e-12)
    assert_allclose(mode_contract(t1, m1 + m2, mode), mode_contract(t1, m1, mode) + mode_contract(t1, m2, mode),
                    atol=1e-12)


def test_multi_mode_contract_skip_and_none(rng):
    t = rng.normal(size=(2, 3))
    a, b = rng.normal(size=(4, 2)), rng.normal(size=(5, 3))
    assert_allclose(multi_mode_contract(t, [a, b]), a @ t @ b.T)
    assert_allclose(multi_mode_contract(t, [a, b], skip=1), a @ t)
    assert_allclose(multi_mode_contract(t, [None, b]), t @ b.T)


def test_partial_trace_contract(rng):
    a = rng.normal(size=(2, 3, 4)) + 1j * rng.normal(size=(2, 3, 4))
    b = rng.normal(size=(2, 3, 4)) + 1j * rng.normal(size=(2, 3, 4))
    assert_allclose(partial_trace_contract(a, b, 1), np.einsum("iaj,ibj->ab", a.conj(), b))


def test_regularized_inverse_floors_spectrum(rng):
    u = random_unitary(rng, 3)
    rho = (u * np.array([1.0, 1e-3, 0.0])) @ u.conj().T
    inv, values = regularized_inverse(rho, 1e-10)
    assert_allclose(values, [0.0, 1e-3, 1.0], atol=1e-15)
    assert_allclose(inv, (u * np.array([1.0, 1e3, 1e10])) @ u.conj().T, rtol=1e-6, atol=1e-4)


def test_relative_deviation():
    assert relative_deviation(1.0, 1.0) == 0.0
    assert relative_deviation(2.0, 1.0) == 0.5
    assert relative_deviation(1e-20, 0.0, floor=1e-15) == 0.0
