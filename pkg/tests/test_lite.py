import numpy as np
import pytest

from conftest import dense_tangent_projector, small_instances
from litespawn.driver import initial_state
from litespawn.instances import random_instance, random_state
from litespawn.lite import (
    SMALL_LITE_ABS,
    BoundLedger,
    accumulate_bound,
    agreement_gap,
    lite,
    overlap_expansion_check,
    routes_agree,
)
from litespawn.mctdh import hartree_product, reconstruct
from litespawn.models import assemble_dense, coupled_oscillators
from litespawn.oracle import energy_moments


@pytest.mark.parametrize("seed", range(8))
def test_three_routes_agree(seed):
    for inst in small_instances(seed, 3, sizes=range(3, 8)):
        r = lite(inst.state, inst.ham)
        for name, value in r.routes.items():
            assert routes_agree(r.lite_sq, value), (name, r.lite_sq, value)
        assert r.lite_sq >= -1e-12


def test_routes_and_dense_oracle_agree(rng):
    inst = random_instance(rng, ndof=3, sizes=range(3, 6))
    P = dense_tangent_projector(inst.state)
    hpsi = assemble_dense(inst.ham) @ reconstruct(inst.state)
    q = hpsi - P @ hpsi
    assert lite(inst.state, inst.ham).lite_sq == pytest.approx(np.vdot(q, q).real, rel=1e-9)


def test_coupled_oscillator_reference_value():
    h = coupled_oscillators((8, 8), (1.0, 1.0), 0.1)
    s = initial_state((8, 8), (1, 1), (1.0, 0.0))
    r = lite(s, h)
    # lambda^2 <q1^2 - <q1>^2> <q2^2> = 0.01 * 0.5 * 0.5 for the untruncated coherent product
    assert r.lite_sq == pytest.approx(0.002496715275187808, rel=1e-12)
    assert abs(r.lite_sq - 0.0025) < 1e-5


def test_eigenstate_and_full_rank_are_exact(rng):
    h = coupled_oscillators((5, 4), (1.0, 1.3), 0.0)
    ground = hartree_product([np.eye(5)[:, 0], np.eye(4)[:, 0]])
    assert lite(ground, h).lite_sq <= 1e-20
    ham = random_instance(rng, ndof=2, sizes=range(3, 5)).ham
    r = lite(random_state(rng, ham.dims, ham.dims), ham)
    assert r.lite_sq <= 1e-20 * max(1.0, r.h_psi_norm_sq)


def test_hbar_scaling(rng):
    inst = random_instance(rng, ndof=2, sizes=range(3, 7))
    a = lite(inst.state, inst.ham).lite_sq
    for hbar in (0.5, 2.0, 3.7):
        b = lite(inst.state, inst.ham, hbar=hbar).lite_sq
        assert b == pytest.approx(a / hbar**2, rel=1e-10)
        assert lite(inst.state, inst.ham.scaled(hbar), hbar=hbar).lite_sq == pytest.approx(a, rel=1e-10)


def test_fluctuation_route_matches_energy_variance(rng):
    inst = random_instance(rng, ndof=3, sizes=range(3, 6))
    r = lite(inst.state, inst.ham)
    var = energy_moments(reconstruct(inst.state), inst.ham).variance
    assert r.energy_variance_over_hbar_sq == pytest.approx(var, rel=1e-12)
    assert r.lite_sq <= r.energy_variance_over_hbar_sq * (1 + 1e-12)


def test_shift_invariance(rng):
    inst = random_instance(rng, ndof=2, sizes=range(3, 7))
    a = lite(inst.state, inst.ham).lite_sq
    assert lite(inst.state, inst.ham.shifted(4.2)).lite_sq == pytest.approx(a, rel=1e-9)


def test_monotone_under_manifold_growth(rng):
    from litespawn.numerics import orthonormal_complement
    from litespawn.spawning import extend_manifold

    inst = random_instance(rng, ndof=3, sizes=range(4, 6))
    s = inst.state
    prev = lite(s, inst.ham).lite_sq
    for k in range(3):
        if s.m[k] >= s.n[k]:
            continue
        s = extend_manifold(s, k, orthonormal_complement(s.spfs[k])[:, :1])
        cur = lite(s, inst.ham).lite_sq
        assert cur <= prev + 1e-12
        prev = cur


def test_epsilon_clamps_negative():
    from litespawn.lite import LiteReport

    r = LiteReport(-1e-18, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0)
    assert r.epsilon == 0.0


def test_agreement_gap_convention():
    assert agreement_gap(1.0, 1.0 + 1e-11) == pytest.approx(1e-11, rel=1e-3)
    assert agreement_gap(1e-30, 0.0) < 1e-10
    assert agreement_gap(1e-13, 0.0) > 1e-10
    assert routes_agree(SMALL_LITE_ABS / 2, 0.0)


def test_overlap_expansion_is_third_order():
    h = coupled_oscillators((6, 6), (1.0, 1.2), 0.3)
    s = initial_state((6, 6), (1, 1), (1.0, 0.5))
    dts = (2e-2, 1e-2, 5e-3)
    rem = []
    for dt in dts:
        o = overlap_expansion_check(s, h, dt)
        assert o.D_sq_numeric == pytest.approx(o.eps_sq_dt_sq, rel=0.1)
        rem.append(abs(abs(o.S_numeric) - o.S_second_order))
    orders = np.log2(np.array(rem[:-1]) / np.array(rem[1:]))
    assert np.all(orders >= 2.7)


def test_bound_ledger_trapezoid():
    led = BoundLedger()
    for t in np.linspace(0.0, 2.0, 11):
        led.add_sample(float(t), 0.5)
    assert led.integral == pytest.approx(1.0, rel=1e-14)
    led2 = BoundLedger()
    for t in np.linspace(0.0, 1.0, 101):
        led2.add_sample(float(t), float(t))
    assert led2.integral == pytest.approx(0.5, rel=1e-12)


def test_bound_ledger_rejects_non_monotone_time():
    led = BoundLedger().add_sample(0.0, 1.0).add_sample(0.1, 1.0)
    with pytest.raises(ValueError, match="not after"):
        led.add_sample(0.1, 1.0)


def test_bound_ledger_jump_and_restart():
    led = BoundLedger().add_sample(0.0, 1.0)
    led.restart_from(0.0)
    led.add_sample(1.0, 0.0)
    assert led.integral == 0.0
    led.add_jump(0.25)
    assert led.integral == 0.25 and led.jumps == 0.25
    led.add_sample(2.0, 0.0, exact_deviation=0.2)
    assert led.bound_holds()
    led.add_sample(3.0, 0.0, exact_deviation=0.3)
    assert not led.bound_holds()


def test_accumulate_bound_tracks_exact_deviation():
    h = coupled_oscillators((5, 5), (1.0, 1.0), 0.1)
    s = initial_state((5, 5), (1, 1), (1.0, 0.0))
    led = accumulate_bound(BoundLedger(), 0.0, s, h, reconstruct(s))
    assert led.exact_deviation == 0.0
    assert led.samples[0][1] == pytest.approx(lite(s, h).epsilon)
