"""Fixed-step propagation with LITE monitoring, spawning, pruning and the a posteriori bound."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from numpy.typing import NDArray

from .config import RunConfig
from .lite import BoundLedger, LiteReport, lite
from .mctdh import MctdhState, eom_rhs, reconstruct, reorthonormalize
from .models import SopHamiltonian, build_model
from .numerics import orthonormalize
from .oracle import ExactPropagator
from .spawning import (
    NoSpawnSpaceError,
    SpawnEvent,
    build_operator,
    error_reduction,
    extend_manifold,
    prune_with_report,
    select_candidates,
)

log = logging.getLogger(__name__)

MAX_HALVINGS = 20
ROUTE_REJECT_TOL = 1e-6


class PropagationError(RuntimeError):
    """The integrator could not produce an acceptable step."""


CSV_COLUMNS = (
    "t", "norm", "energy", "lite_sq", "residual_norm_sq", "energy_variance", "gauge_velocity_sq",
    "bound_integral", "exact_deviation", "m_dims", "min_natpop",
)


@dataclass
class TrajectoryRow:
    t: float
    norm: float
    energy: float
    lite_sq: float
    residual_norm_sq: float
    energy_variance: float
    gauge_velocity_sq: float
    bound_integral: float
    exact_deviation: float | None
    m_dims: tuple[int, ...]
    min_natpop: float


@dataclass
class RunResult:
    rows: list[TrajectoryRow] = field(default_factory=list)
    events: list[SpawnEvent] = field(default_factory=list)
    ledger: BoundLedger = field(default_factory=BoundLedger)
    final_state: MctdhState | None = None
    failure: str | None = None

    @property
    def final_exact_deviation(self) -> float | None:
        return self.rows[-1].exact_deviation if self.rows else None

    @property
    def final_bound(self) -> float:
        return self.ledger.integral


def _axpy(state: MctdhState, tv, h: float) -> MctdhState:
    return MctdhState(state.A + h * tv.A_dot, tuple(s + h * d for s, d in zip(state.spfs, tv.spf_dots)))


def rk4_step(state: MctdhState, ham: SopHamiltonian, dt: float, eps_reg: float = 1e-10,
             hbar: float = 1.0) -> MctdhState:
    """One classical RK4 step on ``(A, spfs)``, then QR re-orthonormalization of the spfs."""
    k1 = eom_rhs(state, ham, eps_reg, hbar)
    k2 = eom_rhs(_axpy(state, k1, dt / 2), ham, eps_reg, hbar)
    k3 = eom_rhs(_axpy(state, k2, dt / 2), ham, eps_reg, hbar)
    k4 = eom_rhs(_axpy(state, k3, dt), ham, eps_reg, hbar)
    A = state.A + (dt / 6) * (k1.A_dot + 2 * k2.A_dot + 2 * k3.A_dot + k4.A_dot)
    spfs = tuple(
        s + (dt / 6) * (d1 + 2 * d2 + 2 * d3 + d4)
        for s, d1, d2, d3, d4 in zip(state.spfs, k1.spf_dots, k2.spf_dots, k3.spf_dots, k4.spf_dots)
    )
    return reorthonormalize(MctdhState(A, spfs))


def _acceptable(state: MctdhState, report: LiteReport, eps_reg: float) -> bool:
    if not (np.all(np.isfinite(state.A)) and all(np.all(np.isfinite(s)) for s in state.spfs)):
        return False
    return not (report.min_population < eps_reg and report.route_disagreement() > ROUTE_REJECT_TOL)


def controlled_step(state: MctdhState, ham: SopHamiltonian, dt: float, eps_reg: float, hbar: float,
                    depth: int = 0) -> tuple[MctdhState, LiteReport]:
    """RK4 step over `dt`, splitting into halves when conditioning collapses."""
    new = rk4_step(state, ham, dt, eps_reg, hbar)
    report = lite(new, ham, eps_reg, hbar) if np.all(np.isfinite(new.A)) else None
    if report is not None and _acceptable(new, report, eps_reg):
        return new, report
    if depth >= MAX_HALVINGS:
        raise PropagationError(f"step rejected {MAX_HALVINGS} times (dt = {dt:.3e})")
    log.debug("rejecting step of size %.3e, halving", dt)
    half, _ = controlled_step(state, ham, dt / 2, eps_reg, hbar, depth + 1)
    return controlled_step(half, ham, dt / 2, eps_reg, hbar, depth + 1)


def coherent_state(n: int, displacement: float) -> NDArray[np.complex128]:
    """Truncated oscillator coherent state, renormalized."""
    k = np.arange(n)
    amps = np.array([displacement**j / np.sqrt(float(factorial(j))) for j in k], dtype=np.complex128)
    return amps / np.linalg.norm(amps)


def initial_state(dims, spfs, displacements) -> MctdhState:
    """Hartree product of coherent states, padded with unoccupied oscillator levels up to `spfs` per DOF."""
    mats = []
    for n, m, d in zip(dims, spfs, displacements):
        block = np.column_stack([coherent_state(n, d), np.eye(n, dtype=np.complex128)])
        q, _ = orthonormalize(block)
        mats.append(q[:, :m])
    A = np.zeros(tuple(spfs), dtype=np.complex128)
    A[(0,) * len(spfs)] = 1.0
    return MctdhState(A, tuple(mats))


class _Scheduler:
    def __init__(self, cfg: RunConfig, ham: SopHamiltonian):
        self.cfg = cfg
        self.ham = ham
        self.max_m = cfg.max_spfs()
        self.steps_since_spawn = cfg.spawn.cooldown_steps
        self.last_spawn_step: dict[int, int] = {}

    def _room(self, state: MctdhState, k: int) -> int:
        return min(self.max_m[k], state.n[k]) - state.m[k]

    def _best(self, state: MctdhState, kind: str, exclude=()):
        cfg = self.cfg
        tv = eom_rhs(state, self.ham, cfg.eps_reg, cfg.hbar)
        best = None
        for k in range(state.ndof):
            if k in exclude or self._room(state, k) <= 0:
                continue
            try:
                op = build_operator(kind, state, self.ham, k, cfg.eps_reg, cfg.hbar, tv)
            except NoSpawnSpaceError:
                continue
            top = float(op.eigenvalues()[0])
            if best is None or top > best[1]:
                best = (op, top)
        return best

    def _spawn(self, state: MctdhState, op, count: int, t: float, before: LiteReport):
        cfg = self.cfg
        count = min(count, op.dim, self._room(state, op.k))
        cands = select_candidates(op, count)
        red = error_reduction(state, self.ham, op.k, cands, cfg.eps_reg, cfg.hbar)
        new = extend_manifold(state, op.k, cands)
        after = lite(new, self.ham, cfg.eps_reg, cfg.hbar)
        event = SpawnEvent(
            time=t,
            k=op.k,
            kind=op.kind,
            eigenvalues_taken=tuple(c.eigenvalue for c in cands),
            error_reduction_predicted=red.via_derivative,
            error_reduction_quadform=red.via_quadform,
            error_reduction_realized=before.lite_sq - after.lite_sq,
            df_condition_residual=red.df_condition_residual,
            new_m=new.m[op.k],
        )
        log.info("spawn t=%.4f dof=%d kind=%s gain=%.3e", t, op.k, op.kind, red.via_derivative)
        return new, after, event

    def maybe_spawn(self, state: MctdhState, report: LiteReport, t: float, step: int):
        sc = self.cfg.spawn
        if not sc.enabled or not report.epsilon > sc.tau_lite:
            return state, report, []
        if self.steps_since_spawn < sc.cooldown_steps:
            return state, report, []
        events = []
        best = self._best(state, sc.kind)
        if best is not None and best[1] > sc.tau_gain:
            state, report, ev = self._spawn(state, best[0], sc.k_per_event, t, report)
            events.append(ev)
        elif sc.lookahead:
            seed = self._best(state, "residual")
            if seed is not None and seed[1] > sc.tau_gain:
                state, report, ev = self._spawn(state, seed[0], 1, t, report)
                events.append(ev)
                # gamma excludes the velocity direction, which is exactly where the seed couples
                partner = self._best(state, "delta", exclude=(seed[0].k,))
                if partner is not None and partner[1] > sc.tau_gain:
                    state, report, ev = self._spawn(state, partner[0], sc.k_per_event, t, report)
                    events.append(ev)
        if events:
            self.steps_since_spawn = 0
            for ev in events:
                self.last_spawn_step[ev.k] = step
        return state, report, events

    def maybe_prune(self, state: MctdhState, step: int, ledger: BoundLedger):
        pc = self.cfg.prune
        if not pc.enabled or step == 0 or step % pc.check_interval != 0:
            return state, False
        changed = False
        for k in range(state.ndof):
            if state.m[k] < 2:
                continue
            if step - self.last_spawn_step.get(k, -10**9) < self.cfg.spawn.cooldown_steps:
                continue
            try:
                new, dropped = prune_with_report(state, k, pc.tau_remove)
            except ValueError:
                continue
            if new.m[k] < state.m[k]:
                ledger.add_jump(float(np.sqrt(dropped)))
                changed = True
            state = new
        return state, changed


def _row(t: float, report: LiteReport, ledger: BoundLedger, state: MctdhState, deviation) -> TrajectoryRow:
    return TrajectoryRow(
        t=t,
        norm=report.norm,
        energy=report.energy,
        lite_sq=report.lite_sq,
        residual_norm_sq=report.residual_norm_sq,
        energy_variance=report.energy_variance_over_hbar_sq,
        gauge_velocity_sq=report.gauge_velocity_sq,
        bound_integral=ledger.integral,
        exact_deviation=deviation,
        m_dims=tuple(state.m),
        min_natpop=report.min_population,
    )


def run(cfg: RunConfig, on_row=None) -> RunResult:
    """Propagate the configured model; returns trajectory rows, spawn events and the bound ledger.

    `on_row`, if given, is called with every :class:`TrajectoryRow` as it is
    produced (used for streaming output). A :class:`PropagationError` is
    caught and recorded in ``RunResult.failure``.
    """
    m = cfg.model
    ham = build_model(m.name, m.dims, m.frequencies(), m.coupling, dense_cap=m.dense_cap)
    state = initial_state(m.dims, cfg.initial_spfs(), cfg.initial_displacements())
    exact = ExactPropagator(reconstruct(state), ham, cfg.hbar) if cfg.oracle_compare else None
    result = RunResult()
    scheduler = _Scheduler(cfg, ham)

    def emit(t, report, step):
        nonlocal state
        deviation = float(np.linalg.norm(reconstruct(state) - exact(t))) if exact is not None else None
        result.ledger.add_sample(t, report.epsilon, deviation)
        row = _row(t, report, result.ledger, state, deviation)
        result.rows.append(row)
        if on_row is not None:
            on_row(row)
        state, report, events = scheduler.maybe_spawn(state, report, t, step)
        result.events.extend(events)
        state, pruned = scheduler.maybe_prune(state, step, result.ledger)
        if pruned:
            report = lite(state, ham, cfg.eps_reg, cfg.hbar)
        if events or pruned:
            result.ledger.restart_from(report.epsilon)

    report = lite(state, ham, cfg.eps_reg, cfg.hbar)
    emit(0.0, report, 0)
    try:
        for step in range(1, cfg.nsteps + 1):
            state, report = controlled_step(state, ham, cfg.dt, cfg.eps_reg, cfg.hbar)
            scheduler.steps_since_spawn += 1
            emit(step * cfg.dt, report, step)
    except PropagationError as exc:
        result.failure = str(exc)
        log.error("propagation failed: %s", exc)
    result.final_state = state
    return result
