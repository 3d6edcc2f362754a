"""Local-in-time error (LITE) and the quantities built on it.

Three independent evaluations of the squared LITE are carried by every
report: the norm difference ``(|H Psi|^2 - hbar^2 |dPsi|^2) / hbar^2``,
the complement-projector residual ``|Q H Psi|^2 / hbar^2`` and the
energy-fluctuation form ``dE^2 / hbar^2 - |dPsi^+|^2`` with ``dPsi^+`` the
derivative generated by the zero-averaged Hamiltonian.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .mctdh import (
    DEFAULT_EPS_REG,
    MctdhState,
    TangentVector,
    apply_complement_projector,
    eom_rhs,
    reconstruct,
)
from .models import SopHamiltonian
from .oracle import ExactPropagator
from .numerics import relative_deviation

log = logging.getLogger(__name__)

# absolute agreement level used once eps^2 itself drops below SMALL_LITE_SQ
SMALL_LITE_SQ = 1e-10
SMALL_LITE_ABS = 1e-14


@dataclass(frozen=True)
class LiteReport:
    lite_sq: float
    h_psi_norm_sq: float
    psi_dot_norm_sq: float
    residual_norm_sq: float
    energy_variance_over_hbar_sq: float
    gauge_velocity_sq: float
    hbar: float
    energy: float = 0.0
    norm: float = 1.0
    min_population: float = float("nan")

    @property
    def lite_sq_norm_difference(self) -> float:
        return (self.h_psi_norm_sq - self.hbar**2 * self.psi_dot_norm_sq) / self.hbar**2

    @property
    def lite_sq_fluctuation(self) -> float:
        return self.energy_variance_over_hbar_sq - self.gauge_velocity_sq

    @property
    def routes(self) -> dict[str, float]:
        return {
            "norm_difference": self.lite_sq_norm_difference,
            "q_residual": self.residual_norm_sq,
            "fluctuation": self.lite_sq_fluctuation,
        }

    @property
    def epsilon(self) -> float:
        """Non-negative LITE; round-off negatives are clamped."""
        if self.lite_sq < 0:
            log.debug("clamping negative lite_sq %.3e", self.lite_sq)
        return float(np.sqrt(max(self.lite_sq, 0.0)))

    def route_disagreement(self) -> float:
        """Largest pairwise gap between the three routes, in units of ``|H Psi|^2 / hbar^2``.

        Round-off in every route scales with that quantity, so this is the
        natural conditioning diagnostic.
        """
        vals = list(self.routes.values())
        scale = max(self.h_psi_norm_sq / self.hbar**2, np.finfo(float).tiny)
        return max(abs(a - b) for i, a in enumerate(vals) for b in vals[i + 1:]) / scale


def agreement_gap(a: float, b: float) -> float:
    """Relative deviation of `a` and `b`; below ``SMALL_LITE_SQ`` the absolute gap in units of ``SMALL_LITE_ABS / 1e-10``.

    A gap of ``1e-10`` therefore means 1e-10 relative for ordinary values and
    ``SMALL_LITE_ABS`` absolute once both values are tiny.
    """
    if max(abs(a), abs(b)) < SMALL_LITE_SQ:
        return abs(a - b) * (1e-10 / SMALL_LITE_ABS)
    return relative_deviation(a, b)


def routes_agree(a: float, b: float, rtol: float = 1e-10) -> bool:
    """``agreement_gap(a, b) <= rtol``."""
    return agreement_gap(a, b) <= rtol


def lite(state: MctdhState, ham: SopHamiltonian, eps_reg: float = DEFAULT_EPS_REG, hbar: float = 1.0,
         tangent: TangentVector | None = None) -> LiteReport:
    """Evaluate the squared LITE at `state` by three separate routes."""
    tv = eom_rhs(state, ham, eps_reg, hbar) if tangent is None else tangent
    psi = reconstruct(state)
    hpsi = ham.apply(psi)
    psi_dot = tv.dense

    h_psi_norm_sq = float(np.vdot(hpsi, hpsi).real)
    psi_dot_norm_sq = float(np.vdot(psi_dot, psi_dot).real)
    residual = hpsi - 1j * hbar * psi_dot
    lite_sq = float(np.vdot(residual, residual).real) / hbar**2

    q_hpsi = apply_complement_projector(state, hpsi, eps_reg)
    residual_norm_sq = float(np.vdot(q_hpsi, q_hpsi).real) / hbar**2

    norm_sq = float(np.vdot(psi, psi).real)
    energy = float(np.vdot(psi, hpsi).real) / norm_sq
    fluct = hpsi - energy * psi
    variance = float(np.vdot(fluct, fluct).real)
    plus = eom_rhs(state, ham.shifted(-energy), eps_reg, hbar).dense
    gauge_velocity_sq = float(np.vdot(plus, plus).real)

    return LiteReport(
        lite_sq=lite_sq,
        h_psi_norm_sq=h_psi_norm_sq,
        psi_dot_norm_sq=psi_dot_norm_sq,
        residual_norm_sq=residual_norm_sq,
        energy_variance_over_hbar_sq=variance / hbar**2,
        gauge_velocity_sq=gauge_velocity_sq,
        hbar=hbar,
        energy=energy,
        norm=float(np.sqrt(norm_sq)),
        min_population=tv.min_population,
    )


class OverlapExpansion(NamedTuple):
    S_numeric: complex
    S_second_order: float
    D_sq_numeric: float
    eps_sq_dt_sq: float


def overlap_expansion_check(state: MctdhState, ham: SopHamiltonian, dt: float, eps_reg: float = DEFAULT_EPS_REG,
                            hbar: float = 1.0, substeps: int = 100) -> OverlapExpansion:
    """Compare the short-time overlap between variational and exact states with its expansion to ``dt^2``.

    The variational state is advanced over `dt` by `substeps` RK4 steps of
    size ``dt / substeps`` so integrator error stays far below the ``dt^3``
    remainder being probed.
    """
    from .driver import rk4_step

    report = lite(state, ham, eps_reg, hbar)
    psi0 = reconstruct(state)
    exact = ExactPropagator(psi0, ham, hbar)(dt)
    evolved = state
    h = dt / substeps
    for _ in range(substeps):
        evolved = rk4_step(evolved, ham, h, eps_reg, hbar)
    psi_dt = reconstruct(evolved)

    S = complex(np.vdot(psi_dt, exact))
    second_moment = report.h_psi_norm_sq / hbar**2
    S2 = 1.0 + 0.5 * (report.psi_dot_norm_sq - second_moment) * dt**2
    D_sq = 2.0 * (1.0 - abs(S))
    return OverlapExpansion(S, S2, D_sq, report.lite_sq * dt**2)


@dataclass
class BoundLedger:
    """Running trapezoidal integral of the LITE along a trajectory.

    `jumps` collects additional non-dynamical error (for example the norm
    removed by pruning), which is added to the integral so the bound
    ``|Psi(t) - Psi_exact(t)| <= integral`` stays valid.
    """

    samples: list[tuple[float, float]] = field(default_factory=list)
    integral: float = 0.0
    exact_deviation: float = float("nan")
    jumps: float = 0.0
    max_violation: float = -np.inf
    _left_eps: float = field(default=float("nan"), repr=False)

    def add_sample(self, t: float, eps: float, exact_deviation: float | None = None) -> "BoundLedger":
        if self.samples:
            t_prev, _ = self.samples[-1]
            if not t > t_prev:
                raise ValueError(f"sample time {t} is not after the previous sample {t_prev}")
            self.integral += 0.5 * (t - t_prev) * (self._left_eps + eps)
        self.samples.append((t, eps))
        self._left_eps = eps
        if exact_deviation is not None:
            self.exact_deviation = exact_deviation
            self.max_violation = max(self.max_violation, exact_deviation - self.integral)
        return self

    def restart_from(self, eps: float) -> None:
        """Use `eps` as left endpoint of the next interval (the manifold changed at the last sample)."""
        self._left_eps = eps

    def add_jump(self, amount: float) -> None:
        self.jumps += amount
        self.integral += amount

    def bound_holds(self, tol: float = 1e-6) -> bool:
        return self.max_violation <= tol


def accumulate_bound(ledger: BoundLedger, t: float, state: MctdhState, ham: SopHamiltonian,
                     oracle_state=None, eps_reg: float = DEFAULT_EPS_REG, hbar: float = 1.0) -> BoundLedger:
    """Append the LITE of `state` at time `t`; compare with `oracle_state` when given."""
    eps = lite(state, ham, eps_reg, hbar).epsilon
    deviation = None
    if oracle_state is not None:
        deviation = float(np.linalg.norm(reconstruct(state) - oracle_state))
    return ledger.add_sample(t, eps, deviation)
