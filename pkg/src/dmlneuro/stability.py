"""Jacobians, trace/determinant indicators, Matignon classification and
fractional Hopf thresholds for the single cell and both coupled pairs.

Every model linearizes, at a (symmetric) equilibrium, into one or two 2x2
blocks of the form ``[[S, -1], [m, -gamma]]`` with ``m = alpha A e^(alpha x*)``.
All stability questions reduce to the block traces ``tau = S - gamma`` and
determinants ``delta = -gamma S + m``: an equilibrium of the order-beta
system is asymptotically stable iff every block satisfies ``delta > 0`` and
``tau < 2 sqrt(delta) cos(beta pi / 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .exceptions import DegenerateDeterminantError
from .fde import check_order
from .models import (
    CouplingSpec,
    DmlParams,
    LinearCoupling,
    NoCoupling,
    SigmoidCoupling,
    _exp,
    _sigmoid,
)

DEGENERACY_TOL = 1e-12  # |delta| below this is treated as a fold


class Classification(Enum):
    ASYMPTOTICALLY_STABLE = "asymptotically-stable"
    UNSTABLE = "unstable"
    SADDLE = "saddle"
    SADDLE_NODE_DEGENERATE = "saddle-node-degenerate"


class BetaStarKind(Enum):
    THRESHOLD = "threshold"
    STABLE_FOR_ALL_ORDERS = "stable-for-all-orders"
    UNSTABLE_FOR_ALL_ORDERS = "unstable-for-all-orders"


@dataclass(frozen=True)
class BetaStarResult:
    """Hopf threshold: either a critical order in (0, 1] or a constant verdict."""

    kind: BetaStarKind
    value: Optional[float] = None

    @property
    def is_threshold(self) -> bool:
        return self.kind is BetaStarKind.THRESHOLD


@dataclass(frozen=True)
class StabilityIndicators:
    """Block traces and determinants; minus branch present only for dimers."""

    tau_plus: float
    delta_plus: float
    tau_minus: Optional[float] = None
    delta_minus: Optional[float] = None

    @property
    def branches(self) -> tuple[tuple[float, float], ...]:
        if self.tau_minus is None:
            return ((self.tau_plus, self.delta_plus),)
        return (
            (self.tau_plus, self.delta_plus),
            (self.tau_minus, self.delta_minus),
        )


def _recovery_slope(x_star: float, p: DmlParams) -> float:
    return p.alpha * p.A * _exp(p.alpha * x_star)


def _diagonal_terms(x_star: float, p: DmlParams, coupling: CouplingSpec):
    """Voltage-equation self-derivatives (S+, S-) of the 2x2 blocks."""
    s0 = x_star * (2.0 - 3.0 * x_star)
    if isinstance(coupling, NoCoupling):
        return s0, None
    if isinstance(coupling, LinearCoupling):
        return s0, s0 - 2.0 * coupling.theta
    if isinstance(coupling, SigmoidCoupling):
        c = coupling
        z = _sigmoid(c.lam * (x_star - c.q))
        r = c.lam * z * (1.0 - z)  # derivative of the sigmoid factor
        off = c.sigma * (c.v_s - x_star) * r
        base = s0 - c.sigma * z
        return base + off, base - off
    raise TypeError(f"unknown coupling spec: {coupling!r}")


def jacobian(x_star: float, p: DmlParams, coupling: CouplingSpec = NoCoupling()) -> np.ndarray:
    """Jacobian at the (symmetric) equilibrium with voltage ``x_star``.

    2x2 for the single cell; for a coupled pair the 4x4 block form
    ``[[J, C], [C, J]]`` with the coupling matrix C acting on the voltage row.
    """
    m = _recovery_slope(x_star, p)
    s0 = x_star * (2.0 - 3.0 * x_star)
    if isinstance(coupling, NoCoupling):
        return np.array([[s0, -1.0], [m, -p.gamma]])
    if isinstance(coupling, LinearCoupling):
        diag = np.array([[s0 - coupling.theta, -1.0], [m, -p.gamma]])
        off = np.array([[coupling.theta, 0.0], [0.0, 0.0]])
    elif isinstance(coupling, SigmoidCoupling):
        c = coupling
        z = _sigmoid(c.lam * (x_star - c.q))
        r = c.lam * z * (1.0 - z)
        diag = np.array([[s0 - c.sigma * z, -1.0], [m, -p.gamma]])
        off = np.array([[c.sigma * (c.v_s - x_star) * r, 0.0], [0.0, 0.0]])
    else:
        raise TypeError(f"unknown coupling spec: {coupling!r}")
    return np.block([[diag, off], [off, diag]])


def indicators(
    x_star: float, p: DmlParams, coupling: CouplingSpec = NoCoupling()
) -> StabilityIndicators:
    """Trace/determinant indicators of the 2x2 stability blocks."""
    m = _recovery_slope(x_star, p)
    s_plus, s_minus = _diagonal_terms(x_star, p, coupling)
    tau_p = s_plus - p.gamma
    delta_p = -p.gamma * s_plus + m
    if s_minus is None:
        return StabilityIndicators(tau_p, delta_p)
    if isinstance(coupling, LinearCoupling):
        # exact algebraic shifts of the plus branch
        theta = coupling.theta
        return StabilityIndicators(
            tau_p, delta_p, tau_p - 2.0 * theta, delta_p + 2.0 * theta * p.gamma
        )
    return StabilityIndicators(
        tau_p, delta_p, s_minus - p.gamma, -p.gamma * s_minus + m
    )


def eigenvalues(
    x_star: float, p: DmlParams, coupling: CouplingSpec = NoCoupling()
) -> np.ndarray:
    """Eigenvalues via the closed-form quadratics of the 2x2 blocks."""
    out = []
    for tau, delta in indicators(x_star, p, coupling).branches:
        disc = complex(tau * tau - 4.0 * delta) ** 0.5
        out.extend([(tau + disc) / 2.0, (tau - disc) / 2.0])
    return np.array(out)


def classify(
    ind: StabilityIndicators, beta, degenerate_tol: float = DEGENERACY_TOL
) -> Classification:
    """Matignon classification of an equilibrium at fractional order ``beta``."""
    beta = check_order(beta)
    branches = ind.branches
    if any(d < -degenerate_tol for _, d in branches):
        return Classification.SADDLE
    if any(abs(d) <= degenerate_tol for _, d in branches):
        return Classification.SADDLE_NODE_DEGENERATE
    bound = math.cos(beta * math.pi / 2.0)
    if all(t < 2.0 * math.sqrt(d) * bound for t, d in branches):
        return Classification.ASYMPTOTICALLY_STABLE
    return Classification.UNSTABLE


def beta_star(
    x_star: float, p: DmlParams, coupling: CouplingSpec = NoCoupling()
) -> BetaStarResult:
    """Critical fractional order of the Hopf bifurcation at an equilibrium.

    Per block, the threshold is ``(2/pi) arccos(tau / (2 sqrt(delta)))``; a
    dimer takes the minimum over its two blocks.  A ratio at or above one
    leaves no admissible stable order, while a computed threshold above one
    means the equilibrium is stable for every order in (0, 1].
    """
    ind = indicators(x_star, p, coupling)
    worst = math.inf
    for tau, delta in ind.branches:
        if delta <= 0.0:
            raise DegenerateDeterminantError(
                "Hopf threshold undefined: a determinant branch is not positive"
            )
        ratio = tau / (2.0 * math.sqrt(delta))
        ratio = max(-1.0, min(1.0, ratio))
        worst = min(worst, 2.0 * math.acos(ratio) / math.pi)
    if worst <= 0.0:
        return BetaStarResult(BetaStarKind.UNSTABLE_FOR_ALL_ORDERS)
    if worst > 1.0:
        return BetaStarResult(BetaStarKind.STABLE_FOR_ALL_ORDERS)
    return BetaStarResult(BetaStarKind.THRESHOLD, worst)


@dataclass(frozen=True)
class SaddleNodeReport:
    """Outcome of the fold test, naming any vanishing determinant branch."""

    found: bool
    details: tuple[str, ...]


def saddle_node_condition(
    p: DmlParams,
    coupling: CouplingSpec,
    I: float,
    tol: float = 1e-10,
) -> SaddleNodeReport:
    """Test whether the stimulation current ``I`` sits at a fold.

    The relevant determinant branch must vanish at some equilibrium: the
    single branch for an isolated cell, the theta-shifted (minus) branch for
    a linear pair (positive coupling lifts it clear of zero, so the fold
    needs vanishing coupling), and either branch for a sigmoidal pair.
    """
    from .equilibria import find_equilibria_2d, find_symmetric_equilibria

    p_at = replace(p, I=I)
    if isinstance(coupling, NoCoupling):
        eq = find_equilibria_2d(p_at)
    else:
        eq = find_symmetric_equilibria(p_at, coupling)

    details = []
    for x_star, _ in eq.points:
        ind = indicators(x_star, p_at, coupling)
        if isinstance(coupling, NoCoupling):
            watched = (("delta", ind.delta_plus),)
        elif isinstance(coupling, LinearCoupling):
            watched = (("delta-", ind.delta_minus),)
        else:
            watched = (("delta+", ind.delta_plus), ("delta-", ind.delta_minus))
        for label, value in watched:
            if abs(value) < tol:
                details.append(f"{label} = {value:.3e} vanishes at x* = {x_star:.6f}")
    return SaddleNodeReport(found=bool(details), details=tuple(details))
