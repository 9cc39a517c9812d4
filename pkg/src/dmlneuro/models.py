"""Vector fields and parameter records for denatured Morris-Lecar neurons.

The single cell pairs a cubic voltage nonlinearity with an exponential
recovery variable.  Two identical cells can be coupled bidirectionally
through the voltage, either by a linear flow or by a sigmoidal (fast
threshold modulation) synapse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

_EXP_MAX = 709.0  # float64 exp() overflow threshold


def _exp(u: float) -> float:
    # overflow maps to inf instead of raising, so blow-up detection can see it
    return math.exp(u) if u < _EXP_MAX else math.inf


def _sigmoid(u: float) -> float:
    # sign-split form; never exponentiates a large positive argument
    if u >= 0.0:
        return 1.0 / (1.0 + math.exp(-u))
    eu = math.exp(u)
    return eu / (1.0 + eu)


@dataclass(frozen=True)
class DmlParams:
    """Local neuron parameters.

    ``I`` is the external stimulation current (any sign); ``A`` scales the
    recovery drive, ``alpha`` its exponential rate and ``gamma`` its decay.
    """

    I: float = 0.019
    A: float = 0.0041
    alpha: float = 5.276
    gamma: float = 0.3

    def __post_init__(self):
        if self.A <= 0.0 or self.alpha <= 0.0 or self.gamma <= 0.0:
            raise ValueError("A, alpha and gamma must all be positive")


@dataclass(frozen=True)
class NoCoupling:
    """Single isolated cell."""


@dataclass(frozen=True)
class LinearCoupling:
    """Bidirectional linear voltage flow of strength ``theta``."""

    theta: float

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ValueError("theta must be positive for a coupled model")


@dataclass(frozen=True)
class SigmoidCoupling:
    """Fast-threshold-modulation synapse.

    ``sigma`` is the coupling strength, ``v_s`` the reversal potential,
    ``lam`` the sigmoid slope and ``q`` the synaptic threshold.  For an
    excitatory synapse ``v_s`` should stay above every visited voltage;
    this is reported by the experiment layer, not enforced here.
    """

    sigma: float
    v_s: float = 2.0
    lam: float = 10.0
    q: float = -0.25

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        if self.lam <= 0.0:
            raise ValueError("lam must be positive")


CouplingSpec = Union[NoCoupling, LinearCoupling, SigmoidCoupling]


def rhs_single(t, state, p: DmlParams) -> np.ndarray:
    """Single-cell field: (x^2(1-x) - y + I, A e^(alpha x) - gamma y)."""
    x, y = state
    return np.array(
        [
            x * x * (1.0 - x) - y + p.I,
            p.A * _exp(p.alpha * x) - p.gamma * y,
        ]
    )


def rhs_coupled_linear(t, state, p: DmlParams, theta: float) -> np.ndarray:
    """Two identical cells exchanging a linear voltage flow theta*(x_j - x_i)."""
    x1, y1, x2, y2 = state
    return np.array(
        [
            x1 * x1 * (1.0 - x1) - y1 + p.I + theta * (x2 - x1),
            p.A * _exp(p.alpha * x1) - p.gamma * y1,
            x2 * x2 * (1.0 - x2) - y2 + p.I + theta * (x1 - x2),
            p.A * _exp(p.alpha * x2) - p.gamma * y2,
        ]
    )


def rhs_coupled_sigmoid(t, state, p: DmlParams, c: SigmoidCoupling) -> np.ndarray:
    """Two identical cells coupled by sigma*(v_s - x_i) / (1 + e^(-lam (x_j - q)))."""
    x1, y1, x2, y2 = state
    return np.array(
        [
            x1 * x1 * (1.0 - x1) - y1 + p.I
            + c.sigma * (c.v_s - x1) * _sigmoid(c.lam * (x2 - c.q)),
            p.A * _exp(p.alpha * x1) - p.gamma * y1,
            x2 * x2 * (1.0 - x2) - y2 + p.I
            + c.sigma * (c.v_s - x2) * _sigmoid(c.lam * (x1 - c.q)),
            p.A * _exp(p.alpha * x2) - p.gamma * y2,
        ]
    )


def vector_field(coupling: CouplingSpec):
    """Return ``(rhs, dimension)`` for the model selected by the coupling spec.

    The returned ``rhs(t, y, p)`` matches the solver's calling convention,
    with ``p`` a :class:`DmlParams` record.
    """
    if isinstance(coupling, NoCoupling):
        return rhs_single, 2
    if isinstance(coupling, LinearCoupling):
        theta = coupling.theta

        def rhs_linear(t, y, p):
            return rhs_coupled_linear(t, y, p, theta)

        return rhs_linear, 4
    if isinstance(coupling, SigmoidCoupling):

        def rhs_sigmoid(t, y, p):
            return rhs_coupled_sigmoid(t, y, p, coupling)

        return rhs_sigmoid, 4
    raise TypeError(f"unknown coupling spec: {coupling!r}")


def voltage_columns(dim: int) -> tuple[int, ...]:
    """Indices of the voltage variables in a state vector of width ``dim``."""
    if dim == 2:
        return (0,)
    if dim == 4:
        return (0, 2)
    raise ValueError("state dimension must be 2 or 4")
