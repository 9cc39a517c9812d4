"""Equilibrium structure: the current-voltage curve, its extrema, and roots.

Equilibria of the single cell sit where the stimulation current ``I`` equals
the curve ``i_infinity(x)``.  Between the curve's local maximum and minimum
the cell has three equilibria, exactly at the extrema it has two (a fold),
and outside that current band it has one.  The symmetric equilibria of the
coupled models reduce to the same scalar equation, shifted by the sigmoidal
coupling term when present.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .exceptions import NoExtremaError, RootWindowExhaustedError
from .models import (
    CouplingSpec,
    DmlParams,
    LinearCoupling,
    SigmoidCoupling,
    _exp,
    _sigmoid,
)

DEFAULT_WINDOW = (-1.5, 1.5)
FOLD_TOL = 1e-12  # absolute tolerance on I for the two-equilibrium fold branch
_SCAN_STEP = 1e-3


class Branch(Enum):
    UNIQUE = "unique"
    TWOFOLD = "twofold"
    THREEFOLD = "threefold"


_BRANCH_BY_COUNT = {1: Branch.UNIQUE, 2: Branch.TWOFOLD, 3: Branch.THREEFOLD}


@dataclass(frozen=True)
class InfCurveExtrema:
    """Local maximum and minimum of the current-voltage curve."""

    x_max: float
    I_max: float
    x_min: float
    I_min: float


@dataclass(frozen=True)
class EquilibriumSet:
    """Equilibrium points, ascending in x, with their branch label."""

    points: np.ndarray  # shape (k, 2), rows (x_star, y_star)
    branch: Branch


def i_infinity(x: float, p: DmlParams) -> float:
    """Stimulation current that places a single-cell equilibrium at voltage x."""
    return (p.A / p.gamma) * _exp(p.alpha * x) - x * x * (1.0 - x)


def i_infinity_derivative(x: float, p: DmlParams, m: int = 1) -> float:
    """m-th derivative of :func:`i_infinity` with respect to x."""
    if m < 1:
        raise ValueError("derivative order m must be >= 1")
    expo = (p.alpha ** m) * (p.A / p.gamma) * _exp(p.alpha * x)
    if m == 1:
        return expo - x * (2.0 - 3.0 * x)
    if m == 2:
        return expo - 2.0 * (1.0 - 3.0 * x)
    if m == 3:
        return expo + 6.0
    return expo


def y_infinity(x: float, p: DmlParams) -> float:
    """Recovery-variable nullcline value at voltage x."""
    return (p.A / p.gamma) * _exp(p.alpha * x)


def _bisect(f: Callable[[float], float], lo: float, hi: float, xtol: float = 1e-14) -> float:
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise ValueError("root not bracketed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid == lo or mid == hi:
            return mid
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if flo * fmid < 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def _refine_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    fprime: Optional[Callable[[float], float]] = None,
    newton_steps: int = 5,
) -> float:
    """Bisection to ~1e-14 on the bracket, then a few Newton polish steps."""
    x = _bisect(f, lo, hi)
    if fprime is not None:
        for _ in range(newton_steps):
            d = fprime(x)
            if d == 0.0 or not math.isfinite(d):
                break
            step = f(x) / d
            x_new = x - step
            if not math.isfinite(x_new):
                break
            x = x_new
            if abs(step) < 1e-16 * max(1.0, abs(x)):
                break
    return x


def _scan_brackets(f, lo, hi, step):
    """Sign-change brackets of f on [lo, hi] sampled at the given step."""
    xs = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    vals = np.array([f(x) for x in xs])
    out = []
    for i in range(xs.size - 1):
        if vals[i] == 0.0:
            out.append((xs[i], xs[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            out.append((xs[i], xs[i + 1]))
    if vals[-1] == 0.0:
        out.append((xs[-1], xs[-1]))
    return out


def find_extrema(p: DmlParams, window=DEFAULT_WINDOW) -> InfCurveExtrema:
    """Locate the local maximum and minimum of the current-voltage curve.

    The first derivative is strictly convex here (its own second derivative
    is positive everywhere), so it has at most two roots; both are found by
    sign scan, bisection and Newton polish.  Raises :class:`NoExtremaError`
    when the scan sees no sign change (e.g. the recovery amplitude is too
    large for the curve to fold).
    """

    def d1(x):
        return i_infinity_derivative(x, p, 1)

    def d2(x):
        return i_infinity_derivative(x, p, 2)

    brackets = _scan_brackets(d1, window[0], window[1], _SCAN_STEP)
    roots = []
    for lo, hi in brackets:
        r = _refine_root(d1, lo, hi, d2) if lo != hi else lo
        if not any(abs(r - q) < 1e-9 for q in roots):
            roots.append(r)
    if len(roots) < 2:
        raise NoExtremaError(
            "no interior extrema of the current-voltage curve on the scan window"
        )
    roots.sort()
    x_max, x_min = roots[0], roots[1]
    return InfCurveExtrema(
        x_max=x_max,
        I_max=i_infinity(x_max, p),
        x_min=x_min,
        I_min=i_infinity(x_min, p),
    )


def classify_branch(I: float, extrema: InfCurveExtrema, fold_tol: float = FOLD_TOL) -> Branch:
    """Branch of the equilibrium count for a stimulation current ``I``."""
    if abs(I - extrema.I_min) <= fold_tol or abs(I - extrema.I_max) <= fold_tol:
        return Branch.TWOFOLD
    if extrema.I_min < I < extrema.I_max:
        return Branch.THREEFOLD
    return Branch.UNIQUE


def _equilibrium_set(p: DmlParams, roots) -> EquilibriumSet:
    roots = sorted(roots)
    pts = np.array([[x, y_infinity(x, p)] for x in roots])
    return EquilibriumSet(points=pts, branch=_BRANCH_BY_COUNT[len(roots)])


def find_equilibria_2d(
    p: DmlParams,
    window=DEFAULT_WINDOW,
    fold_tol: float = FOLD_TOL,
) -> EquilibriumSet:
    """All single-cell equilibria on the scan window.

    The extrema split the window into three intervals on which the
    current-voltage curve is monotone, so each interval holds at most one
    root and bisection brackets are guaranteed.  A tangency root at a fold
    (where a plain sign scan sees no crossing) is injected directly from the
    extremum.  If no root lands in the window it is widened once before
    :class:`RootWindowExhaustedError` is raised.
    """

    def g(x):
        return p.I - i_infinity(x, p)

    def gprime(x):
        return -i_infinity_derivative(x, p, 1)

    try:
        ex = find_extrema(p, window)
    except NoExtremaError:
        ex = None

    for widened, (lo, hi) in enumerate(
        (window, (2.0 * window[0], 2.0 * window[1]))
    ):
        roots = []
        if ex is None:
            for blo, bhi in _scan_brackets(g, lo, hi, _SCAN_STEP):
                r = _refine_root(g, blo, bhi, gprime) if blo != bhi else blo
                if not any(abs(r - q) < 1e-9 for q in roots):
                    roots.append(r)
        else:
            if abs(p.I - ex.I_max) <= fold_tol:
                roots.append(ex.x_max)  # tangency pair collapsed to the fold point
                roots.extend(_monotone_roots(g, gprime, [(ex.x_min, hi)]))
            elif abs(p.I - ex.I_min) <= fold_tol:
                roots.append(ex.x_min)
                roots.extend(_monotone_roots(g, gprime, [(lo, ex.x_max)]))
            else:
                segments = [(lo, ex.x_max), (ex.x_max, ex.x_min), (ex.x_min, hi)]
                roots.extend(_monotone_roots(g, gprime, segments))
        if roots:
            return _equilibrium_set(p, roots)
        if widened:
            break
    raise RootWindowExhaustedError(
        f"no equilibrium found for I={p.I} on the widened scan window"
    )


def _monotone_roots(g, gprime, segments):
    roots = []
    for lo, hi in segments:
        glo, ghi = g(lo), g(hi)
        if glo == 0.0:
            roots.append(lo)
        elif ghi == 0.0:
            roots.append(hi)
        elif glo * ghi < 0.0:
            roots.append(_refine_root(g, lo, hi, gprime))
    # segment endpoints can duplicate an exact-zero root
    out = []
    for r in sorted(roots):
        if not out or abs(r - out[-1]) > 1e-9:
            out.append(r)
    return out


def find_symmetric_equilibria(
    p: DmlParams,
    coupling: CouplingSpec,
    window=DEFAULT_WINDOW,
) -> EquilibriumSet:
    """Symmetric equilibria (x*, y*, x*, y*) of a coupled pair, as (x*, y*).

    With linear coupling the defining equation is the single-cell one, so the
    result is independent of theta.  With sigmoidal coupling the equation
    gains the term ``sigma (v_s - x) / (1 + e^(-lam (x - q)))`` and the roots
    move with sigma; at ``sigma == 0`` it degenerates to the single-cell
    equation and is solved by the same path.
    """
    if isinstance(coupling, LinearCoupling):
        return find_equilibria_2d(p, window)
    if not isinstance(coupling, SigmoidCoupling):
        raise TypeError("coupling must be LinearCoupling or SigmoidCoupling")
    if coupling.sigma == 0.0:
        return find_equilibria_2d(p, window)

    c = coupling

    def g(x):
        return (
            x * x * (1.0 - x)
            - y_infinity(x, p)
            + p.I
            + c.sigma * (c.v_s - x) * _sigmoid(c.lam * (x - c.q))
        )

    def gprime(x):
        z = _sigmoid(c.lam * (x - c.q))
        return (
            x * (2.0 - 3.0 * x)
            - p.alpha * y_infinity(x, p)
            + c.sigma * (-z + (c.v_s - x) * c.lam * z * (1.0 - z))
        )

    for widened, (lo, hi) in enumerate(
        (window, (2.0 * window[0], 2.0 * window[1]))
    ):
        roots = []
        for blo, bhi in _scan_brackets(g, lo, hi, _SCAN_STEP):
            r = _refine_root(g, blo, bhi, gprime) if blo != bhi else blo
            if not any(abs(r - q) < 1e-9 for q in roots):
                roots.append(r)
        if roots:
            return _equilibrium_set(p, roots)
        if widened:
            break
    raise RootWindowExhaustedError(
        f"no symmetric equilibrium found for I={p.I} on the widened scan window"
    )
