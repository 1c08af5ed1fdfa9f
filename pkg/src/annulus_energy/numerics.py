"""Shared numerical kernels: tanh-sinh quadrature, bracketed roots, monotone inversion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "RootBracketError",
    "MonotoneTable",
    "integrate",
    "find_root",
    "invert_monotone",
    "central_diff",
]

# Step halvings of the tanh-sinh rule; each level doubles the node count.
_MAX_HALVINGS = 14
_T_MAX = 6.0


class QuadratureError(RuntimeError):
    """Quadrature did not reach the requested tolerance."""


class RootBracketError(ValueError):
    """The supplied interval does not bracket a sign change."""


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_levels: int = 60

    def __post_init__(self):
        # zero tolerances are legal but can only be met by exact level agreement
        if not (self.abs_tol >= 0 and self.rel_tol >= 0):
            raise ValueError("quadrature tolerances must be nonnegative")
        if self.max_levels < 10:
            raise ValueError("max_levels must be at least 10")


DEFAULT_QUAD = QuadratureSpec()


def _level_nodes(level: int):
    """Abscissae offsets t for one refinement level of the tanh-sinh rule."""
    h = 2.0 ** (-level)
    if level == 0:
        n = int(_T_MAX)
        return np.arange(-n, n + 1, dtype=float), h
    # odd multiples of h only; even ones were used by coarser levels
    k = np.arange(1, int(_T_MAX / h) + 1, 2, dtype=float)
    t = k * h
    return np.concatenate([-t[::-1], t]), h


def _rule(t: np.ndarray, half: float):
    """Map offsets t to (distance from a, distance from b, weight / h)."""
    v = 0.5 * math.pi * np.sinh(t)
    with np.errstate(over="ignore", under="ignore"):
        ea = np.exp(-2.0 * v)
        eb = np.exp(2.0 * v)
        da = 2.0 * half / (1.0 + ea)
        db = 2.0 * half / (1.0 + eb)
        # 1/cosh(v)^2 = 4 / (e^v + e^-v)^2, written to avoid overflow
        ev = np.exp(-np.abs(v))
        sech2 = 4.0 * ev * ev / (1.0 + ev * ev) ** 2
        w = half * 0.5 * math.pi * np.cosh(t) * sech2
    return da, db, w


def integrate(
    f: Callable,
    a: float,
    b: float,
    spec: QuadratureSpec = DEFAULT_QUAD,
    *,
    distances: bool = False,
) -> float:
    """Integrate ``f`` over the open interval (a, b) by tanh-sinh quadrature.

    ``f`` is called with numpy arrays.  With ``distances=True`` it is called as
    ``f(x, x - a, b - x)`` where both distances are computed without
    cancellation, so integrands with endpoint singularities can be evaluated
    accurately arbitrarily close to the endpoints.  Endpoints are never
    evaluated.

    Raises
    ------
    QuadratureError
        If successive levels do not agree within tolerance.
    """
    a = float(a)
    b = float(b)
    if not a < b:
        raise ValueError(f"integrate needs a < b, got a={a}, b={b}")
    half = 0.5 * (b - a)
    total = 0.0
    prev = None
    diff = math.inf
    for level in range(min(spec.max_levels, _MAX_HALVINGS) + 1):
        t, h = _level_nodes(level)
        da, db, w = _rule(t, half)
        keep = (da > 0) & (db > 0) & (w > 0)
        da, db, w = da[keep], db[keep], w[keep]
        # pick the endpoint-relative form with the smaller rounding error
        x = np.where(da <= db, a + da, b - db)
        if distances:
            vals = np.asarray(f(x, da, db), dtype=float)
        else:
            inside = (x > a) & (x < b)
            x, w = x[inside], w[inside]
            vals = np.asarray(f(x), dtype=float)
        contrib = float(np.sum(w * vals))
        if not math.isfinite(contrib):
            raise QuadratureError("integrand not finite at a quadrature node")
        total = total * 0.5 + contrib * h if level else contrib * h
        if prev is not None:
            diff = abs(total - prev)
            if level >= 3 and diff <= max(spec.abs_tol, spec.rel_tol * abs(total)):
                return total
        prev = total
    raise QuadratureError(
        f"tanh-sinh did not converge on [{a}, {b}]: last change {diff:.3e}"
    )


def find_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root of ``f`` in [lo, hi] by Brent's method (bisection/secant/IQI)."""
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if flo * fhi > 0:
        raise RootBracketError(f"no sign change on [{lo}, {hi}]: f={flo:.3e}, {fhi:.3e}")
    x = brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(min(max(x, lo), hi))


@dataclass(frozen=True)
class MonotoneTable:
    abscissae: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.abscissae, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("abscissae and values must be 1-D arrays of equal length")
        if x.size < 4:
            raise ValueError("a monotone table needs at least 4 samples")
        if not np.all(np.diff(x) > 0):
            raise ValueError("abscissae must be strictly increasing")
        dy = np.diff(y)
        if not (np.all(dy > 0) or np.all(dy < 0)):
            raise ValueError("values must be strictly monotone (no ties or flat runs)")
        object.__setattr__(self, "abscissae", x)
        object.__setattr__(self, "values", y)

    @property
    def increasing(self) -> bool:
        return bool(self.values[-1] > self.values[0])


def invert_monotone(
    table: MonotoneTable,
    forward: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    forward_prime: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Callable:
    """Evaluator of the inverse of a tabulated strictly monotone function.

    The inverse is interpolated with a monotone piecewise cubic.  When the
    forward map and its derivative are supplied, one Newton step against them
    is taken; steps leaving the bracketing table cell are discarded.
    """
    x, y = table.abscissae, table.values
    if not table.increasing:
        x, y = x[::-1], y[::-1]
    interp = PchipInterpolator(y, x, extrapolate=False)
    ylo, yhi = y[0], y[-1]
    span = yhi - ylo

    def inverse(q):
        q_arr = np.asarray(q, dtype=float)
        scalar = q_arr.ndim == 0
        q_arr = np.atleast_1d(q_arr)
        slack = 1e-14 * span
        if np.any(q_arr < ylo - slack) or np.any(q_arr > yhi + slack):
            raise ValueError(f"query outside value range [{ylo}, {yhi}]")
        q_arr = np.clip(q_arr, ylo, yhi)
        s = interp(q_arr)
        if forward is not None and forward_prime is not None:
            idx = np.clip(np.searchsorted(y, q_arr) - 1, 0, y.size - 2)
            lo = np.minimum(x[idx], x[idx + 1])
            hi = np.maximum(x[idx], x[idx + 1])
            with np.errstate(divide="ignore", invalid="ignore"):
                step = (forward(s) - q_arr) / forward_prime(s)
            cand = s - step
            ok = np.isfinite(cand) & (cand >= lo) & (cand <= hi)
            s = np.where(ok, cand, s)
        return float(s[0]) if scalar else s

    return inverse


def central_diff(f: Callable[[float], float], x: float, h: float) -> float:
    return (f(x + h) - f(x - h)) / (2.0 * h)
