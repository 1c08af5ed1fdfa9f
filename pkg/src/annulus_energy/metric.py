"""Radial conformal metrics rho(|w|) on annuli.

A metric is stored as a density ``rho(s)`` together with the first two
derivatives of ``log rho``.  Builtin families carry closed-form derivatives;
tabulated metrics interpolate ``log rho`` with a monotone piecewise cubic.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from scipy.interpolate import PchipInterpolator

from .numerics import DEFAULT_QUAD, QuadratureError, QuadratureSpec, integrate

__all__ = [
    "KINDS",
    "RadialMetric",
    "builtin",
    "tabulated",
    "from_spec",
    "load_metric",
    "gauss_curvature",
    "metric_area",
    "is_regular",
    "is_allowable",
]

KINDS = ("euclidean", "inverse", "sphere", "hyperbolic", "power", "tabulated")

# Polar Laplacian has a removable singularity at the origin; refuse below this.
MIN_CURVATURE_RADIUS = 1e-8
AREA_BLOWUP = 1e12
_SAMPLES = 4096


@dataclass(frozen=True)
class RadialMetric:
    kind: str
    params: Mapping = field(default_factory=dict)
    domain: tuple = (0.0, math.inf)
    _rho: Callable = field(default=None, repr=False, compare=False)
    _dlog: Callable = field(default=None, repr=False, compare=False)
    _d2log: Callable = field(default=None, repr=False, compare=False)

    def rho(self, s):
        return self._rho(np.asarray(s, dtype=float))

    def dlog_rho(self, s):
        return self._dlog(np.asarray(s, dtype=float))

    def d2log_rho(self, s):
        return self._d2log(np.asarray(s, dtype=float))

    def k(self, s):
        """Conformal radius function s * rho(s)."""
        s = np.asarray(s, dtype=float)
        return s * self._rho(s)

    def contains(self, lo: float, hi: float) -> bool:
        """True when [lo, hi] lies inside the open domain."""
        return self.domain[0] < lo and hi < self.domain[1]

    def scaled(self, lam: float) -> "RadialMetric":
        """The metric lam * rho (same log-derivatives)."""
        lam = float(lam)
        if not lam > 0:
            raise ValueError("scale factor must be positive")
        base = self._rho
        params = dict(self.params)
        params["scale"] = params.get("scale", 1.0) * lam
        return RadialMetric(
            self.kind, params, self.domain, lambda s: lam * base(s), self._dlog, self._d2log
        )

    def to_dict(self) -> dict:
        lo, hi = self.domain
        return {
            "kind": self.kind,
            "params": {k: (list(v) if isinstance(v, (list, tuple, np.ndarray)) else v)
                       for k, v in self.params.items()},
            "domain": [lo, hi if math.isfinite(hi) else None],
        }


def _zeros(s):
    return np.zeros_like(s)


def builtin(kind: str, params: Mapping | None = None, domain=None) -> RadialMetric:
    """Construct one of the closed-form density families.

    ``params`` may contain ``alpha`` (power kind) and ``scale`` (constant
    factor applied to rho for any kind).
    """
    params = dict(params or {})
    if kind == "tabulated":
        return tabulated(params["s"], params["rho"], scale=params.get("scale", 1.0))
    if kind not in KINDS:
        raise ValueError(f"unknown metric kind {kind!r}; expected one of {KINDS}")

    natural = (0.0, 1.0) if kind == "hyperbolic" else (0.0, math.inf)
    if domain is None:
        domain = natural
    lo, hi = (float(domain[0]), math.inf if domain[1] is None else float(domain[1]))
    if not lo < hi:
        raise ValueError(f"empty domain ({lo}, {hi})")
    if lo < natural[0] or hi > natural[1]:
        raise ValueError(f"domain ({lo}, {hi}) exceeds the natural domain {natural} of {kind}")

    if kind == "euclidean":
        rho = lambda s: np.ones_like(s)
        dlog = _zeros
        d2log = _zeros
    elif kind == "inverse":
        rho = lambda s: 1.0 / s
        dlog = lambda s: -1.0 / s
        d2log = lambda s: 1.0 / (s * s)
    elif kind == "sphere":
        rho = lambda s: 2.0 / (1.0 + s * s)
        dlog = lambda s: -2.0 * s / (1.0 + s * s)
        d2log = lambda s: -2.0 * (1.0 - s * s) / (1.0 + s * s) ** 2
    elif kind == "hyperbolic":
        rho = lambda s: 2.0 / (1.0 - s * s)
        dlog = lambda s: 2.0 * s / (1.0 - s * s)
        d2log = lambda s: 2.0 * (1.0 + s * s) / (1.0 - s * s) ** 2
    else:  # power
        if "alpha" not in params:
            raise ValueError("power metric needs params['alpha']")
        alpha = float(params["alpha"])
        params["alpha"] = alpha
        rho = lambda s: s**alpha
        dlog = lambda s: alpha / s
        d2log = lambda s: -alpha / (s * s)

    scale = float(params.get("scale", 1.0))
    if not scale > 0:
        raise ValueError("scale must be positive")
    if scale != 1.0:
        unscaled = rho
        rho = lambda s: scale * unscaled(s)
    return RadialMetric(kind, params, (lo, hi), rho, dlog, d2log)


def tabulated(s, rho, scale: float = 1.0) -> RadialMetric:
    """Metric from samples of rho; log rho is interpolated monotonically."""
    s = np.asarray(s, dtype=float)
    r = np.asarray(rho, dtype=float)
    if s.ndim != 1 or s.shape != r.shape or s.size < 2:
        raise ValueError("tabulated metric needs matching 1-D arrays of samples")
    if not np.all(np.diff(s) > 0):
        raise ValueError("tabulated abscissae must be strictly increasing")
    if not np.all(r > 0) or s[0] <= 0:
        raise ValueError("tabulated densities and radii must be strictly positive")
    logr = PchipInterpolator(s, np.log(r) + math.log(scale), extrapolate=True)
    d1 = logr.derivative(1)
    d2 = logr.derivative(2)
    params = {"s": s.tolist(), "rho": r.tolist()}
    if scale != 1.0:
        params["scale"] = float(scale)
    # closed sample range; widened by a hair so endpoint queries are accepted
    pad = 1e-12 * (s[-1] - s[0])
    return RadialMetric(
        "tabulated", params, (float(s[0]) - pad, float(s[-1]) + pad),
        lambda x: np.exp(logr(x)), d1, d2,
    )


def from_spec(spec: Mapping) -> RadialMetric:
    """Build a metric from its JSON object form."""
    unknown = set(spec) - {"kind", "params", "domain"}
    if unknown:
        raise ValueError(f"unknown metric keys: {sorted(unknown)}")
    if "kind" not in spec:
        raise ValueError("metric spec needs a 'kind'")
    return builtin(spec["kind"], spec.get("params"), spec.get("domain"))


def load_metric(ref: str) -> RadialMetric:
    """Resolve a metric from a builtin name, a JSON file or an ``s,rho`` CSV file."""
    if ref in KINDS and not Path(ref).exists():
        return builtin(ref)
    if ref.startswith("power:"):
        return builtin("power", {"alpha": float(ref.split(":", 1)[1])})
    path = Path(ref)
    if not path.exists():
        raise ValueError(f"no builtin metric or file named {ref!r}")
    if path.suffix.lower() == ".csv":
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["s", "rho"]:
                raise ValueError("metric CSV must have header 's,rho'")
            rows = [(float(row["s"]), float(row["rho"])) for row in reader]
        s, r = zip(*rows)
        return tabulated(s, r)
    return from_spec(json.loads(path.read_text()))


def gauss_curvature(metric: RadialMetric, s):
    """Gauss curvature -Laplacian(log rho) / rho^2 of a radial metric."""
    s_arr = np.asarray(s, dtype=float)
    lo, hi = metric.domain
    if np.any(s_arr <= lo) or np.any(s_arr >= hi):
        raise ValueError(f"radius outside metric domain {metric.domain}")
    if np.any(s_arr < MIN_CURVATURE_RADIUS):
        raise ValueError("curvature is not evaluated below s = 1e-8")
    lap = metric.d2log_rho(s_arr) + metric.dlog_rho(s_arr) / s_arr
    out = -lap / metric.rho(s_arr) ** 2
    return float(out) if out.ndim == 0 else out


def _area_density(metric):
    return lambda s: 2.0 * math.pi * s * metric.rho(s) ** 2


def _nested(f, anchor, end, toward_upper, spec):
    """Improper integral of f from anchor to a singular/infinite end.

    Integrates on nested pieces shrinking toward ``end``.  Returns +inf when
    the partial sums exceed AREA_BLOWUP, fail to settle within
    ``spec.max_levels`` pieces, or a piece can no longer be resolved.
    """
    total = 0.0
    prev_piece = None
    for level in range(spec.max_levels):
        if math.isinf(end):
            a, b = anchor * 2.0**level, anchor * 2.0 ** (level + 1)
        elif toward_upper:
            gap = end - anchor
            a, b = end - gap * 2.0**-level, end - gap * 2.0 ** -(level + 1)
        else:
            gap = anchor - end
            a, b = end + gap * 2.0 ** -(level + 1), end + gap * 2.0**-level
        try:
            piece = integrate(f, a, b, spec)
        except QuadratureError:
            # resolution lost next to a singular end: the integrand is exploding
            return math.inf
        total += piece
        if abs(total) > AREA_BLOWUP:
            return math.inf
        if prev_piece is not None and prev_piece != 0.0:
            ratio = piece / prev_piece
            tail = piece * ratio / (1.0 - ratio) if 0.0 <= ratio < 0.95 else math.inf
            if abs(tail) <= max(spec.abs_tol, spec.rel_tol * abs(total)):
                return total + tail
        elif piece == 0.0 and prev_piece == 0.0:
            return total
        prev_piece = piece
    return math.inf


def metric_area(metric: RadialMetric, delta: float, sigma: float,
                spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Area 2*pi*int_delta^sigma s rho(s)^2 ds of the annulus A(delta, sigma).

    Endpoints on the boundary of the metric domain (or at infinity) are treated
    as improper; the result is +inf when such an integral diverges.
    """
    delta, sigma = float(delta), float(sigma)
    if not delta < sigma:
        raise ValueError(f"metric_area needs delta < sigma, got {delta}, {sigma}")
    lo, hi = metric.domain
    if delta < lo or sigma > hi:
        raise ValueError(f"[{delta}, {sigma}] is outside the metric domain {metric.domain}")
    f = _area_density(metric)
    lower_improper = delta <= lo
    upper_improper = sigma >= hi or math.isinf(sigma)
    if not lower_improper and not upper_improper:
        return integrate(f, delta, sigma, spec)
    if math.isinf(sigma):
        mid = max(1.0, 2.0 * delta)
    else:
        mid = 0.5 * (delta + sigma)
    total = 0.0
    if lower_improper:
        total += _nested(f, mid, delta, False, spec)
    else:
        total += integrate(f, delta, mid, spec)
    if upper_improper:
        total += _nested(f, mid, sigma, True, spec)
    else:
        total += integrate(f, mid, sigma, spec)
    return total


def _interior_grid(metric, delta, sigma, n=_SAMPLES):
    lo = max(delta, metric.domain[0], MIN_CURVATURE_RADIUS)
    hi = min(sigma, metric.domain[1])
    eps = 1e-9 * (hi - lo)
    return np.linspace(lo + eps, hi - eps, n)


def _curvature_bounded(metric, grid) -> bool:
    kappa = gauss_curvature(metric, grid)
    return bool(np.all(np.isfinite(kappa)) and np.max(np.abs(kappa)) < 1e12)


def is_regular(metric: RadialMetric, delta: float, sigma: float) -> bool:
    """inf of s*rho(s) on (delta, sigma) is its limit at delta, with bounded curvature."""
    try:
        if not delta < sigma or math.isinf(sigma):
            return False
        grid = _interior_grid(metric, delta, sigma)
        k = metric.k(grid)
        if delta > metric.domain[0]:
            limit = float(metric.k(delta))
        else:
            limit = float(k[0])
        if not (np.all(np.isfinite(k)) and math.isfinite(limit)):
            return False
        if np.min(k) < limit * (1.0 - 1e-8):
            return False
        return _curvature_bounded(metric, grid)
    except (ValueError, ArithmeticError, QuadratureError):
        return False


def is_allowable(metric: RadialMetric, delta: float, sigma: float) -> bool:
    """Finite area and bounded Gauss curvature on A(delta, sigma)."""
    try:
        if not math.isfinite(metric_area(metric, delta, sigma)):
            return False
        hi = sigma if math.isfinite(sigma) else max(2.0 * delta, 1.0) * 1e3
        return _curvature_bounded(metric, _interior_grid(metric, delta, hi))
    except (ValueError, ArithmeticError, QuadratureError):
        return False
