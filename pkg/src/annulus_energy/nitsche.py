"""Radial rho-harmonic maps between annuli (the Nitsche family).

For a radial metric rho on A(delta, 1) write k(y) = y*rho(y).  The radial
rho-harmonic maps w(s e^{it}) = p(s) e^{it} satisfy the first integral

    rho(p)^2 (s^2 p'(s)^2 - p(s)^2) = gamma,

so the inverse profile q = p^{-1} solves q'/q = rho(y) / sqrt(k(y)^2 + gamma)
with q(1) = 1.  Real solutions need k^2 + gamma >= 0 on [delta, 1], i.e.
gamma >= gamma_floor = -min k^2.  The source modulus is

    tau(gamma) = int_delta^1 rho(y) dy / sqrt(k(y)^2 + gamma),

strictly decreasing in gamma, and the map's Hopf differential is gamma/(4 z^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .metric import RadialMetric
from .numerics import (
    DEFAULT_QUAD,
    MonotoneTable,
    QuadratureSpec,
    find_root,
    integrate,
    invert_monotone,
)

__all__ = [
    "BranchError",
    "FloorInfo",
    "CriticalData",
    "NitscheMap",
    "floor_info",
    "gamma_floor",
    "tau_of_gamma",
    "tau_critical",
    "solve_gamma",
    "build_map",
    "hopf_constant",
    "hopf_residual",
    "critical_data",
    "qc_constant",
    "pointwise_distortion",
]

N_FLOOR_SAMPLES = 4096
N_PROFILE = 1025
TAYLOR_RADIUS = 1e-5
ROOT_TOL = 1e-13
CRITICAL_REL = 1e-6
DISCREPANCY_REL = 1e-6

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


class BranchError(ValueError):
    """The requested modulus lies on the affine (non-diffeomorphic) branch."""


def _check_interval(metric: RadialMetric, delta: float):
    if not 0.0 < delta < 1.0:
        raise ValueError(f"inner radius must lie in (0, 1), got {delta}")
    lo, hi = metric.domain
    if not (lo < delta and 1.0 < hi):
        raise ValueError(f"[{delta}, 1] is not inside the metric domain {metric.domain}")


def _k2_derivs(metric: RadialMetric, y: float):
    """(k^2, d/dy k^2, d^2/dy^2 k^2) at y, from the log-derivatives of rho."""
    r = float(metric.rho(y))
    l1 = float(metric.dlog_rho(y))
    l2 = float(metric.d2log_rho(y))
    k = y * r
    k1 = r * (1.0 + y * l1)
    k2 = r * (2.0 * l1 + y * (l1 * l1 + l2))
    return k * k, 2.0 * k * k1, 2.0 * (k1 * k1 + k * k2)


@dataclass(frozen=True)
class FloorInfo:
    """Location and local shape of min k^2 on [delta, 1]."""

    gamma_floor: float
    y_star: float
    side: str  # "lo", "hi" or "interior"
    slope: float  # one-sided d/dy k^2 at y_star
    curv: float
    finite: bool  # whether critical integrals converge


def floor_info(metric: RadialMetric, delta: float) -> FloorInfo:
    _check_interval(metric, delta)
    ys = np.linspace(delta, 1.0, N_FLOOR_SAMPLES)
    k2 = metric.k(ys) ** 2
    i = int(np.argmin(k2))
    scale = float(np.max(k2))
    if i == 0 or i == ys.size - 1:
        y_star = float(ys[i])
    else:
        res = minimize_scalar(
            lambda y: float(metric.k(y)) ** 2,
            bounds=(ys[i - 1], ys[i + 1]),
            method="bounded",
            options={"xatol": 1e-14},
        )
        y_star = float(res.x)
    k2s, d1, d2 = _k2_derivs(metric, y_star)
    if i == 0:
        side = "lo"
    elif i == ys.size - 1:
        side = "hi"
    else:
        side = "interior"
    # a square-root endpoint singularity is integrable, anything flatter is not
    flat = abs(d1) * (1.0 - delta) <= 1e-10 * scale
    finite = side != "interior" and not flat
    return FloorInfo(-k2s, y_star, side, d1, d2, finite)


def gamma_floor(metric: RadialMetric, delta: float) -> float:
    """Least gamma with k(y)^2 + gamma >= 0 on [delta, 1].

    The degenerate interval delta = 1 is accepted and gives -k(1)^2.
    """
    if delta == 1.0 and metric.domain[0] < 1.0 < metric.domain[1]:
        return -float(metric.k(1.0)) ** 2
    return floor_info(metric, delta).gamma_floor


class _Radicand:
    """Evaluates k(y)^2 + gamma as (k^2 - k*^2) + dgam without cancellation."""

    def __init__(self, metric: RadialMetric, delta: float, info: FloorInfo):
        self.metric = metric
        self.delta = delta
        self.info = info
        self.k2_star = -info.gamma_floor

    def base(self, y, dist=None):
        """k(y)^2 - min k^2, >= 0.  ``dist`` is |y - y_star| when known exactly."""
        y = np.asarray(y, dtype=float)
        info = self.info
        direct = self.metric.k(y) ** 2 - self.k2_star
        if info.side == "interior":
            return np.maximum(direct, 0.0)
        if dist is None:
            dist = np.abs(y - info.y_star)
        signed = dist if info.side == "lo" else -dist
        taylor = info.slope * signed + 0.5 * info.curv * signed * signed
        near = dist < TAYLOR_RADIUS
        return np.maximum(np.where(near, taylor, direct), 0.0)

    def dist(self, y, da, db):
        if self.info.side == "lo":
            return da
        if self.info.side == "hi":
            return db
        return None


def _split_points(info: FloorInfo, delta: float):
    if info.side == "interior":
        return [delta, info.y_star, 1.0]
    return [delta, 1.0]


def _tau_dgam(metric, delta, info, dgam, spec=DEFAULT_QUAD) -> float:
    if dgam <= 0.0 and not info.finite:
        return math.inf
    rad = _Radicand(metric, delta, info)

    def f(y, da, db):
        if info.side == "interior":
            dist = None
        else:
            dist = rad.dist(y, da, db)
        return metric.rho(y) / np.sqrt(rad.base(y, dist) + dgam)

    pts = _split_points(info, delta)
    return sum(integrate(f, a, b, spec, distances=True) for a, b in zip(pts[:-1], pts[1:]))


def _energy_dgam(metric, delta, info, dgam, spec=DEFAULT_QUAD) -> float:
    if dgam <= 0.0 and not info.finite:
        return math.inf
    rad = _Radicand(metric, delta, info)

    def f(y, da, db):
        dist = None if info.side == "interior" else rad.dist(y, da, db)
        root = np.sqrt(rad.base(y, dist) + dgam)
        k2 = metric.k(y) ** 2
        # (gamma + 2k^2)/sqrt(k^2 + gamma) = sqrt(R) + k^2/sqrt(R)
        return metric.rho(y) * (root + k2 / root)

    pts = _split_points(info, delta)
    total = sum(integrate(f, a, b, spec, distances=True) for a, b in zip(pts[:-1], pts[1:]))
    return 2.0 * math.pi * total


def _dgam(info: FloorInfo, gamma: float) -> float:
    g0 = info.gamma_floor
    tol = 1e-14 * (1.0 + abs(g0))
    if gamma < g0 - tol:
        raise ValueError(f"gamma={gamma} is below the floor {g0}")
    return max(gamma - g0, 0.0)


def tau_of_gamma(metric: RadialMetric, delta: float, gamma: float) -> float:
    """Source modulus of the gamma-Nitsche map onto A(delta, 1); +inf if divergent."""
    info = floor_info(metric, delta)
    return _tau_dgam(metric, delta, info, _dgam(info, gamma))


def tau_critical(metric: RadialMetric, delta: float) -> float:
    info = floor_info(metric, delta)
    return _tau_dgam(metric, delta, info, 0.0)


def _solve_dgam(metric, delta, info, tau, tau_c) -> float:
    if not tau > 0:
        raise ValueError(f"source modulus must be positive, got {tau}")
    if tau >= tau_c - 1e-12:
        raise BranchError(
            f"tau={tau} is not below the critical modulus {tau_c}: "
            "no diffeomorphic Nitsche map exists (affine branch)"
        )
    g0 = info.gamma_floor
    eps = 1e-13 * (1.0 + abs(g0))
    F = lambda dg: _tau_dgam(metric, delta, info, dg) - tau
    lo = eps
    if F(lo) <= 0.0:
        # root lies within eps of the floor; tau_c is finite here
        return find_root(lambda dg: (_tau_dgam(metric, delta, info, dg) if dg > 0 else tau_c) - tau,
                         0.0, lo, ROOT_TOL * 1e-3)
    hi = max(1.0, 2.0 * abs(g0))
    while F(hi) > 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e30:
            raise ArithmeticError("could not bracket gamma")
    return find_root(F, lo, hi, ROOT_TOL)


def solve_gamma(metric: RadialMetric, delta: float, tau: float) -> float:
    """The unique gamma whose Nitsche map has source modulus tau."""
    info = floor_info(metric, delta)
    tau_c = _tau_dgam(metric, delta, info, 0.0)
    return info.gamma_floor + _solve_dgam(metric, delta, info, tau, tau_c)


@dataclass(frozen=True)
class NitscheMap:
    """Radial rho-harmonic map w(s e^{it}) = p(s) e^{it} from A(e^{-tau}, 1) onto A(delta, 1)."""

    metric: RadialMetric
    gamma: float
    delta: float
    tau: float
    q_table: MonotoneTable
    p: Callable = field(repr=False)
    p_prime: Callable = field(repr=False)
    gamma_floor: float = 0.0

    @property
    def r(self) -> float:
        return math.exp(-self.tau)

    def q(self, s):
        """Inverse profile, via the sampled table (exact at the samples)."""
        s_arr = np.asarray(s, dtype=float)
        tab = self.q_table
        return np.interp(s_arr, tab.abscissae, tab.values)

    def to_dict(self) -> dict:
        tab = self.q_table
        return {
            "gamma": self.gamma,
            "delta": self.delta,
            "tau": self.tau,
            "samples": [[float(a), float(b)] for a, b in zip(tab.abscissae, tab.values)],
        }


def _profile_grid(delta, info, dgam):
    w = np.linspace(0.0, 1.0, N_PROFILE)
    clustered = info.finite and dgam <= CRITICAL_REL * (1.0 + abs(info.gamma_floor))
    if clustered and info.side == "lo":
        s = delta + (1.0 - delta) * w * w
    elif clustered and info.side == "hi":
        s = 1.0 - (1.0 - delta) * (1.0 - w) ** 2
    else:
        s = delta + (1.0 - delta) * w
    s[0], s[-1] = delta, 1.0
    return s


def build_map(metric: RadialMetric, delta: float, gamma: float,
              spec: QuadratureSpec = DEFAULT_QUAD) -> NitscheMap:
    """Construct the gamma-Nitsche map onto A(delta, 1), normalized by w(e^{it}) = e^{it}."""
    info = floor_info(metric, delta)
    dgam = _dgam(info, gamma)
    if dgam <= 0.0 and not info.finite:
        raise ArithmeticError("profile integral diverges at this gamma")
    rad = _Radicand(metric, delta, info)

    def dlogq(y, dist=None):
        return metric.rho(y) / np.sqrt(rad.base(y, dist) + dgam)

    def ts_integrand_for(a, b):
        # exact distances only help on a panel that ends at the singular point
        if info.side == "lo" and a == info.y_star:
            return lambda y, da, db: dlogq(y, da)
        if info.side == "hi" and b == info.y_star:
            return lambda y, da, db: dlogq(y, db)
        return lambda y, da, db: dlogq(y)

    s = _profile_grid(delta, info, dgam)
    a, b = s[:-1], s[1:]
    stiff = np.zeros(a.size, dtype=bool)
    stiff[0] = stiff[-1] = True
    if info.side == "interior":
        stiff |= (a <= info.y_star) & (info.y_star <= b)

    def panel_integrals(a, b, stiff):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = half * (dlogq(nodes) @ _GL_W)
        for j in np.flatnonzero(stiff):
            if b[j] > a[j]:
                out[j] = integrate(ts_integrand_for(a[j], b[j]), a[j], b[j], spec,
                                   distances=True)
            else:
                out[j] = 0.0
        return out

    panels = panel_integrals(a, b, stiff)
    logq = np.concatenate([-np.cumsum(panels[::-1])[::-1], [0.0]])
    tau = -float(logq[0])
    if not math.isfinite(tau):
        raise ArithmeticError("profile integral diverges")
    table = MonotoneTable(s, np.exp(logq))
    logtab = MonotoneTable(s, logq)

    def forward(x):
        # log q at arbitrary s, integrating from the table node below
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(s, x, side="right") - 1, 0, s.size - 2)
        lo = s[idx]
        panel_stiff = stiff[idx] | (lo == x)
        return logq[idx] + panel_integrals(lo, x, panel_stiff & (x > lo))

    inv = invert_monotone(logtab, forward=forward, forward_prime=dlogq)

    def p(x):
        x_arr = np.asarray(x, dtype=float)
        out = inv(np.log(x_arr))
        return out

    def p_prime(x):
        x_arr = np.asarray(x, dtype=float)
        pv = np.asarray(p(x_arr), dtype=float)
        root = np.sqrt(rad.base(pv) + dgam)
        return root / (x_arr * metric.rho(pv))

    return NitscheMap(metric, float(gamma), float(delta), tau, table, p, p_prime,
                      info.gamma_floor)


def hopf_constant(nmap: NitscheMap) -> float:
    """c in Hopf(w) = c / z^2; equals gamma / 4."""
    return nmap.gamma / 4.0


def _fd_derivative(f, x, h):
    return (8.0 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12.0 * h)


def hopf_residual(nmap: NitscheMap, n_samples: int = 1000) -> float:
    """Max deviation of rho^2(p)(s^2 p'^2 - p^2)/4 from gamma/4 over interior samples.

    p' is taken by a fourth-order finite difference of p, so the check is
    independent of the closed-form derivative.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    r = nmap.r
    h = 1e-3 * (1.0 - r)
    s = np.linspace(r + 2.5 * h, 1.0 - 2.5 * h, n_samples)
    p = np.asarray(nmap.p(s))
    dp = _fd_derivative(nmap.p, s, h)
    hopf = nmap.metric.rho(p) ** 2 * (s * s * dp * dp - p * p) / 4.0
    c = nmap.gamma / 4.0
    return float(np.max(np.abs(hopf - c)) / (1.0 + abs(c)))


@dataclass(frozen=True)
class CriticalData:
    gamma_floor: float
    tau_critical: float
    psi_value: float
    discrepancy_flag: bool

    def to_dict(self) -> dict:
        return {
            "gamma_floor": self.gamma_floor,
            "tau_critical": self.tau_critical,
            "psi_value": self.psi_value,
            "discrepancy_flag": self.discrepancy_flag,
        }


def _psi_value(metric: RadialMetric, delta: float) -> float:
    """int_delta^1 rho(y) dy / sqrt(y^2 rho(y)^2 - delta^2 rho(delta)^2).

    NaN when the radicand turns negative inside the interval.
    """
    k2d, d1, d2 = _k2_derivs(metric, delta)
    ys = np.linspace(delta, 1.0, N_FLOOR_SAMPLES)[1:]
    scale = float(np.max(metric.k(ys) ** 2))
    if np.any(metric.k(ys) ** 2 - k2d < -1e-14 * scale):
        return math.nan
    anchored = FloorInfo(-k2d, delta, "lo", d1, d2,
                         abs(d1) * (1.0 - delta) > 1e-10 * scale)
    return _tau_dgam(metric, delta, anchored, 0.0)


def critical_data(metric: RadialMetric, delta: float) -> CriticalData:
    info = floor_info(metric, delta)
    tau_c = _tau_dgam(metric, delta, info, 0.0)
    psi = _psi_value(metric, delta)
    if math.isinf(tau_c) and math.isinf(psi):
        flag = False
    elif math.isnan(psi):
        flag = True
    else:
        flag = abs(tau_c - psi) > DISCREPANCY_REL * (1.0 + abs(psi))
    return CriticalData(info.gamma_floor, tau_c, psi, bool(flag))


def qc_constant(metric: RadialMetric, delta: float, gamma: float) -> float:
    """Quasiconformality constant of the gamma-Nitsche map; +inf at the floor."""
    g0 = gamma_floor(metric, delta)
    tol = 1e-14 * (1.0 + abs(g0))
    if gamma < g0 - tol:
        raise ValueError(f"gamma={gamma} is below the floor {g0}")
    if gamma <= g0:
        return math.inf
    a = (g0 - gamma) / g0
    return max(math.sqrt(a), math.sqrt(1.0 / a))


def pointwise_distortion(nmap: NitscheMap, s) -> np.ndarray:
    """max{sqrt(gamma + k(p)^2)/k(p), k(p)/sqrt(gamma + k(p)^2)} at source radii s."""
    p = np.asarray(nmap.p(np.asarray(s, dtype=float)))
    k = nmap.metric.k(p)
    root = np.sqrt(np.maximum(nmap.gamma + k * k, 0.0))
    with np.errstate(divide="ignore"):
        return np.maximum(root / k, k / root)
