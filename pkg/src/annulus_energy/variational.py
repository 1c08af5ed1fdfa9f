"""Direct minimization of the discretized rho-Dirichlet energy on a log-polar grid.

The source annulus A(e^{-tau}, 1) is the flat cylinder u = log|z| in [-tau, 0],
t in [0, 2*pi).  A map is stored as its log-modulus m = log|h| and angle
deviation theta - t at the grid nodes, so h = exp(m + i*theta) never vanishes
and has degree one by construction.  Writing phi = m + i*theta, the energy is

    E = int int k(|h|)^2 (|phi_u|^2 + |phi_t|^2) du dt,   k(s) = s*rho(s),

discretized at cell centres with differences taken from the four cell corners.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize as sp_minimize

from .metric import RadialMetric
from .nitsche import NitscheMap

__all__ = [
    "GridMap",
    "SolveOptions",
    "SolveReport",
    "DegenerateJacobianError",
    "init_power_stretch",
    "sample_nitsche",
    "discrete_energy",
    "gradient",
    "energy_split",
    "minimize",
    "hopf_field",
    "distortion_report",
    "harmonic_residual",
    "identity_check",
    "stationarity_checks",
    "energy_split_and_stretch_test",
    "prolong",
]

logger = logging.getLogger(__name__)

BOUNDARY_LAYER = 5
MIN_DIMS = (8, 16)


class DegenerateJacobianError(ArithmeticError):
    """Too many cells with nonpositive Jacobian for distortion quantities."""


@dataclass
class GridMap:
    n_u: int
    n_t: int
    tau: float
    omega: float
    m: np.ndarray
    theta_dev: np.ndarray

    def __post_init__(self):
        if self.n_u < MIN_DIMS[0] or self.n_t < MIN_DIMS[1]:
            raise ValueError(f"grid must be at least {MIN_DIMS[0]}x{MIN_DIMS[1]}")
        if not (self.tau > 0 and self.omega > 0):
            raise ValueError("moduli must be positive")
        self.m = np.asarray(self.m, dtype=float).reshape(self.n_u, self.n_t)
        self.theta_dev = np.asarray(self.theta_dev, dtype=float).reshape(self.n_u, self.n_t)

    @property
    def du(self) -> float:
        return self.tau / (self.n_u - 1)

    @property
    def dt(self) -> float:
        return 2.0 * math.pi / self.n_t

    @property
    def u(self) -> np.ndarray:
        return np.linspace(-self.tau, 0.0, self.n_u)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_t) * self.dt

    def copy(self) -> "GridMap":
        return GridMap(self.n_u, self.n_t, self.tau, self.omega, self.m.copy(),
                       self.theta_dev.copy())

    def impose(self) -> None:
        """Enforce the Dirichlet rows, the modulus box and the rotation gauge."""
        np.clip(self.m, -self.omega, 0.0, out=self.m)
        self.m[0, :] = -self.omega
        self.m[-1, :] = 0.0
        self.theta_dev -= self.theta_dev[-1, :].mean()

    def h(self) -> np.ndarray:
        return np.exp(self.m + 1j * (self.t[None, :] + self.theta_dev))

    def to_dict(self) -> dict:
        return {
            "n_u": self.n_u,
            "n_t": self.n_t,
            "tau": self.tau,
            "omega": self.omega,
            "m": self.m.ravel().tolist(),
            "theta_dev": self.theta_dev.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridMap":
        return cls(int(d["n_u"]), int(d["n_t"]), float(d["tau"]), float(d["omega"]),
                   np.asarray(d["m"]), np.asarray(d["theta_dev"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "GridMap":
        return cls.from_dict(json.loads(Path(path).read_text()))


def init_power_stretch(tau: float, omega: float, n_u: int, n_t: int) -> GridMap:
    """h0(s e^{it}) = s^{omega/tau} e^{it}."""
    u = np.linspace(-tau, 0.0, n_u)
    m = np.repeat((omega / tau * u)[:, None], n_t, axis=1)
    g = GridMap(n_u, n_t, tau, omega, m, np.zeros((n_u, n_t)))
    g.impose()
    return g


def sample_nitsche(nmap: NitscheMap, n_u: int, n_t: int) -> GridMap:
    """Nodal samples m(u) = log p(e^u) of a Nitsche map (no solve)."""
    u = np.linspace(-nmap.tau, 0.0, n_u)
    s = np.exp(u)
    s[0], s[-1] = nmap.r, 1.0
    m = np.log(np.asarray(nmap.p(s), dtype=float))
    omega = -math.log(nmap.delta)
    g = GridMap(n_u, n_t, nmap.tau, omega, np.repeat(m[:, None], n_t, axis=1),
                np.zeros((n_u, n_t)))
    g.impose()
    return g


def _cells(grid: GridMap):
    """Cell-centre values and differences of m and theta."""
    m, th = grid.m, grid.theta_dev
    du, dt = grid.du, grid.dt
    mA, mB = m[:-1], m[1:]
    mA1, mB1 = np.roll(mA, -1, axis=1), np.roll(mB, -1, axis=1)
    tA, tB = th[:-1], th[1:]
    tA1, tB1 = np.roll(tA, -1, axis=1), np.roll(tB, -1, axis=1)
    mbar = 0.25 * (mA + mB + mA1 + mB1)
    mu = ((mB + mB1) - (mA + mA1)) / (2.0 * du)
    mt = ((mA1 + mB1) - (mA + mB)) / (2.0 * dt)
    thu = ((tB + tB1) - (tA + tA1)) / (2.0 * du)
    # theta = t + theta_dev, and the wrap of t cancels in differences of theta_dev
    tht = 1.0 + ((tA1 + tB1) - (tA + tB)) / (2.0 * dt)
    thbar = 0.25 * (tA + tB + tA1 + tB1)
    return mbar, thbar, mu, mt, thu, tht


def _cell_centres(grid: GridMap):
    u_c = grid.u[:-1] + 0.5 * grid.du
    t_c = grid.t + 0.5 * grid.dt
    return u_c, t_c


def _weight(metric: RadialMetric, mbar):
    s = np.exp(mbar)
    k = s * metric.rho(s)
    return k * k, s


def discrete_energy(grid: GridMap, metric: RadialMetric) -> float:
    mbar, _, mu, mt, thu, tht = _cells(grid)
    w, _ = _weight(metric, mbar)
    dens = w * (mu * mu + thu * thu + mt * mt + tht * tht)
    return float(np.sum(dens) * grid.du * grid.dt)


def energy_split(grid: GridMap, metric: RadialMetric):
    """(normal energy, tangential energy) = (int rho^2 |h_N|^2, int rho^2 |h_T|^2)."""
    mbar, _, mu, mt, thu, tht = _cells(grid)
    w, _ = _weight(metric, mbar)
    a = grid.du * grid.dt
    return float(np.sum(w * (mu * mu + thu * thu)) * a), float(np.sum(w * (mt * mt + tht * tht)) * a)


def _energy_and_grad(grid: GridMap, metric: RadialMetric):
    """Energy and its gradient with respect to every nodal m and theta_dev."""
    du, dt = grid.du, grid.dt
    mbar, _, mu, mt, thu, tht = _cells(grid)
    s = np.exp(mbar)
    k = s * metric.rho(s)
    w = k * k
    q = mu * mu + thu * thu + mt * mt + tht * tht
    area = du * dt
    energy = float(np.sum(w * q) * area)

    # dW/dmbar = 2 k^2 (1 + s (log rho)'(s))
    dw = 2.0 * w * (1.0 + s * metric.dlog_rho(s))
    g_bar = 0.25 * dw * q * area
    cu = w * area / du  # d/d(corner) of w*(x_u)^2*area carries 2*x_u * (+-1/(2du))
    ct = w * area / dt
    gm_u, gm_t = cu * mu, ct * mt
    gt_u, gt_t = cu * thu, ct * tht

    def scatter(bar, gu, gt):
        out = np.zeros((grid.n_u, grid.n_t))
        # corner signs: A(i,j): (-,-), B(i+1,j): (+,-), A1(i,j+1): (-,+), B1(i+1,j+1): (+,+)
        a_ = bar - gu - gt
        b_ = bar + gu - gt
        a1 = bar - gu + gt
        b1 = bar + gu + gt
        out[:-1] += a_ + np.roll(a1, 1, axis=1)
        out[1:] += b_ + np.roll(b1, 1, axis=1)
        return out

    grad_m = scatter(g_bar, gm_u, gm_t)
    grad_th = scatter(np.zeros_like(g_bar), gt_u, gt_t)
    return energy, grad_m, grad_th


def gradient(grid: GridMap, metric: RadialMetric):
    """(dE/dm, dE/dtheta_dev); boundary rows of dE/dm and the gauge mode are zeroed."""
    _, gm, gt = _energy_and_grad(grid, metric)
    gm[0, :] = 0.0
    gm[-1, :] = 0.0
    gt = gt - gt.mean()
    return gm, gt


@dataclass
class SolveOptions:
    tol: float | None = None  # absolute gradient sup-norm; default 1e-8 * initial
    rel_tol: float = 1e-8
    max_iter: int = 20000
    stall_window: int = 50
    stall_rel: float = 1e-12
    coarse_to_fine: bool = True
    coarsest: tuple = (16, 32)
    random_init: bool = False
    seed: int = 0
    perturbation: float = 0.05


@dataclass
class SolveReport:
    energy: float
    iterations: int
    grad_norm: float
    converged: bool
    hopf_mean: complex
    hopf_rel_dev: float
    hopf_imag_frac: float
    kn_integral: float
    kt_integral: float
    orthogonality: float
    min_jacobian: float
    harmonic_residual: float
    identity_gap: float
    energy_history: list = field(default_factory=list, repr=False)
    stages: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def monotone(self) -> bool:
        h = np.asarray(self.energy_history)
        return bool(np.all(np.diff(h) <= 1e-13 * np.abs(h[:-1]))) if h.size > 1 else True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hopf_mean"] = [self.hopf_mean.real, self.hopf_mean.imag]
        d["energy_history"] = [float(x) for x in self.energy_history]
        d["monotone"] = self.monotone
        return d


def prolong(coarse: GridMap, n_u: int, n_t: int) -> GridMap:
    """Interpolate a grid map onto a finer grid (linear in u, periodic linear in t)."""
    u_c, u_f = coarse.u, np.linspace(-coarse.tau, 0.0, n_u)
    t_c = coarse.t
    t_f = np.arange(n_t) * (2.0 * math.pi / n_t)

    def interp(field):
        rows = np.array([np.interp(u_f, u_c, field[:, j]) for j in range(coarse.n_t)]).T
        ext_t = np.concatenate([t_c, [2.0 * math.pi]])
        return np.array([np.interp(t_f, ext_t, np.concatenate([r, r[:1]])) for r in rows])

    g = GridMap(n_u, n_t, coarse.tau, coarse.omega, interp(coarse.m), interp(coarse.theta_dev))
    g.impose()
    return g


def _solve_level(grid: GridMap, metric: RadialMetric, opts: SolveOptions, history: list):
    n_u, n_t = grid.n_u, grid.n_t
    ni = (n_u - 2) * n_t
    omega = grid.omega
    m_fixed = grid.m.copy()

    def unpack(x):
        m = m_fixed.copy()
        m[1:-1] = x[:ni].reshape(n_u - 2, n_t)
        return m, x[ni:].reshape(n_u, n_t)

    work = grid.copy()

    def fun(x):
        work.m, work.theta_dev = unpack(x)
        e, gm, gt = _energy_and_grad(work, metric)
        return e, np.concatenate([gm[1:-1].ravel(), gt.ravel()])

    x0 = np.concatenate([grid.m[1:-1].ravel(), grid.theta_dev.ravel()])
    bounds = [(-omega, 0.0)] * ni + [(None, None)] * (n_u * n_t)
    e0, g0 = fun(x0)
    gtol = opts.tol if opts.tol is not None else opts.rel_tol * float(np.max(np.abs(g0)))
    local = [e0]

    def callback(intermediate_result):
        local.append(float(intermediate_result.fun))
        w = opts.stall_window
        if len(local) > w:
            old, new = local[-w - 1], local[-1]
            if abs(old - new) <= opts.stall_rel * abs(new):
                raise StopIteration

    res = sp_minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds, callback=callback,
                      options={"maxiter": opts.max_iter, "gtol": gtol, "ftol": 0.0,
                               "maxcor": 20, "maxls": 40})
    out = grid.copy()
    out.m, out.theta_dev = unpack(res.x)
    out.impose()
    e, gm, gt = _energy_and_grad(out, metric)
    gm[0, :] = gm[-1, :] = 0.0
    # projected gradient: components pushing against an active bound do not count
    at_lo = (out.m <= -omega) & (gm > 0)
    at_hi = (out.m >= 0.0) & (gm < 0)
    gm = np.where(at_lo | at_hi, 0.0, gm)
    gnorm = float(max(np.max(np.abs(gm)), np.max(np.abs(gt - gt.mean()))))
    stalled = len(local) > opts.stall_window and abs(local[-opts.stall_window - 1] - local[-1]) <= opts.stall_rel * abs(local[-1])
    converged = gnorm <= gtol * 1.0001 or stalled or res.status == 0
    history.extend(local)
    return out, e, gnorm, int(res.nit), bool(converged and res.nit < opts.max_iter)


def minimize(grid: GridMap, metric: RadialMetric, opts: SolveOptions | None = None):
    """Minimize the discrete energy starting from ``grid``.

    Returns ``(grid, report)``.  With ``coarse_to_fine`` the problem is first
    solved on successively halved grids and the result prolonged as the
    starting point, which leaves the fine-level contract unchanged.
    """
    opts = opts or SolveOptions()
    start = time.perf_counter()
    work = grid.copy()
    if opts.random_init:
        rng = np.random.default_rng(opts.seed)
        amp = opts.perturbation
        work.m[1:-1] += amp * grid.omega * rng.standard_normal(work.m[1:-1].shape)
        work.theta_dev += amp * rng.standard_normal(work.theta_dev.shape)
    work.impose()

    stages = []
    if opts.coarse_to_fine:
        dims = []
        nu, nt = grid.n_u, grid.n_t
        while nu // 2 >= opts.coarsest[0] and nt // 2 >= opts.coarsest[1]:
            nu, nt = nu // 2, nt // 2
            dims.append((nu, nt))
        current = None
        for nu, nt in reversed(dims):
            if current is None:
                current = init_power_stretch(grid.tau, grid.omega, nu, nt)
                # carry the caller's starting map down to the coarsest level
                current.m = np.array([np.interp(current.u, work.u, work.m[:, j * work.n_t // nt])
                                      for j in range(nt)]).T
                current.impose()
            else:
                current = prolong(current, nu, nt)
            current, e, gn, it, ok = _solve_level(current, metric, opts, [])
            stages.append({"dims": [nu, nt], "energy": e, "iterations": it, "grad_norm": gn})
            logger.info("level %dx%d: E=%.12g it=%d |g|=%.3e", nu, nt, e, it, gn)
        if current is not None:
            work = prolong(current, grid.n_u, grid.n_t)
            if opts.random_init:
                rng = np.random.default_rng(opts.seed + 1)
                work.theta_dev += 1e-3 * rng.standard_normal(work.theta_dev.shape)
                work.impose()

    history: list = []
    final, e, gnorm, iters, ok = _solve_level(work, metric, opts, history)
    stages.append({"dims": [grid.n_u, grid.n_t], "energy": e, "iterations": iters,
                   "grad_norm": gnorm})
    logger.info("final %dx%d: E=%.12g it=%d |g|=%.3e", grid.n_u, grid.n_t, e, iters, gnorm)

    report = _report(final, metric, e, iters, gnorm, ok, history, stages,
                     time.perf_counter() - start)
    return final, report


def _report(grid, metric, energy, iters, gnorm, ok, history, stages, wall):
    hopf = hopf_field(grid, metric)
    try:
        dist = distortion_report(grid)
        kn, kt, orth, minj = dist["kn_integral"], dist["kt_integral"], dist["orthogonality"], dist["min_jacobian"]
        gap = identity_check(grid, metric)
    except DegenerateJacobianError:
        kn = kt = orth = gap = math.nan
        minj = float(np.min(_jacobian_cyl(grid)))
    return SolveReport(
        energy=energy, iterations=iters, grad_norm=gnorm, converged=ok,
        hopf_mean=hopf["mean"], hopf_rel_dev=hopf["rel_dev"], hopf_imag_frac=hopf["imag_frac"],
        kn_integral=kn, kt_integral=kt, orthogonality=orth, min_jacobian=minj,
        harmonic_residual=harmonic_residual(grid, metric), identity_gap=gap,
        energy_history=history, stages=stages, wall_time=wall,
    )


def _interior_rows(n_cells_u: int):
    b = min(BOUNDARY_LAYER, max((n_cells_u - 1) // 2, 0))
    return slice(b, n_cells_u - b)


def hopf_field(grid: GridMap, metric: RadialMetric) -> dict:
    """z^2 * Hopf(h) per cell and its statistics away from the boundary circles.

    With h_u = h*phi_u, h_t = h*phi_t one has
    z^2 rho^2(h) h_z conj(h_zbar) = k(|h|)^2 (phi_u - i phi_t)(conj(phi_u) - i conj(phi_t)) / 4.
    """
    mbar, _, mu, mt, thu, tht = _cells(grid)
    w, _ = _weight(metric, mbar)
    pu = mu + 1j * thu
    pt = mt + 1j * tht
    field_ = 0.25 * w * (pu - 1j * pt) * (np.conj(pu) - 1j * np.conj(pt))
    inner = field_[_interior_rows(field_.shape[0])]
    mean = complex(np.mean(inner))
    spread = float(np.sqrt(np.mean(np.abs(inner - mean) ** 2)))
    rms = float(np.sqrt(np.mean(np.abs(inner) ** 2)))
    rel = spread / abs(mean) if mean != 0 else math.inf
    imag = float(np.sqrt(np.mean(inner.imag ** 2))) / rms if rms > 0 else 0.0
    return {"field": field_, "mean": mean, "rel_dev": rel, "imag_frac": imag,
            "max_abs": float(np.max(np.abs(inner)))}


def _jacobian_cyl(grid: GridMap):
    """Im(conj(h_u) h_t) / |h|^2 = m_u theta_t - theta_u m_t."""
    _, _, mu, mt, thu, tht = _cells(grid)
    return mu * tht - thu * mt


def distortion_report(grid: GridMap) -> dict:
    """Normal/tangential distortion integrals and Hopf-orthogonality diagnostics.

    K_N = |h_N|^2/J and K_T = |h_T|^2/J are conformally invariant ratios;
    int K dz/|z|^2 becomes a plain sum over cells in cylinder coordinates.
    """
    mbar, _, mu, mt, thu, tht = _cells(grid)
    jac = mu * tht - thu * mt
    bad = jac <= 0
    frac = float(np.mean(bad))
    if frac > 0.01:
        raise DegenerateJacobianError(f"{frac:.1%} of cells have nonpositive Jacobian")
    a = grid.du * grid.dt
    n2 = mu * mu + thu * thu
    t2 = mt * mt + tht * tht
    good = ~bad
    kn = float(np.sum(n2[good] / jac[good]) * a)
    kt = float(np.sum(t2[good] / jac[good]) * a)
    # Re(conj(h_N) h_T) and J carry the same factor |h|^2/|z|^2
    scale = np.exp(2.0 * mbar - 2.0 * _cell_centres(grid)[0][:, None])
    re = (mu * mt + thu * tht) * scale
    jj = jac * scale
    inner = _interior_rows(jac.shape[0])
    orth = float(np.sqrt(np.mean(re[inner] ** 2)) / np.sqrt(np.mean(jj[inner] ** 2)))
    prod = np.sqrt(n2 * t2) * scale
    prod_gap = float(np.max(np.abs(jj[inner] - prod[inner])) / np.max(np.abs(jj[inner])))
    return {
        "kn_integral": kn,
        "kt_integral": kt,
        "orthogonality": orth,
        "product_gap": prod_gap,
        "min_jacobian": float(np.min(jj)),
        "bad_cells": int(np.sum(bad)),
    }


def stationarity_checks(grid: GridMap, metric: RadialMetric, c: float) -> dict:
    """Pointwise consequences of Hopf(h) = c/z^2 on interior cells.

    ``tangential_excess``: max(|h_T|^2 - J)/max J (should be <= 0 when c >= 0);
    ``normal_excess``: same with h_N (c <= 0);
    ``gradient_ratio``: min |Dh|^2 * rho0^2 / (4|c|) with rho0 = sup rho on the
    target (should be >= 1 since |z| <= 1).
    """
    mbar, _, mu, mt, thu, tht = _cells(grid)
    u_c = _cell_centres(grid)[0][:, None]
    scale = np.exp(2.0 * mbar - 2.0 * u_c)
    jac = (mu * tht - thu * mt) * scale
    n2 = (mu * mu + thu * thu) * scale
    t2 = (mt * mt + tht * tht) * scale
    inner = _interior_rows(jac.shape[0])
    jmax = float(np.max(jac[inner]))
    ys = np.linspace(math.exp(-grid.omega), 1.0, 2049)
    rho0 = float(np.max(metric.rho(ys)))
    grad2 = n2 + t2
    ratio = float(np.min(grad2[inner]) * rho0 ** 2 / (4.0 * abs(c))) if c != 0 else math.inf
    return {
        "tangential_excess": float(np.max(t2[inner] - jac[inner]) / jmax),
        "normal_excess": float(np.max(n2[inner] - jac[inner]) / jmax),
        "gradient_ratio": ratio,
    }


def harmonic_residual(grid: GridMap, metric: RadialMetric) -> float:
    """Normalized residual of the rho-harmonic map equation at interior nodes.

    With phi = m + i*theta the equation h_{z zbar} + (log rho^2)_w(h) h_z h_zbar = 0
    becomes  Laplacian(phi) + kappa(|h|) (phi_u^2 + phi_t^2) = 0,  kappa = 1 + s (log rho)'(s).
    The scale is max|Laplacian(phi)| + max(|phi_u|^2 + |phi_t|^2) over the free nodes.
    """
    m, th = grid.m, grid.theta_dev
    du, dt = grid.du, grid.dt
    phi = m + 1j * th
    up = np.roll(phi, -1, axis=1)
    dn = np.roll(phi, 1, axis=1)
    c = phi[1:-1]
    lap = ((phi[2:] - 2 * c + phi[:-2]) / du ** 2
           + (up[1:-1] - 2 * c + dn[1:-1]) / dt ** 2)
    pu = (phi[2:] - phi[:-2]) / (2 * du)
    pt = 1j + (up[1:-1] - dn[1:-1]) / (2 * dt)
    s = np.exp(m[1:-1])
    kappa = 1.0 + s * metric.dlog_rho(s)
    quad = kappa * (pu * pu + pt * pt)
    res = np.abs(lap + quad)
    # nodes on a collapsed collar (modulus pinned at the inner circle) and their
    # neighbours are not governed by the equation
    pinned = m <= -grid.omega + 1e-9
    near = pinned[1:-1] | pinned[2:] | pinned[:-2]
    near = near | np.roll(near, 1, axis=1) | np.roll(near, -1, axis=1)
    free = ~near
    if not free.any():
        return 0.0
    scale = np.max(np.abs(lap[free])) + np.max(np.abs(pu[free]) ** 2 + np.abs(pt[free]) ** 2)
    return float(np.max(res[free]) / scale)


def identity_check(grid: GridMap, metric: RadialMetric) -> float:
    """Relative gap between 2*||K_g||_{L^1(mu)} and the energy of h, g = h^{-1}.

    Each source cell is pushed forward: K_g at h(z) is computed from the
    inverse differential Dg = (Dh)^{-1}, and the target area element is
    J_h dA(z).
    """
    mbar, thbar, mu, mt, thu, tht = _cells(grid)
    u_c, t_c = _cell_centres(grid)
    jac = mu * tht - thu * mt
    if float(np.mean(jac <= 0)) > 0.01:
        raise DegenerateJacobianError("nonpositive Jacobian on more than 1% of cells")
    s = np.exp(u_c)[:, None]
    ang = t_c[None, :]
    hc = np.exp(mbar + 1j * (ang + thbar))
    h_n = hc * (mu + 1j * thu) / s
    h_t = hc * (mt + 1j * tht) / s
    cos, sin = np.cos(ang), np.sin(ang)
    hx = cos * h_n - sin * h_t
    hy = sin * h_n + cos * h_t
    a, b, c, d = hx.real, hy.real, hx.imag, hy.imag
    det = a * d - b * c
    # inverse matrix entries (d, -b; -c, a)/det
    frob_inv = (a * a + b * b + c * c + d * d) / det ** 2
    det_inv = 1.0 / det
    k_g = frob_inv / (2.0 * det_inv)
    rho2 = metric.rho(np.abs(hc)) ** 2
    dA = s * s * grid.du * grid.dt
    norm = float(np.sum(np.where(det > 0, rho2 * k_g * det * dA, 0.0)))
    energy = discrete_energy(grid, metric)
    return abs(2.0 * norm - energy) / energy


def energy_split_and_stretch_test(grid: GridMap, metric: RadialMetric, alpha: float) -> dict:
    """Compose with the power stretch |z|^{alpha-1} z and compare energy splits.

    The composed map lives on A(e^{-tau/alpha}, 1) with the same nodal values,
    i.e. u' = u/alpha.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    en, et = energy_split(grid, metric)
    stretched = GridMap(grid.n_u, grid.n_t, grid.tau / alpha, grid.omega,
                        grid.m.copy(), grid.theta_dev.copy())
    en2, et2 = energy_split(stretched, metric)
    rn = en2 / en if en else math.nan
    rt = et2 / et if et else math.nan
    return {
        "alpha": alpha,
        "normal_before": en, "tangential_before": et,
        "normal_after": en2, "tangential_after": et2,
        "normal_ratio": rn, "tangential_ratio": rt,
        "normal_ratio_error": abs(rn - alpha),
        "tangential_ratio_error": abs(rt - 1.0 / alpha),
    }
