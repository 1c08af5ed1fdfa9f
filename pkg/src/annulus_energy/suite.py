"""Invariant suite behind the ``verify`` command.

Every check reduces to a measured error that must be strictly below a pinned
tolerance, so a single injected tolerance can override the whole suite (and an
injected zero fails every check).  Pass/fail and count checks use tolerance 0.5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import energy as en
from . import metric as mt
from . import nitsche as ns
from . import numerics as nu
from . import variational as va

MODULES = ("numerics", "metric", "nitsche", "energy", "variational")
LOG2 = math.log(2.0)


@dataclass
class Check:
    module: str
    ident: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error)) and self.error < self.tol

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.module}.{self.ident} measured={self.error:.6e} tol={self.tol:.3e}"


def _rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a - b)


def _flag(ok: bool) -> float:
    return 0.0 if ok else 1.0


def allowable_configs():
    """(name, metric) pairs used throughout; all on A(0.5, 1)."""
    return [
        ("euclidean", mt.builtin("euclidean")),
        ("inverse", mt.builtin("inverse")),
        ("sphere", mt.builtin("sphere")),
        ("power1", mt.builtin("power", {"alpha": 1.0})),
    ]


def numerics_checks(tolerance: float | None = None):
    out = []
    spec = nu.DEFAULT_QUAD if tolerance is None else nu.QuadratureSpec(tolerance, tolerance)

    def quad(*a, **kw):
        try:
            return nu.integrate(*a, spec=spec, **kw)
        except nu.QuadratureError:
            return math.inf

    v = quad(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0)
    out.append(("quadrature_sqrt_endpoint", abs(v - 2.0), 1e-10))
    v = quad(lambda x: np.log(x), 0.0, 1.0)
    out.append(("quadrature_log_endpoint", abs(v + 1.0), 1e-10))
    v = quad(lambda x, da, db: 1.0 / np.sqrt(da * db), 0.0, 1.0, distances=True)
    out.append(("quadrature_arcsine_distances", abs(v - math.pi), 1e-10))
    v = quad(np.exp, 0.0, 1.0)
    out.append(("quadrature_smooth", abs(v - (math.e - 1.0)), 1e-12))
    r = nu.find_root(np.cos, 0.0, 3.0)
    out.append(("root_cosine", abs(r - math.pi / 2), 1e-12))
    x = np.linspace(0.0, 2.0, 65)
    inv = nu.invert_monotone(nu.MonotoneTable(x, np.exp(x)), np.exp, np.exp)
    q = np.linspace(1.0, math.exp(2.0), 101)
    out.append(("monotone_inverse_roundtrip", float(np.max(np.abs(inv(q) - np.log(q)))), 1e-10))
    return out


def metric_checks():
    out = []
    sphere = mt.builtin("sphere")
    out.append(("sphere_area_plane", _rel(mt.metric_area(sphere, 0.0, math.inf), 4 * math.pi), 1e-8))
    s = np.linspace(0.05, 3.0, 100)
    out.append(("sphere_curvature", float(np.max(np.abs(mt.gauss_curvature(sphere, s) - 1.0))), 1e-10))
    hyp = mt.builtin("hyperbolic")
    s = np.linspace(0.05, 0.95, 100)
    out.append(("hyperbolic_curvature", float(np.max(np.abs(mt.gauss_curvature(hyp, s) + 1.0))), 1e-10))
    out.append(("hyperbolic_not_allowable", _flag(not mt.is_allowable(hyp, 0.5, 1.0)), 0.5))
    inv = mt.builtin("inverse")
    out.append(("inverse_area", _rel(mt.metric_area(inv, 0.5, 1.0), 2 * math.pi * LOG2), 1e-10))
    e = mt.builtin("euclidean")
    lam = 3.0
    a1 = mt.metric_area(e.scaled(lam), 0.5, 1.0)
    out.append(("area_homogeneity", _rel(a1, lam * lam * mt.metric_area(e, 0.5, 1.0)), 1e-12))
    for name, m in allowable_configs():
        out.append((f"allowable_{name}", _flag(mt.is_allowable(m, 0.5, 1.0)), 0.5))
    return out


def nitsche_checks(seed: int = 0):
    out = []
    rng = np.random.default_rng(seed)
    delta = 0.5
    g = ns.solve_gamma(mt.builtin("euclidean"), delta, math.log(1 / 0.6))
    out.append(("euclidean_gamma_oracle", _rel(g, -4 * 1.09375 * -0.09375), 1e-8))
    for name, m in allowable_configs():
        g0 = ns.gamma_floor(m, delta)
        tc = ns.tau_critical(m, delta)
        # strict monotonicity on random pairs
        pairs = g0 + np.sort(rng.uniform(1e-3, 3.0, size=(50, 2)), axis=1)
        bad = sum(ns.tau_of_gamma(m, delta, a) <= ns.tau_of_gamma(m, delta, b)
                  for a, b in pairs if a < b)
        out.append((f"{name}.tau_monotone", float(bad), 0.5))
        top = min(0.99 * tc, 5.0)
        taus = rng.uniform(0.01, top, size=50)
        err = max(abs(ns.tau_of_gamma(m, delta, ns.solve_gamma(m, delta, t)) - t) for t in taus)
        out.append((f"{name}.round_trip", err, 1e-9))
        norm = hopf = qcd = 0.0
        for t in np.linspace(0.1, top, 4):
            gam = ns.solve_gamma(m, delta, t)
            nm = ns.build_map(m, delta, gam)
            norm = max(norm, abs(nm.p(nm.r) - delta), abs(nm.p(1.0) - 1.0))
            hopf = max(hopf, ns.hopf_residual(nm, 1000))
            sup = float(np.max(ns.pointwise_distortion(nm, np.linspace(nm.r, 1.0, 1000))))
            qcd = max(qcd, _rel(sup, ns.qc_constant(m, delta, gam)))
        out.append((f"{name}.boundary_normalization", norm, 1e-9))
        out.append((f"{name}.hopf_residual", hopf, 1e-6))
        out.append((f"{name}.qc_supremum", qcd, 1e-2))
    cd = ns.critical_data(mt.builtin("euclidean"), delta)
    out.append(("euclidean_tau_critical", _rel(cd.tau_critical, math.log(2 + math.sqrt(3))), 1e-8))
    out.append(("euclidean_psi_agrees", _flag(not cd.discrepancy_flag), 0.5))
    return out


def energy_checks():
    out = []
    omega = LOG2
    for name, m in allowable_configs():
        model = en.EnergyModel(m, omega)
        a = model.area
        out.append((f"{name}.conformal_floor", _rel(model.energy(omega), 2 * a), 1e-8))
        top = min(model.tau_critical * 1.5, 3.0) if math.isfinite(model.tau_critical) else 3.0
        grid = np.linspace(0.2, top, 31)
        prof = en.profile(m, omega, grid)
        lo_viol = float(np.max(np.maximum(2 * a - prof.energy, 0.0)) / a)
        out.append((f"{name}.lower_bound", lo_viol, 1e-12))
        up = (omega / grid + grid / omega) * a
        out.append((f"{name}.upper_bound", float(np.max(np.maximum(prof.energy - up, 0.0)) / a), 1e-12))
        pts = np.linspace(0.25, top * 0.98, 20)
        h = 1e-4
        fd = max(_rel((model.energy(t + h) - model.energy(t - h)) / (2 * h), model.slope(t))
                 if abs(model.slope(t)) > 1e-3 else abs((model.energy(t + h) - model.energy(t - h)) / (2 * h) - model.slope(t))
                 for t in pts if abs(t - model.tau_critical) > 2 * h)
        out.append((f"{name}.slope_identity", fd, 1e-4))
        v = prof.verdicts()
        out.append((f"{name}.convex_nitsche", _flag(v["convex_on_nitsche_branch"]), 0.5))
        out.append((f"{name}.affine_flat", _flag(v["affine_beyond_critical"]), 0.5))
        out.append((f"{name}.monotone", _flag(v["decreasing_below_omega"] and v["increasing_above_omega"]), 0.5))
        nit = np.array([b == "nitsche" for b in prof.branch])
        gam = prof.gamma[nit]
        out.append((f"{name}.gamma_decreasing", _flag(bool(np.all(np.diff(gam) < 0))), 0.5))
        if math.isfinite(model.tau_critical):
            tc = model.tau_critical
            jump = abs(model.slope(tc - 1e-9) - model.slope(tc + 1e-9))
            out.append((f"{name}.slope_c1", jump, 1e-6))
    return out


VARIATIONAL_CASES = (
    ("euclidean", mt.builtin("euclidean"), math.log(1 / 0.6), LOG2),
    ("sphere", mt.builtin("sphere"), 0.6, LOG2),
    ("power1", mt.builtin("power", {"alpha": 1.0}), 1.0, LOG2),
)


def variational_checks(grid=(128, 256)):
    out = []
    rng = np.random.default_rng(1)
    # analytic gradient against central differences along random directions
    m = mt.builtin("sphere")
    g = va.init_power_stretch(0.6, LOG2, 12, 24)
    g.m[1:-1] += 0.05 * rng.standard_normal(g.m[1:-1].shape)
    g.theta_dev += 0.05 * rng.standard_normal(g.theta_dev.shape)
    gm, gt = va.gradient(g, m)
    worst = 0.0
    for _ in range(20):
        dm = rng.standard_normal(g.m.shape)
        dm[0] = dm[-1] = 0.0
        dth = rng.standard_normal(g.theta_dev.shape)
        eps = 1e-6
        gp, gn = g.copy(), g.copy()
        gp.m += eps * dm
        gp.theta_dev += eps * dth
        gn.m -= eps * dm
        gn.theta_dev -= eps * dth
        fd = (va.discrete_energy(gp, m) - va.discrete_energy(gn, m)) / (2 * eps)
        an = float(np.sum(gm * dm) + np.sum(gt * (dth - dth.mean())))
        worst = max(worst, _rel(an, fd))
    out.append(("gradient_directional", worst, 1e-6))

    for name, metric, tau, omega in VARIATIONAL_CASES:
        ref = en.min_energy(metric, omega, tau)
        gam = en.EnergyModel(metric, omega).gamma(tau)
        coarse, rc = va.minimize(va.init_power_stretch(tau, omega, grid[0] // 2, grid[1] // 2), metric)
        fine, rep = va.minimize(va.init_power_stretch(tau, omega, *grid), metric)
        e_c, e_f = _rel(rc.energy, ref), _rel(rep.energy, ref)
        out.append((f"{name}.energy_oracle", e_f, 5e-3))
        out.append((f"{name}.refinement_ratio", e_f / e_c if e_c else 0.0, 0.35))
        out.append((f"{name}.converged", _flag(rep.converged), 0.5))
        out.append((f"{name}.descent", _flag(rep.monotone), 0.5))
        out.append((f"{name}.hopf_rel_dev", rep.hopf_rel_dev, 2e-2))
        out.append((f"{name}.hopf_imag_frac", rep.hopf_imag_frac, 2e-2))
        out.append((f"{name}.hopf_mean", _rel(rep.hopf_mean.real, gam / 4), 3e-2))
        out.append((f"{name}.hopf_sign", _flag((rep.hopf_mean.real > 0) == (tau < omega)), 0.5))
        out.append((f"{name}.reich_walczak_normal",
                     max(0.0, 1.0 - rep.kn_integral / (2 * math.pi * omega)), 2e-2))
        out.append((f"{name}.reich_walczak_tangential",
                     max(0.0, 1.0 - rep.kt_integral / (2 * math.pi * tau ** 2 / omega)), 2e-2))
        out.append((f"{name}.identity_gap", rep.identity_gap, 5e-3))
        out.append((f"{name}.orthogonality", rep.orthogonality, 1e-2))
        out.append((f"{name}.jacobian_positive", _flag(rep.min_jacobian > 0), 0.5))
        out.append((f"{name}.harmonic_residual", rep.harmonic_residual, 5e-3))
        st = va.stationarity_checks(fine, metric, gam / 4)
        excess = st["tangential_excess"] if tau < omega else st["normal_excess"]
        out.append((f"{name}.pointwise_bound", max(excess, 0.0), 1e-2))
        out.append((f"{name}.gradient_bound", max(0.0, 1.0 - st["gradient_ratio"]), 2e-2))
        sr = va.energy_split_and_stretch_test(fine, metric, 2.0)
        out.append((f"{name}.stretch_law", max(sr["normal_ratio_error"], sr["tangential_ratio_error"]), 1e-3))
        nm = ns.build_map(metric, math.exp(-omega), gam)
        sampled = va.sample_nitsche(nm, *grid)
        out.append((f"{name}.sampled_hopf", va.hopf_field(sampled, metric)["rel_dev"], 5e-3))
        out.append((f"{name}.sampled_identity", va.identity_check(sampled, metric), 5e-3))
        out.append((f"{name}.sampled_harmonic", va.harmonic_residual(sampled, metric), 5e-3))
    return out


_BUILDERS: dict[str, Callable[[], Iterable]] = {
    "numerics": numerics_checks,
    "metric": metric_checks,
    "nitsche": nitsche_checks,
    "energy": energy_checks,
    "variational": variational_checks,
}


def run(modules=None, tolerance: float | None = None) -> list[Check]:
    """Run the selected module suites; ``tolerance`` replaces every pinned tolerance."""
    modules = list(modules) if modules else list(MODULES)
    unknown = [x for x in modules if x not in _BUILDERS]
    if unknown:
        raise ValueError(f"unknown modules {unknown}; expected some of {MODULES}")
    checks = []
    for mod in modules:
        rows = numerics_checks(tolerance) if mod == "numerics" else _BUILDERS[mod]()
        for ident, err, tol in rows:
            checks.append(Check(mod, ident, float(err), tol if tolerance is None else float(tolerance)))
    return checks
