import math

import numpy as np
import pytest

from annulus_energy.energy import (
    EnergyModel,
    affine_energy_crosscheck,
    energy_bounds,
    energy_slope,
    min_energy,
    nitsche_energy,
    profile,
)
from annulus_energy.metric import builtin, metric_area
from annulus_energy.nitsche import solve_gamma

import oracles as orc

LOG2 = math.log(2)
EUCLID = builtin("euclidean")
METRICS = {
    "euclidean": EUCLID,
    "inverse": builtin("inverse"),
    "sphere": builtin("sphere"),
    "power1": builtin("power", {"alpha": 1.0}),
}


def test_nitsche_energy_examples():
    assert nitsche_energy(EUCLID, 0.5, 0.0) == pytest.approx(1.5 * math.pi, rel=1e-13)
    assert nitsche_energy(EUCLID, 0.5, orc.GAMMA_AB) == pytest.approx(orc.ENERGY_AB, rel=1e-12)
    assert nitsche_energy(EUCLID, 0.5, -0.25) == pytest.approx(orc.ENERGY_FLOOR_EUCLID, rel=1e-12)
    with pytest.raises(ValueError):
        nitsche_energy(EUCLID, 0.5, -0.3)


@pytest.mark.parametrize("name,tau", [("sphere", 0.6), ("sphere", 1.2), ("power1", 1.0), ("power1", 0.4)])
def test_energy_against_scipy(name, tau):
    m = METRICS[name]
    ref = orc.energy_oracle(orc.RHO[name], LOG2, tau, EnergyModel(m, LOG2).gamma_floor + 1e-9, 50.0)
    assert min_energy(m, LOG2, tau) == pytest.approx(ref, rel=1e-9)


def test_min_energy_examples():
    assert min_energy(EUCLID, LOG2, LOG2) == pytest.approx(1.5 * math.pi, rel=1e-13)
    assert min_energy(EUCLID, LOG2, math.log(1 / 0.6)) == pytest.approx(orc.ENERGY_AB, rel=1e-12)
    t = orc.TAU_CRIT_EUCLID + 1
    assert min_energy(EUCLID, LOG2, t) == pytest.approx(orc.ENERGY_FLOOR_EUCLID + math.pi / 2, rel=1e-11)


def test_slope_examples():
    assert energy_slope(EUCLID, LOG2, LOG2) == 0.0
    assert energy_slope(EUCLID, LOG2, math.log(1 / 0.6)) == pytest.approx(-2 * math.pi * orc.GAMMA_AB, rel=1e-10)
    assert energy_slope(EUCLID, LOG2, 2.0) == pytest.approx(math.pi / 2, rel=1e-14)


def test_bounds_examples():
    lo, hi = energy_bounds(EUCLID, LOG2, LOG2)
    assert lo == pytest.approx(1.5 * math.pi) and hi == pytest.approx(1.5 * math.pi)
    lo, hi = energy_bounds(EUCLID, LOG2, 2 * LOG2)
    assert lo == pytest.approx(4.7123890, abs=1e-7)
    assert hi == pytest.approx(5.8904862, abs=1e-7)
    sphere = builtin("sphere")
    a = metric_area(sphere, math.exp(-1.0), 1.0)
    lo, hi = energy_bounds(sphere, 1.0, 0.5)
    assert lo == pytest.approx(2 * a) and hi == pytest.approx(2.5 * a)


@pytest.mark.parametrize("name", list(METRICS))
def test_floor_and_bounds_on_grid(name):
    m = METRICS[name]
    model = EnergyModel(m, LOG2)
    a = model.area
    assert model.energy(LOG2) == pytest.approx(2 * a, rel=1e-8)
    grid = np.linspace(0.15, 3.0, 40)
    prof = profile(m, LOG2, grid)
    assert np.all(prof.energy >= 2 * a * (1 - 1e-12))
    away = np.abs(grid - LOG2) > 1e-3
    assert np.all(prof.energy[away] > 2 * a * (1 + 1e-8))
    assert np.all(prof.energy <= (LOG2 / grid + grid / LOG2) * a * (1 + 1e-12))


@pytest.mark.parametrize("name", list(METRICS))
def test_slope_is_derivative(name):
    m = METRICS[name]
    model = EnergyModel(m, LOG2)
    top = min(model.tau_critical * 1.4, 3.0) if math.isfinite(model.tau_critical) else 3.0
    h = 1e-4
    for t in np.linspace(0.2, top, 20):
        if abs(t - model.tau_critical) < 5 * h:
            continue
        fd = (model.energy(t + h) - model.energy(t - h)) / (2 * h)
        assert fd == pytest.approx(model.slope(t), rel=1e-4, abs=1e-8)


def test_euclidean_profile_shape():
    prof = profile(EUCLID, LOG2, np.linspace(0.2, 2.2, 61))
    v = prof.verdicts()
    assert v["decreasing_below_omega"] and v["increasing_above_omega"]
    assert abs(v["argmin_tau"] - LOG2) <= 2.0 / 60
    assert v["convex_on_nitsche_branch"] and v["affine_beyond_critical"]
    assert v["branch_switches"] == 1
    nit = [b == "nitsche" for b in prof.branch]
    g = prof.gamma[np.array(nit)]
    assert np.all(np.diff(g) < 0)
    assert all(b == "affine" for t, b in zip(prof.tau_grid, prof.branch) if t > prof.tau_critical)


def test_single_point_profile():
    prof = profile(EUCLID, LOG2, [LOG2])
    assert prof.energy[0] == pytest.approx(2 * prof.area, rel=1e-12)
    assert prof.slope[0] == 0.0


def test_sphere_branch_switches_once():
    prof = profile(builtin("sphere"), 1.0, np.linspace(0.5, 3.0, 41))
    assert prof.verdicts()["branch_switches"] == 1


@pytest.mark.parametrize("name", ["euclidean", "sphere", "power1"])
def test_slope_continuous_across_threshold(name):
    model = EnergyModel(METRICS[name], LOG2)
    tc = model.tau_critical
    assert abs(model.slope(tc - 1e-9) - model.slope(tc + 1e-9)) <= 1e-6
    assert abs(model.energy(tc - 1e-9) - model.energy(tc + 1e-9)) <= 1e-7


def test_inverse_energy_closed_form():
    # every power stretch is rho-harmonic for rho = 1/s: E = 2 pi (omega^2/tau + tau)
    m = METRICS["inverse"]
    for t in (0.3, 1.0, 1.0318, 2.5):
        assert min_energy(m, LOG2, t) == pytest.approx(2 * math.pi * (LOG2**2 / t + t), rel=1e-10)


@pytest.mark.parametrize("name", ["euclidean", "sphere"])
def test_affine_slope_matches_boundary_density(name):
    m = METRICS[name]
    model = EnergyModel(m, LOG2)
    d = model.delta
    expected = 2 * math.pi * d * d * float(m.rho(d)) ** 2
    assert model.slope(model.tau_critical + 0.5) == pytest.approx(expected, rel=1e-6)


@pytest.mark.parametrize("name", ["euclidean", "sphere"])
def test_affine_branch_crosscheck(name):
    m = METRICS[name]
    model = EnergyModel(m, LOG2)
    t = model.tau_critical + 0.7
    assert affine_energy_crosscheck(m, LOG2, t) == pytest.approx(model.energy(t), rel=1e-8)


def test_gamma_is_solve_gamma():
    model = EnergyModel(EUCLID, LOG2)
    assert model.gamma(0.4) == pytest.approx(solve_gamma(EUCLID, 0.5, 0.4), rel=1e-14)


def test_invalid_moduli():
    with pytest.raises(ValueError):
        min_energy(EUCLID, -1.0, 0.5)
    with pytest.raises(ValueError):
        min_energy(EUCLID, 1.0, 0.0)
    with pytest.raises(ValueError):
        profile(EUCLID, 1.0, [0.5, 0.4])
