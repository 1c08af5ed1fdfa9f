import math

import numpy as np
import pytest

from annulus_energy.energy import min_energy
from annulus_energy.metric import builtin, metric_area
from annulus_energy.nitsche import build_map, solve_gamma
from annulus_energy.variational import (
    DegenerateJacobianError,
    GridMap,
    SolveOptions,
    discrete_energy,
    distortion_report,
    energy_split,
    energy_split_and_stretch_test,
    gradient,
    harmonic_residual,
    hopf_field,
    identity_check,
    init_power_stretch,
    minimize,
    prolong,
    sample_nitsche,
)

import oracles as orc

LOG2 = math.log(2)
TAU_AB = math.log(1 / 0.6)
EUCLID = builtin("euclidean")
SPHERE = builtin("sphere")


def random_grid(rng, tau=0.6, omega=LOG2, n_u=12, n_t=24, amp=0.05):
    g = init_power_stretch(tau, omega, n_u, n_t)
    g.m[1:-1] += amp * rng.standard_normal(g.m[1:-1].shape)
    g.theta_dev += amp * rng.standard_normal(g.theta_dev.shape)
    return g


def test_power_stretch_init():
    g = init_power_stretch(LOG2, LOG2, 16, 32)
    assert np.allclose(g.m, g.u[:, None], atol=1e-15)
    g = init_power_stretch(2 * LOG2, LOG2, 16, 32)
    assert np.allclose(g.m, g.u[:, None] / 2, atol=1e-15)
    assert np.all(g.m[0] == -LOG2) and np.all(g.m[-1] == 0.0)
    with pytest.raises(ValueError):
        init_power_stretch(1.0, 1.0, 4, 32)


def test_identity_energy_128():
    g = init_power_stretch(LOG2, LOG2, 128, 256)
    assert discrete_energy(g, EUCLID) == pytest.approx(1.5 * math.pi, abs=1e-3)


def test_sampled_nitsche_energy():
    nm = build_map(EUCLID, 0.5, orc.GAMMA_AB)
    g = sample_nitsche(nm, 128, 256)
    assert discrete_energy(g, EUCLID) == pytest.approx(orc.ENERGY_AB, rel=5e-3)


def test_energy_homogeneity():
    g = random_grid(np.random.default_rng(0))
    assert discrete_energy(g, SPHERE.scaled(3.0)) == pytest.approx(9 * discrete_energy(g, SPHERE), rel=1e-13)


def test_gradient_matches_directional_differences():
    rng = np.random.default_rng(2)
    g = random_grid(rng)
    gm, gt = gradient(g, SPHERE)
    for _ in range(20):
        dm = rng.standard_normal(g.m.shape)
        dm[0] = dm[-1] = 0.0
        dth = rng.standard_normal(g.theta_dev.shape)
        dth -= dth.mean()
        eps = 1e-6
        gp, gn = g.copy(), g.copy()
        gp.m += eps * dm
        gp.theta_dev += eps * dth
        gn.m -= eps * dm
        gn.theta_dev -= eps * dth
        fd = (discrete_energy(gp, SPHERE) - discrete_energy(gn, SPHERE)) / (2 * eps)
        an = np.sum(gm * dm) + np.sum(gt * dth)
        assert an == pytest.approx(fd, rel=1e-6)


def test_gradient_homogeneity_and_exclusions():
    g = random_grid(np.random.default_rng(4))
    gm, gt = gradient(g, SPHERE)
    gm3, gt3 = gradient(g, SPHERE.scaled(2.0))
    assert np.allclose(gm3, 4 * gm, rtol=1e-12, atol=1e-14)
    assert np.all(gm[0] == 0) and np.all(gm[-1] == 0)
    assert abs(gt.sum()) <= 1e-12


def test_rotation_invariance():
    g = random_grid(np.random.default_rng(6))
    h = g.copy()
    h.theta_dev += 0.7
    assert discrete_energy(h, SPHERE) == pytest.approx(discrete_energy(g, SPHERE), rel=1e-14)


def test_minimize_euclidean_small_grid():
    g, rep = minimize(init_power_stretch(TAU_AB, LOG2, 32, 64), EUCLID)
    assert rep.converged and rep.monotone
    assert rep.energy == pytest.approx(orc.ENERGY_AB, rel=5e-3)
    assert rep.energy >= 2 * metric_area(EUCLID, 0.5, 1.0) * (1 - 1e-3)
    assert np.all(g.m >= -LOG2) and np.all(g.m <= 0)
    assert abs(g.theta_dev[-1].mean()) <= 1e-12
    assert rep.hopf_mean.real == pytest.approx(orc.GAMMA_AB / 4, rel=2e-2)


def test_minimize_identity_stays_identity():
    g, rep = minimize(init_power_stretch(LOG2, LOG2, 24, 48), SPHERE)
    area = metric_area(SPHERE, 0.5, 1.0)
    assert rep.energy == pytest.approx(2 * area, rel=5e-3)
    assert np.max(np.abs(g.m - g.u[:, None])) <= 1e-3


def test_minimize_from_random_start_reaches_same_energy():
    base = init_power_stretch(TAU_AB, LOG2, 24, 48)
    _, a = minimize(base, EUCLID)
    _, b = minimize(base, EUCLID, SolveOptions(random_init=True, seed=3, coarse_to_fine=False))
    assert b.energy == pytest.approx(a.energy, rel=1e-6)


def test_nonconvergence_flag():
    _, rep = minimize(init_power_stretch(TAU_AB, LOG2, 24, 48), EUCLID,
                      SolveOptions(max_iter=2, coarse_to_fine=False))
    assert not rep.converged


def test_affine_branch_energy_within_one_percent():
    tau = 2.0
    _, rep = minimize(init_power_stretch(tau, LOG2, 64, 64), EUCLID)
    assert rep.energy == pytest.approx(min_energy(EUCLID, LOG2, tau), rel=1e-2)


def test_hopf_field_identity_and_sampled():
    ident = hopf_field(init_power_stretch(LOG2, LOG2, 32, 64), EUCLID)
    assert ident["max_abs"] <= 1e-8 * 1.5 * math.pi
    nm = build_map(SPHERE, 0.5, solve_gamma(SPHERE, 0.5, 0.6))
    st = hopf_field(sample_nitsche(nm, 128, 256), SPHERE)
    assert st["rel_dev"] <= 5e-3
    assert st["mean"].real == pytest.approx(nm.gamma / 4, rel=1e-3)


def test_distortion_identity():
    g = init_power_stretch(0.9, 0.9, 16, 32)
    rep = distortion_report(g)
    assert rep["kn_integral"] == pytest.approx(2 * math.pi * 0.9, rel=1e-12)
    assert rep["kt_integral"] == pytest.approx(2 * math.pi * 0.9, rel=1e-12)
    assert rep["orthogonality"] <= 1e-14


def test_distortion_rejects_folded_grid():
    g = init_power_stretch(0.9, 0.9, 16, 32)
    g.theta_dev[:, ::2] += 1.0  # folds every other column
    with pytest.raises(DegenerateJacobianError):
        distortion_report(g)


def test_harmonic_residual_cases():
    assert harmonic_residual(init_power_stretch(2 * LOG2, LOG2, 32, 64), EUCLID) > 0.1
    nm = build_map(EUCLID, 0.5, orc.GAMMA_AB)
    assert harmonic_residual(sample_nitsche(nm, 128, 256), EUCLID) <= 5e-3
    # rho = 1/s makes every power stretch harmonic
    assert harmonic_residual(init_power_stretch(0.4, LOG2, 32, 64), builtin("inverse")) <= 1e-10


def test_identity_check():
    assert identity_check(init_power_stretch(LOG2, LOG2, 32, 64), EUCLID) <= 1e-10
    nm = build_map(SPHERE, 0.5, 0.2)
    assert identity_check(sample_nitsche(nm, 64, 128), SPHERE) <= 5e-3


def test_stretch_law():
    g = init_power_stretch(LOG2, LOG2, 64, 128)
    rep = energy_split_and_stretch_test(g, EUCLID, 1.0)
    assert rep["normal_ratio"] == 1.0 and rep["tangential_ratio"] == 1.0
    rep = energy_split_and_stretch_test(g, EUCLID, 2.0)
    assert rep["normal_ratio"] == pytest.approx(2.0, abs=1e-12)
    assert rep["tangential_ratio"] == pytest.approx(0.5, abs=1e-12)
    en_ref, et_ref = orc.stretch_energy_euclid(2.0, math.exp(-LOG2 / 2))
    assert rep["normal_after"] == pytest.approx(en_ref, rel=1e-3)
    assert rep["tangential_after"] == pytest.approx(et_ref, rel=1e-3)
    with pytest.raises(ValueError):
        energy_split_and_stretch_test(g, EUCLID, 0.0)


def test_energy_split_sums_to_energy():
    g = random_grid(np.random.default_rng(8))
    en_, et_ = energy_split(g, SPHERE)
    assert en_ + et_ == pytest.approx(discrete_energy(g, SPHERE), rel=1e-14)


def test_checkpoint_round_trip(tmp_path):
    g = random_grid(np.random.default_rng(9))
    p = tmp_path / "g.json"
    g.save(p)
    h = GridMap.load(p)
    assert np.array_equal(h.m, g.m) and np.array_equal(h.theta_dev, g.theta_dev)
    assert (h.n_u, h.n_t, h.tau, h.omega) == (g.n_u, g.n_t, g.tau, g.omega)


def test_prolong_keeps_invariants():
    g = init_power_stretch(0.6, LOG2, 16, 32)
    g.theta_dev += 0.1 * np.sin(np.pi * (g.u[:, None] / 0.6)) * np.cos(g.t[None, :])
    f = prolong(g, 31, 64)
    assert np.all(f.m[0] == -LOG2) and np.all(f.m[-1] == 0.0)
    assert discrete_energy(f, SPHERE) == pytest.approx(discrete_energy(g, SPHERE), rel=0.01)
