"""Rays, classification, stability sweeps, sectoriality sampling."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg

from cylres import (CrossSection, ScalingProfile, SweepJob, Window,
                    assemble_form, assemble_modal, build_grid, classify,
                    cross_section_pencil, dif1_metric, fit_ray_angle,
                    predict_essential, product_metric, sector_check,
                    solve_dense, solve_shift_invert, sweep_lambda,
                    sweep_profile, thresholds)
from cylres.errors import ConfigError
from cylres.spectral import Ray, choose_gamma_shift

RNG = np.random.default_rng(5)


def test_predict_essential_angles(dirichlet_strip):
    ts = thresholds(dirichlet_strip, 3)
    rays = predict_essential(ts, 0.3j)
    assert [r.origin for r in rays] == [1.0, 4.0, 9.0]
    for r in rays:
        assert r.angle == pytest.approx(-2 * np.arctan(0.3), abs=1e-12)
        assert r.angle == pytest.approx(-0.582914, abs=1e-6)
    assert predict_essential(ts, 0.25j)[0].angle == pytest.approx(-0.489957,
                                                                  abs=1e-6)
    for r in predict_essential(ts, 0.2):
        assert r.angle == 0.0


def test_ray_distance():
    ray = Ray(1.0, -np.pi / 4)
    assert ray.distance(1.0) == pytest.approx(0.0)
    assert ray.distance(ray.point(2.0)) == pytest.approx(0.0, abs=1e-15)
    # behind the origin: distance to the origin itself
    assert ray.distance(0.0) == pytest.approx(1.0)
    # perpendicular offset
    p = ray.point(1.0) + 0.3 * np.exp(1j * (ray.angle + np.pi / 2))
    assert ray.distance(p) == pytest.approx(0.3, abs=1e-12)


def test_classify_lambda0(flat_cylinder_small, dirichlet_strip):
    geom, prof, grid = flat_cylinder_small
    op = assemble_form(geom, prof, 0.0, grid)
    res = solve_dense(op)
    ts = thresholds(dirichlet_strip, 6)
    rays = predict_essential(ts, 0.0)
    port = classify(res.values, res.residuals, rays, ts, 0.0)
    for e in port.eigenvalues:
        assert e.klass in ("ray_artifact", "threshold_adjacent")
        assert e.mu.real > 1.0 - 1e-6


def test_classify_ray_hugging_fraction(dirichlet_strip):
    """Separable cylinder with a small unscaled fraction: >= 90% of window
    eigenvalues hug a predicted ray; counts cross-checked by the modal path."""
    geom = product_metric()
    prof = ScalingProfile(R=1.0, w=2.0)
    lam = 0.3j
    grid = build_grid(dirichlet_strip, 40.0, 400, 16, "dirichlet")
    op = assemble_form(geom, prof, lam, grid)
    theta = -2 * np.angle(1 + lam)
    sigma = 1.0 + 2.8 * np.exp(1j * theta)
    res = solve_shift_invert(op, sigma, 50)
    ts = thresholds(dirichlet_strip, 6)
    rays = predict_essential(ts, lam)
    win = res.values[(res.values.real >= 1.5) & (res.values.real <= 6.0)]
    dmin = np.minimum.reduce([r.distance(win) for r in rays])
    frac = np.mean(dmin < 0.05 * (1 + np.abs(win)))
    assert frac >= 0.9
    # modal oracle: every windowed value is a mode-1 or mode-2 axis eigenvalue
    Ky, My, _, _ = cross_section_pencil(dirichlet_strip, 16)
    nu = np.sort(scipy.linalg.eig(Ky.toarray(), My.toarray(), right=False).real)
    pred = []
    for j in range(2):
        op1 = assemble_modal(prof, lam, nu[j], grid.x, cap_bc="dirichlet")
        pred.extend(solve_dense(op1).values)
    pred = np.asarray(pred)
    for mu in win:
        assert np.min(np.abs(pred - mu)) < 1e-8 * (1 + abs(mu))


def test_ray_angle_recovery_small_unscaled_fraction(dirichlet_strip):
    geom = product_metric()
    prof = ScalingProfile(R=1.0, w=2.0)
    grid = build_grid(dirichlet_strip, 100.0, 1000, 12, "dirichlet")
    ts = thresholds(dirichlet_strip, 4)
    for lam in (0.25j, 0.3j):
        op = assemble_form(geom, prof, lam, grid)
        theta = -2 * np.angle(1 + lam)
        sigma = 1.0 + 0.5 * np.exp(1j * theta)
        res = solve_shift_invert(op, sigma, 30)
        rays = predict_essential(ts, lam)
        port = classify(res.values, res.residuals, rays, ts, lam)
        arts = port.of_class("ray_artifact")
        near = arts[(arts.real > 1.02) & (arts.real < 2.0)]
        ang = fit_ray_angle(near, 1.0)
        assert abs(ang - theta) < 0.02


def test_fit_ray_angle_synthetic():
    theta = -0.53
    t = np.linspace(0.1, 4.0, 25)
    pts = 2.0 + t * np.exp(1j * theta)
    pts += 1e-3 * (RNG.standard_normal(25) + 1j * RNG.standard_normal(25))
    assert fit_ray_angle(pts, 2.0) == pytest.approx(theta, abs=1e-3)
    with pytest.raises(ConfigError):
        fit_ray_angle([1.0 + 0j], 0.0)


def test_portrait_conjugation_symmetry(flat_cylinder_small, dirichlet_strip):
    geom, prof, grid = flat_cylinder_small
    lam = 0.3j
    vals_p = solve_dense(assemble_form(geom, prof, lam, grid)).values
    vals_m = solve_dense(assemble_form(geom, prof, -lam, grid)).values
    for mu in vals_p[np.abs(vals_p) < 20.0]:
        assert np.min(np.abs(vals_m - np.conj(mu))) < 1e-10 * (1 + abs(mu))


def test_upper_half_plane_exclusion(flat_cylinder_small, dirichlet_strip):
    geom, prof, grid = flat_cylinder_small
    lam = 0.3j
    op = assemble_form(geom, prof, lam, grid)
    res = solve_dense(op)
    ts = thresholds(dirichlet_strip, 6)
    port = classify(res.values, res.residuals, predict_essential(ts, lam),
                    ts, lam)
    for e in port.eigenvalues:
        if e.klass == "discrete_candidate" and abs(e.mu) < 30:
            assert e.mu.imag <= 10.0 * max(e.residual, 1e-12)


def test_window_ray_distance_and_validation():
    w = Window(0.5, 0.9, -0.05, 0.05)
    ray = Ray(1.0, -0.5)
    assert w.distance_to_ray(ray) >= 0.1
    inside = Ray(0.0, 0.0)
    assert w.distance_to_ray(inside) == 0.0
    with pytest.raises(ConfigError):
        Window(1.0, 0.5, 0.0, 1.0)


@pytest.fixture(scope="module")
def dif1_job(dirichlet_strip):
    return SweepJob(geom=dif1_metric(a=0.5, beta=0.5, gamma=-1.0),
                    cross_section=dirichlet_strip,
                    profile=ScalingProfile(R=10.0, w=2.0),
                    X_max=40.0, N_x=320, N_y=24, k=8)


BOUND_WINDOW = Window(0.70, 0.90, -0.05, 0.05)


def test_sweep_lambda_tracks_bound_state(dif1_job):
    rep = sweep_lambda(dif1_job, [0.2j, 0.3j], BOUND_WINDOW)
    assert len(rep.tracked) == 1
    assert not rep.lost
    mu = rep.tracked[0].values[0]
    assert mu.real == pytest.approx(0.8522, abs=2e-3)
    assert rep.max_pairwise_drift < rep.refinement_drift
    assert rep.max_pairwise_drift < 1e-5


def test_sweep_lambda_single_is_trivial(dif1_job):
    rep = sweep_lambda(dif1_job, [0.25j], BOUND_WINDOW, refine=False)
    assert rep.max_pairwise_drift == 0.0
    assert len(rep.tracked) == 1


def test_sweep_window_on_ray_rejected(dif1_job):
    bad = Window(1.2, 1.6, -0.3, 0.1)
    with pytest.raises(ConfigError):
        sweep_lambda(dif1_job, [0.2j], bad, refine=False)


def test_sweep_profile_ramp_independence(dif1_job):
    profiles = [ScalingProfile(R=10.0, w=2.0), ScalingProfile(R=10.0, w=6.0)]
    rep = sweep_profile(dif1_job, profiles, 0.3j, BOUND_WINDOW)
    assert len(rep.tracked) == 1
    assert rep.max_pairwise_drift < rep.refinement_drift
    rep2 = sweep_profile(dif1_job, [profiles[0], profiles[0]], 0.3j,
                         BOUND_WINDOW, refine=False)
    assert rep2.max_pairwise_drift < 1e-13


def test_sector_check_lambda0(flat_cylinder_small):
    geom, prof, grid = flat_cylinder_small
    op = assemble_form(geom, prof, 0.0, grid)
    chk = sector_check(op, 0.0, samples=200, seed=2)
    assert chk.max_arg < 1e-12
    assert chk.rq_min > 0.0
    assert chk.passed


@pytest.mark.parametrize("lam", [0.3j, 0.3 + 0.2j])
def test_sector_check_deformed(flat_cylinder_small, lam):
    geom, prof, grid = flat_cylinder_small
    op = assemble_form(geom, prof, lam, grid)
    gamma = choose_gamma_shift(op, np.pi / 2 - 0.05)
    chk = sector_check(op, gamma, samples=1000, seed=4)
    assert chk.passed
    assert chk.max_arg < np.pi / 2 - 0.05
    # shifting right shrinks the argument
    chk5 = sector_check(op, gamma + 5.0, samples=300, seed=4)
    assert chk5.max_arg <= sector_check(op, gamma, samples=300, seed=4).max_arg


def test_sector_check_validation(flat_cylinder_small):
    geom, prof, grid = flat_cylinder_small
    op = assemble_form(geom, prof, 0.0, grid)
    with pytest.raises(ConfigError):
        sector_check(op, -1.0)
