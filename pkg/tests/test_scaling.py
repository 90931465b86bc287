"""Scaling ramp, deformed metric, density, far field, sectoriality."""

from __future__ import annotations

import numpy as np
import pytest

from cylres import (DeformedMetricField,  ScalingParameter, ScalingProfile,
                    deformed_metric, density_rho, dif1_metric, dif2_metric,
                    far_field_matrix, product_metric, ramp_value)
from cylres.errors import ConfigError
from cylres.scaling import sector_margin


def test_ramp_plateau_and_blend_values():
    p = ScalingProfile(R=10.0, w=2.0)
    assert ramp_value(p, 10.5) == (0.0, 0.0)
    s, sp = ramp_value(p, 12.0)
    assert sp == pytest.approx(0.5)            # smoothstep at mid-blend
    s, sp = ramp_value(p, 20.0)
    assert sp == 1.0
    assert s == pytest.approx(20.0 - 12.0)     # x - (R + 1 + w/2)


def test_ramp_properties_grid():
    p = ScalingProfile(R=3.0, w=4.0)
    x = np.linspace(0.0, 30.0, 4001)
    s, sp = p(x)
    assert np.all(s[x <= 4.0] == 0.0)
    assert np.all((0.0 <= sp) & (sp <= 1.0))
    assert np.all(sp[x >= 8.0] == 1.0)
    # s is the exact antiderivative of s'
    mid = (sp[1:] + sp[:-1]) / 2.0
    s_trapz = np.concatenate([[0.0], np.cumsum(mid * np.diff(x))])
    assert np.max(np.abs(s - s_trapz)) < 1e-5
    # s' is continuous (C^1 ramp): increments bounded by max|s''| * dx
    assert np.max(np.abs(np.diff(sp))) < 1.875 / 4.0 * 0.0075 * 1.1


def test_table_ramp_matches_quintic_sampling():
    xs = np.linspace(11.0, 13.0, 400)
    sp = ScalingProfile(R=10.0, w=2.0)(xs)[1]
    p = ScalingProfile(R=10.0, kind="table", table=(tuple(xs), tuple(sp)))
    x = np.array([10.2, 11.7, 12.9, 20.0])
    s_q, sp_q = ScalingProfile(R=10.0, w=2.0)(x)
    s_t, sp_t = p(x)
    assert np.allclose(sp_t, sp_q, atol=1e-5)
    assert np.allclose(s_t, s_q, atol=1e-5)


def test_full_profile():
    p = ScalingProfile.full()
    s, sp = p(np.array([0.0, 5.0]))
    assert np.all(sp == 1.0) and s[1] == 5.0


def test_deformed_metric_identity_at_lambda0():
    geom = dif2_metric()
    p = ScalingProfile(R=5.0, w=2.0)
    g = deformed_metric(geom, p, 0.0, 20.0, 0.7)
    assert np.allclose(g, geom(20.0, 0.7), atol=1e-15)


def test_deformed_metric_product_plateau():
    geom = product_metric()
    p = ScalingProfile(R=10.0, w=2.0)
    lam = 0.3j
    g = deformed_metric(geom, p, lam, 20.0, 0.5)
    assert g[0, 0] == pytest.approx((1 + 0.3j) ** 2)
    assert g[1, 1] == 1.0 and g[0, 1] == 0.0
    # below the onset the deformation is invisible for any geometry
    for geometry in (product_metric(), dif1_metric()):
        g1 = deformed_metric(geometry, p, lam, 7.0, 0.5)
        assert np.allclose(g1, geometry(7.0, 0.5), atol=1e-15)


def test_density_product_and_plateau():
    geom = product_metric()
    p = ScalingProfile(R=10.0, w=2.0)
    field = DeformedMetricField(geom, p, 0.3j)
    rho = density_rho(field, 20.0, 0.5)
    assert rho == pytest.approx(1.0 / (1.0 + 0.3j), abs=1e-14)
    assert rho == pytest.approx(0.917431 - 0.275229j, abs=1e-6)
    assert density_rho(field, 9.0, 0.5) == pytest.approx(1.0, abs=1e-15)


def test_density_dif2_cofactor_oracle():
    """rho from the field vs an independent determinant evaluation."""
    geom = dif2_metric()
    p = ScalingProfile(R=10.0, w=2.0)
    lam = 0.25j
    field = DeformedMetricField(geom, p, lam)
    x, y = p.R + p.w + 5.0, 0.6
    rho = density_rho(field, x, y)
    s, sp = p(np.asarray(x))
    g_lam = np.asarray(geom(x + lam * s, y, check=False), dtype=complex)
    d = np.diag([1.0 + lam * sp, 1.0])
    g_lam = d @ g_lam @ d
    det_l = np.linalg.det(g_lam)
    det_0 = np.linalg.det(geom(x, y).real)
    oracle = np.sqrt(det_0 / det_l)
    if abs(oracle - rho) > abs(oracle + rho):
        oracle = -oracle
    assert rho == pytest.approx(oracle, abs=1e-12)
    x_grid = np.linspace(0.0, 40.0, 401)
    y_grid = np.linspace(0.0, np.pi, 21)
    mag = np.abs(field.rho(x_grid[:, None], y_grid[None, :]))
    c1, c2 = mag.min(), mag.max()
    assert 0.0 < c1 <= abs(rho) <= c2 < np.inf


def test_far_field_matrix_values():
    m = far_field_matrix(0.2, 1.0, 1.0)
    assert np.allclose(m, np.diag([1.44, 1.0]))
    m = far_field_matrix(0.3j, 0.0, 2.5)
    assert np.allclose(m, np.diag([1.0, 2.5]))
    m = far_field_matrix(0.25j, 1.0, 1.0)
    assert m[0, 0] == pytest.approx(0.9375 + 0.5j)


def test_rho_reflection_symmetry():
    geom = dif2_metric()
    p = ScalingProfile(R=8.0, w=2.0)
    x = np.linspace(0.0, 30.0, 201)
    y = np.linspace(0.0, np.pi, 9)
    f_plus = DeformedMetricField(geom, p, 0.25j)
    f_minus = DeformedMetricField(geom, p, -0.25j)
    rp = f_plus.rho(x[:, None], y[None, :])
    rm = f_minus.rho(x[:, None], y[None, :])
    assert np.max(np.abs(rp - np.conj(rm))) < 1e-12
    gp = f_plus.metric(x[:, None], y[None, :])
    gm = f_minus.metric(x[:, None], y[None, :])
    assert np.max(np.abs(gp - np.conj(gm))) < 1e-12


@pytest.mark.parametrize("make_geom", [product_metric, dif1_metric, dif2_metric])
@pytest.mark.parametrize("lam", [0.2j, 0.3j, 0.3 + 0.2j])
def test_metric_inverse_sectoriality(make_geom, lam):
    geom = make_geom()
    p = ScalingProfile(R=10.0, w=2.0)
    field = DeformedMetricField(geom, p, lam)
    x = np.linspace(0.0, 40.0, 161)
    y = np.linspace(0.0, np.pi, 17)
    max_arg, dlo, dhi = sector_margin(field, x, y, samples=1000, seed=3)
    assert max_arg < np.pi / 2 - 0.05
    assert 0.0 < dlo <= dhi < np.inf


@pytest.mark.parametrize("make_geom", [dif1_metric, dif2_metric])
def test_far_field_closeness_improves_with_R(make_geom):
    geom = make_geom()
    lam = 0.3j

    def defect(R):
        field = DeformedMetricField(geom, ScalingProfile(R=R, w=2.0), lam)
        x = np.linspace(R, R + 60.0, 121)
        y = np.linspace(0.0, np.pi, 13)
        diff = field.metric_inv(x[:, None], y[None, :]) - \
            field.far_field_inv(x[:, None], y[None, :])
        return np.linalg.norm(diff, ord=2, axis=(-2, -1)).max()

    assert defect(20.0) < defect(10.0)


def test_disk_validation():
    with pytest.raises(ConfigError):
        ScalingParameter(0.8, 0.7)
    with pytest.raises(ConfigError):
        ScalingParameter(0.1, 0.9)        # sin(alpha) >= 1/sqrt(2)
    with pytest.raises(ConfigError):
        deformed_metric(product_metric(alpha=0.35), ScalingProfile(), 0.4j, 1.0, 0.5)
    # boundary-legal case constructs fine
    ScalingParameter(0.3j, 0.7)


def test_profile_validation():
    with pytest.raises(ConfigError):
        ScalingProfile(R=-1.0)
    with pytest.raises(ConfigError):
        ScalingProfile(w=0.0)
    with pytest.raises(ConfigError):
        ScalingProfile(R=10.0, kind="table",
                       table=((11.0, 12.0), (0.2, 1.0)))   # slope must start at 0
