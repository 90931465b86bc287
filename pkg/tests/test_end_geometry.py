"""End metrics: pullback formulas, analyticity, stabilization."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad

from cylres import (PhiSpec, check_stabilization, dif1_metric, dif2_metric,
                    metric_at, product_metric, pullback_from_phi)
from cylres.errors import ConfigError, DomainError

RNG = np.random.default_rng(7)


def _phi_dif2(x, y):
    """Straightening map of the widening example, axial part by quadrature."""
    tail = quad(lambda t: 1.0 / np.log(t + 4.0), 0.0, x)[0]
    return np.array([x + tail, (1.0 + 1.0 / np.log(x + 5.0)) * y])


def _phi_dif1(x, y, a=0.5, beta=0.5, gamma=-1.0):
    return np.array([x, (x + 3.0) ** beta * a + (1.0 + (x + 3.0) ** gamma) * y])


def _fd_jacobian(phi, x, y, step=1e-5):
    """Central-difference Jacobian oracle for a map (x, y) -> R^2."""
    J = np.zeros((2, 2))
    J[:, 0] = (phi(x + step, y) - phi(x - step, y)) / (2 * step)
    J[:, 1] = (phi(x, y + step) - phi(x, y - step)) / (2 * step)
    return J


def test_product_metric_constant():
    geom = product_metric()
    g = metric_at(geom, 3.0 + 0.5j, 1.0)
    assert np.allclose(g, np.eye(2), atol=1e-15)
    geom_h = product_metric(h=lambda y: 1.0 + 0.5 * np.cos(y))
    g = metric_at(geom_h, 12.0, 0.3)
    assert g[0, 0] == 1.0 and g[0, 1] == 0.0
    assert g[1, 1] == pytest.approx(1.0 + 0.5 * np.cos(0.3))


@pytest.mark.parametrize("x,y", [(0.0, 0.2), (2.5, 1.0), (17.0, 3.0)])
def test_dif2_jacobian_against_fd_oracle(x, y):
    geom = dif2_metric()
    g = metric_at(geom, x, y)
    J = _fd_jacobian(_phi_dif2, x, y)
    # closed-form entries
    assert J[0, 0] == pytest.approx(1.0 + 1.0 / np.log(x + 4.0), abs=1e-8)
    assert J[0, 1] == pytest.approx(0.0, abs=1e-10)
    assert J[1, 0] == pytest.approx(-y / ((x + 5.0) * np.log(x + 5.0) ** 2), abs=1e-8)
    assert J[1, 1] == pytest.approx(1.0 + 1.0 / np.log(x + 5.0), abs=1e-8)
    assert np.allclose(g.real, J.T @ J, atol=1e-8)
    assert np.max(np.abs(g.imag)) < 1e-14


@pytest.mark.parametrize("x,y", [(0.0, 0.5), (4.0, 2.0), (30.0, 0.1)])
def test_dif1_pullback_against_fd_oracle(x, y):
    geom = dif1_metric(a=0.5, beta=0.5, gamma=-1.0)
    g = metric_at(geom, x, y)
    J = _fd_jacobian(lambda xx, yy: _phi_dif1(xx, yy), x, y)
    assert np.allclose(g.real, J.T @ J, atol=1e-8)


def test_identity_phi_gives_product():
    geom = pullback_from_phi(PhiSpec(kind="custom",
                                     jacobian=("1.0 + 0*z", "0*z", "0*z", "1.0 + 0*z")),
                             alpha=0.7)
    g = metric_at(geom, 5.0 + 1.0j, 0.4)
    assert np.allclose(g, np.eye(2), atol=1e-15)


def test_dif2_schwarz_reflection():
    geom = dif2_metric()
    gp = metric_at(geom, 5.0 + 1.0j, 0.7)
    gm = metric_at(geom, 5.0 - 1.0j, 0.7)
    assert np.max(np.abs(gp - np.conj(gm))) < 1e-12


def test_dif1_far_field_stabilizes():
    geom = dif1_metric(a=1.0, beta=0.5, gamma=-1.0)
    g = metric_at(geom, 1.0e4, 1.0)
    assert np.linalg.norm(g - np.eye(2), 2) < 0.05


def test_symmetry_and_positivity_on_real_axis():
    for geom in (product_metric(), dif1_metric(), dif2_metric()):
        x = RNG.uniform(0.0, 50.0, size=12)
        y = RNG.uniform(0.0, np.pi, size=12)
        g = geom(x, y)
        assert np.max(np.abs(g - np.swapaxes(g, -1, -2))) < 1e-14
        assert np.max(np.abs(g.imag)) < 1e-14
        eigs = np.linalg.eigvalsh(g.real)
        assert eigs.min() > 0.0


def test_cauchy_riemann_smoke():
    """4-point complex FD estimate of dg/d(conj z) vanishes for built-ins."""
    delta = 1e-5
    for geom in (product_metric(), dif1_metric(), dif2_metric()):
        for _ in range(20):
            r = RNG.uniform(1.0, 40.0)
            th = RNG.uniform(-0.5, 0.5) * geom.alpha
            z = r * np.exp(1j * th)
            y = RNG.uniform(0.0, np.pi)
            gx = (geom(z + delta, y, check=False) - geom(z - delta, y, check=False))
            gy = (geom(z + 1j * delta, y, check=False) - geom(z - 1j * delta, y, check=False))
            res = (gx + 1j * gy) / (4 * delta)
            gnorm = np.linalg.norm(geom(z, y, check=False), 2)
            assert np.max(np.abs(res)) < 1e-6 * (1.0 + gnorm)


def test_stabilization_product_zero():
    rep = check_stabilization(product_metric(), rays=[0.0, 0.3], radii=[5.0, 50.0, 500.0])
    assert np.max(rep.r) < 1e-12
    assert rep.all_nonincreasing


def test_stabilization_dif2_decay():
    rep = check_stabilization(dif2_metric(), rays=[0.0], radii=[10.0, 100.0, 1000.0])
    assert np.all(np.diff(rep.r[0]) < 0)
    assert rep.r[0, -1] < rep.r[0, 0]
    assert rep.all_nonincreasing


def test_stabilization_dif1_off_axis_ray():
    rep = check_stabilization(dif1_metric(beta=0.5, gamma=-1.0), rays=[0.3],
                              radii=[10.0, 100.0, 1000.0])
    assert np.all(np.diff(rep.r[0]) < 0)
    assert rep.all_nonincreasing


def test_domain_and_parameter_errors():
    geom = dif2_metric(alpha=0.6)
    with pytest.raises(DomainError):
        metric_at(geom, 5.0 * np.exp(0.65j), 1.0)
    with pytest.raises(DomainError):
        metric_at(geom, -1.0, 1.0)
    with pytest.raises(ConfigError):
        PhiSpec(kind="bend", a=0.5, beta=1.2, gamma=-1.0)
    with pytest.raises(ConfigError):
        PhiSpec(kind="bend", a=0.5, beta=0.5, gamma=0.1)
    with pytest.raises(ConfigError):
        dif2_metric(alpha=0.8)         # alpha must stay below pi/4
    with pytest.raises(ConfigError):
        check_stabilization(dif2_metric(), rays=[0.0], radii=[10.0, 5.0, 1.0])


def test_expression_rejects_unknown_names():
    with pytest.raises(ConfigError):
        pullback_from_phi(PhiSpec(kind="custom",
                                  jacobian=("__import__('os')", "0", "0", "1")),
                          alpha=0.7)
