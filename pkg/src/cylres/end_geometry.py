"""Axial-analytic end metrics g(z, y) over the complex axial coordinate.

The end metric is given on the half-cylinder by a 2x2 complex symmetric
matrix field g(z, y) that is analytic in z on the sector |arg z| < alpha
(alpha < pi/4), real positive definite for real z, and stabilizes to the
product matrix diag(1, h(y)) as |z| -> infinity.

Built-ins:
  * product metric  g = diag(1, h(y)), z-independent;
  * "bend" pullback: phi(z, y) = (z, (z+3)^beta a + (1 + (z+3)^gamma) y),
    beta < 1, gamma < 0 — the image domain bends/shears at infinity;
  * "widen" pullback: phi(z, y) = (int_0^z (1 + 1/log(t+4)) dt,
    (1 + 1/log(z+5)) y) — logarithmically slow stabilization;
  * custom pullbacks from closed-form Jacobian expressions.

Pullbacks of the Euclidean metric use g = J^T J with J the complex Jacobian
of phi; the shifts z+3, z+4, z+5 keep the closed forms analytic and
nondegenerate on the closed sector in use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError, GeometryError

__all__ = ["EndMetric", "PhiSpec", "DecayReport", "metric_at",
           "check_stabilization", "pullback_from_phi", "product_metric",
           "dif1_metric", "dif2_metric", "expression_function"]

_JAC_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class EndMetric:
    """Evaluable end-metric field with its analyticity sector.

    eval_fn takes broadcastable complex z and real y and returns an array of
    shape broadcast(z, y).shape + (2, 2). limit_h is the cross metric
    coefficient h(y) of the product limit diag(1, h(y)) (None = flat).
    """

    eval_fn: Callable = field(repr=False)
    alpha: float
    limit_h: Optional[Callable] = field(default=None, repr=False)
    provenance: str = "custom"
    params: dict = field(default_factory=dict)
    y_extent: float = math.pi

    def __post_init__(self):
        if not 0.0 < self.alpha < math.pi / 4:
            raise ConfigError("sector half-angle alpha must lie in (0, pi/4)",
                              key="geometry.alpha")

    def limit_matrix(self, y) -> np.ndarray:
        """Product-limit matrix diag(1, h(y))."""
        y = np.asarray(y, dtype=float)
        h = np.ones_like(y) if self.limit_h is None else \
            np.broadcast_to(np.asarray(self.limit_h(y), dtype=float), y.shape)
        out = np.zeros(y.shape + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = h
        return out

    def __call__(self, z, y, check: bool = True) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        y = np.asarray(y, dtype=float)
        if check:
            _check_sector(z, self.alpha)
        g = self.eval_fn(z, y)
        return g


def metric_at(geom: EndMetric, z, y) -> np.ndarray:
    """g(z, y); refuses evaluation outside the sector |arg z| < alpha, Re z > 0."""
    return geom(z, y, check=True)


def _check_sector(z: np.ndarray, alpha: float):
    re, im = z.real, z.imag
    # real nonnegative axis is always allowed (closure of the sector apex)
    ok = ((re > 0.0) & (np.abs(im) < re * math.tan(alpha))) | \
         ((im == 0.0) & (re >= 0.0))
    if not np.all(ok):
        bad = np.asarray(z)[~np.asarray(ok)]
        raise DomainError(
            f"axial coordinate {bad.flat[0]!r} outside the sector "
            f"|arg z| < {alpha} with Re z > 0")


@dataclass(frozen=True)
class PhiSpec:
    """Straightening diffeomorphism family for Euclidean pullback metrics.

    kind "bend":  params a (real), beta < 1, gamma < 0.
    kind "widen": no parameters.
    kind "custom": jacobian = 4 callables/expressions (J00, J01, J10, J11),
    optionally phi = (phi0, phi1) for diagnostics.
    """

    kind: str
    a: float = 0.0
    beta: float = 0.5
    gamma: float = -1.0
    jacobian: Optional[Sequence] = None
    phi: Optional[Sequence] = None

    def __post_init__(self):
        if self.kind not in ("bend", "widen", "custom"):
            raise ConfigError(f"unknown phi kind {self.kind!r}", key="geometry.kind")
        if self.kind == "bend":
            if not self.beta < 1.0:
                raise ConfigError("bend needs beta < 1", key="geometry.params.beta")
            if not self.gamma < 0.0:
                raise ConfigError("bend needs gamma < 0", key="geometry.params.gamma")
        if self.kind == "custom" and (self.jacobian is None or len(self.jacobian) != 4):
            raise ConfigError("custom phi needs 4 Jacobian entries",
                              key="geometry.params.jacobian")


def pullback_from_phi(spec: PhiSpec, alpha: float, y_extent: float = math.pi) -> EndMetric:
    """EndMetric g = J^T J from the closed-form complex Jacobian of phi."""
    jac = _jacobian_fn(spec)

    def eval_fn(z, y):
        J = jac(z, y)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(np.abs(det) < _JAC_SINGULAR_TOL):
            raise GeometryError("singular Jacobian sample in pullback metric")
        g = np.empty_like(J)
        g[..., 0, 0] = J[..., 0, 0] ** 2 + J[..., 1, 0] ** 2
        g[..., 0, 1] = J[..., 0, 0] * J[..., 0, 1] + J[..., 1, 0] * J[..., 1, 1]
        g[..., 1, 0] = g[..., 0, 1]
        g[..., 1, 1] = J[..., 0, 1] ** 2 + J[..., 1, 1] ** 2
        return g

    return EndMetric(eval_fn=eval_fn, alpha=alpha, limit_h=None,
                     provenance=spec.kind, params=_spec_params(spec),
                     y_extent=y_extent)


def _jacobian_fn(spec: PhiSpec):
    if spec.kind == "bend":
        a, beta, gamma = spec.a, spec.beta, spec.gamma

        def jac(z, y):
            z = np.asarray(z, dtype=complex)
            y = np.asarray(y, dtype=float)
            zp = z + 3.0
            shape = np.broadcast(z, y).shape
            J = np.zeros(shape + (2, 2), dtype=complex)
            J[..., 0, 0] = 1.0
            J[..., 1, 0] = a * beta * zp ** (beta - 1.0) + gamma * zp ** (gamma - 1.0) * y
            J[..., 1, 1] = 1.0 + zp ** gamma
            return J
        return jac

    if spec.kind == "widen":
        def jac(z, y):
            z = np.asarray(z, dtype=complex)
            y = np.asarray(y, dtype=float)
            log4, log5 = np.log(z + 4.0), np.log(z + 5.0)
            shape = np.broadcast(z, y).shape
            J = np.zeros(shape + (2, 2), dtype=complex)
            J[..., 0, 0] = 1.0 + 1.0 / log4
            J[..., 1, 0] = -y / ((z + 5.0) * log5 ** 2)
            J[..., 1, 1] = 1.0 + 1.0 / log5
            return J
        return jac

    entries = [e if callable(e) else expression_function(e) for e in spec.jacobian]

    def jac(z, y):
        z = np.asarray(z, dtype=complex)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(z, y).shape
        J = np.zeros(shape + (2, 2), dtype=complex)
        for k, fn in enumerate(entries):
            J[..., k // 2, k % 2] = fn(z, y)
        return J
    return jac


def _spec_params(spec: PhiSpec) -> dict:
    if spec.kind == "bend":
        return {"a": spec.a, "beta": spec.beta, "gamma": spec.gamma}
    return {}


def product_metric(h: Optional[Callable] = None, alpha: float = 0.7,
                   y_extent: float = math.pi) -> EndMetric:
    """z-independent product metric diag(1, h(y))."""

    def eval_fn(z, y):
        z = np.asarray(z, dtype=complex)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(z, y).shape
        g = np.zeros(shape + (2, 2), dtype=complex)
        hv = np.ones(shape) if h is None else np.broadcast_to(
            np.asarray(h(y), dtype=float), shape)
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = hv
        return g

    return EndMetric(eval_fn=eval_fn, alpha=alpha, limit_h=h,
                     provenance="product", y_extent=y_extent)


def dif1_metric(a: float = 0.5, beta: float = 0.5, gamma: float = -1.0,
                alpha: float = 0.7, y_extent: float = math.pi) -> EndMetric:
    """Bend/shear pullback example."""
    return pullback_from_phi(PhiSpec(kind="bend", a=a, beta=beta, gamma=gamma),
                             alpha=alpha, y_extent=y_extent)


def dif2_metric(alpha: float = 0.7, y_extent: float = math.pi) -> EndMetric:
    """Logarithmically-stabilizing widening pullback example."""
    return pullback_from_phi(PhiSpec(kind="widen"), alpha=alpha,
                             y_extent=y_extent)


@dataclass(frozen=True)
class DecayReport:
    """Stabilization check along rays of the sector."""

    rays: np.ndarray            # arg values
    radii: np.ndarray
    r: np.ndarray               # (n_rays, n_radii) defect amplitudes
    nonincreasing: np.ndarray   # per ray, within 10% slack

    @property
    def all_nonincreasing(self) -> bool:
        return bool(np.all(self.nonincreasing))


def check_stabilization(geom: EndMetric, rays: Sequence[float],
                        radii: Sequence[float], y_grid=None,
                        dz: float = 1e-4) -> DecayReport:
    """Sampled stabilization defect r(z) along sector rays.

    r(z) = max over the y-grid of sum_{|q|<=1} ||d^q (g(z,y) - gbar(y))||_F,
    with the axial derivative by a central difference of step dz and the
    cross derivative by one y-grid cell. Reports whether r is nonincreasing
    within 10% slack along each ray.
    """
    radii = np.asarray(radii, dtype=float)
    rays_arr = np.asarray(rays, dtype=float)
    if len(radii) < 3 or np.any(np.diff(radii) <= 0):
        raise ConfigError("radii must be at least 3 ascending values",
                          key="stabilization.radii")
    if np.any(np.abs(rays_arr) >= geom.alpha):
        raise DomainError("stabilization ray leaves the sector")
    if y_grid is None:
        y_grid = np.linspace(0.0, geom.y_extent, 33)
    y_grid = np.asarray(y_grid, dtype=float)
    dy = y_grid[1] - y_grid[0]

    gbar = geom.limit_matrix(y_grid)
    dgbar = _central_y(geom.limit_matrix, y_grid, dy)

    r = np.zeros((len(rays_arr), len(radii)))
    for i, th in enumerate(rays_arr):
        for k, rad in enumerate(radii):
            z = rad * np.exp(1j * th)
            d0 = geom(z, y_grid, check=True) - gbar
            dx = (geom(z + dz, y_grid, check=False)
                  - geom(z - dz, y_grid, check=False)) / (2.0 * dz)
            dyv = _central_y(lambda yy: geom(z, yy, check=False), y_grid, dy) - dgbar
            amp = (_fro(d0) + _fro(dx) + _fro(dyv)).max()
            r[i, k] = amp
    noninc = np.all(r[:, 1:] <= 1.1 * r[:, :-1] + 1e-300, axis=1)
    return DecayReport(rays=rays_arr, radii=radii, r=r, nonincreasing=noninc)


def _central_y(fn, y_grid, dy):
    return (fn(y_grid + dy) - fn(y_grid - dy)) / (2.0 * dy)


def _fro(m: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(m) ** 2, axis=(-2, -1)))


_EXPR_NAMESPACE = {
    "np": np, "pi": np.pi, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "sinh": np.sinh,
    "cosh": np.cosh, "tanh": np.tanh, "abs": np.abs,
}


def expression_function(expr: str) -> Callable:
    """Compile a closed-form expression in (z, y) to a vectorized callable."""
    try:
        code = compile(expr, "<config-expression>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {expr!r}: {exc}") from exc
    for name in code.co_names:
        if name not in _EXPR_NAMESPACE and name not in ("z", "y"):
            raise ConfigError(f"unknown name {name!r} in expression {expr!r}")

    def fn(z, y):
        return eval(code, {"__builtins__": {}},
                    dict(_EXPR_NAMESPACE, z=z, y=y))
    return fn
