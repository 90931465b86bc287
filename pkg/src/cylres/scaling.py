"""Complex scaling x -> x + lambda*s_R(x): ramp, deformed metric, density.

The scaling profile s_R vanishes for x <= R+1, has slope s' in [0, 1], and
reaches slope 1 after a blend window of width w. The deformed metric is

    g_lambda(x, y) = diag(1 + lambda*s'_R(x), 1)
                     · g(x + lambda*s_R(x), y)
                     · diag(1 + lambda*s'_R(x), 1),

valid for scaling parameters in the disk |lambda| < sin(alpha) < 1/sqrt(2);
the disk bound keeps the deformed axial coordinate inside the analyticity
sector. The density rho_lambda = sqrt(det g_0 / det g_lambda) relates the
deformed volume form to the Riemannian one; its square root is taken on the
principal branch with continuity tracking along increasing x, seeded at
rho = 1 in the unscaled region. The far-field matrix is
diag((1 + lambda*s'_R)^2, h(y)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .end_geometry import EndMetric
from .errors import ConfigError, DegeneracyError, GeometryError

__all__ = ["ScalingProfile", "ScalingParameter", "DeformedMetricField",
           "ramp_value", "deformed_metric", "density_rho", "far_field_matrix",
           "sector_margin"]

_DET_TOL = 1e-13
_FD_STEP = 1e-6

# argument-margin threshold below which the sampled sectoriality warns;
# the continuum bound needs R "sufficiently large" without a formula.
SECTOR_WARN_MARGIN = 0.1


def _quintic(t):
    """Smoothstep 6t^5 - 15t^4 + 10t^3 on [0, 1] (C^2 across the ends)."""
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _quintic_integral(t):
    """Exact antiderivative of the smoothstep: t^6 - 3t^5 + 2.5t^4."""
    return t ** 4 * (2.5 + t * (-3.0 + t))


@dataclass(frozen=True)
class ScalingProfile:
    """Ramp pair (s_R, s'_R); kinds: quintic blend, table, or full scaling.

    quintic: s'_R = smoothstep on [R+1, R+1+w], so s_R(x) = x - (R+1+w/2)
    once the ramp is complete. table: s' piecewise linear through given
    (x, s') knots. full: s(x) = x identically (test mode; not reachable from
    configs since it violates the vanish-near-cap property).
    """

    R: float = 10.0
    w: float = 2.0
    kind: str = "quintic"
    table: Optional[tuple] = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("quintic", "table", "full"):
            raise ConfigError(f"unknown ramp kind {self.kind!r}", key="scaling")
        if self.kind == "quintic":
            if self.R < 0.0:
                raise ConfigError("onset R must be >= 0", key="scaling.R")
            if not self.w > 0.0:
                raise ConfigError("blend width w must be > 0", key="scaling.w")
        if self.kind == "table":
            xs, sp = map(np.asarray, self.table)
            if np.any(np.diff(xs) <= 0):
                raise ConfigError("table knots must be ascending", key="scaling")
            if np.any(sp < 0) or np.any(sp > 1) or sp[0] != 0.0 or sp[-1] != 1.0:
                raise ConfigError("table slopes must run from 0 to 1 within [0,1]",
                                  key="scaling")
            if xs[0] < self.R + 1.0:
                raise ConfigError("table ramp must stay zero up to R+1",
                                  key="scaling")

    @classmethod
    def full(cls) -> "ScalingProfile":
        """s(x) = x, s' = 1 everywhere (constant-coefficient test mode)."""
        return cls(R=0.0, w=1.0, kind="full", label="full")

    @property
    def onset(self) -> float:
        return self.R + 1.0

    @property
    def complete(self) -> float:
        """Axial position where s' reaches 1."""
        if self.kind == "quintic":
            return self.R + 1.0 + self.w
        if self.kind == "table":
            return float(self.table[0][-1])
        return 0.0

    def __call__(self, x):
        """(s_R(x), s'_R(x)), vectorized."""
        x = np.asarray(x, dtype=float)
        if self.kind == "full":
            return x.copy(), np.ones_like(x)
        if self.kind == "quintic":
            t = np.clip((x - self.onset) / self.w, 0.0, 1.0)
            sp = _quintic(t)
            s = self.w * _quintic_integral(t) + np.maximum(x - self.complete, 0.0)
            return s, sp
        xs, sp_k = map(np.asarray, self.table)
        sp = np.interp(x, xs, sp_k)
        sp = np.where(x <= xs[0], 0.0, np.where(x >= xs[-1], 1.0, sp))
        # exact integral of the piecewise-linear slope
        seg = np.concatenate([[0.0], np.cumsum(np.diff(xs) * (sp_k[:-1] + sp_k[1:]) / 2.0)])
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
        x0, x1 = xs[idx], xs[idx + 1]
        f0, f1 = sp_k[idx], sp_k[idx + 1]
        xc = np.clip(x, x0, x1)
        local = (xc - x0) * f0 + 0.5 * (xc - x0) ** 2 * (f1 - f0) / (x1 - x0)
        s = seg[idx] + local + np.maximum(x - xs[-1], 0.0)
        s = np.where(x <= xs[0], 0.0, s)
        return s, sp


def ramp_value(p: ScalingProfile, x):
    """(s_R(x), s'_R(x)) at x."""
    s, sp = p(np.asarray(x, dtype=float))
    if np.ndim(x) == 0:
        return float(s), float(sp)
    return s, sp


@dataclass(frozen=True)
class ScalingParameter:
    """Scaling parameter lambda restricted to the disk |lambda| < sin(alpha)."""

    lam: complex
    alpha_cap: float

    def __post_init__(self):
        sa = math.sin(self.alpha_cap)
        if not sa < 1.0 / math.sqrt(2.0):
            raise ConfigError("need sin(alpha) < 1/sqrt(2), i.e. alpha < pi/4",
                              key="geometry.alpha")
        if not abs(self.lam) < sa:
            raise ConfigError(
                f"lambda {self.lam!r} outside the disk |lambda| < sin(alpha) "
                f"= {sa:.6f}", key="scaling.lambda")


def _as_lambda(lam, geom: EndMetric) -> complex:
    if isinstance(lam, ScalingParameter):
        return complex(lam.lam)
    lam = complex(lam)
    ScalingParameter(lam, geom.alpha)   # validate against the geometry's sector
    return lam


def deformed_metric(geom: EndMetric, p: ScalingProfile, lam, x, y) -> np.ndarray:
    """g_lambda(x, y) = D g(x + lambda s_R, y) D with D = diag(1+lambda s', 1)."""
    lam = _as_lambda(lam, geom)
    x = np.asarray(x, dtype=float)
    s, sp = p(x)
    z = x + lam * s
    g = geom(z, y, check=True)
    d = 1.0 + lam * sp
    g = np.array(g, dtype=complex, copy=True)
    d = np.broadcast_to(d, g.shape[:-2])
    g[..., 0, 0] = g[..., 0, 0] * d * d
    g[..., 0, 1] = g[..., 0, 1] * d
    g[..., 1, 0] = g[..., 1, 0] * d
    return g


def far_field_matrix(lam, sprime, h) -> np.ndarray:
    """diag((1 + lambda*s')^2, h)."""
    a = (1.0 + complex(lam) * np.asarray(sprime)) ** 2
    h = np.asarray(h)
    shape = np.broadcast(a, h).shape
    out = np.zeros(shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 1, 1] = h
    return out


class DeformedMetricField:
    """Closure over (geometry, profile, lambda) evaluating the deformed data.

    All evaluators take broadcastable x (real, the axial grid coordinate) and
    y arrays. rho() applies principal-branch continuity tracking along the
    first axis of the broadcast result, which is the axial direction in all
    assembly calls; scalar/point queries are tracked from the unscaled region
    where rho = 1.
    """

    def __init__(self, geom: EndMetric, profile: ScalingProfile, lam):
        self.geom = geom
        self.profile = profile
        self.lam = _as_lambda(lam, geom)

    # -- raw metric data ---------------------------------------------------
    def metric(self, x, y, check: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s, sp = self.profile(x)
        z = x + self.lam * s
        g = self.geom(z, y, check=check)
        d = 1.0 + self.lam * sp
        g = np.array(g, dtype=complex, copy=True)
        d = np.broadcast_to(d, g.shape[:-2])
        g[..., 0, 0] = g[..., 0, 0] * d * d
        g[..., 0, 1] = g[..., 0, 1] * d
        g[..., 1, 0] = g[..., 1, 0] * d
        return g

    def det(self, x, y) -> np.ndarray:
        g = self.metric(x, y)
        return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]

    def metric_inv(self, x, y) -> np.ndarray:
        g = self.metric(x, y)
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        self._guard_det(det, x, y)
        inv = np.empty_like(g)
        inv[..., 0, 0] = g[..., 1, 1] / det
        inv[..., 1, 1] = g[..., 0, 0] / det
        inv[..., 0, 1] = -g[..., 0, 1] / det
        inv[..., 1, 0] = -g[..., 1, 0] / det
        return inv

    def det0(self, x, y) -> np.ndarray:
        """det of the undeformed metric at real axial coordinate (positive)."""
        g0 = self.geom(np.asarray(x, dtype=float) + 0.0j, y, check=False)
        det = (g0[..., 0, 0] * g0[..., 1, 1] - g0[..., 0, 1] * g0[..., 1, 0]).real
        if np.any(det <= 0.0):
            raise GeometryError("undeformed metric is not positive definite")
        return det

    def weight0(self, x, y) -> np.ndarray:
        """Riemannian volume weight sqrt(det g_0(x, y))."""
        return np.sqrt(self.det0(x, y))

    # -- density -----------------------------------------------------------
    def rho(self, x, y) -> np.ndarray:
        """rho_lambda = sqrt(det g_0 / det g_lambda), branch-tracked along x."""
        ratio = self._ratio(x, y)
        return _tracked_sqrt(ratio)

    def rho_grad(self, x, y, step: float = _FD_STEP):
        """(rho, d rho/dx, d rho/dy) by aligned central differences."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        rho = self.rho(x, y)
        rxp = _aligned_sqrt(self._ratio(x + step, y), rho)
        rxm = _aligned_sqrt(self._ratio(x - step, y), rho)
        ryp = _aligned_sqrt(self._ratio(x, y + step), rho)
        rym = _aligned_sqrt(self._ratio(x, y - step), rho)
        return rho, (rxp - rxm) / (2.0 * step), (ryp - rym) / (2.0 * step)

    def _ratio(self, x, y) -> np.ndarray:
        det_l = self.det(x, y)
        self._guard_det(det_l, x, y)
        return self.det0(x, y) / det_l

    def _guard_det(self, det, x, y):
        bad = np.abs(det) < _DET_TOL
        if np.any(bad):
            xb = np.broadcast_to(np.asarray(x, dtype=float),
                                 np.asarray(det).shape)[bad]
            yb = np.broadcast_to(np.asarray(y, dtype=float),
                                 np.asarray(det).shape)[bad]
            raise DegeneracyError("deformed metric determinant vanishes",
                                  x=float(xb.flat[0]), y=float(yb.flat[0]),
                                  lam=self.lam)

    # -- far field ---------------------------------------------------------
    def far_field(self, x, y) -> np.ndarray:
        _, sp = self.profile(np.asarray(x, dtype=float))
        h = np.ones_like(np.asarray(y, dtype=float)) if self.geom.limit_h is None \
            else np.asarray(self.geom.limit_h(np.asarray(y, dtype=float)), dtype=float)
        return far_field_matrix(self.lam, sp, h)

    def far_field_inv(self, x, y) -> np.ndarray:
        ff = self.far_field(x, y)
        inv = np.zeros_like(ff)
        inv[..., 0, 0] = 1.0 / ff[..., 0, 0]
        inv[..., 1, 1] = 1.0 / ff[..., 1, 1]
        return inv


def density_rho(field: DeformedMetricField, x, y) -> complex:
    """rho_lambda at a single point, branch-tracked from the unscaled region."""
    x = float(x)
    track_from = min(field.profile.onset, x)
    xs = np.linspace(track_from, x, 256)
    vals = field.rho(xs, np.asarray(y, dtype=float))
    return complex(vals[-1])


def _tracked_sqrt(ratio: np.ndarray) -> np.ndarray:
    """Principal sqrt with sign continuity along axis 0."""
    root = np.sqrt(ratio)
    if root.ndim == 0 or root.shape[0] < 2:
        return root
    # A branch flip between consecutive axial samples shows up as the
    # principal roots being closer to opposite than to equal.
    diff = np.abs(np.diff(root, axis=0))
    summ = np.abs(root[1:] + root[:-1])
    flip = np.where(diff > summ, -1.0, 1.0)
    sign = np.concatenate([np.ones_like(root[:1].real),
                           np.cumprod(flip, axis=0)], axis=0)
    return root * sign


def _aligned_sqrt(ratio: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Principal sqrt with the sign nearest a reference value."""
    root = np.sqrt(ratio)
    flip = np.abs(root - ref) > np.abs(root + ref)
    return np.where(flip, -root, root)


def density_ratio_bounds(field: DeformedMetricField, x, y):
    """Realized (c1, c2) with c1 <= |rho_lambda| <= c2 over the grid."""
    mag = np.abs(field.rho(x, y))
    return float(mag.min()), float(mag.max())


def sector_margin(field: DeformedMetricField, x, y, samples: int = 1000,
                  seed: int = 0):
    """Sampled sectoriality of xi_bar · g_lambda^{-1} xi over grid points.

    Returns (max |arg|, delta_lo, delta_hi) where delta bounds the real part
    against |xi|^2. Warns when the margin pi/2 - max|arg| drops below 0.1 rad
    (the onset R may then be too small).
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    xs = rng.choice(x, size=samples)
    ys = rng.choice(y, size=samples)
    ginv = field.metric_inv(xs, ys)
    xi = rng.standard_normal((samples, 2)) + 1j * rng.standard_normal((samples, 2))
    w = np.einsum("ki,kij,kj->k", xi.conj(), ginv, xi)
    nrm = np.sum(np.abs(xi) ** 2, axis=1)
    args = np.abs(np.angle(w))
    ratios = w.real / nrm
    margin = math.pi / 2.0 - float(args.max())
    if margin < SECTOR_WARN_MARGIN:
        warnings.warn(
            f"sampled sectoriality margin {margin:.3f} rad below "
            f"{SECTOR_WARN_MARGIN}; consider a larger scaling onset R",
            stacklevel=2)
    return float(args.max()), float(ratios.min()), float(ratios.max())
