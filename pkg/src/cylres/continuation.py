"""Analytic vectors and resolvent matrix elements across the continuum.

Analytic vectors are F(x, y) = cut(x) * exp(-gamma x^2) P(x) * Phi_j(y):
Gaussian-damped polynomials along the axis times a cross mode, with a fixed
quintic cutoff rising from 0 at the cap x = 0 to 1 at x = 1 (the scaling
never acts there, so the cutoff commutes with it). Such data admits complex
scaling of its argument: the scaled vector samples
f(x + lambda s_R(x)) Phi_j(y) by direct complex arithmetic.

The matrix-element trace

    m(mu) = ( (A(lambda) - mu M)^{-1} M F_lambda, G_conj(lambda) )_lambda

is the discrete surrogate of the resolvent matrix element continued across
the essential spectrum: two admissible lambdas must produce the same values
on a mu-region uncovered by both rays (compare_traces), and poles of m
correspond to discrete eigenvalues of the deformed pencil (detect_poles).
The deformed pairing is (u, v)_lambda = ∫ u conj(v) (1/rho) sqrt(det g_0),
evaluated by trapezoid quadrature on the grid nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cross_section import ThresholdSet
from .discretization import AssembledOperator, Grid
from .eigensolver import ResolventOperator
from .errors import ConfigError, SingularPencilError
from .scaling import DeformedMetricField, ScalingProfile

__all__ = ["AnalyticVector", "MatrixElementTrace", "PoleReport",
           "scaled_vector", "deformed_inner", "matrix_element_trace",
           "compare_traces", "detect_poles"]

# mu-grid points closer to the pencil spectrum than this are skipped
MIN_EIG_DIST = 1e-3
PEAK_FACTOR = 10.0


def _quintic(t):
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _cutoff(x):
    """C^2 cutoff: 0 at the cap, 1 from x = 1 on."""
    return _quintic(np.clip(np.asarray(x, dtype=float), 0.0, 1.0))


@dataclass(frozen=True)
class AnalyticVector:
    """Axial Gaussian-polynomial data on one cross mode.

    gamma > 0 damping, poly = complex coefficients of P (ascending powers),
    mode = cross-mode index j in the ThresholdSet numbering.
    """

    gamma: float
    poly: tuple = (1.0,)
    mode: int = 1
    label: str = ""

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ConfigError("analytic vector needs gamma > 0", key="trace.gamma")

    def axial(self, z):
        """f(z) = exp(-gamma z^2) P(z) for complex z (entire)."""
        z = np.asarray(z, dtype=complex)
        p = np.zeros_like(z)
        for c in reversed(self.poly):
            p = p * z + c
        return np.exp(-self.gamma * z * z) * p

    def decay_check(self, radii=(5.0, 10.0, 20.0)) -> bool:
        """Superpolynomial decay along the real axis at sample radii."""
        r = np.asarray(radii, dtype=float)
        vals = np.abs(self.axial(r))
        return bool(np.all(vals[1:] * (r[1:] / r[:-1]) ** 8 < vals[:-1] + 1e-300))

    def id(self) -> str:
        return (self.label or
                f"gauss(gamma={self.gamma},deg={len(self.poly) - 1},mode={self.mode})")


def scaled_vector(F: AnalyticVector, profile: ScalingProfile, lam,
                  grid: Grid, ts: ThresholdSet) -> np.ndarray:
    """Full-grid samples of cut(x) f(x + lambda s_R(x)) Phi_j(y)."""
    lam = complex(lam)
    if not abs(lam) < 1.0 / np.sqrt(2.0):
        raise ConfigError("scaled vectors need |lambda| < 1/sqrt(2)",
                          key="scaling.lambda")
    x = grid.x
    s, _ = profile(x)
    axial = _cutoff(x) * F.axial(x + lam * s)
    phi = ts.mode_values(F.mode, grid.y)
    return np.outer(axial, phi).ravel()


def deformed_inner(u, v, field: DeformedMetricField, grid: Grid) -> complex:
    """(u, v)_lambda = ∫ u conj(v) (1/rho) sqrt(det g_0), trapezoid rule."""
    u = np.asarray(u).reshape(len(grid.x), grid.n_y_nodes)
    v = np.asarray(v).reshape(len(grid.x), grid.n_y_nodes)
    wx = np.full(len(grid.x), grid.hx)
    wx[0] = wx[-1] = grid.hx / 2.0
    if grid.periodic_y:
        wy = np.full(grid.n_y_nodes, grid.hy)
    else:
        wy = np.full(grid.n_y_nodes, grid.hy)
        wy[0] = wy[-1] = grid.hy / 2.0
    X = grid.x[:, None]
    Y = grid.y[None, :]
    weight = field.weight0(X, Y) / field.rho(X, Y)
    val = np.sum(u * np.conj(v) * weight * wx[:, None] * wy[None, :])
    return complex(val)


@dataclass
class MatrixElementTrace:
    """m(mu) on a mu-grid, with skip flags for near-spectrum points."""

    mu: np.ndarray
    values: np.ndarray
    flags: list
    lam: complex
    F_id: str
    G_id: str
    meta: dict = field(default_factory=dict)

    def valid(self) -> np.ndarray:
        return np.array([f == "ok" for f in self.flags])

    def rows(self):
        for mu, m, fl in zip(self.mu, self.values, self.flags):
            yield (mu.real, mu.imag,
                   m.real if np.isfinite(m.real) else float("nan"),
                   m.imag if np.isfinite(m.imag) else float("nan"), fl)

    def bound_estimate(self, spectrum) -> dict:
        """Estimated C with |m(mu)| <= C / dist(mu, spectrum) on the grid."""
        spectrum = np.asarray(spectrum, dtype=complex)
        ok = self.valid()
        if not ok.any() or len(spectrum) == 0:
            return {"C": None}
        d = np.array([np.min(np.abs(spectrum - mu)) for mu in self.mu[ok]])
        c = float(np.max(np.abs(self.values[ok]) * d))
        return {"C": c, "min_dist": float(d.min()), "max_dist": float(d.max())}


def matrix_element_trace(op: AssembledOperator, field: DeformedMetricField,
                         grid: Grid, ts: ThresholdSet, profile: ScalingProfile,
                         F: AnalyticVector, G: AnalyticVector, mu_grid,
                         eigenvalues=(), min_eig_dist: float = MIN_EIG_DIST,
                         tol: float = 1e-10) -> MatrixElementTrace:
    """Trace of the deformed matrix element over a mu-grid.

    For each mu: u = (A - mu M)^{-1} M (F o kappa_lambda), then
    m = (u, G o kappa_conj(lambda))_lambda. Points within min_eig_dist of a
    supplied eigenvalue are skipped with flag 'near_spectrum'.
    """
    lam = field.lam
    F_lam = scaled_vector(F, profile, lam, grid, ts)
    G_bar = scaled_vector(G, profile, np.conj(lam), grid, ts)
    F_active = grid.restrict(F_lam)
    eigenvalues = np.asarray(eigenvalues, dtype=complex)

    mu_grid = np.asarray(mu_grid, dtype=complex)
    values = np.full(len(mu_grid), np.nan + 1j * np.nan)
    flags = []
    for k, mu in enumerate(mu_grid):
        if len(eigenvalues) and np.min(np.abs(eigenvalues - mu)) < min_eig_dist:
            flags.append("near_spectrum")
            continue
        try:
            u_active = ResolventOperator(op, mu, tol=tol).apply(F_active)
        except SingularPencilError:
            flags.append("singular")
            continue
        u_full = grid.full_vector(u_active)
        values[k] = deformed_inner(u_full, G_bar, field, grid)
        flags.append("ok")
    return MatrixElementTrace(
        mu=mu_grid, values=values, flags=flags, lam=lam,
        F_id=F.id(), G_id=G.id(),
        meta={"grid": grid.meta(), "profile_R": profile.R,
              "min_eig_dist": min_eig_dist})


def compare_traces(t1: MatrixElementTrace, t2: MatrixElementTrace) -> float:
    """Max relative deviation over mutually valid mu-grid points."""
    if len(t1.mu) != len(t2.mu) or np.max(np.abs(t1.mu - t2.mu)) > 0:
        raise ConfigError("traces live on different mu grids")
    if (t1.F_id, t1.G_id) != (t2.F_id, t2.G_id):
        raise ConfigError("traces use different analytic vectors")
    if t1.meta.get("grid") != t2.meta.get("grid"):
        raise ConfigError("traces use different grids")
    both = t1.valid() & t2.valid()
    if not both.any():
        raise ConfigError("no mutually valid mu-grid points")
    dev = np.abs(t1.values[both] - t2.values[both]) / \
        (1.0 + np.abs(t1.values[both]))
    return float(np.max(dev))


@dataclass(frozen=True)
class PoleMatch:
    pole: complex
    matched: Optional[complex]
    distance: float


@dataclass
class PoleReport:
    matches: list
    unmatched: list
    median_abs: float

    def as_dict(self) -> dict:
        return {
            "poles": [{"mu": [p.pole.real, p.pole.imag],
                       "matched": None if p.matched is None else
                       [p.matched.real, p.matched.imag],
                       "distance": p.distance} for p in self.matches],
            "unmatched": [[p.real, p.imag] for p in self.unmatched],
            "median_abs": self.median_abs,
        }


def detect_poles(trace: MatrixElementTrace, candidates,
                 match_tol: float = 1e-2,
                 peak_factor: float = PEAK_FACTOR) -> PoleReport:
    """Flag local maxima of |m| above peak_factor * median as poles.

    Each peak is paired with the nearest candidate (discrete) eigenvalue;
    peaks without a candidate within match_tol are reported unmatched
    (a diagnostic, not a failure).
    """
    ok = trace.valid()
    mags = np.where(ok, np.abs(trace.values), np.nan)
    med = float(np.nanmedian(mags))
    candidates = np.asarray(candidates, dtype=complex)
    matches, unmatched = [], []
    # interior local maxima only: endpoints riding a tail are not peaks
    for k in range(1, len(trace.mu) - 1):
        if not (ok[k] and ok[k - 1] and ok[k + 1]):
            continue
        if not (mags[k] > mags[k - 1] and mags[k] >= mags[k + 1]):
            continue
        if not mags[k] > peak_factor * med:
            continue
        mu_peak = complex(trace.mu[k])
        if len(candidates):
            j = int(np.argmin(np.abs(candidates - mu_peak)))
            d = float(abs(candidates[j] - mu_peak))
            if d <= match_tol:
                matches.append(PoleMatch(pole=mu_peak,
                                         matched=complex(candidates[j]),
                                         distance=d))
                continue
        unmatched.append(mu_peak)
    return PoleReport(matches=matches, unmatched=unmatched, median_abs=med)
