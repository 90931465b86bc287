"""Compact cross-section (Omega, h) and its thresholds.

The cross-section is a 1-D compact manifold: an interval of length L (with
Dirichlet or Neumann side condition) or a circle of circumference C. Its
metric is h(y)*dy⊗dy with h > 0; h ≡ 1 is the flat case. Thresholds are the
distinct eigenvalues nu_1 < nu_2 < ... of the cross-section Laplacian
-(1/sqrt(h)) d/dy (h^{-1/2} d/dy) with the matching boundary condition; the
associated unit-normalized eigenfunctions are the cross modes Phi_j.

Flat cases return separable closed forms. Curved cases are solved with a
second-order finite-difference/finite-volume pencil at grid_n and 2*grid_n
points and Richardson-extrapolated, which leaves an O(grid_n^-4) eigenvalue
error (flat-case agreement with the closed forms is ~1e-9 at grid_n = 400).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import ConfigError, GeometryError, ResolutionError

__all__ = ["CrossSection", "ThresholdSet", "thresholds", "mode_values"]

# Two discrete eigenvalues belong to one threshold if they differ by less
# than this (relative) amount; the circle's exact double eigenvalues split
# at discretization level.
GROUP_TOL = 1e-6


@dataclass(frozen=True)
class CrossSection:
    """The fiber (Omega, h) with its boundary-condition kind.

    kind     : "interval" or "circle"
    extent   : length L (interval) or circumference C (circle), > 0
    bc       : "dirichlet" | "neumann" for an interval, "none" for a circle
    h        : metric coefficient h(y) as a vectorized callable, or None for
               the flat metric h ≡ 1
    """

    kind: str
    extent: float
    bc: str
    h: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind not in ("interval", "circle"):
            raise ConfigError(f"unknown cross-section kind {self.kind!r}",
                              key="cross_section.kind")
        if not self.extent > 0.0:
            raise ConfigError("extent must be positive", key="cross_section")
        # bc = none exactly for the circle: a circle has no boundary, and
        # compact-boundary manifolds (interval fiber without side condition)
        # are excluded.
        if self.kind == "circle" and self.bc != "none":
            raise ConfigError("circle cross-section takes bc='none'",
                              key="cross_section.bc")
        if self.kind == "interval" and self.bc not in ("dirichlet", "neumann"):
            raise ConfigError("interval cross-section needs bc dirichlet|neumann",
                              key="cross_section.bc")

    @property
    def is_flat(self) -> bool:
        return self.h is None

    def h_values(self, y) -> np.ndarray:
        """Sample h(y); validates positivity of every sample."""
        y = np.asarray(y, dtype=float)
        if self.h is None:
            return np.ones_like(y)
        vals = np.asarray(self.h(y), dtype=float)
        vals = np.broadcast_to(vals, y.shape).copy()
        if not np.all(vals > 0.0):
            raise GeometryError("metric coefficient h(y) has a non-positive sample")
        return vals

    def nodes(self, n: int) -> np.ndarray:
        """n equispaced nodes: interval includes both endpoints, circle wraps."""
        if self.kind == "interval":
            return np.linspace(0.0, self.extent, n)
        return np.linspace(0.0, self.extent, n, endpoint=False)


@dataclass(frozen=True)
class ThresholdSet:
    """Distinct thresholds nu_1 < nu_2 < ..., multiplicities, and modes.

    Modes are indexed flat (multiplicity-expanded, ordered by eigenvalue),
    starting at 1 for the Dirichlet interval (whose first mode has nu > 0)
    and at 0 otherwise (the first mode is then the nu = 0 constant).
    """

    values: np.ndarray
    multiplicities: np.ndarray
    cross_section: CrossSection
    index_base: int
    grid_n: int
    # Curved-metric solves carry their grid and (sign-fixed, orthonormal)
    # eigenvector columns; flat cases sample closed forms instead.
    _y_solver: Optional[np.ndarray] = field(default=None, repr=False)
    _modes: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_modes(self) -> int:
        return int(self.multiplicities.sum())

    def mode_values(self, j: int, y_grid) -> np.ndarray:
        """Sample Phi_j on y_grid, unit L^2(Omega,h) norm, first nonzero > 0."""
        k = j - self.index_base
        if not 0 <= k < self.n_modes:
            raise ConfigError(
                f"mode index {j} outside computed range "
                f"[{self.index_base}, {self.index_base + self.n_modes - 1}]",
                key="mode")
        y = np.asarray(y_grid, dtype=float)
        if self._modes is None:
            vals = _closed_form_mode(self.cross_section, k)(y)
        else:
            vals = _sample_solver_mode(self.cross_section, self._y_solver,
                                       self._modes[:, k], y)
        return _fix_sign(vals)

    def threshold_of_mode(self, j: int) -> float:
        """Threshold value the mode Phi_j belongs to."""
        k = j - self.index_base
        if not 0 <= k < self.n_modes:
            raise ConfigError(f"mode index {j} outside computed range", key="mode")
        return float(self.values[np.searchsorted(
            np.cumsum(self.multiplicities), k, side="right")])

    def as_dict(self) -> dict:
        return {"nu": [float(v) for v in self.values],
                "mult": [int(m) for m in self.multiplicities]}


def thresholds(cs: CrossSection, count: int, grid_n: int = 400,
               method: str = "auto") -> ThresholdSet:
    """First `count` distinct thresholds of the cross-section Laplacian.

    method: "auto" (closed forms when flat, FD otherwise), "closed", "fd".
    The FD path solves the symmetric generalized pencil at grid_n and
    2*grid_n and Richardson-extrapolates the eigenvalues.
    """
    if count < 1:
        raise ConfigError("count must be >= 1", key="cross_section.count")
    if grid_n < 8:
        raise ResolutionError("grid_n must be >= 8", key="cross_section.grid_n")
    if count > grid_n // 4:
        raise ResolutionError(
            f"grid too coarse: count={count} exceeds grid_n/4={grid_n // 4}",
            key="cross_section.count")

    if method not in ("auto", "closed", "fd"):
        raise ConfigError(f"unknown method {method!r}", key="method")
    if method == "closed" and not cs.is_flat:
        raise ConfigError("closed forms only exist for the flat metric",
                          key="method")
    use_closed = cs.is_flat if method == "auto" else (method == "closed")

    base = 1 if (cs.kind == "interval" and cs.bc == "dirichlet") else 0
    if use_closed:
        vals, mult = _closed_form_values(cs, count)
        return ThresholdSet(values=vals, multiplicities=mult, cross_section=cs,
                            index_base=base, grid_n=grid_n)

    # refined node count chosen so the spacing halves exactly
    if cs.kind == "circle":
        n_fine = 2 * grid_n
    elif cs.bc == "dirichlet":
        n_fine = 2 * grid_n + 1
    else:
        n_fine = 2 * grid_n - 1
    nu_c, _, _ = _solve_pencil(cs, grid_n)
    nu_f, modes, y_solver = _solve_pencil(cs, n_fine)
    m = min(len(nu_c), len(nu_f))
    nu_extrap = (4.0 * nu_f[:m] - nu_c[:m]) / 3.0

    vals, mult = _group(nu_extrap)
    if len(vals) < count:
        raise ResolutionError(
            f"only {len(vals)} distinct eigenvalues resolved, need {count}",
            key="cross_section.count")
    vals, mult = vals[:count], mult[:count]
    n_modes = int(mult.sum())
    return ThresholdSet(values=vals, multiplicities=mult, cross_section=cs,
                        index_base=base, grid_n=grid_n,
                        _y_solver=y_solver, _modes=modes[:, :n_modes])


def mode_values(ts: ThresholdSet, j: int, y_grid) -> np.ndarray:
    return ts.mode_values(j, y_grid)


# ---------------------------------------------------------------- internals

def _closed_form_values(cs: CrossSection, count: int):
    if cs.kind == "interval":
        base_freq = np.pi / cs.extent
        if cs.bc == "dirichlet":
            ks = np.arange(1, count + 1)
        else:
            ks = np.arange(0, count)
        return (ks * base_freq) ** 2, np.ones(count, dtype=int)
    ks = np.arange(0, count)
    vals = (2.0 * np.pi * ks / cs.extent) ** 2
    mult = np.where(ks == 0, 1, 2).astype(int)
    return vals, mult


def _closed_form_mode(cs: CrossSection, k: int):
    L = cs.extent
    if cs.kind == "interval":
        if cs.bc == "dirichlet":
            m = k + 1
            return lambda y: np.sqrt(2.0 / L) * np.sin(m * np.pi * y / L)
        if k == 0:
            return lambda y: np.full_like(np.asarray(y, float), 1.0 / np.sqrt(L))
        return lambda y: np.sqrt(2.0 / L) * np.cos(k * np.pi * y / L)
    # circle, flat modes ordered [const, cos_1, sin_1, cos_2, sin_2, ...]
    if k == 0:
        return lambda y: np.full_like(np.asarray(y, float), 1.0 / np.sqrt(L))
    m = (k + 1) // 2
    if k % 2 == 1:
        return lambda y: np.sqrt(2.0 / L) * np.cos(2 * np.pi * m * y / L)
    return lambda y: np.sqrt(2.0 / L) * np.sin(2 * np.pi * m * y / L)


def _solve_pencil(cs: CrossSection, n: int):
    """Symmetric generalized FD/FV pencil A u = nu B u on n nodes.

    Flux form of -(d/dy)(h^{-1/2} du/dy) = nu sqrt(h) u: A holds interface
    fluxes c = h^{-1/2} divided by the cell size, B the sqrt(h)-weighted cell
    masses. Dirichlet keeps n interior nodes, Neumann n nodes including the
    endpoints, the circle n wrapped nodes. Returns (nu, B-orthonormal modes,
    node coordinates).
    """
    L = cs.extent
    if cs.kind == "interval" and cs.bc == "dirichlet":
        dy = L / (n + 1)
        y = (np.arange(1, n + 1)) * dy
        y_mid = (np.arange(0, n + 1) + 0.5) * dy          # interfaces
        c = 1.0 / np.sqrt(cs.h_values(y_mid))
        diag = (c[:-1] + c[1:]) / dy
        off = -c[1:-1] / dy
        w = np.full(n, dy)
    elif cs.kind == "interval":                            # neumann
        dy = L / (n - 1)
        y = np.arange(n) * dy
        y_mid = (np.arange(n - 1) + 0.5) * dy
        c = 1.0 / np.sqrt(cs.h_values(y_mid))
        diag = np.zeros(n)
        diag[:-1] += c / dy
        diag[1:] += c / dy
        off = -c / dy
        w = np.full(n, dy)
        w[0] = w[-1] = dy / 2.0
    else:                                                  # circle
        dy = L / n
        y = np.arange(n) * dy
        y_mid = (np.arange(n) + 0.5) * dy
        c = 1.0 / np.sqrt(cs.h_values(y_mid))
        w = np.full(n, dy)

    b = np.sqrt(cs.h_values(y)) * w

    if cs.kind == "circle":
        A = np.zeros((n, n))
        idx = np.arange(n)
        np.add.at(A, (idx, idx), (c + np.roll(c, 1)) / dy)
        np.add.at(A, (idx, (idx + 1) % n), -c / dy)
        np.add.at(A, ((idx + 1) % n, idx), -c / dy)
        binv = 1.0 / np.sqrt(b)
        nu, V = scipy.linalg.eigh(binv[:, None] * A * binv[None, :])
        modes = binv[:, None] * V
    else:
        # symmetric-definite tridiagonal pencil, reduced with B^{-1/2}
        binv = 1.0 / np.sqrt(b)
        d_red = diag * binv * binv
        e_red = off * binv[:-1] * binv[1:]
        nu, V = scipy.linalg.eigh_tridiagonal(d_red, e_red)
        modes = binv[:, None] * V
    nu = np.maximum(nu, 0.0) if cs.bc != "dirichlet" else nu
    return nu, modes, y


def _group(nu: np.ndarray):
    """Group sorted eigenvalues into distinct thresholds with multiplicities."""
    vals, mult = [], []
    for v in nu:
        if vals and abs(v - vals[-1]) < GROUP_TOL * (1.0 + abs(v)):
            mult[-1] += 1
            # keep the group mean as the reported threshold
            vals[-1] += (v - vals[-1]) / mult[-1]
        else:
            vals.append(float(v))
            mult.append(1)
    return np.asarray(vals), np.asarray(mult, dtype=int)


def _sample_solver_mode(cs, y_solver, mode, y):
    if cs.kind == "circle":
        yy = np.concatenate([y_solver, [cs.extent]])
        vv = np.concatenate([mode, [mode[0]]])
        return np.interp(np.mod(y, cs.extent), yy, vv)
    if cs.bc == "dirichlet":
        yy = np.concatenate([[0.0], y_solver, [cs.extent]])
        vv = np.concatenate([[0.0], mode, [0.0]])
    else:
        yy, vv = y_solver, mode
    from scipy.interpolate import CubicSpline
    return CubicSpline(yy, vv)(np.clip(y, 0.0, cs.extent))


def _fix_sign(vals: np.ndarray) -> np.ndarray:
    v = np.asarray(vals)
    scale = np.max(np.abs(v)) if v.size else 0.0
    if scale == 0.0:
        return v
    nz = np.nonzero(np.abs(v) > 1e-8 * scale)[0]
    if nz.size and v.flat[nz[0]].real < 0:
        return -v
    return v
