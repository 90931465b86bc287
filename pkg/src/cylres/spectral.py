"""Essential-spectrum rays, eigenvalue classification, stability sweeps.

For a scaling parameter lambda the essential spectrum of the deformed
operator consists of the rays nu_j + t*exp(-2i*arg(1+lambda)), t >= 0, one
per threshold. On a truncated grid the continuum ray appears as a point
cloud hugging the ray; classification is by distance:

  threshold_adjacent  |mu - nu_j| < thresh_tol for some threshold,
  ray_artifact        distance to the nearest ray < ray_tol * (1 + |mu|),
  discrete_candidate  everything else.

Discrete candidates are the numerical surrogate of the discrete spectrum:
genuine ones are independent of lambda and of the ramp shape as long as no
ray sweeps over them, which the sweep drivers verify by nearest-neighbor
tracking across runs.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cross_section import CrossSection, ThresholdSet, thresholds
from .discretization import AssembledOperator, assemble_form, build_grid
from .eigensolver import EigenResult, solve_dense, solve_shift_invert
from .end_geometry import EndMetric
from .errors import ConfigError
from .scaling import ScalingProfile

__all__ = ["Ray", "ClassifiedValue", "SpectralPortrait", "Window",
           "StabilityReport", "SweepJob", "predict_essential", "classify",
           "fit_ray_angle", "sweep_lambda", "sweep_profile", "sector_check",
           "choose_gamma_shift", "SectorCheck"]

RAY_TOL = 0.05
THRESH_TOL = 0.05


@dataclass(frozen=True)
class Ray:
    """{origin + t exp(i angle) : t >= 0} in the complex plane."""

    origin: float
    angle: float

    def point(self, t):
        return self.origin + np.asarray(t) * np.exp(1j * self.angle)

    def distance(self, mu):
        """Euclidean distance from mu to the ray (vectorized)."""
        w = np.asarray(mu, dtype=complex) - self.origin
        t = np.maximum((w * np.exp(-1j * self.angle)).real, 0.0)
        return np.abs(w - t * np.exp(1j * self.angle))


def predict_essential(ts: ThresholdSet, lam) -> list[Ray]:
    """One essential-spectrum ray per threshold, angle -2*arg(1+lambda)."""
    angle = -2.0 * math.atan2(np.imag(1 + complex(lam)),
                              np.real(1 + complex(lam)))
    return [Ray(origin=float(nu), angle=angle) for nu in ts.values]


@dataclass(frozen=True)
class ClassifiedValue:
    mu: complex
    klass: str                  # ray_artifact | discrete_candidate | threshold_adjacent
    residual: float
    ray_distance: float


@dataclass
class SpectralPortrait:
    """Thresholds, rays, and classified eigenvalues for one lambda."""

    thresholds: ThresholdSet
    lam: complex
    rays: list[Ray]
    eigenvalues: list[ClassifiedValue]
    ray_tol: float = RAY_TOL
    thresh_tol: float = THRESH_TOL

    def of_class(self, klass: str) -> np.ndarray:
        return np.array([e.mu for e in self.eigenvalues if e.klass == klass],
                        dtype=complex)

    def as_dict(self) -> dict:
        return {
            "nu": [float(v) for v in self.thresholds.values],
            "mult": [int(m) for m in self.thresholds.multiplicities],
            "lambda": [self.lam.real, self.lam.imag],
            "rays": [{"origin": r.origin, "angle": r.angle} for r in self.rays],
            "eigs": [{"mu": [e.mu.real, e.mu.imag], "class": e.klass,
                      "res": e.residual, "ray_distance": e.ray_distance}
                     for e in self.eigenvalues],
            "tolerances": {"ray_tol": self.ray_tol, "thresh_tol": self.thresh_tol},
        }


def classify(values, residuals, rays: Sequence[Ray], ts: ThresholdSet,
             lam, ray_tol: float = RAY_TOL,
             thresh_tol: float = THRESH_TOL) -> SpectralPortrait:
    """Distance-to-ray classification of computed eigenvalues."""
    out = []
    values = np.asarray(values, dtype=complex)
    residuals = np.asarray(residuals, dtype=float)
    for mu, res in zip(values, residuals):
        dray = min(r.distance(mu) for r in rays) if rays else np.inf
        dthr = min(abs(mu - nu) for nu in ts.values)
        if dthr < thresh_tol:
            klass = "threshold_adjacent"
        elif dray < ray_tol * (1.0 + abs(mu)):
            klass = "ray_artifact"
        else:
            klass = "discrete_candidate"
        out.append(ClassifiedValue(mu=complex(mu), klass=klass,
                                   residual=float(res),
                                   ray_distance=float(dray)))
    return SpectralPortrait(thresholds=ts, lam=complex(lam), rays=list(rays),
                            eigenvalues=out, ray_tol=ray_tol,
                            thresh_tol=thresh_tol)


def fit_ray_angle(values, origin: float) -> float:
    """Least-squares angle of a ray through `origin` fitting the points.

    Minimizes the summed squared distances of w_i = mu_i - origin to the
    line of direction theta through the origin; the minimizer is
    theta = arg(sum w_i^2) / 2 (principal-axis form).
    """
    w = np.asarray(values, dtype=complex) - origin
    if len(w) < 2:
        raise ConfigError("need at least two points to fit a ray angle")
    return 0.5 * np.angle(np.sum(w * w))


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle in the complex plane."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ConfigError("window must have positive extent", key="window")

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max),
                       0.5 * (self.im_min + self.im_max))

    def contains(self, mu):
        mu = np.asarray(mu, dtype=complex)
        return ((mu.real >= self.re_min) & (mu.real <= self.re_max)
                & (mu.imag >= self.im_min) & (mu.imag <= self.im_max))

    def distance_to_ray(self, ray: Ray, n_samples: int = 2001) -> float:
        """Min distance between the rectangle and the ray (sampled in t)."""
        corners = np.array([complex(self.re_min, self.im_min),
                            complex(self.re_min, self.im_max),
                            complex(self.re_max, self.im_min),
                            complex(self.re_max, self.im_max)])
        t_max = max(abs(c - ray.origin) for c in corners) + 1.0
        t = np.linspace(0.0, t_max, n_samples)
        pts = ray.point(t)
        dre = np.maximum(np.maximum(self.re_min - pts.real,
                                    pts.real - self.re_max), 0.0)
        dim = np.maximum(np.maximum(self.im_min - pts.imag,
                                    pts.imag - self.im_max), 0.0)
        d_rect = np.sqrt(dre ** 2 + dim ** 2).min()
        d_corner = min(ray.distance(c) for c in corners)
        return float(min(d_rect, d_corner))


@dataclass
class TrackedValue:
    values: list            # one complex (or None if lost) per run
    max_drift: float


@dataclass
class StabilityReport:
    """Drift of tracked eigenvalues across a lambda- or ramp-sweep."""

    parameter_kind: str                 # "lambda" | "profile"
    parameters: list
    window: Window
    tracked: list
    lost: list
    max_pairwise_drift: float
    refinement_drift: Optional[float] = None
    runs: list = field(default_factory=list)   # per-run provenance dicts

    def as_dict(self) -> dict:
        def c2(v):
            return None if v is None else [v.real, v.imag]
        return {
            "parameter_kind": self.parameter_kind,
            "parameters": [str(p) for p in self.parameters],
            "window": [self.window.re_min, self.window.re_max,
                       self.window.im_min, self.window.im_max],
            "tracked": [{"values": [c2(v) for v in t.values],
                         "max_drift": t.max_drift} for t in self.tracked],
            "lost": [c2(v) for v in self.lost],
            "max_pairwise_drift": self.max_pairwise_drift,
            "refinement_drift": self.refinement_drift,
            "runs": self.runs,
        }


@dataclass
class SweepJob:
    """Fixed geometry/discretization context for stability sweeps."""

    geom: EndMetric
    cross_section: CrossSection
    profile: ScalingProfile
    X_max: float
    N_x: int
    N_y: int
    cap_bc: str = "dirichlet"
    k: int = 12
    sigma: Optional[complex] = None    # default: window center
    n_thresholds: int = 8
    jobs: int = 1

    def run_one(self, lam, profile=None, scale: float = 1.0):
        profile = profile or self.profile
        grid = build_grid(self.cross_section, self.X_max,
                          max(8, int(self.N_x * scale)),
                          max(8, int(self.N_y * scale)),
                          self.cap_bc, profile=profile)
        op = assemble_form(self.geom, profile, lam, grid)
        return op, grid

    def solve(self, lam, window: Window, profile=None,
              scale: float = 1.0) -> EigenResult:
        op, _ = self.run_one(lam, profile=profile, scale=scale)
        sigma = self.sigma if self.sigma is not None else window.center
        if op.n <= 1500:
            return solve_dense(op)
        return solve_shift_invert(op, sigma, self.k)


def _validate_window(job: SweepJob, lambdas, window: Window,
                     margin: float = 0.0):
    ts = thresholds(job.cross_section, job.n_thresholds,
                    grid_n=max(64, 8 * job.n_thresholds))
    for lam in lambdas:
        for ray in predict_essential(ts, lam):
            if window.distance_to_ray(ray) <= margin:
                raise ConfigError(
                    f"window intersects the essential-spectrum ray from "
                    f"nu={ray.origin:.6f} at lambda={lam}", key="window")
    return ts


def _track(runs_values, window: Window, reject_radius: float):
    """Nearest-neighbor tracking of windowed eigenvalues across runs."""
    base = [mu for mu in runs_values[0] if window.contains(mu)]
    tracked, lost = [], []
    for mu0 in base:
        chain = [mu0]
        ok = True
        for vals in runs_values[1:]:
            vals = np.asarray(vals, dtype=complex)
            if len(vals) == 0:
                ok = False
                break
            k = int(np.argmin(np.abs(vals - chain[-1])))
            if abs(vals[k] - chain[-1]) > reject_radius:
                ok = False
                break
            chain.append(complex(vals[k]))
        if ok:
            drift = max((abs(a - b) for a in chain for b in chain), default=0.0)
            tracked.append(TrackedValue(values=chain, max_drift=float(drift)))
        else:
            lost.append(mu0)
    return tracked, lost


def _sweep(job: SweepJob, kind: str, params, window: Window,
           drift_tol: float, refine: bool) -> StabilityReport:
    if len(params) < 1:
        raise ConfigError("sweep needs at least one parameter value")
    if kind == "lambda":
        lambdas = [complex(p) for p in params]
        profiles = [None] * len(params)
    else:
        lambdas = [complex(params[0][1])] * len(params)
        profiles = [p for (p, _) in params]
    _validate_window(job, lambdas, window)

    def solve_one(i):
        res = job.solve(lambdas[i], window, profile=profiles[i])
        return res.in_window(window)

    if job.jobs > 1:
        with ThreadPoolExecutor(max_workers=job.jobs) as pool:
            results = list(pool.map(solve_one, range(len(params))))
    else:
        results = [solve_one(i) for i in range(len(params))]

    reject = 10.0 * drift_tol
    tracked, lost = _track([r.values for r in results], window, reject)
    max_drift = max((t.max_drift for t in tracked), default=0.0)

    refinement = None
    if refine and tracked:
        coarse = job.solve(lambdas[0], window,
                           profile=profiles[0], scale=0.5).in_window(window)
        drifts = []
        for t in tracked:
            if len(coarse.values):
                d = np.min(np.abs(coarse.values - t.values[0]))
                if d <= reject:
                    drifts.append(float(d))
        refinement = max(drifts) if drifts else None

    runs_meta = [{"parameter": str(lambdas[i] if kind == "lambda"
                                   else profiles[i].label or profiles[i].w),
                  "n_eigs_in_window": len(results[i].values),
                  "max_residual": float(np.max(results[i].residuals))
                  if len(results[i]) else 0.0}
                 for i in range(len(params))]
    return StabilityReport(parameter_kind=kind,
                           parameters=(lambdas if kind == "lambda"
                                       else [p.label or f"w={p.w}"
                                             for p, _ in params]),
                           window=window, tracked=tracked, lost=lost,
                           max_pairwise_drift=max_drift,
                           refinement_drift=refinement, runs=runs_meta)


def sweep_lambda(job: SweepJob, lambdas, window: Window,
                 drift_tol: float = 1e-2, refine: bool = True) -> StabilityReport:
    """Track windowed eigenvalues across scaling parameters."""
    return _sweep(job, "lambda", list(lambdas), window, drift_tol, refine)


def sweep_profile(job: SweepJob, profiles, lam, window: Window,
                  drift_tol: float = 1e-2, refine: bool = True) -> StabilityReport:
    """Track windowed eigenvalues across ramp choices at fixed lambda."""
    params = [(p, complex(lam)) for p in profiles]
    return _sweep(job, "profile", params, window, drift_tol, refine)


@dataclass(frozen=True)
class SectorCheck:
    max_arg: float
    rq_min: float
    rq_max: float
    gamma_shift: float
    samples: int
    passed: bool


def sector_check(op: AssembledOperator, gamma_shift: float = 0.0,
                 samples: int = 1000, seed: int = 0) -> SectorCheck:
    """Sampled numerical range of the shifted form.

    Draws M-normalized random vectors u, computes w = u^H A u + gamma u^H M u
    and reports max |arg w| plus the range of Re(u^H A u)/u^H M u. PASS iff
    max |arg w| < pi/2.
    """
    if gamma_shift < 0:
        raise ConfigError("gamma_shift must be >= 0", key="gamma_shift")
    rng = np.random.default_rng(seed)
    n = op.n
    max_arg = 0.0
    rq_min, rq_max = np.inf, -np.inf
    for _ in range(samples):
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        u /= math.sqrt(np.vdot(u, op.M @ u).real)
        q = np.vdot(u, op.A @ u)
        w = q + gamma_shift
        max_arg = max(max_arg, abs(math.atan2(w.imag, w.real)))
        rq_min = min(rq_min, q.real)
        rq_max = max(rq_max, q.real)
    return SectorCheck(max_arg=float(max_arg), rq_min=float(rq_min),
                       rq_max=float(rq_max), gamma_shift=float(gamma_shift),
                       samples=samples, passed=bool(max_arg < math.pi / 2))


def choose_gamma_shift(op: AssembledOperator, target_arg: float,
                       samples: int = 200, seed: int = 1) -> float:
    """Smallest shift putting pilot numerical-range samples inside |arg| <
    target_arg, with a 25% safety margin."""
    rng = np.random.default_rng(seed)
    need = 0.0
    tan_t = math.tan(target_arg)
    for _ in range(samples):
        u = rng.standard_normal(op.n) + 1j * rng.standard_normal(op.n)
        u /= math.sqrt(np.vdot(u, op.M @ u).real)
        q = np.vdot(u, op.A @ u)
        need = max(need, abs(q.imag) / tan_t - q.real)
    return 1.25 * need
