"""Q1 finite-element assembly of the deformed form on the truncated cylinder.

The computational domain is the capped cylinder [0, X_max] x Omega with a
Dirichlet or Neumann cap at x = 0, a Dirichlet far cap at x = X_max (the
truncation surrogate for the noncompact end), and the cross-section's own
side condition. Bilinear nodal elements on the tensor grid; stencils of at
most 9 nonzeros per row.

The stiffness matrix is the literal cell quadrature of the deformed
sesquilinear form

    q[u, v] = ∫ g_lambda[du, d(conj(rho) v)] (1/rho) sqrt(det g_0) dx dy,

which for the real nodal basis reduces per quadrature point to

    grad(phi_trial) · Ginv · grad(phi_test) * w0
  + grad(phi_trial) · Ginv · grad(rho) * phi_test / rho * w0.

Dirichlet rows/columns are eliminated; the deformed Neumann condition is the
natural condition of the form and needs no constraint.

Both matrices use a per-direction blend of the 2-point Gauss and nodal
(trapezoid) rules in equal parts, applied to every term. For linear elements
this is the dispersion-corrected ("higher-order mass") variant of the plain
Gauss scheme: on separable constant-coefficient cylinders the pencil
tensorizes exactly and its eigenvalue dispersion drops from
k^2 (1 + (kh)^2/12) to k^2 (1 - (kh)^4/240), while symmetry, positive
weights, and the 9-point stencil are unchanged. The separable acceptance
tolerances at the pinned grids require the corrected dispersion; the blend
must be used for stiffness and mass alike, otherwise the mismatch of the
cross-direction mass factors reintroduces an O(h^2) error.

assemble_modal reduces the same form to one cross mode (product metrics
only): eigenvalues of the 1-D pencil are nu_j + eigenvalues of the scaled
axis operator, and they agree with the 2-D assembly's mode-j eigenvalues to
solver precision when nu_j is the discrete cross eigenvalue of the same
y-grid (see cross_section_pencil).
"""

from __future__ import annotations

import gzip
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .cross_section import CrossSection
from .end_geometry import EndMetric
from .errors import ConfigError, UnsupportedError
from .scaling import DeformedMetricField, ScalingProfile, _aligned_sqrt

__all__ = ["Grid", "AssembledOperator", "build_grid", "assemble_form",
           "assemble_modal", "neumann_trace", "cross_section_pencil",
           "form_quadrature", "dump_triplets"]

_G0 = 0.5 - 0.5 / math.sqrt(3.0)
_G1 = 0.5 + 0.5 / math.sqrt(3.0)
GAUSS2 = ((_G0, 0.5), (_G1, 0.5))
NODAL = ((0.0, 0.5), (1.0, 0.5))
# Equal-parts blend of the 2-pt Gauss and nodal rules, applied per direction
# to every term. On uniform cells with separable coefficients this produces
# the exactly tensorized pencil K ⊗ M_b + M_b ⊗ K over M_b ⊗ M_b whose
# eigenvalue dispersion is k^2 (1 - (kh)^4/240): the Gauss-only stiffness
# against a blended mass would leave an O(h^2) cross-direction error.
CELL_RULE = tuple((t, 0.5 * w) for t, w in GAUSS2 + NODAL)

_RHO_FD_STEP = 1e-6


@dataclass(frozen=True)
class Grid:
    """Tensor grid on [0, X_max] x Omega with boundary-condition flags."""

    x: np.ndarray
    y: np.ndarray                      # interval: N_y+1 nodes; circle: N_y
    cross_section: CrossSection
    cap_bc: str
    active: np.ndarray = field(repr=False)     # bool mask over all nodes
    dof_of_node: np.ndarray = field(repr=False)

    @property
    def periodic_y(self) -> bool:
        return self.cross_section.kind == "circle"

    @property
    def n_x_cells(self) -> int:
        return len(self.x) - 1

    @property
    def n_y_cells(self) -> int:
        return len(self.y) if self.periodic_y else len(self.y) - 1

    @property
    def n_y_nodes(self) -> int:
        return len(self.y)

    @property
    def hx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def hy(self) -> float:
        ext = self.cross_section.extent
        return ext / self.n_y_cells

    @property
    def n_nodes(self) -> int:
        return len(self.x) * self.n_y_nodes

    @property
    def n_dofs(self) -> int:
        return int(self.active.sum())

    def node_index(self, i, j) -> np.ndarray:
        """Global node index of (x_i, y_j), wrapping j on the circle."""
        j = np.mod(j, self.n_y_nodes) if self.periodic_y else j
        return np.asarray(i) * self.n_y_nodes + np.asarray(j)

    def full_vector(self, u_active: np.ndarray) -> np.ndarray:
        """Embed an active-dof vector into the full node set (zeros on BC)."""
        full = np.zeros(self.n_nodes, dtype=complex)
        full[self.active] = u_active
        return full

    def restrict(self, u_full: np.ndarray) -> np.ndarray:
        return np.asarray(u_full)[self.active]

    def meta(self) -> dict:
        return {"X_max": float(self.x[-1]), "N_x": self.n_x_cells,
                "N_y": self.n_y_cells, "cap_bc": self.cap_bc,
                "cross_section": {"kind": self.cross_section.kind,
                                  "extent": self.cross_section.extent,
                                  "bc": self.cross_section.bc}}


def build_grid(cs: CrossSection, X_max: float, N_x: int, N_y: int,
               cap_bc: str = "dirichlet",
               profile: Optional[ScalingProfile] = None) -> Grid:
    """Tensor grid with BC flags; raises on inconsistent truncation."""
    if cap_bc not in ("dirichlet", "neumann"):
        raise ConfigError(f"unknown cap_bc {cap_bc!r}", key="grid.cap_bc")
    if N_x < 8 or N_y < 8:
        raise ConfigError("N_x and N_y must be >= 8", key="grid")
    if not X_max > 0:
        raise ConfigError("X_max must be positive", key="grid.X_max")
    if profile is not None and profile.kind != "full":
        needed = profile.R + 1.0 + (profile.w if profile.kind == "quintic"
                                    else profile.complete - profile.R - 1.0) + 5.0
        if not X_max > needed:
            raise ConfigError(
                f"X_max={X_max} too small: scaling must be fully active well "
                f"before truncation (need > {needed})", key="grid.X_max")

    x = np.linspace(0.0, X_max, N_x + 1)
    if cs.kind == "circle":
        y = np.linspace(0.0, cs.extent, N_y, endpoint=False)
    else:
        y = np.linspace(0.0, cs.extent, N_y + 1)

    n_y_nodes = len(y)
    active = np.ones((N_x + 1, n_y_nodes), dtype=bool)
    active[-1, :] = False                      # far cap (truncation) is Dirichlet
    if cap_bc == "dirichlet":
        active[0, :] = False
    if cs.kind == "interval" and cs.bc == "dirichlet":
        active[:, 0] = False
        active[:, -1] = False
    active = active.ravel()
    dof_of_node = np.full(active.size, -1, dtype=np.int64)
    dof_of_node[active] = np.arange(active.sum())
    return Grid(x=x, y=y, cross_section=cs, cap_bc=cap_bc,
                active=active, dof_of_node=dof_of_node)


@dataclass
class AssembledOperator:
    """Sparse pencil (A, M) over the active dofs, with provenance metadata."""

    A: sp.csr_matrix
    M: sp.csr_matrix
    grid: Optional[Grid]
    meta: dict
    ndim: int = 2

    @property
    def n(self) -> int:
        return self.A.shape[0]


# local Q1 node order: (dx, dy) offsets within the cell
_LOCAL = ((0, 0), (1, 0), (0, 1), (1, 1))


def _shape_1d(t):
    return np.array([1.0 - t, t]), np.array([-1.0, 1.0])


def assemble_form(geom: EndMetric, profile: ScalingProfile, lam,
                  grid: Grid) -> AssembledOperator:
    """Assemble the deformed stiffness A and the mass M on the grid."""
    field_ = DeformedMetricField(geom, profile, lam)
    nx, ny = grid.n_x_cells, grid.n_y_cells
    hx, hy = grid.hx, grid.hy
    ix = np.arange(nx)
    iy = np.arange(ny)
    x0 = grid.x[:-1]
    y0 = (iy * hy) if grid.periodic_y else grid.y[:-1]

    # global node indices of the 4 cell corners, shape (nx, ny) each
    corner = [grid.node_index(ix[:, None] + di, iy[None, :] + dj)
              for (di, dj) in _LOCAL]

    rows, cols, a_vals, m_vals = [], [], [], []
    a_blocks = np.zeros((4, 4, nx, ny), dtype=complex)
    m_blocks = np.zeros((4, 4, nx, ny), dtype=complex)

    for (tx, wx_) in CELL_RULE:
        Nx_, dNx_ = _shape_1d(tx)
        X = (x0 + tx * hx)[:, None]
        for (ty, wy_) in CELL_RULE:
            Ny_, dNy_ = _shape_1d(ty)
            Y = (y0 + ty * hy)[None, :]
            w = wx_ * wy_ * hx * hy
            ginv = field_.metric_inv(X, Y)
            rho, drx, dry = field_.rho_grad(X, Y, step=_RHO_FD_STEP)
            w0 = field_.weight0(X, Y)
            g00, g01 = ginv[..., 0, 0], ginv[..., 0, 1]
            g10, g11 = ginv[..., 1, 0], ginv[..., 1, 1]
            cx = (g00 * drx + g01 * dry) / rho
            cy = (g10 * drx + g11 * dry) / rho
            for a, (dia, dja) in enumerate(_LOCAL):        # test
                gxa = dNx_[dia] * Ny_[dja] / hx
                gya = Nx_[dia] * dNy_[dja] / hy
                na = Nx_[dia] * Ny_[dja]
                for b, (dib, djb) in enumerate(_LOCAL):    # trial
                    gxb = dNx_[dib] * Ny_[djb] / hx
                    gyb = Nx_[dib] * dNy_[djb] / hy
                    nb = Nx_[dib] * Ny_[djb]
                    grad_term = (gxb * (g00 * gxa + g01 * gya)
                                 + gyb * (g10 * gxa + g11 * gya))
                    rho_term = (gxb * cx + gyb * cy) * na
                    a_blocks[a, b] += w * (grad_term + rho_term) * w0
                    if na * nb != 0.0:
                        m_blocks[a, b] += w * na * nb * w0

    for a in range(4):
        for b in range(4):
            rows.append(corner[a].ravel())
            cols.append(corner[b].ravel())
            a_vals.append(a_blocks[a, b].ravel())
            m_vals.append(m_blocks[a, b].ravel())

    n = grid.n_nodes
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    A = sp.coo_matrix((np.concatenate(a_vals), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((np.concatenate(m_vals), (rows, cols)), shape=(n, n)).tocsr()

    idx = np.flatnonzero(grid.active)
    A = A[idx][:, idx].tocsr()
    M = M[idx][:, idx].tocsr()
    meta = {"lambda": complex(field_.lam), "geometry": _geom_id(geom),
            "profile": _profile_id(profile), "grid": grid.meta()}
    return AssembledOperator(A=A, M=M, grid=grid, meta=meta, ndim=2)


def _geom_id(geom: EndMetric) -> str:
    ps = ",".join(f"{k}={v}" for k, v in sorted(geom.params.items()))
    return f"{geom.provenance}({ps})"


def _profile_id(profile: ScalingProfile) -> str:
    if profile.kind == "quintic":
        return f"quintic(R={profile.R},w={profile.w})"
    return f"{profile.kind}(R={profile.R})"


def _axial_rho(profile: ScalingProfile, lam, x):
    """rho and rho' of the product-metric reduction, FD-matched to the field."""
    s, sp_ = profile(x)
    rho = 1.0 / (1.0 + lam * sp_)
    rp = _aligned_sqrt(1.0 / (1.0 + lam * profile(x + _RHO_FD_STEP)[1]) ** 2, rho)
    rm = _aligned_sqrt(1.0 / (1.0 + lam * profile(x - _RHO_FD_STEP)[1]) ** 2, rho)
    return rho, (rp - rm) / (2.0 * _RHO_FD_STEP)


def assemble_modal(profile: ScalingProfile, lam, nu_j: float, x_nodes,
                   cap_bc: str = "dirichlet",
                   geom_provenance: str = "product") -> AssembledOperator:
    """1-D reduction of the form to one cross mode (product metrics only).

    a[U, V] = ∫ U' (1+lam s')^{-2} (rho V)' / rho dx + nu_j ∫ U V dx with the
    same quadrature split as the 2-D assembly, so (A1, M1) eigenvalues are
    nu_j + scaled-axis eigenvalues, matching the 2-D pencil exactly when
    nu_j is the discrete cross eigenvalue.
    """
    if geom_provenance != "product":
        raise UnsupportedError("modal reduction is only valid for product metrics")
    lam = complex(lam)
    x = np.asarray(x_nodes, dtype=float)
    nx = len(x) - 1
    hx = x[1] - x[0]
    x0 = x[:-1]

    blocks_a = np.zeros((2, 2, nx), dtype=complex)
    blocks_m = np.zeros((2, 2, nx), dtype=complex)
    for (tx, wx_) in CELL_RULE:
        N, dN = _shape_1d(tx)
        X = x0 + tx * hx
        _, sp_ = profile(X)
        c = (1.0 + lam * sp_) ** (-2.0)
        rho, drho = _axial_rho(profile, lam, X)
        for a in range(2):
            for b in range(2):
                grad_term = (dN[b] / hx) * c * (dN[a] / hx)
                rho_term = (dN[b] / hx) * c * (drho / rho) * N[a]
                blocks_a[a, b] += wx_ * hx * (grad_term + rho_term)
                blocks_m[a, b] += wx_ * hx * N[a] * N[b]

    rows, cols, av, mv = [], [], [], []
    cells = np.arange(nx)
    for a in range(2):
        for b in range(2):
            rows.append(cells + a)
            cols.append(cells + b)
            av.append(blocks_a[a, b] + nu_j * blocks_m[a, b])
            mv.append(blocks_m[a, b] + np.zeros(nx, dtype=complex))
    n = len(x)
    A = sp.coo_matrix((np.concatenate(av),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    M = sp.coo_matrix((np.concatenate(mv),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    keep = np.ones(n, dtype=bool)
    keep[-1] = False
    if cap_bc == "dirichlet":
        keep[0] = False
    idx = np.flatnonzero(keep)
    A = A[idx][:, idx].tocsr()
    M = M[idx][:, idx].tocsr()
    meta = {"lambda": lam, "geometry": "modal-product", "nu_j": float(nu_j),
            "profile": _profile_id(profile),
            "grid": {"X_max": float(x[-1]), "N_x": nx, "cap_bc": cap_bc}}
    return AssembledOperator(A=A, M=M, grid=None, meta=meta, ndim=1)


def cross_section_pencil(cs: CrossSection, n_y_cells: int):
    """1-D FEM pencil (K, M) of the cross Laplacian on the assembly y-grid.

    Same elements and quadrature as the 2-D assembly (P1, 2-pt Gauss
    stiffness with coefficient h^{-1/2}, blended mass with weight sqrt(h)),
    so its eigenpairs are the discrete thresholds/modes of the 2-D pencil.
    Returns (K, M, y_nodes, active_mask).
    """
    periodic = cs.kind == "circle"
    if periodic:
        y = np.linspace(0.0, cs.extent, n_y_cells, endpoint=False)
        n_nodes = n_y_cells
    else:
        y = np.linspace(0.0, cs.extent, n_y_cells + 1)
        n_nodes = n_y_cells + 1
    hy = cs.extent / n_y_cells
    cells = np.arange(n_y_cells)
    left = cells % n_nodes
    right = (cells + 1) % n_nodes

    ka = np.zeros((2, 2, n_y_cells))
    ma = np.zeros((2, 2, n_y_cells))
    y0 = y[cells]
    for (t, w_) in CELL_RULE:
        N, dN = _shape_1d(t)
        Y = y0 + t * hy
        coeff = cs.h_values(Y) ** (-0.5)
        wgt = np.sqrt(cs.h_values(Y))
        for a in range(2):
            for b in range(2):
                ka[a, b] += w_ * hy * (dN[b] / hy) * (dN[a] / hy) * coeff
                ma[a, b] += w_ * hy * N[a] * N[b] * wgt

    nodes = (left, right)
    rows = np.concatenate([nodes[a] for a in range(2) for b in range(2)])
    cols = np.concatenate([nodes[b] for a in range(2) for b in range(2)])
    kv = np.concatenate([ka[a, b] for a in range(2) for b in range(2)])
    mv = np.concatenate([ma[a, b] for a in range(2) for b in range(2)])
    K = sp.coo_matrix((kv, (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    M = sp.coo_matrix((mv, (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    active = np.ones(n_nodes, dtype=bool)
    if cs.kind == "interval" and cs.bc == "dirichlet":
        active[0] = active[-1] = False
    idx = np.flatnonzero(active)
    return K[idx][:, idx].tocsr(), M[idx][:, idx].tocsr(), y, active


def form_quadrature(geom: EndMetric, profile: ScalingProfile, lam, grid: Grid,
                    u_full: np.ndarray, v_full: np.ndarray) -> complex:
    """Direct cell-by-cell integration of q[u, v] (assembly oracle).

    Evaluates the same integrand as assemble_form but contracts it against
    the nodal fields without building matrices: an independent route to
    v^H A u used by the Green-identity consistency checks.
    """
    field_ = DeformedMetricField(geom, profile, lam)
    u = np.asarray(u_full).reshape(len(grid.x), grid.n_y_nodes)
    v = np.asarray(v_full).reshape(len(grid.x), grid.n_y_nodes)
    hx, hy = grid.hx, grid.hy
    total = 0.0 + 0.0j
    ny = grid.n_y_cells
    for icell in range(grid.n_x_cells):
        for jcell in range(ny):
            jn = [(jcell + dj) % grid.n_y_nodes if grid.periodic_y else jcell + dj
                  for dj in (0, 1)]
            ucorn = np.array([[u[icell + di, jn[dj]] for (di, dj) in _LOCAL]])
            vcorn = np.array([[v[icell + di, jn[dj]] for (di, dj) in _LOCAL]])
            for (tx, wx_) in CELL_RULE:
                Nx_, dNx_ = _shape_1d(tx)
                for (ty, wy_) in CELL_RULE:
                    Ny_, dNy_ = _shape_1d(ty)
                    X = grid.x[icell] + tx * hx
                    Y = (jcell * hy if grid.periodic_y else grid.y[jcell]) + ty * hy
                    shp = np.array([Nx_[di] * Ny_[dj] for (di, dj) in _LOCAL])
                    gx = np.array([dNx_[di] * Ny_[dj] / hx for (di, dj) in _LOCAL])
                    gy = np.array([Nx_[di] * dNy_[dj] / hy for (di, dj) in _LOCAL])
                    du = np.array([ucorn @ gx, ucorn @ gy]).ravel()
                    vb = np.conj(vcorn).ravel()
                    dvb = np.array([vb @ gx, vb @ gy])
                    vval = vb @ shp
                    xa = np.asarray([X])
                    ginv = field_.metric_inv(xa, np.asarray([Y]))[0]
                    rho, drx, dry = field_.rho_grad(xa, np.asarray([Y]),
                                                    step=_RHO_FD_STEP)
                    rho, drx, dry = rho[0], drx[0], dry[0]
                    w0 = field_.weight0(xa, np.asarray([Y]))[0]
                    # d(rho * conj(v)) = rho d(conj v) + conj(v) d(rho)
                    omega = rho * dvb + vval * np.array([drx, dry])
                    total += wx_ * wy_ * hx * hy * w0 / rho * (du @ ginv @ omega)
    return complex(total)


def neumann_trace(geom: EndMetric, profile: ScalingProfile, lam, grid: Grid,
                  u_full: np.ndarray, side: str) -> float:
    """Discrete L2 norm of the deformed Neumann trace along a side.

    Evaluates (0, 1/sqrt((g^-1)_nn)) g^-1 grad(u) on side 'ymin'/'ymax' with
    a one-sided cross difference and centered axial differences (diagnostic
    only; first-order in the grid spacing).
    """
    cs = grid.cross_section
    if cs.kind != "interval" or cs.bc != "neumann":
        raise UnsupportedError("Neumann trace needs an interval cross-section "
                               "with bc='neumann'")
    if side not in ("ymin", "ymax"):
        raise ConfigError(f"unknown side {side!r}", key="side")
    field_ = DeformedMetricField(geom, profile, lam)
    u = np.asarray(u_full).reshape(len(grid.x), grid.n_y_nodes)
    hy = grid.hy
    if side == "ymin":
        ub, un = u[:, 0], u[:, 1]
        y_side = grid.y[0]
        uy = (un - ub) / hy
    else:
        ub, un = u[:, -1], u[:, -2]
        y_side = grid.y[-1]
        uy = (ub - un) / hy
    ux = np.gradient(ub, grid.x)
    ginv = field_.metric_inv(grid.x, np.full_like(grid.x, y_side))
    tval = (ginv[:, 1, 0] * ux + ginv[:, 1, 1] * uy) / np.sqrt(ginv[:, 1, 1])
    wx = np.full(len(grid.x), grid.hx)
    wx[0] = wx[-1] = grid.hx / 2.0
    return float(np.sqrt(np.sum(np.abs(tval) ** 2 * wx)))


def dump_triplets(mat: sp.spmatrix, path: str) -> None:
    """Triplet text dump: header '# rows cols nnz', lines 'i j re im'."""
    coo = mat.tocoo()
    buf = io.StringIO()
    buf.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
    for i, j, v in zip(coo.row, coo.col, coo.data):
        buf.write(f"{i} {j} {float(v.real)!r} {float(v.imag)!r}\n")
    data = buf.getvalue().encode()
    if str(path).endswith(".gz"):
        with open(path, "wb") as raw:
            # fixed mtime keeps the archive byte-reproducible
            with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
                fh.write(data)
    else:
        with open(path, "wb") as fh:
            fh.write(data)
