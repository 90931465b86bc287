"""Generalized non-Hermitian eigensolves A u = mu M u and resolvent applies.

Dense path: LAPACK (scipy.linalg.eig) for pencils up to 3000 dofs.
Sparse path: ARPACK shift-invert Arnoldi on (A - sigma M)^{-1} M with a
SuperLU factorization. Every reported eigenpair carries a residual
||A u - mu M u||_2 / ||u||_M recomputed against the sparse matrices; pairs
above the residual cap are dropped rather than reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import AssembledOperator
from .errors import (ConfigError, IterationError, ShiftOnSpectrumError,
                     SingularPencilError, UnsupportedError)

__all__ = ["EigenResult", "solve_dense", "solve_shift_invert",
           "resolvent_apply", "ResolventOperator"]

DENSE_CAP = 3000
RESIDUAL_CAP = 1e-8
ARPACK_TOL = 1e-10


@dataclass
class EigenResult:
    """Eigenpairs with recomputed residuals.

    values sorted by |mu - sigma| (shift-invert) or by Re mu (dense);
    vectors are M-normalized columns aligned with values.
    """

    values: np.ndarray
    residuals: np.ndarray
    vectors: np.ndarray = field(repr=False)
    method: str = "dense"
    sigma: Optional[complex] = None

    def __len__(self) -> int:
        return len(self.values)

    def pairs(self):
        return list(zip(self.values, self.residuals))

    def in_window(self, window) -> "EigenResult":
        mask = window.contains(self.values)
        return EigenResult(values=self.values[mask],
                           residuals=self.residuals[mask],
                           vectors=self.vectors[:, mask],
                           method=self.method, sigma=self.sigma)


def _m_norm(M, v) -> float:
    return float(np.sqrt(abs(np.vdot(v, M @ v))))


def _residuals(A, M, values, vectors):
    res = np.empty(len(values))
    for k, mu in enumerate(values):
        v = vectors[:, k]
        nrm = _m_norm(M, v)
        if nrm == 0.0:
            res[k] = np.inf
            continue
        vectors[:, k] = v / nrm
        res[k] = np.linalg.norm(A @ vectors[:, k] - mu * (M @ vectors[:, k]))
    return res


def solve_dense(op: AssembledOperator, residual_cap: float = RESIDUAL_CAP) -> EigenResult:
    """All eigenvalues by dense reduction; residuals recomputed sparsely."""
    if op.n > DENSE_CAP:
        raise UnsupportedError(f"dense path capped at {DENSE_CAP} dofs, got {op.n}")
    import scipy.linalg
    values, vectors = scipy.linalg.eig(op.A.toarray(), op.M.toarray())
    order = np.argsort(values.real, kind="stable")
    values, vectors = values[order], vectors[:, order]
    res = _residuals(op.A, op.M, values, vectors)
    keep = res <= residual_cap
    return EigenResult(values=values[keep], residuals=res[keep],
                       vectors=vectors[:, keep], method="dense")


def solve_shift_invert(op: AssembledOperator, sigma: complex, k: int,
                       tol: float = ARPACK_TOL, max_iter: Optional[int] = None,
                       residual_cap: float = RESIDUAL_CAP) -> EigenResult:
    """k eigenvalues nearest sigma by Arnoldi on (A - sigma M)^{-1} M."""
    if k > 50:
        raise ConfigError("shift-invert is capped at k = 50", key="solver.k")
    if k >= op.n - 1:
        raise ConfigError(f"k={k} too large for {op.n} dofs", key="solver.k")
    ncv = min(op.n, 4 * k + 20)
    try:
        values, vectors = spla.eigs(op.A.tocsc(), k=k, M=op.M.tocsc(),
                                    sigma=complex(sigma), ncv=ncv, tol=tol,
                                    maxiter=max_iter)
    except spla.ArpackNoConvergence as exc:
        partial = None
        if exc.eigenvalues is not None and len(exc.eigenvalues):
            vals, vecs = exc.eigenvalues, exc.eigenvectors
            res = _residuals(op.A, op.M, vals, vecs)
            keep = res <= residual_cap
            partial = EigenResult(values=vals[keep], residuals=res[keep],
                                  vectors=vecs[:, keep],
                                  method="shift_invert", sigma=complex(sigma))
        raise IterationError(f"Arnoldi did not converge: {exc}",
                             partial=partial) from exc
    except RuntimeError as exc:
        raise ShiftOnSpectrumError(
            f"factorization of (A - sigma M) broke down at sigma={sigma}: {exc}"
        ) from exc

    res = _residuals(op.A, op.M, values, vectors)
    keep = res <= residual_cap
    values, vectors, res = values[keep], vectors[:, keep], res[keep]
    order = np.argsort(np.abs(values - complex(sigma)), kind="stable")
    return EigenResult(values=values[order], residuals=res[order],
                       vectors=vectors[:, order], method="shift_invert",
                       sigma=complex(sigma))


class ResolventOperator:
    """Shared factorization of (A - mu M) for repeated right-hand sides."""

    def __init__(self, op: AssembledOperator, mu: complex, tol: float = 1e-10):
        self.op = op
        self.mu = complex(mu)
        self.tol = tol
        pencil = (op.A - self.mu * op.M).tocsc()
        try:
            self._lu = spla.splu(pencil)
        except RuntimeError as exc:
            raise SingularPencilError(
                f"A - mu M singular at mu={self.mu}: {exc}") from exc
        self._pencil = pencil.tocsr()

    def apply(self, F: np.ndarray) -> np.ndarray:
        """u = (A - mu M)^{-1} M F with a residual guarantee."""
        rhs = self.op.M @ np.asarray(F, dtype=complex)
        u = self._lu.solve(rhs)
        scale = np.linalg.norm(rhs)
        if scale == 0.0:
            return u
        res = np.linalg.norm(self._pencil @ u - rhs)
        if res > self.tol * scale:
            u = u + self._lu.solve(rhs - self._pencil @ u)   # one refinement
            res = np.linalg.norm(self._pencil @ u - rhs)
        if not np.isfinite(res) or res > self.tol * scale:
            raise SingularPencilError(
                f"resolvent solve at mu={self.mu} failed: residual "
                f"{res:.3e} > {self.tol:.1e} * ||M F||")
        return u


def resolvent_apply(op: AssembledOperator, mu: complex, F: np.ndarray,
                    tol: float = 1e-10) -> np.ndarray:
    """Single resolvent application (A - mu M)^{-1} M F."""
    return ResolventOperator(op, mu, tol=tol).apply(F)
