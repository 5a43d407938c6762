"""Sparse direct solves and the Newton loop shared by all time steppers."""

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from dataclasses import dataclass

logger = logging.getLogger(__name__)

RESIDUAL_RTOL = 1e-10


class SingularPivotError(Exception):
    """Factorization hit a numerically singular pivot.

    ``pivot`` is the offending row/column index when it could be
    identified (dense re-factorization of small systems), else None.
    """

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class SolveAccuracyError(Exception):
    """Direct solve residual exceeded the contract bound."""


class NewtonError(Exception):
    """Newton iteration failed to converge.

    Carries the residual-norm history; ``history[-1]`` is the last norm.
    """

    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


@dataclass
class NewtonConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_iter: int = 25
    damping: float = 1.0

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("Newton tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")


def _locate_pivot(A):
    """Best-effort zero-pivot index via dense LU on small systems."""
    n = A.shape[0]
    if n > 2000:
        return None
    import scipy.linalg as sla
    _, _, U = sla.lu(A.toarray())
    diag = np.abs(np.diag(U))
    scale = diag.max() if diag.size else 0.0
    bad = np.flatnonzero(diag <= 1e-14 * max(scale, 1.0))
    return int(bad[0]) if bad.size else None


class Factorization:
    """Reusable LU factorization of a sparse matrix.

    By default a fast symmetric-pattern ordering with relaxed pivoting is
    tried first (a large win on the saddle-point systems assembled here);
    if a checked solve misses the residual contract, the matrix is
    silently refactorized with the conservative default ordering and full
    pivoting before giving up.
    """

    def __init__(self, A, fast=True):
        self._A = sp.csc_matrix(A)
        self._norm_A = None
        if fast:
            try:
                self._lu = self._factorize(True)
                self._fast = True
                return
            except SingularPivotError:
                pass
        self._lu = self._factorize(False)
        self._fast = False

    def _factorize(self, fast):
        try:
            if fast:
                return spla.splu(self._A, permc_spec="MMD_AT_PLUS_A",
                                 diag_pivot_thresh=0.01,
                                 options=dict(SymmetricMode=True))
            return spla.splu(self._A)
        except RuntimeError as exc:
            raise SingularPivotError(
                f"sparse factorization failed: {exc}",
                pivot=_locate_pivot(self._A)) from exc

    def _residual_ok(self, x, b):
        if self._norm_A is None:
            self._norm_A = spla.norm(self._A, np.inf)
        resid = np.linalg.norm(self._A @ x - b)
        bound = RESIDUAL_RTOL * (self._norm_A * np.linalg.norm(x)
                                 + np.linalg.norm(b))
        return resid <= max(bound, 1e-300), resid, bound

    def solve(self, b, check=True):
        b = np.asarray(b, dtype=float)
        x = self._lu.solve(b)
        bad = not np.all(np.isfinite(x))
        if check and not bad:
            ok, resid, bound = self._residual_ok(x, b)
            bad = not ok
        if bad and self._fast:
            # retry with the conservative ordering and full pivoting
            self._fast = False
            self._lu = self._factorize(False)
            return self.solve(b, check=check)
        if not np.all(np.isfinite(x)):
            raise SingularPivotError(
                "factorization produced non-finite solution",
                pivot=_locate_pivot(self._A))
        if check:
            ok, resid, bound = self._residual_ok(x, b)
            if not ok:
                raise SolveAccuracyError(
                    f"direct solve residual {resid:.3e} exceeds bound "
                    f"{bound:.3e}")
        return x


def sparse_solve(A, b, check=True):
    """Solve A x = b by sparse LU with a fill-reducing ordering.

    The solution satisfies ||A x - b|| <= 1e-10 (||A|| ||x|| + ||b||); a
    violation raises SolveAccuracyError, a singular pivot raises
    SingularPivotError carrying the pivot index when determinable.
    """
    return Factorization(A).solve(b, check=check)


def newton_solve(residual_and_jacobian, x0, cfg=None):
    """Solve F(x) = 0 by Newton's method with optional constant damping.

    Parameters
    ----------
    residual_and_jacobian : callable
        Returns (F(x), J(x)) with J sparse (or dense) at any iterate.
    x0 : array
        Initial guess.
    cfg : NewtonConfig

    Returns
    -------
    (x, n_iter) for the first iterate with
    ||F(x)|| <= max(abs_tol, rel_tol * ||F(x0)||).

    Raises
    ------
    NewtonError after max_iter steps without convergence (the history of
    residual norms is attached); singular Jacobians propagate as
    SingularPivotError.
    """
    if cfg is None:
        cfg = NewtonConfig()
    x = np.asarray(x0, dtype=float).copy()
    history = []
    tol = None
    for it in range(cfg.max_iter + 1):
        F, J = residual_and_jacobian(x)
        rnorm = float(np.linalg.norm(F))
        history.append(rnorm)
        if tol is None:
            tol = max(cfg.abs_tol, cfg.rel_tol * rnorm)
        if rnorm <= tol:
            return x, it
        if it == cfg.max_iter:
            break
        if sp.issparse(J):
            dx = Factorization(J).solve(-F, check=False)
        else:
            dx = np.linalg.solve(J, -F)
        x = x + cfg.damping * dx
    raise NewtonError(
        f"Newton did not converge in {cfg.max_iter} iterations "
        f"(last residual {history[-1]:.3e}, tolerance {tol:.3e})", history)
