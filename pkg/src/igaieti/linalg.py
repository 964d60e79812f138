"""Sparse direct solves, PCG with Lanczos spectrum estimates, dense eigensolves."""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

DENSE_CAP = 4000
PIVOT_TOL = 1e-14


class SingularMatrixError(ValueError):
    pass


class IndefiniteError(ValueError):
    pass


class DefinitenessError(ValueError):
    pass


class DenseSizeError(ValueError):
    pass


class Factorization:
    """Sparse LU factorization with partial pivoting, reusable for many solves.

    Args:
        A: square sparse (or dense) matrix.
        context (str): included in error messages (e.g. the patch index).

    Raises:
        SingularMatrixError: a pivot is below ``1e-14 * max|A|``.
    """

    def __init__(self, A, context=''):
        A = scipy.sparse.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError('matrix must be square')
        self.shape = A.shape
        self.context = context
        self._lu = None
        if A.shape[0] == 0:
            return
        scale = abs(A).max()
        msg = 'numerically singular matrix' + (' (%s)' % context if context else '')
        if scale == 0:
            raise SingularMatrixError(msg)
        try:
            self._lu = scipy.sparse.linalg.splu(A)
        except RuntimeError as exc:
            raise SingularMatrixError(msg) from exc
        if np.abs(self._lu.U.diagonal()).min() < PIVOT_TOL * scale:
            raise SingularMatrixError(msg)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if self._lu is None:
            return np.zeros_like(b)
        return self._lu.solve(b)


def factorize(A, context=''):
    return Factorization(A, context)


@dataclass
class PcgReport:
    """Outcome of a PCG run.

    ``residuals`` holds the relative Euclidean residual norms
    ``|r_k| / |r_0|``, starting with 1. The extreme eigenvalues are Ritz
    values of the Lanczos matrix built from the CG coefficients.
    """
    iterations: int = 0
    residuals: list = field(default_factory=list)
    lambda_min: float = float('nan')
    lambda_max: float = float('nan')
    converged: bool = False
    kappa_history: list = field(default_factory=list)

    @property
    def kappa(self):
        return self.lambda_max / self.lambda_min


def lanczos_matrix(alphas, betas):
    """Symmetric tridiagonal (diag, offdiag) from CG step lengths and updates.

    ``betas[j]`` is the update coefficient computed after step ``j``.
    """
    m = len(alphas)
    a = np.asarray(alphas, dtype=float)
    b = np.asarray(betas[:m - 1], dtype=float)
    diag = 1.0 / a
    diag[1:] += b / a[:-1]
    off = np.sqrt(b) / a[:-1]
    return diag, off


def ritz_values(alphas, betas):
    if not alphas:
        return np.array([])
    diag, off = lanczos_matrix(alphas, betas)
    if len(diag) == 1:
        return diag.copy()
    return scipy.linalg.eigh_tridiagonal(diag, off, eigvals_only=True)


def _as_apply(A):
    if A is None:
        return lambda x: x
    if callable(A):
        return A
    return lambda x: A @ x


def pcg(apply_A, apply_M, b, x0=None, tol=1e-6, max_it=1000):
    """Preconditioned conjugate gradients with Lanczos condition estimate.

    Stops once ``|b - A x_k|_2 <= tol * |b - A x_0|_2``. For a semidefinite
    ``A`` and consistent ``b`` the iterates stay in the range of ``A`` and
    the estimate is the essential condition number.

    Args:
        apply_A, apply_M: callables (or matrices); ``apply_M=None`` means no
            preconditioner.

    Returns:
        (x, PcgReport)

    Raises:
        IndefiniteError: if a search direction with nonpositive curvature occurs.
    """
    A = _as_apply(apply_A)
    M = _as_apply(apply_M)
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A(x)
    r0 = np.linalg.norm(r)
    report = PcgReport(residuals=[1.0])
    if r0 == 0.0 or len(b) == 0:
        report.converged = True
        return x, report
    z = M(r)
    rz = float(r @ z)
    if rz <= 0:
        raise IndefiniteError('preconditioner is not positive definite')
    p = z.copy()
    alphas, betas = [], []
    for it in range(1, max_it + 1):
        q = A(p)
        curv = float(p @ q)
        if curv <= 0:
            raise IndefiniteError('nonpositive curvature in CG (curvature %g)' % curv)
        alpha = rz / curv
        x += alpha * p
        r -= alpha * q
        alphas.append(alpha)
        rel = np.linalg.norm(r) / r0
        report.residuals.append(rel)
        report.iterations = it
        ritz = ritz_values(alphas, betas)
        report.lambda_min, report.lambda_max = float(ritz[0]), float(ritz[-1])
        report.kappa_history.append(report.kappa)
        if rel <= tol:
            report.converged = True
            break
        z = M(r)
        rz_new = float(r @ z)
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p
    return x, report


def dense_sym_eig(A, B=None, vectors=False, subset=None):
    """Generalized symmetric-definite eigenpairs ``A v = theta B v``, ascending.

    Raises:
        DenseSizeError: above :data:`DENSE_CAP`.
        DefinitenessError: if ``B`` is not positive definite.
    """
    A = A.toarray() if scipy.sparse.issparse(A) else np.asarray(A, dtype=float)
    if A.shape[0] > DENSE_CAP:
        raise DenseSizeError('dense eigensolve of size %d exceeds cap %d' % (A.shape[0], DENSE_CAP))
    if B is not None:
        B = B.toarray() if scipy.sparse.issparse(B) else np.asarray(B, dtype=float)
        try:
            scipy.linalg.cholesky(B)
        except scipy.linalg.LinAlgError as exc:
            raise DefinitenessError('B is not positive definite') from exc
    kw = {} if subset is None else {'subset_by_index': subset}
    res = scipy.linalg.eigh(A, B, eigvals_only=not vectors, **kw)
    return res
