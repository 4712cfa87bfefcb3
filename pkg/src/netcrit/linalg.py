"""Dense complex linear algebra kernels.

Matrices and vectors are plain ``numpy`` arrays of ``complex128`` (``CMatrix``
and ``CVector`` below are aliases).  Everything here is a pure function of its
inputs and safe to call from many threads.  Tolerances are always relative to
the matrix scale; the target envelope is dense problems up to 64x64.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import NoConvergence, SingularMatrix

CMatrix = np.ndarray
CVector = np.ndarray

# Pivots below PIVOT_REL * max|A| are treated as exact rank deficiency.
PIVOT_REL = 1e-14


def as_cmatrix(a) -> CMatrix:
    """Coerce to a finite complex 2-d array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d array, got ndim={m.ndim}")
    if not np.all(np.isfinite(m.view(np.float64))):
        raise ValueError("matrix entries must be finite")
    return m


def as_cvector(v) -> CVector:
    """Coerce to a finite complex 1-d array."""
    x = np.asarray(v, dtype=np.complex128)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d array, got ndim={x.ndim}")
    if not np.all(np.isfinite(x.view(np.float64))):
        raise ValueError("vector entries must be finite")
    return x


def solve_linear(a: CMatrix, b: CVector) -> CVector:
    """Solve ``a @ x = b`` by LU with partial pivoting.

    Raises SingularMatrix when any pivot falls below ``1e-14 * max|a|``,
    rather than returning a garbage solution.
    """
    a = as_cmatrix(a)
    b = as_cvector(b)
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError(f"matrix must be square, got {a.shape}")
    if b.shape[0] != n:
        raise ValueError(f"dimension mismatch: matrix {a.shape}, vector {b.shape}")
    scale = np.max(np.abs(a)) if n else 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or np.min(pivots) < PIVOT_REL * scale:
        raise SingularMatrix(f"pivot {np.min(pivots):.3e} below {PIVOT_REL:.0e} * scale {scale:.3e}")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def numerical_rank(a: CMatrix, tol: float) -> int:
    """Number of singular values above ``tol`` times the largest one.

    The zero matrix has rank 0.  SVD-based on purpose: rank thresholds feed
    the zero-eigenvalue counts, and singular values degrade gracefully where
    pivoted factorizations can be erratic.
    """
    if not 0.0 < tol < 1.0:
        raise ValueError(f"tol must be in (0, 1), got {tol}")
    a = as_cmatrix(a)
    if a.size == 0:
        return 0
    sigma = np.linalg.svd(a, compute_uv=False)
    top = sigma[0]
    if top == 0.0:
        return 0
    return int(np.count_nonzero(sigma > tol * top))


def eigenvalues(a: CMatrix) -> CVector:
    """All eigenvalues of a square matrix, with multiplicity.

    Uses the general nonsymmetric QR algorithm (Hessenberg reduction plus
    shifted QR, via LAPACK).  Complex symmetric inputs are NOT special-cased;
    at n <= 32 correctness beats speed.  Raises NoConvergence if the QR
    iteration fails to settle.
    """
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got {a.shape}")
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"QR eigenvalue iteration did not converge: {exc}") from exc
