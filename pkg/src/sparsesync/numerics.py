"""Complex-valued linear algebra kernels shared by the estimators and equalizer.

Everything here is a pure function on numpy arrays.
"""

import warnings

import numpy as np
from scipy import linalg, signal


class RankDeficientWarning(UserWarning):
    """Raised (as a warning) when a least-squares system is numerically rank deficient."""


def as_cvec(x, name="x"):
    """Return `x` as a 1-D complex128 array, rejecting NaN/Inf."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def rank_tolerance(A):
    """Rank threshold ``max(m, n) * eps * largest column norm``."""
    m, n = A.shape
    col_norm = np.linalg.norm(A, axis=0).max() if A.size else 0.0
    return max(m, n) * np.finfo(float).eps * col_norm


def solve_least_squares(A, b):
    """Minimum-norm least-squares solution of ``A x ~= b``.

    Uses a column-pivoted QR factorization of ``A`` when the system is
    square or tall and of ``A^H`` when it is wide, so conditioning stays at
    ``cond(A)`` instead of ``cond(A)**2``.

    Parameters
    ----------
    A : array_like, shape (m, n)
        Complex system matrix.
    b : array_like, shape (m,)
        Right-hand side.

    Returns
    -------
    x : ndarray, shape (n,)
        Least-squares solution for ``m >= n``, minimum-norm exact solution
        for ``m < n``. If ``A`` is numerically rank deficient a
        :class:`RankDeficientWarning` is issued and the SVD minimum-norm
        solution is returned instead.
    """
    A = np.asarray(A, dtype=np.complex128)
    b = as_cvec(b, "b")
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"A must be a non-empty 2-D matrix, got shape {A.shape}")
    m, n = A.shape
    if b.shape[0] != m:
        raise ValueError(f"dimension mismatch: A has {m} rows, b has {b.shape[0]} entries")
    if not np.all(np.isfinite(A)):
        raise ValueError("A contains NaN or Inf")

    tol = rank_tolerance(A)
    if tol == 0.0:
        warnings.warn("least-squares matrix is all zeros", RankDeficientWarning, stacklevel=2)
        return np.zeros(n, dtype=np.complex128)

    if m >= n:
        Q, R, perm = linalg.qr(A, mode="economic", pivoting=True)
        if np.abs(R[n - 1, n - 1]) <= tol:
            return _degenerate_solve(A, b, tol)
        z = linalg.solve_triangular(R, Q.conj().T @ b)
        x = np.empty(n, dtype=np.complex128)
        x[perm] = z
        return x

    # wide: A[perm] = R^H Q^H, x = Q z with R^H z = b[perm]
    Q, R, perm = linalg.qr(A.conj().T, mode="economic", pivoting=True)
    if np.abs(R[m - 1, m - 1]) <= tol:
        return _degenerate_solve(A, b, tol)
    z = linalg.solve_triangular(R, b[perm], trans="C")
    return Q @ z


def _degenerate_solve(A, b, tol):
    warnings.warn(
        f"least-squares matrix of shape {A.shape} is numerically rank deficient "
        f"(tolerance {tol:.3e}); returning SVD minimum-norm solution",
        RankDeficientWarning,
        stacklevel=3,
    )
    smax = np.linalg.norm(A, 2)
    x, *_ = np.linalg.lstsq(A, b, rcond=tol / smax if smax > 0 else None)
    return x


def cross_correlate(y, x, max_offset, window):
    """Sliding correlation magnitudes ``|sum_k conj(x[k]) y[d + k]|``.

    Parameters
    ----------
    y : array_like
        Received samples.
    x : array_like
        Reference (training) samples; only the first `window` are used.
    max_offset : int
        Largest offset evaluated; offsets run ``0..max_offset`` inclusive.
    window : int
        Number of reference samples summed per offset.

    Returns
    -------
    ndarray of float, shape (max_offset + 1,)
    """
    y = as_cvec(y, "y")
    x = as_cvec(x, "x")
    if window < 1 or max_offset < 0:
        raise ValueError("window must be >= 1 and max_offset >= 0")
    if window > x.shape[0]:
        raise ValueError(f"window {window} exceeds reference length {x.shape[0]}")
    if max_offset + window > y.shape[0]:
        raise ValueError(
            f"max_offset + window = {max_offset + window} exceeds received length {y.shape[0]}"
        )
    c = signal.correlate(y[: max_offset + window], x[:window], mode="valid")
    return np.abs(c)


def convolve(x, h):
    """Full linear convolution, length ``len(x) + len(h) - 1``."""
    x = as_cvec(x, "x")
    h = as_cvec(h, "h")
    if x.size == 0 or h.size == 0:
        raise ValueError("convolve needs non-empty inputs")
    return np.convolve(x, h)
