"""Frame synchronization and channel estimation.

Three estimators of the combined (delayed, zero-padded) channel:

* ``Classical`` - minimum-norm solution of the full joint system.
* ``OmpJoint`` - orthogonal matching pursuit on the same system, exploiting
  that the combined channel has at most ``memory + 1`` nonzero taps.
* ``Conventional`` - correlate against the training to find the boundary,
  then least squares on the ``memory + 1`` columns it selects. The
  ``GenieConventional`` variant is handed the true boundary.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .model import FrameConfig, TrainingFrame
from .numerics import as_cvec, cross_correlate, solve_least_squares

# OMP also stops once the residual is this small relative to ||y||; past that
# point every further column would be fitted to rounding error.
RESIDUAL_FLOOR = 1e-10

DEFAULT_THRESHOLD_FRACTION = 0.1


class Method(str, Enum):
    CLASSICAL = "Classical"
    OMP_JOINT = "OmpJoint"
    CONVENTIONAL = "Conventional"
    GENIE_CONVENTIONAL = "GenieConventional"
    PERFECT_CSI = "PerfectCsi"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        for m in cls:
            if m.value.lower() == key:
                return m
        aliases = {"omp": cls.OMP_JOINT, "genie": cls.GENIE_CONVENTIONAL,
                   "perfect": cls.PERFECT_CSI, "conv": cls.CONVENTIONAL}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown method {value!r}; expected one of {[m.value for m in cls]}")


@dataclass(frozen=True)
class MeasurementMatrix:
    """``n_equations x combined_len`` training matrix, entry (i, j) = x[T - 1 - i - j]."""

    matrix: np.ndarray
    training: TrainingFrame
    config: FrameConfig

    def submatrix(self, boundary):
        """Columns ``boundary .. boundary + memory`` used by the conventional estimator."""
        if not 0 <= boundary <= self.config.frame_len - 1:
            raise ValueError(f"boundary {boundary} outside [0, {self.config.frame_len - 1}]")
        return self.matrix[:, boundary:boundary + self.config.memory + 1]


@dataclass(frozen=True)
class OmpStop:
    """OMP stopping rule: sparsity budget, residual threshold, or both (OR-ed)."""

    sparsity: int | None = None
    residual_threshold: float | None = None

    def __post_init__(self):
        if self.sparsity is None and self.residual_threshold is None:
            raise ValueError("OmpStop needs a sparsity, a residual threshold, or both")
        if self.sparsity is not None and self.sparsity < 0:
            raise ValueError(f"sparsity must be >= 0, got {self.sparsity}")
        if self.residual_threshold is not None and self.residual_threshold < 0:
            raise ValueError(f"residual_threshold must be >= 0, got {self.residual_threshold}")

    def max_iterations(self, n_equations):
        if self.sparsity is None:
            return n_equations
        return min(self.sparsity, n_equations)


@dataclass(frozen=True)
class ChannelEstimate:
    taps: np.ndarray
    method: Method
    boundary: int | None
    residual_norm: float
    noise_variance: float
    support: tuple = ()
    residual_history: tuple = field(default=(), repr=False)


def build_measurement_matrix(training, config):
    """Stack the training symbols into the joint-estimation measurement matrix.

    Row ``i`` relates received sample ``y[n + T - 1 - i]`` (``T`` the
    training length) to the combined channel, so entry ``(i, j)`` is the
    training symbol ``x[T - 1 - i - j]``; entries depend only on ``i + j``.
    """
    x = as_cvec(training.symbols, "training")
    if x.size != config.training_len:
        raise ValueError(
            f"training frame has {x.size} symbols, config needs {config.training_len}"
        )
    rows = np.arange(config.n_equations)[:, None]
    cols = np.arange(config.combined_len)[None, :]
    matrix = x[config.training_len - 1 - rows - cols]
    matrix.setflags(write=False)
    return MeasurementMatrix(matrix, training, config)


def _unwrap(X):
    if isinstance(X, MeasurementMatrix):
        return X.matrix, X.config.frame_len
    return np.asarray(X, dtype=np.complex128), None


def _check_shapes(y, A):
    if A.ndim != 2:
        raise ValueError(f"measurement matrix must be 2-D, got shape {A.shape}")
    if y.shape[0] != A.shape[0]:
        raise ValueError(f"y has {y.shape[0]} samples but the matrix has {A.shape[0]} rows")


def extract_boundary(taps, threshold_fraction=DEFAULT_THRESHOLD_FRACTION, frame_len=None):
    """First index whose magnitude reaches `threshold_fraction` of the peak.

    Returns None for an all-zero estimate. With `frame_len` the result is
    clamped to ``[0, frame_len - 1]``.
    """
    if not 0 < threshold_fraction < 1:
        raise ValueError(f"threshold_fraction must be in (0, 1), got {threshold_fraction}")
    mag = np.abs(np.asarray(taps))
    peak = mag.max() if mag.size else 0.0
    if peak == 0:
        return None
    idx = int(np.flatnonzero(mag >= threshold_fraction * peak)[0])
    if frame_len is not None:
        idx = min(max(idx, 0), frame_len - 1)
    return idx


def estimate_noise_variance(y, A, taps):
    """Residual power per remaining degree of freedom, ``||y - A h||^2 / max(1, N - ||h||_0)``."""
    y = as_cvec(y, "y")
    A, _ = _unwrap(A)
    taps = np.asarray(taps)
    r = y - A @ taps
    dof = max(1, y.size - int(np.count_nonzero(taps)))
    return float(np.vdot(r, r).real / dof)


def _finish(y, A, taps, method, boundary, **extra):
    r = y - A @ taps
    return ChannelEstimate(
        taps=taps,
        method=method,
        boundary=boundary,
        residual_norm=float(np.linalg.norm(r)),
        noise_variance=estimate_noise_variance(y, A, taps),
        **extra,
    )


def estimate_classical(y, X):
    """Minimum-norm (or least-squares) solution of the joint system."""
    y = as_cvec(y, "y")
    A, frame_len = _unwrap(X)
    _check_shapes(y, A)
    if not np.any(y):
        taps = np.zeros(A.shape[1], dtype=np.complex128)
    else:
        taps = solve_least_squares(A, y)
    return _finish(y, A, taps, Method.CLASSICAL, extract_boundary(taps, frame_len=frame_len))


def estimate_omp(y, X, stop=None):
    """Joint boundary/channel estimate by orthogonal matching pursuit.

    Each iteration picks the column with the largest normalized correlation
    ``|<a_j, r>| / ||a_j||`` against the residual, re-solves least squares on
    the selected columns and updates the residual. Iteration ends when the
    support reaches ``stop.sparsity``, the residual norm drops to
    ``stop.residual_threshold``, or the support reaches the number of rows.
    """
    if stop is None:
        stop = OmpStop(sparsity=20)
    y = as_cvec(y, "y")
    A, frame_len = _unwrap(X)
    _check_shapes(y, A)
    n_rows, n_cols = A.shape
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise ValueError(f"measurement matrix has {int(np.sum(norms == 0))} all-zero columns")

    y_norm = float(np.linalg.norm(y))
    eps = max(stop.residual_threshold or 0.0, RESIDUAL_FLOOR * y_norm)
    residual = y.copy()
    res_norm = y_norm
    support = []
    coeffs = np.zeros(0, dtype=np.complex128)
    history = [res_norm]
    available = np.ones(n_cols, dtype=bool)

    for _ in range(stop.max_iterations(n_rows)):
        if res_norm <= eps:
            break
        score = np.abs(A.conj().T @ residual) / norms
        score[~available] = -1.0
        j = int(np.argmax(score))
        support.append(j)
        available[j] = False
        coeffs = solve_least_squares(A[:, support], y)
        residual = y - A[:, support] @ coeffs
        res_norm = float(np.linalg.norm(residual))
        history.append(res_norm)

    taps = np.zeros(n_cols, dtype=np.complex128)
    taps[support] = coeffs
    return _finish(
        y, A, taps, Method.OMP_JOINT, extract_boundary(taps, frame_len=frame_len),
        support=tuple(support), residual_history=tuple(history),
    )


def sync_crosscorr(y_window, training, config):
    """Frame boundary by correlating the received window against the training.

    Every candidate offset ``d`` in ``[0, frame_len - 1]`` sums over the first
    ``training_len - frame_len + 1`` training symbols, which keeps all terms
    inside the window. Ties go to the earliest offset.
    """
    y_window = as_cvec(y_window, "y_window")
    if y_window.size != config.training_len:
        raise ValueError(
            f"window has {y_window.size} samples, expected {config.training_len}"
        )
    window = config.training_len - config.frame_len + 1
    corr = cross_correlate(y_window, training.symbols, config.frame_len - 1, window)
    return int(np.argmax(corr))


def estimate_conventional(y, X, boundary_hat, genie_boundary=None):
    """Least squares on the columns selected by a boundary estimate, zero padded.

    `X` must be a :class:`MeasurementMatrix`. When `genie_boundary` is given it
    replaces `boundary_hat` and the estimate is labelled ``GenieConventional``.
    """
    if not isinstance(X, MeasurementMatrix):
        raise TypeError("estimate_conventional needs a MeasurementMatrix")
    y = as_cvec(y, "y")
    _check_shapes(y, X.matrix)
    method = Method.CONVENTIONAL
    boundary = boundary_hat
    if genie_boundary is not None:
        method, boundary = Method.GENIE_CONVENTIONAL, genie_boundary
    if boundary is None:
        raise ValueError("conventional estimator needs a boundary")
    sub = X.submatrix(int(boundary))
    taps = np.zeros(X.config.combined_len, dtype=np.complex128)
    if np.any(y):
        taps[boundary:boundary + sub.shape[1]] = solve_least_squares(sub, y)
    return _finish(y, X.matrix, taps, method, int(boundary))
