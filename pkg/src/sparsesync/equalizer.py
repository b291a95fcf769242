"""MMSE linear FIR equalizer with optimized decision delay and sparse tap selection.

The equalizer output is ``xe[n] = sum_k w[k] * y[n - k]``. Designs assume
unit-energy i.i.d. symbols and white noise of the given variance, so for
a channel ``h`` the received-vector correlation is ``R = H H^H + s2 I`` with
``H`` the ``n_taps x (n_taps + len(h) - 1)`` convolution matrix, and the
cross-correlation with ``x[n - delay]`` is column `delay` of ``H``.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .numerics import as_cvec

LOADING = 1e-12


@dataclass(frozen=True)
class EqualizerDesign:
    weights: np.ndarray
    delay: int
    active: tuple
    theoretical_mse: float

    @property
    def n_taps(self):
        return self.weights.shape[0]


def _autocorrelation(h, n_taps):
    """``r[k] = sum_p h[p] conj(h[p - k])`` for ``k = 0 .. n_taps - 1``."""
    full = np.correlate(h, h, mode="full")
    lags = full[h.size - 1:]
    out = np.zeros(n_taps, dtype=np.complex128)
    m = min(n_taps, lags.size)
    out[:m] = lags[:m]
    return out


def correlation_matrix(h, noise_variance, n_taps):
    """Hermitian Toeplitz ``H H^H + noise_variance * I``."""
    r = _autocorrelation(h, n_taps)
    R = linalg.toeplitz(r.conj(), r)
    R[np.diag_indices(n_taps)] += noise_variance
    return R


def cross_correlation(h, n_taps, delays):
    """Columns ``H e_delay`` for each delay: entry k is ``h[delay - k]``."""
    delays = np.atleast_1d(np.asarray(delays, dtype=int))
    k = np.arange(n_taps)[:, None]
    idx = delays[None, :] - k
    valid = (idx >= 0) & (idx < h.size)
    G = np.zeros((n_taps, delays.size), dtype=np.complex128)
    G[valid] = h[idx[valid]]
    return G


def max_delay(n_taps, channel_len):
    return n_taps + channel_len - 2


def _factor(R):
    try:
        return linalg.cho_factor(R, lower=True, check_finite=False)
    except linalg.LinAlgError:
        scale = max(float(np.real(R[0, 0])), 1.0)
        warnings.warn(
            "equalizer correlation matrix is singular; adding diagonal loading",
            RuntimeWarning,
            stacklevel=3,
        )
        R = R + LOADING * scale * np.eye(R.shape[0])
        return linalg.cho_factor(R, lower=True, check_finite=False)


def _check(h, noise_variance, n_taps):
    h = as_cvec(h, "channel")
    if h.size == 0:
        raise ValueError("channel estimate is empty")
    if n_taps < 1:
        raise ValueError(f"n_taps must be >= 1, got {n_taps}")
    if noise_variance < 0:
        raise ValueError(f"noise_variance must be >= 0, got {noise_variance}")
    return h


def _check_delay(delay, n_taps, channel_len):
    hi = max_delay(n_taps, channel_len)
    if not 0 <= delay <= hi:
        raise ValueError(f"delay {delay} outside [0, {hi}]")


def design_mmse(h, noise_variance, n_taps, delay):
    """Dense MMSE equalizer for one decision delay.

    Returns
    -------
    weights : ndarray, shape (n_taps,)
    theoretical_mse : float
        ``1 - g^H R^{-1} g`` with ``g = H e_delay``.
    """
    h = _check(h, noise_variance, n_taps)
    _check_delay(delay, n_taps, h.size)
    R = correlation_matrix(h, noise_variance, n_taps)
    g = cross_correlation(h, n_taps, [delay])[:, 0]
    v = linalg.cho_solve(_factor(R), g)
    mse = max(0.0, 1.0 - float(np.vdot(g, v).real))
    return v.conj(), mse


def optimize_delay(h, noise_variance, n_taps, delay_range=None):
    """Dense MMSE design at the delay with the smallest theoretical MSE.

    `delay_range` is an iterable of candidate delays; ``None`` searches every
    delay in ``[0, n_taps + len(h) - 2]``. Ties go to the smallest delay.
    """
    h = _check(h, noise_variance, n_taps)
    hi = max_delay(n_taps, h.size)
    if delay_range is None:
        delays = np.arange(hi + 1)
    else:
        delays = np.asarray(sorted(set(int(d) for d in delay_range)), dtype=int)
    if delays.size == 0:
        raise ValueError("delay_range is empty")
    if delays[0] < 0 or delays[-1] > hi:
        raise ValueError(f"delay_range must lie inside [0, {hi}]")

    R = correlation_matrix(h, noise_variance, n_taps)
    G = cross_correlation(h, n_taps, delays)
    V = linalg.cho_solve(_factor(R), G)
    mse = 1.0 - np.einsum("ij,ij->j", G.conj(), V).real
    best = int(np.argmin(mse))
    return EqualizerDesign(
        weights=V[:, best].conj(),
        delay=int(delays[best]),
        active=tuple(range(n_taps)),
        theoretical_mse=max(0.0, float(mse[best])),
    )


def sparsify_taps(h, noise_variance, n_taps, delay, n_active):
    """Greedy sparse MMSE design with `n_active` nonzero taps.

    Starting from an empty set, each step adds the tap whose inclusion gives
    the largest drop in the restricted MMSE. The drop for candidate ``j`` is
    ``|u_j|^2 / s_j`` where ``s_j`` is the Schur complement of ``R_jj`` and
    ``u_j`` the matching innovation of the cross-correlation, both updated
    by an incremental Cholesky factor of the active block. The final weights
    are re-solved on the chosen set.
    """
    h = _check(h, noise_variance, n_taps)
    _check_delay(delay, n_taps, h.size)
    if not 1 <= n_active <= n_taps:
        raise ValueError(f"n_active must be in [1, {n_taps}], got {n_active}")

    R = correlation_matrix(h, noise_variance, n_taps)
    g = cross_correlation(h, n_taps, [delay])[:, 0]
    diag = np.real(np.diag(R)).copy()
    # rows of L^{-1} R[active, :] and L^{-1} g[active]
    C = np.zeros((n_active, n_taps), dtype=np.complex128)
    b = np.zeros(n_active, dtype=np.complex128)
    schur = diag.copy()
    innov = g.copy()
    chosen = np.zeros(n_taps, dtype=bool)
    active = []
    floor = LOADING * max(diag.max(), 1.0)

    for step in range(n_active):
        gain = np.where(chosen, -np.inf, np.abs(innov) ** 2 / np.maximum(schur, floor))
        j = int(np.argmax(gain))
        delta = np.sqrt(max(schur[j], floor))
        C[step] = (R[j] - C[:step, j].conj() @ C[:step]) / delta
        b[step] = innov[j] / delta
        chosen[j] = True
        active.append(j)
        schur = schur - np.abs(C[step]) ** 2
        innov = innov - C[step].conj() * b[step]

    active.sort()
    idx = np.asarray(active)
    R_a = R[np.ix_(idx, idx)]
    v_a = linalg.cho_solve(_factor(R_a), g[idx])
    weights = np.zeros(n_taps, dtype=np.complex128)
    weights[idx] = v_a.conj()
    mse = max(0.0, 1.0 - float(np.vdot(g[idx], v_a).real))
    return EqualizerDesign(weights, int(delay), tuple(int(i) for i in idx), mse)


def apply_equalizer(y, design):
    """``xe[n] = sum_k w[k] y[n - k]`` with ``y[j] = 0`` for ``j < 0``; same length as `y`."""
    y = as_cvec(y, "y")
    if y.size == 0:
        raise ValueError("apply_equalizer needs a non-empty input")
    w = np.asarray(design.weights)
    return np.convolve(y, w)[: y.size]


def measure_mse(x_eq, x_ref, delay, transient=0):
    """Mean of ``|x_eq[n] - x_ref[n - delay]|^2`` over the aligned overlap.

    `transient` samples are dropped at each end of the overlap.
    """
    x_eq = np.asarray(x_eq)
    x_ref = np.asarray(x_ref)
    lo = max(delay, 0) + transient
    hi = min(x_eq.shape[0], x_ref.shape[0] + delay) - transient
    if hi <= lo:
        raise ValueError("no overlap between equalizer output and reference")
    err = x_eq[lo:hi] - x_ref[lo - delay:hi - delay]
    return float(np.mean(np.abs(err) ** 2))


def write_design_csv(path, design):
    """Tap table with columns index, real, imag, active."""
    active = set(design.active)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "real", "imag", "active"])
        for k, w in enumerate(design.weights):
            writer.writerow([k, repr(float(w.real)), repr(float(w.imag)), int(k in active)])
