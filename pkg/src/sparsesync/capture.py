"""Offline IQ captures: file I/O and the joint estimation / equalization pipeline.

Captures are assumed symbol spaced and frequency corrected; everything up
to timing recovery happens elsewhere.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .equalizer import apply_equalizer, measure_mse, optimize_delay, sparsify_taps
from .estimators import (
    Method,
    build_measurement_matrix,
    estimate_classical,
    estimate_conventional,
    estimate_omp,
    sync_crosscorr,
)
from .channel import collect_training_window
from .model import decide_symbols, generate_data_frame, generate_training
from .numerics import cross_correlate

logger = logging.getLogger(__name__)

FORMATS = ("f32le", "csv")
INGEST_METHODS = (Method.CLASSICAL, Method.OMP_JOINT, Method.CONVENTIONAL)


class CaptureError(ValueError):
    pass


class NoTrainingFrameError(CaptureError):
    pass


@dataclass(frozen=True)
class IqCapture:
    samples: np.ndarray
    path: str = ""

    @property
    def sample_count(self):
        return self.samples.shape[0]


def load_iq(path, fmt="f32le"):
    """Read a capture.

    ``f32le``: interleaved little-endian float32 I/Q pairs (8 bytes per sample).
    ``csv``: two columns ``real, imag``; a non-numeric first row is a header.
    """
    path = Path(path)
    if fmt == "f32le":
        raw = path.read_bytes()
        if len(raw) % 8:
            raise CaptureError(f"{path}: {len(raw)} bytes is not a whole number of I/Q pairs")
        iq = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        samples = iq[0::2] + 1j * iq[1::2]
    elif fmt == "csv":
        samples = _load_csv(path)
    else:
        raise CaptureError(f"unknown capture format {fmt!r}; expected one of {FORMATS}")
    if samples.size == 0:
        logger.warning("%s: capture is empty", path)
    elif not np.all(np.isfinite(samples)):
        bad = int(np.flatnonzero(~np.isfinite(samples))[0])
        raise CaptureError(f"{path}: sample {bad} is NaN or Inf")
    return IqCapture(samples.astype(np.complex128), str(path))


def _load_csv(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                if len(cells) != 2:
                    raise ValueError
                re_, im = float(cells[0]), float(cells[1])
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise CaptureError(f"{path}:{lineno}: expected two numeric columns, got {line!r}")
            rows.append(complex(re_, im))
    return np.asarray(rows, dtype=np.complex128)


def save_iq(path, samples, fmt="f32le"):
    samples = np.asarray(samples, dtype=np.complex128)
    if fmt == "f32le":
        iq = np.empty(2 * samples.size, dtype="<f4")
        iq[0::2] = samples.real
        iq[1::2] = samples.imag
        Path(path).write_bytes(iq.tobytes())
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("real,imag\n")
            for s in samples:
                fh.write(f"{float(s.real)!r},{float(s.imag)!r}\n")
    else:
        raise CaptureError(f"unknown capture format {fmt!r}; expected one of {FORMATS}")


def locate_training(samples, training, config, detect_factor=5.0):
    """Start index of the first training window in a raw capture.

    The whole capture is correlated against the full training frame. The
    first offset whose magnitude exceeds ``detect_factor`` times the median
    marks a training frame; the strongest path is the largest peak within
    ``memory`` samples of it, and the window opens ``memory`` samples before
    that peak so the true boundary falls inside ``[0, memory]``.
    """
    n = samples.shape[0]
    T = config.training_len
    if n < T:
        raise CaptureError(f"capture has {n} samples, needs at least {T}")
    corr = cross_correlate(samples, training.symbols, n - T, T)
    floor = float(np.median(corr))
    hits = np.flatnonzero(corr > detect_factor * floor)
    if floor == 0 or hits.size == 0:
        raise NoTrainingFrameError(
            f"no training frame found: peak {corr.max():.3g} <= "
            f"{detect_factor:g} x median {floor:.3g}"
        )
    first = int(hits[0])
    peak = first + int(np.argmax(corr[first:first + config.memory + 1]))
    start = max(0, peak - config.memory)
    if start + T > n:
        raise CaptureError("training frame found but the capture ends inside its window")
    return start


@dataclass(frozen=True)
class IngestResult:
    estimate: object
    design: object
    window_start: int
    soft: list            # equalized data frames
    decisions: list
    frame_mse: list | None


def ingest_capture(samples, experiment, method=Method.OMP_JOINT, ref_seed=None,
                   detect_factor=5.0):
    """Locate, estimate, equalize and decide the data frames following the first training frame.

    With `ref_seed` the data frames are regenerated as frames ``[ref_seed, 0,
    slot]`` (the layout written by the simulator's capture export) and a
    per-frame MSE is reported.
    """
    frame = experiment.frame
    method = Method.parse(method)
    if method not in INGEST_METHODS:
        raise ValueError(f"ingest supports {[m.value for m in INGEST_METHODS]}, got {method.value}")
    samples = np.asarray(samples, dtype=np.complex128)
    training = generate_training(frame, experiment.training_seed)
    mm = build_measurement_matrix(training, frame)

    start = locate_training(samples, training, frame, detect_factor)
    window = samples[start:start + frame.training_len]
    y = collect_training_window(window, 0, frame)
    if method is Method.CLASSICAL:
        est = estimate_classical(y, mm)
    elif method is Method.OMP_JOINT:
        est = estimate_omp(y, mm, experiment.omp_stop)
    else:
        est = estimate_conventional(y, mm, sync_crosscorr(window, training, frame))

    s2 = est.noise_variance
    dense = optimize_delay(est.taps, s2, experiment.eq_taps)
    if experiment.eq_active < experiment.eq_taps:
        design = sparsify_taps(est.taps, s2, experiment.eq_taps, dense.delay, experiment.eq_active)
    else:
        design = dense

    eq = apply_equalizer(samples[start:], design)
    soft, decisions, mses = [], [], []
    for slot in range(1, frame.period):
        lo = frame.training_len + (slot - 1) * frame.frame_len + design.delay
        hi = lo + frame.frame_len
        if hi > eq.shape[0]:
            break
        soft.append(eq[lo:hi])
        decisions.append(decide_symbols(eq[lo:hi], frame.modulation))
        if ref_seed is not None:
            ref = generate_data_frame(frame, [ref_seed, 0, slot])
            mses.append(measure_mse(eq[lo:hi], ref, 0))
    return IngestResult(est, design, start, soft, decisions, mses if ref_seed is not None else None)
