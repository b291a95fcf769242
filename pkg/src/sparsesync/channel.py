"""Baseband link simulation: frame stream assembly, multipath propagation, AWGN."""

from dataclasses import dataclass, field

import numpy as np

from .numerics import as_cvec

TRAINING = "training"
DATA = "data"


@dataclass(frozen=True)
class LinkRealization:
    """One draw of the link: combined channel taps, noise variance and noise seed.

    `noise_variance` is per complex sample, split equally between I and Q.
    """

    taps: np.ndarray
    noise_variance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ValueError(f"noise_variance must be >= 0, got {self.noise_variance}")


@dataclass
class SampleStream:
    samples: np.ndarray
    frame_map: list = field(default_factory=list)  # (frame index, kind, start offset)

    def starts(self, kind):
        return [start for _, k, start in self.frame_map if k == kind]


def snr_to_noise_variance(snr_db):
    """Unit-energy symbols: SNR = 1 / noise variance."""
    return 10.0 ** (-snr_db / 10.0)


def assemble_stream(frames, config):
    """Concatenate frames sent in the periodic training/data pattern.

    Frame ``k`` is a training frame when ``k % config.period == 0`` and must
    have ``config.training_len`` symbols; all others are data frames of
    ``config.frame_len`` symbols.
    """
    if not frames:
        raise ValueError("assemble_stream needs at least one frame")
    parts, frame_map, offset = [], [], 0
    for k, frame in enumerate(frames):
        frame = as_cvec(frame, f"frame {k}")
        kind = TRAINING if k % config.period == 0 else DATA
        expected = config.training_len if kind == TRAINING else config.frame_len
        if frame.size != expected:
            raise ValueError(f"{kind} frame {k} has {frame.size} symbols, expected {expected}")
        parts.append(frame)
        frame_map.append((k, kind, offset))
        offset += frame.size
    return SampleStream(np.concatenate(parts), frame_map)


def complex_noise(n, noise_variance, seed):
    """Circularly-symmetric complex Gaussian noise, identical for identical (n, seed)."""
    rng = np.random.default_rng(seed)
    scale = np.sqrt(noise_variance / 2.0)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def propagate(x, link):
    """Pass `x` through the combined channel and add noise.

    ``y[n] = sum_l x[n - l] * taps[l] + z[n]`` with ``x[k] = 0`` for ``k < 0``;
    the output has the same length as `x`.
    """
    x = as_cvec(x, "x")
    if x.size == 0:
        raise ValueError("propagate needs a non-empty input")
    taps = as_cvec(link.taps, "taps")
    n = x.size
    support = np.flatnonzero(taps)
    if support.size <= 64:
        # combined channels are mostly zeros; shift-and-add over the support
        y = np.zeros(n, dtype=np.complex128)
        for lag in support[support < n]:
            y[lag:] += taps[lag] * x[: n - lag]
    else:
        y = np.convolve(x, taps)[:n]
    if link.noise_variance > 0:
        y = y + complex_noise(n, link.noise_variance, link.seed)
    return y


def collect_training_window(y, start, config):
    """Return the last ``n_equations`` samples of the training-length window at `start`.

    Ordered newest first: ``y[start + T - 1], y[start + T - 2], ...,
    y[start + T - n_equations]`` with ``T = config.training_len``.
    """
    y = np.asarray(y)
    end = start + config.training_len
    if start < 0 or end > y.shape[0]:
        raise ValueError(
            f"training window [{start}, {end}) exceeds stream of length {y.shape[0]}"
        )
    return y[end - config.n_equations:end][::-1].astype(np.complex128)
