"""Frame structure, constellations, symbol generation and the combined channel."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .numerics import as_cvec

_SQRT_HALF = np.sqrt(0.5)


class Modulation(str, Enum):
    BPSK = "BPSK"
    QPSK = "QPSK"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown modulation {value!r}; expected BPSK or QPSK") from None


# Index order is the tie-break order for hard decisions. QPSK is Gray labelled:
# index bits b1 b0 -> 00, 01, 10, 11.
CONSTELLATIONS = {
    Modulation.BPSK: np.array([1.0 + 0j, -1.0 + 0j]),
    Modulation.QPSK: _SQRT_HALF * np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]),
}


def constellation(modulation):
    return CONSTELLATIONS[Modulation.parse(modulation)].copy()


@dataclass(frozen=True)
class FrameConfig:
    """Frame-structure parameters.

    Attributes
    ----------
    frame_len : int
        Data-frame length in symbols.
    memory : int
        Channel memory (number of taps minus one).
    n_equations : int
        Number of stacked received samples used for estimation.
    period : int
        One training frame is sent every `period` frames.
    modulation : Modulation
    """

    frame_len: int
    memory: int
    n_equations: int
    period: int = 1
    modulation: Modulation = Modulation.BPSK

    @property
    def training_len(self):
        """Shortest training frame that keeps every equation inside it."""
        return self.frame_len + self.memory + self.n_equations - 1

    @property
    def combined_len(self):
        """Length of the delayed, zero-padded combined channel."""
        return self.frame_len + self.memory


def validate_frame_config(frame_len, memory, n_equations, period=1, modulation="BPSK",
                          training_len=None):
    """Check the frame counts and return a :class:`FrameConfig`.

    If `training_len` is given it must equal
    ``frame_len + memory + n_equations - 1``.
    """
    for name, value in (("frame_len", frame_len), ("memory", memory),
                        ("n_equations", n_equations), ("period", period)):
        if isinstance(value, bool) or int(value) != value:
            raise ValueError(f"{name} must be an integer, got {value!r}")
    if frame_len < 1:
        raise ValueError(f"frame_len must be >= 1, got {frame_len}")
    if memory < 0:
        raise ValueError(f"memory must be >= 0, got {memory}")
    if n_equations < 1:
        raise ValueError(f"n_equations must be >= 1, got {n_equations}")
    if period < 1:
        raise ValueError(f"period must be >= 1, got {period}")
    cfg = FrameConfig(int(frame_len), int(memory), int(n_equations), int(period),
                      Modulation.parse(modulation))
    if training_len is not None and int(training_len) != cfg.training_len:
        raise ValueError(
            f"training_len = {training_len} violates training_len = "
            f"frame_len + memory + n_equations - 1 = {cfg.training_len}"
        )
    return cfg


@dataclass(frozen=True)
class CombinedCir:
    """Channel delayed by the frame boundary and zero padded to a fixed length."""

    taps: np.ndarray
    boundary: int

    def channel(self, memory):
        """Read back the physical channel ``taps[boundary : boundary + memory + 1]``."""
        return self.taps[self.boundary:self.boundary + memory + 1]


def build_combined_cir(h, boundary, frame_len):
    """Prefix `h` with `boundary` zeros and pad to ``frame_len + len(h) - 1``.

    >>> build_combined_cir([1, 0.7], 0, 4).taps.real
    array([1. , 0.7, 0. , 0. , 0. ])
    """
    h = as_cvec(h, "h")
    if h.size < 1:
        raise ValueError("channel needs at least one tap")
    if not 0 <= boundary <= frame_len - 1:
        raise ValueError(f"boundary {boundary} outside [0, {frame_len - 1}]")
    memory = h.size - 1
    taps = np.zeros(frame_len + memory, dtype=np.complex128)
    taps[boundary:boundary + memory + 1] = h
    taps.setflags(write=False)
    return CombinedCir(taps, int(boundary))


@dataclass(frozen=True)
class TrainingFrame:
    symbols: np.ndarray
    seed: int


def random_symbols(n, modulation, rng):
    """Draw `n` i.i.d. uniform constellation points from `rng`."""
    points = constellation(modulation)
    return points[rng.integers(0, points.size, size=n)]


def generate_training(config, seed):
    """Deterministic pseudo-random training frame of ``config.training_len`` symbols."""
    rng = np.random.default_rng(seed)
    symbols = random_symbols(config.training_len, config.modulation, rng)
    symbols.setflags(write=False)
    return TrainingFrame(symbols, seed)


def generate_data_frame(config, seed):
    """Deterministic pseudo-random data frame of ``config.frame_len`` symbols."""
    rng = np.random.default_rng(seed)
    return random_symbols(config.frame_len, config.modulation, rng)


def decide_symbols(soft, modulation):
    """Nearest-point hard decisions; ties go to the lower constellation index."""
    soft = as_cvec(soft, "soft")
    if soft.size == 0:
        raise ValueError("decide_symbols needs a non-empty input")
    points = CONSTELLATIONS[Modulation.parse(modulation)]
    dist = np.abs(soft[:, None] - points[None, :])
    return points[np.argmin(dist, axis=1)]
