"""Monte-Carlo experiment driver.

A trial draws one link realization (training frame, data frames, noise,
optionally a random frame boundary), estimates the combined channel with
each requested method, designs the equalizer from the estimate and
measures the equalized MSE against the transmitted data symbols. All
methods inside a trial see the same realization.
"""

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import channel as ch
from .equalizer import apply_equalizer, max_delay, measure_mse, optimize_delay, sparsify_taps
from .estimators import (
    ChannelEstimate,
    Method,
    OmpStop,
    build_measurement_matrix,
    estimate_classical,
    estimate_conventional,
    estimate_omp,
    extract_boundary,
    sync_crosscorr,
)
from .model import FrameConfig, build_combined_cir, generate_data_frame, generate_training

ALL_METHODS = tuple(Method)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce an experiment bit for bit.

    `boundary` of None draws a uniform boundary in ``[0, frame_len - 1]`` per
    trial. `delay_search` is ``"window"`` (delays from 10 before the detected
    boundary to ``eq_taps + memory`` after it) or ``"full"``.
    `design_noise` chooses the noise variance handed to the equalizer design:
    ``"true"`` (the simulated one) or ``"estimated"`` (from the residual).
    """

    frame: FrameConfig
    channel: np.ndarray
    boundary: int | None = 500
    snr_grid: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    methods: tuple = ALL_METHODS
    trials: int = 50
    eq_taps: int = 300
    eq_active: int = 60
    delay_search: str = "full"
    design_noise: str = "true"
    seed: int = 1
    training_seed: int = 1
    omp_sparsity: int | None = 20
    omp_threshold: float | None = None
    threshold_fraction: float = 0.1
    tap_snr_db: float = 20.0
    tap_grid: tuple = (1, 2, 5, 10, 20, 50, 100, 200, 300)

    def __post_init__(self):
        h = np.asarray(self.channel, dtype=np.complex128)
        if h.ndim != 1 or h.size < 1:
            raise ValueError("channel must be a non-empty tap vector")
        if h.size > self.frame.memory + 1:
            raise ValueError(
                f"channel has {h.size} taps but memory = {self.frame.memory} allows "
                f"{self.frame.memory + 1}"
            )
        padded = np.zeros(self.frame.memory + 1, dtype=np.complex128)
        padded[: h.size] = h
        padded.setflags(write=False)
        object.__setattr__(self, "channel", padded)
        object.__setattr__(self, "methods", tuple(Method.parse(m) for m in self.methods))
        object.__setattr__(self, "snr_grid", tuple(float(s) for s in self.snr_grid))
        object.__setattr__(self, "tap_grid", tuple(int(s) for s in self.tap_grid))
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.snr_grid:
            raise ValueError("snr_grid must not be empty")
        if not self.methods:
            raise ValueError("methods must not be empty")
        if self.boundary is not None and not 0 <= self.boundary <= self.frame.frame_len - 1:
            raise ValueError(f"boundary {self.boundary} outside [0, {self.frame.frame_len - 1}]")
        if not 1 <= self.eq_active <= self.eq_taps:
            raise ValueError(f"eq_active must be in [1, eq_taps={self.eq_taps}]")
        if any(not 1 <= s <= self.eq_taps for s in self.tap_grid):
            raise ValueError(f"tap_grid entries must be in [1, eq_taps={self.eq_taps}]")
        if self.delay_search not in ("window", "full"):
            raise ValueError(f"delay_search must be 'window' or 'full', got {self.delay_search!r}")
        if self.design_noise not in ("true", "estimated"):
            raise ValueError(f"design_noise must be 'true' or 'estimated', got {self.design_noise!r}")
        if self.omp_sparsity is None and self.omp_threshold is None:
            raise ValueError("OMP needs omp_sparsity, omp_threshold, or both")

    @property
    def omp_stop(self):
        return OmpStop(self.omp_sparsity, self.omp_threshold)


@dataclass(frozen=True)
class TrialRecord:
    method: Method
    snr_db: float
    trial: int
    seed: int
    mse: float
    boundary_hat: int | None
    estimate_error: float
    runtime: float = field(default=0.0, compare=False)
    active_taps: int = 0


@dataclass
class ExperimentResult:
    records: list

    def aggregate(self, key="snr_db"):
        """``{(method, key value): (mean mse, standard error, count)}`` in linear units."""
        groups = {}
        for rec in self.records:
            groups.setdefault((rec.method, getattr(rec, key)), []).append(rec.mse)
        out = {}
        for k, values in groups.items():
            arr = np.asarray(values)
            se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
            out[k] = (float(arr.mean()), se, int(arr.size))
        return out

    def mean_mse(self, method, value, key="snr_db"):
        return self.aggregate(key)[(Method.parse(method), value)][0]


def trial_seed(master_seed, trial):
    return int(master_seed) ^ int(trial)


def to_db(value):
    return 10.0 * math.log10(value) if value > 0 else float("-inf")


@dataclass(frozen=True)
class Realization:
    """One simulated link: transmitted stream, received samples and bookkeeping."""

    tx: np.ndarray
    rx: np.ndarray
    combined: np.ndarray
    boundary: int
    noise_variance: float
    window_start: int       # transmit index of the training frame used for estimation
    eval_start: int         # first data symbol scored
    eval_len: int


@lru_cache(maxsize=8)
def _training(frame, training_seed):
    training = generate_training(frame, training_seed)
    return training, build_measurement_matrix(training, frame)


def simulate_link(config, snr_db, seed, periods=None, data_seed=None):
    """Draw a link realization.

    The stream is a sequence of periods, each one training frame followed by
    ``period - 1`` data frames. The second training frame is the one the
    receiver estimates from, so its window is preceded by real data; enough
    trailing periods follow to keep the scored data clear of the stream end.

    Data frame ``slot`` of period ``p`` is drawn from seed
    ``[data_seed, p, slot]``; `data_seed` defaults to one derived from `seed`.
    """
    frame = config.frame
    ss = np.random.SeedSequence(seed)
    data_ss, noise_ss, boundary_ss = ss.spawn(3)
    if config.boundary is None:
        boundary = int(np.random.default_rng(boundary_ss).integers(0, frame.frame_len))
    else:
        boundary = int(config.boundary)
    training, _ = _training(frame, config.training_seed)

    period_len = frame.training_len + (frame.period - 1) * frame.frame_len
    eval_len = max(1, frame.period - 1) * frame.frame_len
    if periods is None:
        tail = config.eq_taps + frame.combined_len + eval_len
        periods = 2 + math.ceil(tail / period_len)

    if data_seed is None:
        data_seed = int(data_ss.generate_state(1)[0])
    frames = []
    for p in range(periods):
        frames.append(training.symbols)
        for slot in range(1, frame.period):
            frames.append(generate_data_frame(frame, [data_seed, p, slot]))
    stream = ch.assemble_stream(frames, frame)

    combined = build_combined_cir(config.channel, boundary, frame.frame_len).taps
    noise_variance = ch.snr_to_noise_variance(snr_db)
    link = ch.LinkRealization(combined, noise_variance, int(noise_ss.generate_state(1)[0]))
    rx = ch.propagate(stream.samples, link)
    window_start = stream.starts(ch.TRAINING)[min(1, periods - 1)]
    return Realization(
        tx=stream.samples,
        rx=rx,
        combined=combined,
        boundary=boundary,
        noise_variance=noise_variance,
        window_start=window_start,
        eval_start=window_start + frame.training_len,
        eval_len=eval_len,
    )


def estimate(config, method, rx_window, realization=None):
    """Run one estimator on a received training-length window.

    `realization` supplies the truth for the genie and perfect-CSI methods.
    """
    frame = config.frame
    training, mm = _training(frame, config.training_seed)
    y = ch.collect_training_window(rx_window, 0, frame)
    method = Method.parse(method)
    if method is Method.CLASSICAL:
        return estimate_classical(y, mm)
    if method is Method.OMP_JOINT:
        return estimate_omp(y, mm, config.omp_stop)
    if method is Method.CONVENTIONAL:
        return estimate_conventional(y, mm, sync_crosscorr(rx_window, training, frame))
    if realization is None:
        raise ValueError(f"{method.value} needs the true link realization")
    if method is Method.GENIE_CONVENTIONAL:
        return estimate_conventional(y, mm, None, genie_boundary=realization.boundary)
    return ChannelEstimate(
        taps=realization.combined,
        method=Method.PERFECT_CSI,
        boundary=realization.boundary,
        residual_norm=0.0,
        noise_variance=realization.noise_variance,
    )


def delay_range(config, boundary_hat, channel_len):
    hi = max_delay(config.eq_taps, channel_len)
    if config.delay_search == "full" or boundary_hat is None:
        return range(0, hi + 1)
    lo = max(0, boundary_hat - 10)
    top = min(hi, boundary_hat + config.eq_taps + config.frame.memory)
    return range(lo, top + 1)


def design_noise_variance(config, est, realization):
    if config.design_noise == "true" or est.method is Method.PERFECT_CSI:
        return realization.noise_variance
    return est.noise_variance


def _score(config, realization, design):
    eq = apply_equalizer(realization.rx, design)
    start = realization.eval_start
    n = realization.eval_len
    return measure_mse(
        eq[start + design.delay:start + design.delay + n],
        realization.tx[start:start + n],
        0,
    )


def _evaluate(config, realization, method, active_list):
    frame = config.frame
    t0 = time.perf_counter()
    window = realization.rx[realization.window_start:realization.window_start + frame.training_len]
    est = estimate(config, method, window, realization)
    boundary_hat = est.boundary
    if boundary_hat is None:
        boundary_hat = extract_boundary(est.taps, config.threshold_fraction, frame.frame_len)
    s2 = design_noise_variance(config, est, realization)
    dense = optimize_delay(est.taps, s2, config.eq_taps,
                           delay_range(config, boundary_hat, est.taps.size))
    err = float(np.sum(np.abs(est.taps - realization.combined) ** 2))
    out = []
    for n_active in active_list:
        if n_active == config.eq_taps:
            design = dense
        else:
            design = sparsify_taps(est.taps, s2, config.eq_taps, dense.delay, n_active)
        mse = _score(config, realization, design)
        out.append((n_active, mse, boundary_hat, err, time.perf_counter() - t0))
    return out


def run_trial(config, method, snr_db, seed, n_active=None, trial=0):
    """Train, estimate, equalize and score one realization with one method."""
    realization = simulate_link(config, snr_db, seed)
    n_active = config.eq_active if n_active is None else n_active
    (s, mse, bh, err, rt), = _evaluate(config, realization, method, [n_active])
    return TrialRecord(Method.parse(method), float(snr_db), trial, seed, mse, bh, err, rt, s)


def _snr_task(args):
    config, snr_db, trial = args
    seed = trial_seed(config.seed, trial)
    realization = simulate_link(config, snr_db, seed)
    records = []
    for method in config.methods:
        (s, mse, bh, err, rt), = _evaluate(config, realization, method, [config.eq_active])
        records.append(TrialRecord(method, snr_db, trial, seed, mse, bh, err, rt, s))
    return records


def _tap_task(args):
    config, snr_db, trial, grid = args
    seed = trial_seed(config.seed, trial)
    realization = simulate_link(config, snr_db, seed)
    records = []
    for method in config.methods:
        for s, mse, bh, err, rt in _evaluate(config, realization, method, grid):
            records.append(TrialRecord(method, snr_db, trial, seed, mse, bh, err, rt, s))
    return records


def _run(tasks, fn, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(fn, tasks))
    else:
        chunks = [fn(t) for t in tasks]
    return [rec for chunk in chunks for rec in chunk]


def _order(records, key):
    rank = {m: i for i, m in enumerate(ALL_METHODS)}
    return sorted(records, key=lambda r: (rank[r.method], key(r), r.trial))


def run_snr_sweep(config, workers=1):
    """MSE versus SNR for every configured method."""
    tasks = [(config, snr, t) for snr in config.snr_grid for t in range(config.trials)]
    records = _run(tasks, _snr_task, workers)
    return ExperimentResult(_order(records, lambda r: r.snr_db))


def run_tap_sweep(config, tap_grid=None, snr_db=None, workers=1):
    """MSE versus number of active equalizer taps at a fixed SNR."""
    grid = tuple(config.tap_grid if tap_grid is None else tap_grid)
    if any(not 1 <= s <= config.eq_taps for s in grid):
        raise ValueError(f"tap grid entries must be in [1, {config.eq_taps}]")
    snr = config.tap_snr_db if snr_db is None else float(snr_db)
    tasks = [(config, snr, t, grid) for t in range(config.trials)]
    records = _run(tasks, _tap_task, workers)
    return ExperimentResult(_order(records, lambda r: r.active_taps))


def dump_estimates(config, snr_db, seed):
    """One realization, every method's combined-channel estimate plus the truth.

    Returns an ordered ``{label: taps}`` mapping whose first entry is ``"True"``.
    """
    realization = simulate_link(config, snr_db, seed)
    frame = config.frame
    window = realization.rx[realization.window_start:realization.window_start + frame.training_len]
    out = {"True": realization.combined}
    for method in config.methods:
        out[method.value] = estimate(config, method, window, realization).taps
    return out


def _fmt(x):
    return f"{x:.6f}"


def write_snr_csv(path, result):
    agg = result.aggregate("snr_db")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "snr_db", "mse_db", "stderr_db"])
        for (method, snr), (mean, se, _) in agg.items():
            stderr_db = 10.0 / math.log(10.0) * se / mean if mean > 0 else 0.0
            w.writerow([method.value, _fmt(snr), _fmt(to_db(mean)), _fmt(stderr_db)])


def write_tap_csv(path, result):
    agg = result.aggregate("active_taps")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "active_taps", "mse_db"])
        for (method, s), (mean, _, _) in agg.items():
            w.writerow([method.value, s, _fmt(to_db(mean))])


def write_estimates_csv(path, estimates):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "method", "real", "imag"])
        for label, taps in estimates.items():
            for i, v in enumerate(np.asarray(taps)):
                w.writerow([i, label, repr(float(v.real)), repr(float(v.imag))])


def summarize(result, key="snr_db"):
    """One line per method: mean MSE in dB at each grid point."""
    lines = {}
    for (method, value), (mean, _, _) in result.aggregate(key).items():
        lines.setdefault(method, []).append(f"{value:g}:{to_db(mean):.2f}")
    return [f"{m.value:<18} " + " ".join(v) for m, v in lines.items()]


def with_overrides(config, **changes):
    return replace(config, **changes)
