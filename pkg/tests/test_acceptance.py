"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[PASS]`` or ``[FAIL]`` line; the lines are also
collected into the terminal summary.
"""

import os
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import null_space

from sparsesync.capture import ingest_capture, load_iq
from sparsesync.cli import main
from sparsesync.config import ConfigError, parse_config, parse_text, profile_text
from sparsesync.equalizer import optimize_delay
from sparsesync.estimators import (
    Method,
    OmpStop,
    build_measurement_matrix,
    estimate_classical,
    estimate_omp,
    sync_crosscorr,
)
from sparsesync.harness import ExperimentConfig, run_snr_sweep, run_tap_sweep, simulate_link, to_db
from sparsesync.model import build_combined_cir, generate_training

from conftest import ACCEPTANCE_LINES, crandn, paper_channel
from test_equalizer import empirical_mse

WORKERS = max(1, min(8, os.cpu_count() or 1))


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def paper():
    return parse_config("paper-sim")[0]


@pytest.fixture(scope="module")
def desk_sweep(paper):
    cfg = replace(paper, trials=50, eq_taps=300, eq_active=60)
    t0 = time.perf_counter()
    result = run_snr_sweep(cfg, workers=WORKERS)
    return cfg, result, time.perf_counter() - t0


def test_1_noiseless_exact_recovery(paper):
    t0 = time.perf_counter()
    frame = paper.frame
    training = generate_training(frame, paper.training_seed)
    mm = build_measurement_matrix(training, frame)
    truth = build_combined_cir(paper_channel(), 500, frame.frame_len).taps
    est = estimate_omp(mm.matrix @ truth, mm, OmpStop(sparsity=20))
    elapsed = time.perf_counter() - t0
    err = np.linalg.norm(est.taps - truth) / np.linalg.norm(truth)
    support_ok = sorted(est.support) == sorted(np.flatnonzero(truth).tolist())
    report(1, "noiseless exact recovery", err < 1e-8 and support_ok and elapsed < 5,
           f"rel err {err:.1e}, support {'exact' if support_ok else 'wrong'}, {elapsed:.2f} s")


def test_2_boundary_misdetection(paper):
    t0 = time.perf_counter()
    frame = paper.frame
    training = generate_training(frame, paper.training_seed)
    hits = 0
    for trial in range(100):
        link = simulate_link(paper, 20.0, 7000 + trial, periods=2)
        window = link.rx[link.window_start:link.window_start + frame.training_len]
        hits += sync_crosscorr(window, training, frame) == 514
    elapsed = time.perf_counter() - t0
    report(2, "cross-correlation sync lands on 514", hits >= 95 and elapsed < 30,
           f"{hits}/100 trials, {elapsed:.1f} s")


@pytest.mark.slow
def test_3_method_ordering(desk_sweep):
    cfg, result, elapsed = desk_sweep
    bad = []
    for snr in cfg.snr_grid:
        mse = {m: result.mean_mse(m, snr) for m in cfg.methods}
        if snr >= 10 and mse[Method.OMP_JOINT] > mse[Method.GENIE_CONVENTIONAL]:
            bad.append(f"OMP>genie@{snr:g}")
        if snr >= 5 and max(mse, key=mse.get) is not Method.CLASSICAL:
            bad.append(f"Classical not worst@{snr:g}")
    report(3, "method ordering at desk scale", not bad and elapsed < 600,
           f"{', '.join(bad) or 'ordering holds'}, sweep {elapsed:.0f} s")


@pytest.mark.slow
def test_4_high_snr_convergence(desk_sweep):
    _, result, _ = desk_sweep
    gap = to_db(result.mean_mse(Method.OMP_JOINT, 25.0)) - to_db(result.mean_mse(Method.PERFECT_CSI, 25.0))
    report(4, "OMP within 0.5 dB of perfect CSI at 25 dB", abs(gap) <= 0.5, f"gap {gap:+.3f} dB")


def test_5_tap_budget_plateau():
    cfg = replace(parse_config("usrp")[0], methods=(Method.OMP_JOINT,))
    t0 = time.perf_counter()
    result = run_tap_sweep(cfg, tap_grid=(20, 200), workers=WORKERS)
    elapsed = time.perf_counter() - t0
    diff = to_db(result.mean_mse(Method.OMP_JOINT, 20, "active_taps")) - \
        to_db(result.mean_mse(Method.OMP_JOINT, 200, "active_taps"))
    report(5, "20 active taps within 0.2 dB of 200", diff < 0.2 and elapsed < 60,
           f"MSE(20) - MSE(200) = {diff:+.3f} dB, {elapsed:.1f} s")


def test_6_config_consistency():
    p, _ = parse_config("paper-sim")
    u, _ = parse_config("usrp")
    ok = p.frame.training_len == 1247 and u.frame.training_len == 147
    rejected = 0
    violations = [
        profile_text("paper-sim").replace("training_len = 1247", "training_len = 1248"),
        profile_text("usrp").replace("training_len = 147", "training_len = 146"),
        profile_text("usrp").replace("frame_len = 100", "frame_len = 4"),
        profile_text("usrp").replace("memory = 5", "memory = -1"),
    ]
    for text in violations:
        assert text not in (profile_text("paper-sim"), profile_text("usrp"))
        try:
            parse_text(text)
        except ConfigError:
            rejected += 1
    report(6, "profiles validate and violations are rejected", ok and rejected == len(violations),
           f"M~ = {p.frame.training_len}, {u.frame.training_len}; {rejected}/{len(violations)} rejected")


def _omp_invariants(n_instances=1000):
    rng = np.random.default_rng(70)
    for _ in range(n_instances):
        n_eq = int(rng.integers(8, 65))
        n_cols = int(rng.integers(n_eq, 3 * n_eq + 1))
        A = crandn(rng, n_eq, n_cols)
        k = int(rng.integers(1, n_eq // 4 + 1))
        h = np.zeros(n_cols, dtype=complex)
        h[rng.choice(n_cols, k, replace=False)] = crandn(rng, k)
        y = A @ h + 0.05 * crandn(rng, n_eq)
        est = estimate_omp(y, A, OmpStop(sparsity=k))
        S = list(est.support)
        r = y - A @ est.taps
        scale = np.linalg.norm(y) * np.linalg.norm(A, axis=0).max()
        if S and np.max(np.abs(A[:, S].conj().T @ r)) > 1e-8 * scale:
            return False
        hist = est.residual_history
        if any(b >= a for a, b in zip(hist, hist[1:])):
            return False
    return True


def _min_norm_null_space(n_systems=100):
    rng = np.random.default_rng(71)
    for _ in range(n_systems):
        m = int(rng.integers(2, 30))
        n = int(rng.integers(m + 1, 3 * m + 2))
        A, b = crandn(rng, m, n), crandn(rng, m)
        x = estimate_classical(b, A).taps
        N = null_space(A)
        if np.linalg.norm(A @ x - b) > 1e-9 * np.linalg.norm(b):
            return False
        if np.linalg.norm(N.conj().T @ x) > 1e-9 * np.linalg.norm(x):
            return False
    return True


def _equalizer_agreement(n_channels=20):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(n_channels):
        h = crandn(rng, int(rng.integers(2, 7)))
        h /= np.linalg.norm(h)
        s2 = float(10 ** (-rng.uniform(0.5, 2.0)))
        d = optimize_delay(h, s2, 24)
        worst = max(worst, abs(empirical_mse(h, s2, d, seed=100 + i) / d.theoretical_mse - 1))
    return worst


def _deterministic_csvs(tmp_path):
    conf = tmp_path / "tiny.conf"
    conf.write_text("frame_len = 40\nmemory = 6\nn_equations = 20\nperiod = 4\n"
                    "taps = 0:1, 3:0.5\nboundary = random\nsnr_grid = 0, 20\ntrials = 3\n"
                    "eq_taps = 16\neq_active = 4\ntap_grid = 1, 16\nomp_sparsity = 4\n")
    blobs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        for exp in ("snr", "taps", "estimates"):
            assert main(["simulate", "--config", str(conf), "--experiment", exp,
                         "--out-dir", str(out), "--seed", "11", "--no-plots"]) == 0
        blobs.append([(out / n).read_bytes()
                      for n in ("snr_sweep.csv", "tap_sweep.csv", "estimates.csv")])
    return blobs[0] == blobs[1]


def test_7_property_suites(tmp_path):
    omp_ok = _omp_invariants()
    mn_ok = _min_norm_null_space()
    worst = _equalizer_agreement()
    det_ok = _deterministic_csvs(tmp_path)
    report(7, "property suites", omp_ok and mn_ok and worst < 0.05 and det_ok,
           f"OMP invariants {omp_ok}, min-norm {mn_ok}, "
           f"equalizer worst {100 * worst:.1f}%, byte-identical {det_ok}")


def test_8_ingest_round_trip(tmp_path):
    cap = tmp_path / "usrp.f32"
    assert main(["simulate", "--config", "usrp", "--export-iq", str(cap), "--seed", "3"]) == 0
    cfg, extras = parse_config("usrp")
    res = ingest_capture(load_iq(cap).samples, cfg, "OmpJoint", ref_seed=3,
                         detect_factor=extras["detect_factor"])
    mags = np.sort(np.abs(res.estimate.taps))[::-1]
    ratio = mags[1] / mags[0]
    report(8, "f32le capture round trip", abs(ratio / 0.7 - 1) <= 0.1,
           f"dominant tap ratio {ratio:.3f}, mean frame MSE "
           f"{to_db(np.mean(res.frame_mse)):.1f} dB")
