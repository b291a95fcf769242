import numpy as np
import pytest

from sparsesync.channel import LinkRealization, propagate
from sparsesync.equalizer import (
    EqualizerDesign,
    apply_equalizer,
    design_mmse,
    measure_mse,
    optimize_delay,
    sparsify_taps,
    write_design_csv,
)
from sparsesync.model import constellation

from conftest import crandn


def conv_matrix(h, n_taps):
    """Explicit convolution matrix, row k holds h shifted right by k."""
    H = np.zeros((n_taps, n_taps + len(h) - 1), dtype=complex)
    for k in range(n_taps):
        for l, v in enumerate(h):
            H[k, k + l] = v
    return H


def oracle_mse(h, s2, n_taps, delay, active=None):
    H = conv_matrix(h, n_taps)
    R = H @ H.conj().T + s2 * np.eye(n_taps)
    g = H[:, delay]
    idx = np.arange(n_taps) if active is None else np.asarray(sorted(active))
    v = np.linalg.solve(R[np.ix_(idx, idx)], g[idx])
    w = np.zeros(n_taps, dtype=complex)
    w[idx] = v.conj()
    return w, 1 - np.vdot(g[idx], v).real


def empirical_mse(h, s2, design, n=100_000, seed=0, modulation="QPSK"):
    rng = np.random.default_rng(seed)
    pts = constellation(modulation)
    x = pts[rng.integers(0, pts.size, n)]
    y = propagate(x, LinkRealization(np.asarray(h, dtype=complex), s2, seed + 1))
    xe = apply_equalizer(y, design)
    return measure_mse(xe, x, design.delay, transient=design.n_taps + len(h))


class TestDesign:
    def test_identity(self):
        w, mse = design_mmse([1], 0.0, 1, 0)
        np.testing.assert_allclose(w, [1])
        assert mse == pytest.approx(0, abs=1e-15)

    def test_pure_delay(self):
        w, mse = design_mmse([0, 1], 0.0, 1, 1)
        np.testing.assert_allclose(w, [1])
        assert mse == pytest.approx(0, abs=1e-15)

    def test_scalar_wiener(self):
        w, mse = design_mmse([1], 0.1, 1, 0)
        np.testing.assert_allclose(w, [1 / 1.1])
        assert mse == pytest.approx(0.1 / 1.1)

    def test_against_explicit_matrices(self, rng):
        h = crandn(rng, 6)
        for delay in (0, 4, 12, 20):
            w, mse = design_mmse(h, 0.05, 16, delay)
            w_ref, mse_ref = oracle_mse(h, 0.05, 16, delay)
            np.testing.assert_allclose(w, w_ref, atol=1e-10)
            assert mse == pytest.approx(mse_ref, abs=1e-12)

    def test_delay_out_of_range(self):
        with pytest.raises(ValueError):
            design_mmse([1, 0.5], 0.1, 4, 5)

    def test_singular_gets_loading(self):
        with pytest.warns(RuntimeWarning, match="diagonal loading"):
            w, mse = design_mmse([0, 0], 0.0, 3, 1)
        assert np.all(np.isfinite(w))

    def test_positive_noise_always_solves(self, rng):
        for _ in range(20):
            h = crandn(rng, int(rng.integers(1, 8)))
            w, mse = design_mmse(h, 1e-3, 10, 3)
            assert np.all(np.isfinite(w)) and 0 <= mse <= 1

    def test_perfect_csi_high_snr_invertible(self):
        h = np.array([1, 0.5, -0.2])
        d = optimize_delay(h, 1e-9, 4 * len(h) * 4)
        assert d.theoretical_mse < 1e-3


class TestDelay:
    def test_pure_delay_channel(self):
        h = np.zeros(6)
        h[4] = 1
        d = optimize_delay(h, 0.0, 8)
        assert d.delay == 4 and d.theoretical_mse == pytest.approx(0, abs=1e-12)

    def test_scalar_channel(self):
        assert optimize_delay([0.8], 0.1, 1).delay == 0

    def test_exhaustive_scan(self):
        h = np.array([1, 0.7])
        scan = [oracle_mse(h, 0.01, 31, delay)[1] for delay in range(31 + 1)]
        best = int(np.argmin(scan))
        d = optimize_delay(h, 0.01, 31)
        assert d.delay == best
        assert d.theoretical_mse == pytest.approx(scan[best], abs=1e-12)
        emp = empirical_mse(h, 0.01, d)
        assert abs(emp / d.theoretical_mse - 1) < 0.05

    def test_range_restriction_and_ties(self):
        h = np.zeros(4)
        h[0] = 1
        d = optimize_delay(h, 0.0, 4, delay_range=[2, 1, 3])
        # delays 1..3 are all perfect; the smallest wins
        assert d.delay == 1

    def test_range_validation(self):
        with pytest.raises(ValueError):
            optimize_delay([1], 0.1, 2, delay_range=[5])
        with pytest.raises(ValueError):
            optimize_delay([1], 0.1, 2, delay_range=[])


class TestSparsify:
    def test_full_budget_is_dense(self, rng):
        h = crandn(rng, 5)
        dense = optimize_delay(h, 0.02, 12)
        sparse = sparsify_taps(h, 0.02, 12, dense.delay, 12)
        np.testing.assert_allclose(sparse.weights, dense.weights, atol=1e-10)
        assert sparse.theoretical_mse == pytest.approx(dense.theoretical_mse, abs=1e-12)

    def test_pure_delay_single_tap(self):
        h = np.zeros(5)
        h[3] = 0.5
        d = sparsify_taps(h, 0.0, 10, 7, 1)
        assert d.active == (4,)
        np.testing.assert_allclose(d.weights[4], 2.0)

    def test_greedy_matches_brute_force_selection(self, rng):
        h = crandn(rng, 4)
        n_taps, delay, s2 = 10, 6, 0.05
        chosen = []
        for _ in range(5):
            cands = [j for j in range(n_taps) if j not in chosen]
            mses = [oracle_mse(h, s2, n_taps, delay, chosen + [j])[1] for j in cands]
            chosen.append(cands[int(np.argmin(mses))])
        d = sparsify_taps(h, s2, n_taps, delay, 5)
        assert d.active == tuple(sorted(chosen))
        w_ref, mse_ref = oracle_mse(h, s2, n_taps, delay, chosen)
        np.testing.assert_allclose(d.weights, w_ref, atol=1e-10)
        assert d.theoretical_mse == pytest.approx(mse_ref, abs=1e-12)

    def test_monotone_in_budget(self, rng):
        h = crandn(rng, 8)
        prev = np.inf
        for s in range(1, 31):
            mse = sparsify_taps(h, 0.01, 30, 12, s).theoretical_mse
            assert mse <= prev + 1e-12
            prev = mse

    def test_two_tap_plateau(self):
        h = np.array([1, 0.7])
        d = optimize_delay(h, 0.01, 200)
        mses = [sparsify_taps(h, 0.01, 200, d.delay, s).theoretical_mse for s in (10, 20, 200)]
        assert 10 * np.log10(mses[0] / mses[2]) < 0.2
        assert 10 * np.log10(mses[1] / mses[2]) < 0.01

    def test_zero_outside_active(self, rng):
        d = sparsify_taps(crandn(rng, 3), 0.1, 20, 5, 4)
        mask = np.ones(20, bool)
        mask[list(d.active)] = False
        assert not np.any(d.weights[mask])

    def test_budget_range(self):
        with pytest.raises(ValueError):
            sparsify_taps([1], 0.1, 4, 0, 0)
        with pytest.raises(ValueError):
            sparsify_taps([1], 0.1, 4, 0, 5)


class TestApplyAndMeasure:
    def test_identity(self, rng):
        y = crandn(rng, 20)
        d = EqualizerDesign(np.array([1.0 + 0j]), 0, (0,), 0.0)
        np.testing.assert_allclose(apply_equalizer(y, d), y)

    def test_delay_two(self, rng):
        y = crandn(rng, 20)
        d = EqualizerDesign(np.array([0, 0, 1.0 + 0j]), 0, (2,), 0.0)
        out = apply_equalizer(y, d)
        np.testing.assert_allclose(out[2:], y[:-2])
        np.testing.assert_allclose(out[:2], 0)

    def test_against_double_loop(self, rng):
        y, w = crandn(rng, 40), crandn(rng, 7)
        d = EqualizerDesign(w, 0, tuple(range(7)), 0.0)
        ref = np.array([sum(w[k] * y[n - k] for k in range(7) if n - k >= 0) for n in range(40)])
        np.testing.assert_allclose(apply_equalizer(y, d), ref, atol=1e-12)

    def test_linear(self, rng):
        y1, y2, w = crandn(rng, 30), crandn(rng, 30), crandn(rng, 5)
        d = EqualizerDesign(w, 0, tuple(range(5)), 0.0)
        np.testing.assert_allclose(
            apply_equalizer(2 * y1 - 1j * y2, d),
            2 * apply_equalizer(y1, d) - 1j * apply_equalizer(y2, d), atol=1e-12)

    def test_mse_zero_for_shift(self, rng):
        x = crandn(rng, 50)
        xe = np.concatenate([np.zeros(3), x])
        assert measure_mse(xe, x, 3) == 0

    def test_mse_constant_offset(self, rng):
        x = crandn(rng, 50)
        xe = np.concatenate([np.zeros(3), x]) + (0.12 + 0.16j)
        assert measure_mse(xe, x, 3) == pytest.approx(0.04)

    def test_mse_independent(self):
        rng = np.random.default_rng(8)
        x = np.sign(rng.standard_normal(100_000))
        xe = crandn(rng, 100_000)
        assert measure_mse(xe, x, 0) == pytest.approx(2.0, rel=0.05)

    def test_mse_no_overlap(self):
        with pytest.raises(ValueError):
            measure_mse(np.ones(5), np.ones(5), 5)

    def test_design_csv(self, tmp_path):
        d = sparsify_taps([1, 0.5], 0.1, 6, 1, 2)
        p = tmp_path / "eq.csv"
        write_design_csv(p, d)
        lines = p.read_text().splitlines()
        assert lines[0] == "index,real,imag,active"
        assert len(lines) == 7
        assert sum(int(l.rsplit(",", 1)[1]) for l in lines[1:]) == 2


def test_theoretical_matches_empirical_random_channels():
    rng = np.random.default_rng(2024)
    for i in range(20):
        h = crandn(rng, int(rng.integers(2, 7)))
        h /= np.linalg.norm(h)
        s2 = float(10 ** (-rng.uniform(0.5, 2.0)))
        d = optimize_delay(h, s2, 24)
        emp = empirical_mse(h, s2, d, seed=100 + i)
        assert abs(emp / d.theoretical_mse - 1) < 0.05, (i, emp, d.theoretical_mse)
