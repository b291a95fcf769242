"""Report figures written next to the CSV outputs."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import to_db  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "savefig.dpi": 120,
}

MARKERS = {
    "Classical": "s",
    "OmpJoint": "o",
    "Conventional": "^",
    "GenieConventional": "v",
    "PerfectCsi": "*",
}

# PNG metadata carries the matplotlib version by default
_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def _curves(result, key):
    curves = {}
    for (method, x), (mean, se, _) in result.aggregate(key).items():
        curves.setdefault(method.value, []).append((x, mean, se))
    return curves


def plot_snr_sweep(result, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, pts in _curves(result, "snr_db").items():
            x, mean, se = map(np.asarray, zip(*pts))
            ax.errorbar(x, [to_db(m) for m in mean],
                        yerr=10 / np.log(10) * se / mean,
                        marker=MARKERS.get(name, "."), capsize=2, label=name)
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("equalizer MSE (dB)")
        ax.legend()
        _save(fig, path)


def plot_tap_sweep(result, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, pts in _curves(result, "active_taps").items():
            x, mean, _ = zip(*pts)
            ax.plot(x, [to_db(m) for m in mean], marker=MARKERS.get(name, "."), label=name)
        ax.set_xscale("log")
        ax.set_xlabel("active equalizer taps")
        ax.set_ylabel("equalizer MSE (dB)")
        ax.legend()
        _save(fig, path)


def plot_estimates(estimates, path):
    """Stem-style panel per method; the truth is overlaid on each panel."""
    truth = estimates.get("True")
    truth = None if truth is None else np.asarray(truth)
    labels = [k for k in estimates if k != "True"] or ["True"]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(labels), 1, sharex=True,
                                 figsize=(7.0, 1.6 * len(labels) + 0.8), squeeze=False)
        for ax, label in zip(axes[:, 0], labels):
            est = np.asarray(estimates[label])
            idx = np.arange(est.size)
            ax.vlines(idx, 0, est.real, color="C0", lw=0.8, label="real")
            if np.any(est.imag):
                ax.vlines(idx + 0.3, 0, est.imag, color="C2", lw=0.8, label="imag")
            if truth is not None and truth.size == est.size and label != "True":
                nz = np.flatnonzero(truth)
                ax.plot(nz, truth.real[nz], "x", color="C3", ms=4, label="true")
            ax.set_ylabel(label, fontsize=8)
        axes[0, 0].legend(loc="upper right")
        axes[-1, 0].set_xlabel("combined channel tap index")
        _save(fig, path)
