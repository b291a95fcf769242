"""Command-line entry point.

Usage::

    sparsesync simulate --config paper-sim --experiment snr --out-dir out/
    sparsesync simulate --config usrp --experiment taps --out-dir out/
    sparsesync simulate --config usrp --export-iq capture.f32 --snr 20 --seed 5
    sparsesync ingest --iq capture.f32 --config usrp --method OmpJoint --ref-seed 5
    sparsesync version
"""

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from importlib.metadata import PackageNotFoundError, version as pkg_version
from pathlib import Path

from . import harness
from .capture import FORMATS, CaptureError, ingest_capture, load_iq, save_iq
from .config import ConfigError, parse_config
from .equalizer import write_design_csv
from .estimators import Method

logger = logging.getLogger("sparsesync")

SEED_ENV = "SPARSESYNC_SEED"


def _version():
    try:
        return pkg_version("sparsesync")
    except PackageNotFoundError:
        return "unknown"


def _seed(args, config):
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    return config.seed if args.seed is None else args.seed


def cmd_simulate(args):
    config, _ = parse_config(args.config)
    config = replace(config, seed=_seed(args, config))
    if args.trials is not None:
        config = replace(config, trials=args.trials)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plots = not args.no_plots
    if plots:
        from . import plotting

    if args.export_iq:
        snr = config.tap_snr_db if args.snr is None else args.snr
        link = harness.simulate_link(config, snr, config.seed, data_seed=config.seed)
        save_iq(args.export_iq, link.rx, args.iq_format)
        print(f"wrote {link.rx.size} samples to {args.export_iq} "
              f"(boundary {link.boundary}, snr {snr:g} dB, ref seed {config.seed})")
        return 0

    if args.experiment == "snr":
        result = harness.run_snr_sweep(config, workers=args.parallel)
        harness.write_snr_csv(out / "snr_sweep.csv", result)
        if plots:
            plotting.plot_snr_sweep(result, out / "snr_sweep.png")
        lines = harness.summarize(result, "snr_db")
    elif args.experiment == "taps":
        result = harness.run_tap_sweep(config, snr_db=args.snr, workers=args.parallel)
        harness.write_tap_csv(out / "tap_sweep.csv", result)
        if plots:
            plotting.plot_tap_sweep(result, out / "tap_sweep.png")
        lines = harness.summarize(result, "active_taps")
    else:
        snr = config.tap_snr_db if args.snr is None else args.snr
        estimates = harness.dump_estimates(config, snr, config.seed)
        harness.write_estimates_csv(out / "estimates.csv", estimates)
        if plots:
            plotting.plot_estimates(estimates, out / "estimates.png")
        lines = [f"{label:<18} nonzero taps: {int((abs(t) > 0).sum())}"
                 for label, t in estimates.items()]
    for line in lines:
        print(line)
    return 0


def cmd_ingest(args):
    config, extras = parse_config(args.config)
    detect = extras["detect_factor"] if args.detect_factor is None else args.detect_factor
    capture = load_iq(args.iq, args.format)
    result = ingest_capture(capture.samples, config, Method.parse(args.method),
                            ref_seed=args.ref_seed, detect_factor=detect)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    est = result.estimate
    harness.write_estimates_csv(out / "estimates.csv", {est.method.value: est.taps})
    write_design_csv(out / "equalizer.csv", result.design)

    if result.frame_mse is not None:
        with open(out / "frames.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frame", "mse_db"])
            for k, mse in enumerate(result.frame_mse, start=1):
                w.writerow([k, f"{harness.to_db(mse):.6f}"])
    else:
        with open(out / "decisions.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frame", "index", "real", "imag"])
            for k, frame in enumerate(result.decisions, start=1):
                for i, s in enumerate(frame):
                    w.writerow([k, i, repr(float(s.real)), repr(float(s.imag))])
    if not args.no_plots:
        from . import plotting
        plotting.plot_estimates({est.method.value: est.taps}, out / "estimates.png")

    print(f"training window at sample {result.window_start}, boundary estimate "
          f"{est.boundary}, {len(est.support) or int((abs(est.taps) > 0).sum())} nonzero taps, "
          f"noise variance {est.noise_variance:.3g}")
    print(f"equalizer delay {result.design.delay}, {len(result.design.active)} active taps, "
          f"{len(result.decisions)} data frames")
    if result.frame_mse:
        mean = sum(result.frame_mse) / len(result.frame_mse)
        print(f"{est.method.value:<18} mse {harness.to_db(mean):.2f} dB")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sparsesync",
        description="Joint frame synchronization and sparse channel estimation simulator.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser(
        "simulate",
        help="run a Monte-Carlo experiment",
        description="SNR convention: unit-energy symbols, SNR = 1 / complex noise variance. "
                    f"{SEED_ENV} in the environment overrides --seed.",
    )
    sim.add_argument("--config", required=True, help="config file or profile name (paper-sim, usrp)")
    sim.add_argument("--experiment", choices=("snr", "taps", "estimates"), default="snr")
    sim.add_argument("--out-dir", default=".")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--parallel", type=int, default=1, metavar="WORKERS")
    sim.add_argument("--trials", type=int, default=None)
    sim.add_argument("--snr", type=float, default=None,
                     help="SNR in dB for taps/estimates/export (default: tap_snr_db)")
    sim.add_argument("--export-iq", metavar="PATH",
                     help="write one simulated received stream as a capture and exit")
    sim.add_argument("--iq-format", choices=FORMATS, default="f32le")
    sim.add_argument("--no-plots", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    ing = sub.add_parser("ingest", help="estimate and equalize an IQ capture")
    ing.add_argument("--iq", required=True)
    ing.add_argument("--format", choices=FORMATS, default="f32le")
    ing.add_argument("--config", required=True)
    ing.add_argument("--method", default="OmpJoint",
                     help="Classical, OmpJoint or Conventional")
    ing.add_argument("--out-dir", default=".")
    ing.add_argument("--ref-seed", type=int, default=None,
                     help="data seed of the capture, enables per-frame MSE")
    ing.add_argument("--detect-factor", type=float, default=None)
    ing.add_argument("--no-plots", action="store_true")
    ing.set_defaults(func=cmd_ingest)

    ver = sub.add_parser("version", help="print the package version")
    ver.set_defaults(func=lambda args: print(_version()) or 0)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CaptureError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
