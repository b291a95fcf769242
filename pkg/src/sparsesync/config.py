"""Flat ``key = value`` experiment configuration files.

Lines are ``key = value``; ``#`` starts a comment. Channel taps are either
a dense list (``taps = 1, 0.7``) or sparse ``index:value`` pairs
(``taps = 0:-0.5, 14:0.9``), padded with zeros to ``memory + 1`` taps.
"""

from importlib import resources
from pathlib import Path

import numpy as np

from .estimators import Method
from .harness import ExperimentConfig
from .model import validate_frame_config

PROFILES = ("paper-sim", "usrp")

ALIASES = {
    "m": "frame_len",
    "l": "memory",
    "n_e": "n_equations",
    "ne": "n_equations",
    "p": "period",
    "m_tilde": "training_len",
}

# paper-scale equalizer and trial counts for the simulation study
PAPER_SCALE = {"trials": 1000, "eq_taps": 1200, "eq_active": 200}


class ConfigError(ValueError):
    pass


def _none(v):
    return v.strip().lower() in ("", "none", "null", "off")


def _int(v):
    return int(v.strip())


def _opt_int(v):
    return None if _none(v) else _int(v)


def _opt_float(v):
    return None if _none(v) else float(v)


def _floats(v):
    return tuple(float(s) for s in v.split(",") if s.strip())


def _ints(v):
    return tuple(int(s) for s in v.split(",") if s.strip())


def _methods(v):
    return tuple(Method.parse(s) for s in v.split(",") if s.strip())


def _boundary(v):
    return None if v.strip().lower() == "random" else _int(v)


def _choice(*options):
    def parse(v):
        v = v.strip().lower()
        if v not in options:
            raise ValueError(f"expected one of {options}, got {v!r}")
        return v
    return parse


def parse_taps(value, memory):
    items = [s.strip() for s in value.split(",") if s.strip()]
    if not items:
        raise ValueError("taps is empty")
    if all(":" in s for s in items):
        pairs = [s.split(":", 1) for s in items]
        idx = [int(i) for i, _ in pairs]
        top = max(idx)
        if top > memory:
            raise ValueError(f"tap index {top} exceeds memory {memory}")
        h = np.zeros(memory + 1, dtype=np.complex128)
        for i, (_, v) in zip(idx, pairs):
            h[i] = complex(v.replace(" ", ""))
        return h
    if any(":" in s for s in items):
        raise ValueError("taps mixes dense and index:value forms")
    return np.array([complex(s.replace(" ", "")) for s in items])


FIELDS = {
    "frame_len": _int,
    "memory": _int,
    "n_equations": _int,
    "period": _int,
    "training_len": _int,
    "modulation": str.strip,
    "taps": str,
    "boundary": _boundary,
    "snr_grid": _floats,
    "methods": _methods,
    "trials": _int,
    "eq_taps": _int,
    "eq_active": _int,
    "delay_search": _choice("window", "full"),
    "design_noise": _choice("true", "estimated"),
    "seed": _int,
    "training_seed": _int,
    "omp_sparsity": _opt_int,
    "omp_threshold": _opt_float,
    "threshold_fraction": float,
    "tap_snr_db": float,
    "tap_grid": _ints,
    "scale": _choice("desk", "paper"),
    "detect_factor": float,
}

FRAME_KEYS = ("frame_len", "memory", "n_equations", "period", "modulation", "training_len")


def parse_text(text, source="<config>"):
    """Parse config text into ``(ExperimentConfig, extras)``.

    `extras` carries keys used outside the harness (``detect_factor``).
    """
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = ALIASES.get(key.lower(), key.lower())
        if key not in FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = FIELDS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
        lines[key] = lineno

    for key in ("frame_len", "memory", "n_equations", "taps"):
        if key not in values:
            raise ConfigError(f"{source}: missing required key {key!r}")

    try:
        frame = validate_frame_config(**{k: values[k] for k in FRAME_KEYS if k in values})
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None

    try:
        taps = parse_taps(values["taps"], frame.memory)
    except ValueError as exc:
        raise ConfigError(f"{source}:{lines['taps']}: bad taps: {exc}") from None

    kwargs = {}
    if values.get("scale") == "paper":
        kwargs.update(PAPER_SCALE)
    skip = set(FRAME_KEYS) | {"taps", "scale", "detect_factor"}
    kwargs.update({k: v for k, v in values.items() if k not in skip})
    extras = {"detect_factor": values.get("detect_factor", 5.0)}
    try:
        return ExperimentConfig(frame=frame, channel=taps, **kwargs), extras
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def profile_text(name):
    return resources.files("sparsesync").joinpath("profiles", f"{name}.conf").read_text("utf-8")


def parse_config(path):
    """Load a config file, or a bundled profile by name (``paper-sim``, ``usrp``)."""
    p = Path(path)
    if p.is_file():
        return parse_text(p.read_text(encoding="utf-8"), str(p))
    if str(path) in PROFILES:
        return parse_text(profile_text(str(path)), f"profile:{path}")
    raise ConfigError(f"config file not found: {path}")
