"""JSON run configuration with unit-suffixed keys."""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .exceptions import ValidationError
from .model import TWO_PI, SivParameters, params_from_observables
from .sequences import DEFAULT_PUMP_RABI, SequenceConfig

EXPERIMENTS = ("rabi", "ramsey", "pump", "raman-rabi", "raman-ramsey", "fit")

# key -> (default, SI multiplier or None for non-numeric)
PHYSICS_KEYS = {
    "delta_g_ghz": (48.0, TWO_PI * 1e9),
    "delta_e_ghz": (259.0, TWO_PI * 1e9),
    "zpl_thz": (406.8, 1e12),
    "t1_orbit_ns": (35.0, 1e-9),
    "t2_lower_ps": (578.0, 1e-12),
    "t2_upper_ps": (279.0, 1e-12),
    "gamma_pure_mhz": (160.0, TWO_PI * 1e6),
    "temperature_k": (5.0, 1.0),
    "gamma_rad_per_ns": (None, 1e9),
    "branching_lower_excited": ([0.5, 0.5], None),
    "branching_upper_excited": ([0.5, 0.5], None),
}

SEQUENCE_KEYS = {
    "rep_rate_mhz": ("rep_rate", 80.0, 1e6),
    "raman_rep_rate_mhz": ("raman_rep_rate", 1.0, 1e6),
    "pump_duration_ns": ("pump_duration", 200.0, 1e-9),
    "readout_duration_ns": ("readout_duration", 200.0, 1e-9),
    "pump_rabi_mhz": ("pump_rabi", round(DEFAULT_PUMP_RABI / TWO_PI / 1e6, 6), TWO_PI * 1e6),
    "raman_delay_ps": ("raman_delay", 50.0, 1e-12),
    "readout_delay_ns": ("readout_delay", 2.0, 1e-9),
    "one_photon_length_ps": ("one_photon_length", 12.0, 1e-12),
    "raman_length_ps": ("raman_length", 1.0, 1e-12),
    "raman_detuning_ghz": ("raman_detuning", 500.0, TWO_PI * 1e9),
    "rabi_pi_power_c_uw": ("rabi_pi_power_c", 0.5, 1e-6),
    "rabi_pi_power_b_uw": ("rabi_pi_power_b", 50.0 / 36.0, 1e-6),
    "raman_pi_power_uw": ("raman_pi_power", 2.0, 1e-6),
    "background_slope_counts_per_uw": ("background_slope", 0.0, 1e6),
    "collection_scale_counts_per_photon": ("collection_scale", 1.0, 1.0),
    "steady_state": ("steady_state", True, None),
    "pulse_picker_leakage": ("pulse_picker_leakage", False, None),
    "etalon_finesse": ("etalon_finesse", 50.0, 1.0),
    "etalon_fsr_ghz": ("etalon_fsr", 1000.0, 1e9),
    "etalon_bandwidth_ghz": ("etalon_bandwidth", 20.0, 1e9),
}

RUN_KEYS = {
    "experiment": "rabi",
    "transition": "C",
    "sweep": None,
    "out_dir": "results",
    "tol": 1e-9,
    "seed": None,
    "n_jobs": 1,
    "drive_ratio": 0.7,
    "fit_target": "raman-rabi",
    "fit_param": "ratio",
    "data_path": None,
}

VALID_KEYS = tuple(sorted({*PHYSICS_KEYS, *SEQUENCE_KEYS, *RUN_KEYS}))
_UNIT_SUFFIX = re.compile(r"_(ghz|mhz|thz|hz|ns|ps|us|ms|s|k|uw|mw|w|per_ns|per_s)$")


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "rabi"
    transition: str = "C"
    sweep: tuple | None = None
    out_dir: str = "results"
    tol: float = 1e-9
    seed: int | None = None
    n_jobs: int = 1
    drive_ratio: float = 0.7
    fit_target: str = "raman-rabi"
    fit_param: str = "ratio"
    data_path: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
        if self.transition not in ("B", "C"):
            raise ValidationError("transition must be B or C")
        if self.sweep is not None and len(self.sweep) < 2:
            raise ValidationError("a sweep needs at least two points")
        if not 1e-12 <= self.tol <= 1e-4:
            raise ValidationError("tol must lie in [1e-12, 1e-4]")
        if self.n_jobs < 1:
            raise ValidationError("n_jobs must be at least 1")
        if not self.drive_ratio >= 0:
            raise ValidationError("drive_ratio must be non-negative")
        if self.data_path is not None and not Path(self.data_path).is_file():
            raise ValidationError(f"data file not found: {self.data_path}")


_PI_TERM = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\*?(pi)?(?:/((?:\d+\.?\d*|\.\d+)))?$")


def parse_number(text: str) -> float:
    """Number with an optional ``pi`` factor: ``2.5``, ``pi``, ``10pi``, ``pi/2``, ``3pi/4``."""
    s = str(text).strip().replace(" ", "")
    m = _PI_TERM.match(s)
    if not s or m is None or (m.group(1) is None and m.group(2) is None):
        raise ValidationError(f"cannot parse number {text!r}")
    value = float(m.group(1)) if m.group(1) is not None else 1.0
    if m.group(2):
        value *= math.pi
    if m.group(3):
        value /= float(m.group(3))
    return value


def parse_sweep(text) -> tuple:
    """``start:stop:count`` (inclusive, evenly spaced) or an explicit list."""
    if isinstance(text, (list, tuple)):
        values = tuple(parse_number(v) if isinstance(v, str) else float(v) for v in text)
    elif isinstance(text, str) and ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"sweep must be start:stop:count, got {text!r}")
        start, stop = parse_number(parts[0]), parse_number(parts[1])
        try:
            count = int(parts[2])
        except ValueError:
            raise ValidationError(f"sweep count must be an integer, got {parts[2]!r}") from None
        if count < 2:
            raise ValidationError("sweep count must be at least 2")
        step = (stop - start) / (count - 1)
        values = tuple(start + i * step for i in range(count))
    elif isinstance(text, str):
        values = tuple(parse_number(v) for v in text.split(","))
    else:
        raise ValidationError(f"unsupported sweep {text!r}")
    if len(values) < 2:
        raise ValidationError("a sweep needs at least two points")
    return values


def _stem(key: str) -> str:
    return _UNIT_SUFFIX.sub("", key)


def _check_keys(raw: dict) -> None:
    stems = {_stem(k): k for k in VALID_KEYS}
    for key in raw:
        if key in VALID_KEYS:
            continue
        if _stem(key) in stems and _stem(key) != key:
            raise ValidationError(f"unit suffix mismatch for {key!r}: expected {stems[_stem(key)]!r}")
        raise ValidationError(f"unknown config key {key!r}; valid keys: {', '.join(VALID_KEYS)}")


def resolve(raw: dict | None = None) -> dict:
    """Fill defaults into a user dictionary; the result is what gets echoed."""
    raw = dict(raw or {})
    _check_keys(raw)
    out = {}
    for key, (default, _) in PHYSICS_KEYS.items():
        out[key] = raw.get(key, default)
    for key, (_, default, _) in SEQUENCE_KEYS.items():
        out[key] = raw.get(key, default)
    for key, default in RUN_KEYS.items():
        out[key] = raw.get(key, default)
    return out


def _number(cfg, key):
    value = cfg[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{key} must be a number, got {value!r}")
    return float(value)


def build(cfg: dict) -> tuple[SivParameters, SequenceConfig, RunConfig]:
    """Construct the model, sequence and run objects from a resolved dict."""
    phys = {k: (None if cfg[k] is None else (_number(cfg, k) * PHYSICS_KEYS[k][1]))
            for k in PHYSICS_KEYS if PHYSICS_KEYS[k][1] is not None}
    branching = (tuple(cfg["branching_lower_excited"]), tuple(cfg["branching_upper_excited"]))
    params = params_from_observables(
        t1_orbit=phys["t1_orbit_ns"],
        t2_lower=phys["t2_lower_ps"],
        t2_upper=phys["t2_upper_ps"],
        gamma_pure=phys["gamma_pure_mhz"],
        temperature=phys["temperature_k"],
        gamma_rad=phys["gamma_rad_per_ns"],
        branching=branching,
        delta_g=phys["delta_g_ghz"],
        delta_e=phys["delta_e_ghz"],
        zpl_frequency=phys["zpl_thz"],
    )
    seq_kwargs = {}
    for key, (name, _, scale) in SEQUENCE_KEYS.items():
        if scale is None:
            if not isinstance(cfg[key], bool):
                raise ValidationError(f"{key} must be true or false")
            seq_kwargs[name] = cfg[key]
        else:
            seq_kwargs[name] = _number(cfg, key) * scale
    seq = SequenceConfig(**seq_kwargs)
    run_kwargs = dict((k, cfg[k]) for k in RUN_KEYS)
    if run_kwargs["sweep"] is not None:
        run_kwargs["sweep"] = parse_sweep(run_kwargs["sweep"])
    if run_kwargs["seed"] is not None and not isinstance(run_kwargs["seed"], int):
        raise ValidationError("seed must be an integer")
    for key in ("tol", "drive_ratio"):
        run_kwargs[key] = _number(cfg, key)
    if not isinstance(run_kwargs["n_jobs"], int):
        raise ValidationError("n_jobs must be an integer")
    run = RunConfig(**run_kwargs)
    return params, seq, run


def load_config(path=None) -> tuple[SivParameters, SequenceConfig, RunConfig]:
    """Read a JSON config (``None`` or an empty file means all defaults)."""
    return build(load_resolved(path))


def load_resolved(path=None) -> dict:
    raw = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc.strerror}") from exc
        if text.strip():
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
            if not isinstance(raw, dict):
                raise ValidationError(f"{path}: top level must be an object")
    return resolve(raw)


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, indent=2) + "\n"


def config_hash(cfg: dict) -> str:
    """Digest of everything that affects results (the output directory does not)."""
    relevant = {k: v for k, v in cfg.items() if k != "out_dir"}
    return hashlib.sha256(canonical_json(relevant).encode()).hexdigest()


def echo_config(cfg: dict, out_dir) -> Path:
    """Write the resolved config to ``out_dir/resolved_config.json``."""
    path = Path(out_dir) / "resolved_config.json"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(canonical_json(cfg))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return path
