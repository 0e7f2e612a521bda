"""Command-line entry point and result files."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .estimators import fit_drive_ratio
from .exceptions import NumericalError, SivSimError, ValidationError
from .pulses import DriveRatio, PulseShape, amplitude_fwhm, area_to_power
from .sequences import (
    ExperimentResult,
    rabi_calibration,
    raman_calibration,
    raman_coupling_sum,
    run_pump,
    run_rabi,
    run_raman_rabi,
    run_raman_ramsey,
    run_ramsey_optical,
)

FIXTURE = "raman_rabi_synthetic.csv"
FIT_TARGETS = {("raman-rabi", "ratio")}

DEFAULT_SWEEPS = {
    "rabi": {"C": "0:10.5pi:106", "B": "0:6.5pi:66"},
    "ramsey": "50:1500:30",
    "pump": "0:200:201",
    "raman-rabi": "0:2pi:33",
    "raman-ramsey": "0:120:121",
}


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return repr(float(x))


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    return value


def write_results(result: ExperimentResult, out_dir, config_hash: str | None = None) -> list[Path]:
    """CSV table, JSON sidecar and one two-column plot file per curve."""
    out = Path(out_dir)
    names = list(result.columns)
    sweep_col = names[0]
    paths = [out / f"{result.kind}.csv", out / f"{result.kind}.json"]
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(paths[0], "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(names)
            for row in zip(*(result.columns[n] for n in names)):
                writer.writerow([_fmt(v) for v in row])
        sidecar = {
            "experiment": result.kind,
            "sweep": sweep_col,
            "observable": result.observable_name,
            "rows": len(result.sweep_values),
            "config_hash": config_hash,
            "derived": _jsonable(result.derived),
        }
        paths[1].write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
        for name in names[1:]:
            path = out / f"{result.kind}_{name}.dat"
            lines = [f"# {sweep_col} {name}"]
            lines += [f"{_fmt(x)} {_fmt(y)}" for x, y in zip(result.columns[sweep_col], result.columns[name])]
            path.write_text("\n".join(lines) + "\n")
            paths.append(path)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {out}: {exc.strerror}") from exc
    return paths


def read_table(path) -> dict:
    """Columns of a CSV written by ``write_results`` (or the bundled fixture)."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc
    if len(rows) < 2:
        raise ValidationError(f"{path}: no data rows")
    header = rows[0]
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry ({exc})") from exc
    return {name: data[:, i] for i, name in enumerate(header)}


def fixture_path() -> Path:
    return Path(str(resources.files("sivsim") / "data" / FIXTURE))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sivsim", description="Four-level SiV optical control simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in cfgmod.EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config with unit-suffixed keys")
        p.add_argument("--out", help="output directory")
        p.add_argument("--transition", choices=("B", "C"))
        p.add_argument("--sweep", help="start:stop:count (pi allowed) or comma list")
        p.add_argument("--steady-state", action=argparse.BooleanOptionalAction, default=None)
        p.add_argument("--tol", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        if name == "fit":
            p.add_argument("--target", default=None)
            p.add_argument("--param", default=None)
            p.add_argument("--data", help="CSV with power_uw and population columns")
    return parser


def _resolved(args) -> dict:
    cfg = cfgmod.load_resolved(args.config)
    overrides = {
        "experiment": args.command,
        "out_dir": args.out,
        "transition": args.transition,
        "sweep": args.sweep,
        "steady_state": args.steady_state,
        "tol": args.tol,
        "seed": args.seed,
        "n_jobs": args.jobs,
        "fit_target": getattr(args, "target", None),
        "fit_param": getattr(args, "param", None),
        "data_path": getattr(args, "data", None),
    }
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    if cfg["data_path"] is not None:
        cfg["data_path"] = str(Path(cfg["data_path"]).resolve())
    return cfg


def run_experiment(params, seq, run) -> ExperimentResult:
    kind = run.experiment
    if kind == "fit":
        return run_fit(params, seq, run)
    default = DEFAULT_SWEEPS[kind]
    if isinstance(default, dict):
        default = default[run.transition]
    values = np.array(run.sweep if run.sweep is not None else cfgmod.parse_sweep(default))
    ratio = DriveRatio(run.drive_ratio)
    if kind == "rabi":
        tau = amplitude_fwhm("double_exp", seq.one_photon_length)
        powers = area_to_power(values, seq.rep_rate, PulseShape.DOUBLE_EXP, tau, rabi_calibration(seq, run.transition))
        return run_rabi(run.transition, np.asarray(powers), params, seq, tol=run.tol, n_jobs=run.n_jobs)
    if kind == "ramsey":
        return run_ramsey_optical(run.transition, values * 1e-12, params, seq, tol=run.tol, n_jobs=run.n_jobs)
    if kind == "pump":
        if values[0] != 0:
            raise ValidationError("pump sweep must start at 0 ns")
        return run_pump(params, seq, duration=values[-1] * 1e-9, n_points=len(values))
    if kind == "raman-rabi":
        if ratio.r == 0:
            raise ValidationError("an area sweep needs a non-zero drive ratio")
        # oracle area -> average power, at the configured drive ratio
        k = raman_coupling_sum(params, seq)
        powers = values * seq.raman_rep_rate / (raman_calibration(params, seq) * ratio.r * k)
        return run_raman_rabi(powers, ratio, params, seq, tol=run.tol, n_jobs=run.n_jobs)
    return run_raman_ramsey(values * 1e-12, ratio, params, seq, tol=run.tol, n_jobs=run.n_jobs)


def run_fit(params, seq, run) -> ExperimentResult:
    if (run.fit_target, run.fit_param) not in FIT_TARGETS:
        raise ValidationError(f"unsupported fit {run.fit_target}/{run.fit_param}; available: raman-rabi/ratio")
    table = read_table(run.data_path or fixture_path())
    for col in ("power_uw", "population"):
        if col not in table:
            raise ValidationError(f"fit data needs a {col!r} column")
    powers = table["power_uw"] * 1e-6
    ratio = fit_drive_ratio(powers, table["population"], params, seq, initial=0.5, tol=run.tol,
                            n_starts=1 if run.seed is None else 3, seed=run.seed)
    model = run_raman_rabi(powers, DriveRatio(ratio), params, seq, tol=run.tol)
    residual = model.observable - table["population"]
    return ExperimentResult(
        kind="fit",
        sweep_name="power_uw",
        sweep_values=powers,
        observable_name="model_population",
        observable=model.observable,
        columns={"power_uw": table["power_uw"], "population": table["population"], "model_population": model.observable},
        derived={"target": run.fit_target, "ratio": ratio, "rms_residual": float(np.sqrt(np.mean(residual**2)))},
    )


def main(argv=None) -> int:
    """Run one subcommand; returns 0 on success, 1 on invalid input, 2 on numerical failure."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _resolved(args)
        params, seq, run = cfgmod.build(cfg)
        result = run_experiment(params, seq, run)
        cfgmod.echo_config(cfg, run.out_dir)
        paths = write_results(result, run.out_dir, cfgmod.config_hash(cfg))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, SivSimError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {paths[0]}")
    for key, value in sorted(result.derived.items()):
        if isinstance(value, (int, float, str, bool)):
            print(f"  {key} = {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
