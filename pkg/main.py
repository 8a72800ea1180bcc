# main.py
"""
Command-line interface for the phase-field minimizer toolkit.

Subcommands
  utheta           well bottoms u_theta by safeguarded Newton
  potential-table  W, W', W'', W~, W~' on a grid of u values
  solve            one gradient-flow run to equilibrium, with field dumps
  sweep            (theta, kappa, seed) grids or the table presets, records CSV + manifest
  phi-scan         fiber map Phi_u(s) of the eigenfunction or of a saved field
  threshold        bisection for the bifurcation threshold in kappa

Settings come from built-in defaults, then a JSON file given with --config (keys are
flag names), then explicit flags. The output directory defaults to $PHASEFIELD_OUTPUT_DIR
(loaded from .env when present) or data/outputs.

Exit codes: 0 success, 2 invalid input (including unstable dt), 3 numerical failure or
anomaly.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from agents.diagnostics_agent import FAILURE_FLAGS, DiagnosticsAgent, kappa_c, s_phi_bound
from agents.record_store import RecordStore, json_safe, write_manifest, write_records_csv
from agents.solver_agent import DEFAULT_L, SolverAgent, SolverConfig
from agents.sweep_agent import (
    FAILED,
    NUMERICS_PRESETS,
    PRESETS,
    SweepAgent,
    compare_with_reference,
    monotonicity_verdict,
)
from tools.errors import FieldFormatError, PhaseFieldError, StabilityError, ValidationError
from tools.field_io import dump_field, read_csv, result_stem
from tools.flory_huggins import (
    DEFAULT_C,
    GUARD_WIDTH,
    PotentialParams,
    build_modified_potential,
    find_u_theta_report,
    modified_values,
    potential_values,
    w_value,
)
from tools.grid import GridGeometry, continuum_lambda1, discrete_lambda1, eigenfunction

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

DEFAULT_OUTPUT_DIR = "data/outputs"

# flag dest -> SolverConfig.from_overrides key
SOLVER_FLAGS = {
    "n": "N",
    "L": "L",
    "dt": "dt",
    "t_min": "t_min",
    "t_max": "t_max",
    "residual_tol": "residual_tol",
    "checkpoint_period": "checkpoint_period",
    "potential_mode": "potential_mode",
    "guard": "guard",
    "C": "C",
    "init_amplitude": "init_amplitude",
    "trivial_tol": "trivial_tol",
}


# -------------------------
# Parser
# -------------------------
def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default=None, help="Directory for written files (default: $PHASEFIELD_OUTPUT_DIR or data/outputs).")
    common.add_argument("--format", choices=("csv", "json"), default=None, help="Output format for tables and files.")
    common.add_argument("--config", default=None, help="JSON file whose keys mirror flag names; flags override it.")
    common.add_argument("--verbose", action="store_true", help="Debug logging.")
    common.add_argument("--quiet", action="store_true", help="Warnings and errors only.")
    return common


def _add_numerics(p: argparse.ArgumentParser, with_seed: bool = True) -> None:
    p.add_argument("--n", type=int, default=None, help="Cells per side (default 128).")
    p.add_argument("--L", type=float, default=None, help="Side length (default sqrt(2)*pi).")
    p.add_argument("--dt", type=float, default=None, help="Time step (default 1e-4).")
    if with_seed:
        p.add_argument("--seed", type=int, default=None, help="Seed of the initial data (default 1).")
    p.add_argument("--t-min", type=float, default=None, help="Earliest stopping time (default 50).")
    p.add_argument("--t-max", type=float, default=None, help="Latest stopping time (default 5000).")
    p.add_argument("--residual-tol", type=float, default=None, help="Stopping tolerance on ||r||_inf (default 1e-7).")
    p.add_argument("--checkpoint-period", type=float, default=None, help="Energy/dump period in time units (default 50).")
    p.add_argument("--potential-mode", choices=("exact", "modified"), default=None)
    p.add_argument("--guard", choices=("strict", "clamped"), default=None)
    p.add_argument("--C", type=float, default=None, help=f"Modified-potential constant (default {DEFAULT_C}).")
    p.add_argument("--init-amplitude", type=float, default=None, help="Initial data amplitude a0 (default 0.1).")
    p.add_argument("--trivial-tol", type=float, default=None, help="max|u| below which a state is trivial (default 1e-3).")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="phasefield",
        description="Minimizers of the Flory-Huggins phase-field energy with a zero boundary condition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("utheta", parents=[common], help="Positive well bottom of W for each theta.")
    p.add_argument("--theta", default=None, help="Comma-separated theta values in (0, 1).")
    p.add_argument("--out", default=None, help="Also write the table to this file.")

    p = sub.add_parser("potential-table", parents=[common], help="Tabulate W and the modified potential.")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--C", type=float, default=None, help=f"Modified-potential constant (default {DEFAULT_C}).")
    p.add_argument("--u-min", type=float, default=None, help="Default -1.5.")
    p.add_argument("--u-max", type=float, default=None, help="Default 1.5.")
    p.add_argument("--points", type=int, default=None, help="Default 301.")
    p.add_argument("--out", default=None, help="Table path (default under --output-dir).")

    p = sub.add_parser("solve", parents=[common], help="Run the gradient flow to equilibrium.")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    _add_numerics(p)
    p.add_argument("--init-sign", type=int, choices=(1, -1), default=None)
    p.add_argument("--image", action="store_true", default=None, help="Also write 16-bit grayscale images.")
    p.add_argument("--checkpoints", action="store_true", default=None, help="Dump the field at every checkpoint.")
    p.add_argument("--progress", action="store_true", default=None)

    p = sub.add_parser("sweep", parents=[common], help="Run a grid of cases or a table preset.")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="table1: theta scan at kappa=0.02; table2: kappa scan at theta=0.7.")
    p.add_argument("--theta", default=None, help="Comma-separated theta values.")
    p.add_argument("--kappa", default=None, help="Comma-separated kappa values.")
    p.add_argument("--seeds", default=None, help="Comma-separated seeds (default 1).")
    p.add_argument("--numerics", choices=sorted(NUMERICS_PRESETS), default=None,
                   help="Grid/time-step preset; explicit --n/--dt override it.")
    _add_numerics(p, with_seed=False)
    p.add_argument("--jobs", type=int, default=None, help="Worker processes (default $PHASEFIELD_JOBS or CPU count).")
    p.add_argument("--near-threshold-factor", type=float, default=None, help="t_max multiplier near kappa_c (default 4).")
    p.add_argument("--progress", action="store_true", default=None)

    p = sub.add_parser("phi-scan", parents=[common], help="Fiber map Phi_u(s) = E~(s u).")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    source = p.add_mutually_exclusive_group()
    source.add_argument("--eigenfunction", action="store_true", default=None, help="Use the principal eigenfunction.")
    source.add_argument("--field", default=None, help="Field CSV written by solve.")
    p.add_argument("--n", type=int, default=None, help="Grid for --eigenfunction (default 128).")
    p.add_argument("--L", type=float, default=None, help="Side length for --eigenfunction (default sqrt(2)*pi).")
    p.add_argument("--smax", type=float, default=None, help="Largest s (default 3).")
    p.add_argument("--points", type=int, default=None, help="Samples in [0, smax] (default 301).")
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--out", default=None, help="Scan path (default under --output-dir).")

    p = sub.add_parser("threshold", parents=[common], help="Bisection for the bifurcation threshold.")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--kappa-lo", type=float, default=None)
    p.add_argument("--kappa-hi", type=float, default=None)
    p.add_argument("--resolution", type=float, default=None, help="Final bracket width (default 5e-3).")
    p.add_argument("--seeds", default=None, help="Comma-separated seeds (default 1).")
    p.add_argument("--numerics", choices=sorted(NUMERICS_PRESETS), default=None)
    _add_numerics(p, with_seed=False)
    p.add_argument("--near-threshold-factor", type=float, default=None)
    return parser


# -------------------------
# Settings
# -------------------------
def _load_config(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise ValidationError(f"config file {path} not found") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def resolve_settings(args: argparse.Namespace) -> Dict[str, Any]:
    """Config-file values overridden by explicit flags (flags default to None)."""
    explicit = {k: v for k, v in vars(args).items() if v is not None}
    file_values: Dict[str, Any] = {}
    if args.config:
        file_values = _load_config(args.config)
        unknown = set(file_values) - set(vars(args))
        if unknown:
            raise ValidationError(f"unknown keys in {args.config}: {sorted(unknown)}")
    return {**file_values, **explicit}


def _float_list(value: Any, name: str) -> List[float]:
    if value is None:
        raise ValidationError(f"--{name} is required")
    items = value if isinstance(value, (list, tuple)) else [v for v in str(value).split(",") if v.strip()]
    try:
        out = [float(v) for v in items]
    except (TypeError, ValueError) as e:
        raise ValidationError(f"--{name} must be a comma-separated list of numbers, got {value!r}") from e
    if not out:
        raise ValidationError(f"--{name} must not be empty")
    return out


def _int_list(value: Any, name: str, default: Sequence[int] = (1,)) -> List[int]:
    if value is None:
        return list(default)
    floats = _float_list(value, name)
    if any(v != int(v) for v in floats):
        raise ValidationError(f"--{name} must hold integers, got {value!r}")
    return [int(v) for v in floats]


def _require(settings: Dict[str, Any], name: str) -> float:
    value = settings.get(name)
    if value is None:
        raise ValidationError(f"--{name.replace('_', '-')} is required")
    try:
        return float(value)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"--{name.replace('_', '-')} must be a number, got {value!r}") from e


def _numerics(settings: Dict[str, Any]) -> Dict[str, Any]:
    """SolverConfig overrides from a numerics preset plus explicit solver flags."""
    out: Dict[str, Any] = dict(NUMERICS_PRESETS.get(settings.get("numerics") or "", {}))
    for flag, key in SOLVER_FLAGS.items():
        if settings.get(flag) is not None:
            out[key] = settings[flag]
    return out


def _output_dir(settings: Dict[str, Any]) -> Path:
    return Path(settings.get("output_dir") or os.getenv("PHASEFIELD_OUTPUT_DIR") or DEFAULT_OUTPUT_DIR)


def _default_jobs() -> int:
    env = os.getenv("PHASEFIELD_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"PHASEFIELD_JOBS must be an integer, got {env!r}")
    return os.cpu_count() or 1


# -------------------------
# Output helpers
# -------------------------
def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return "" if not math.isfinite(value) else f"{value:.12g}"
    if isinstance(value, (list, tuple)):
        return ";".join(_cell(v) for v in value)
    return str(value)


def emit_table(columns: Sequence[str], rows: Iterable[Dict[str, Any]], fmt: str = "csv", stream=None) -> None:
    """Tab-separated with a header line, or a JSON list of objects for --format json."""
    stream = stream or sys.stdout
    rows = list(rows)
    if fmt == "json":
        stream.write(json.dumps(json_safe([{c: r.get(c) for c in columns} for r in rows]), indent=2) + "\n")
        return
    stream.write("\t".join(columns) + "\n")
    for r in rows:
        stream.write("\t".join(_cell(r.get(c)) for c in columns) + "\n")


def _write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(json_safe(payload), f, indent=2, sort_keys=True)
    return path


# -------------------------
# Commands
# -------------------------
def cmd_utheta(settings: Dict[str, Any]) -> int:
    thetas = _float_list(settings.get("theta"), "theta")
    params = [PotentialParams(t) for t in thetas]
    rows = []
    for p in params:
        rep = find_u_theta_report(p)
        rows.append({"theta": p.theta, "u_theta": rep.root, "iterations": rep.iterations, "residual": rep.residual})
    columns = ["theta", "u_theta", "iterations", "residual"]
    fmt = settings.get("format") or "csv"
    emit_table(columns, rows, fmt)
    if settings.get("out"):
        out = Path(settings["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            emit_table(columns, rows, fmt, stream=f)
    return EXIT_OK


def potential_table(theta: float, C: float = DEFAULT_C, u_min: float = -1.5, u_max: float = 1.5, points: int = 301):
    """
    DataFrame with columns u, W, W', W'', W~, W~' plus the header metadata.

    W is NaN for |u| > 1 and its derivatives for |u| >= 1 - GUARD_WIDTH; W~ columns are
    NaN when the modified potential cannot be built for (theta, C).
    """
    p = PotentialParams(theta)
    if not points >= 2:
        raise ValidationError(f"points must be >= 2, got {points!r}")
    if not u_min < u_max:
        raise ValidationError(f"need u_min < u_max, got [{u_min}, {u_max}]")
    u = np.linspace(u_min, u_max, int(points))
    a = np.abs(u)
    w = np.full_like(u, np.nan)
    dw = np.full_like(u, np.nan)
    d2w = np.full_like(u, np.nan)
    closed = a <= 1.0
    w[closed] = w_value(u[closed], p)
    open_ = a < 1.0 - GUARD_WIDTH
    vals = potential_values(u[open_], p)
    dw[open_], d2w[open_] = vals.dw, vals.d2w

    meta: Dict[str, Any] = {"theta": theta, "C": C}
    wt = np.full_like(u, np.nan)
    dwt = np.full_like(u, np.nan)
    try:
        m = build_modified_potential(p, C)
    except ValidationError:
        raise
    except ValueError as exc:
        logger.warning("Modified potential unavailable for theta=%s, C=%s: %s", theta, C, exc)
        meta["modified"] = f"unavailable: {exc}"
    else:
        wt, dwt = modified_values(u, m)
        meta.update(u_theta=m.u_theta, u_hat=m.u_hat, k=m.k, derivative_jump=m.derivative_jump)
    frame = pd.DataFrame({"u": u, "W": w, "dW": dw, "d2W": d2w, "W_mod": wt, "dW_mod": dwt})
    return frame, meta


def cmd_potential_table(settings: Dict[str, Any]) -> int:
    theta = _require(settings, "theta")
    C = float(settings.get("C") or DEFAULT_C)
    frame, meta = potential_table(
        theta, C,
        float(settings.get("u_min", -1.5)),
        float(settings.get("u_max", 1.5)),
        int(settings.get("points", 301)),
    )
    fmt = settings.get("format") or "csv"
    default_name = f"potential_table_theta={theta:.4f}_C={C:g}.{fmt}"
    out = Path(settings.get("out") or _output_dir(settings) / default_name)
    out.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        _write_json(out, {"meta": meta, "rows": frame.to_dict(orient="records")})
    else:
        with open(out, "w", encoding="utf-8", newline="") as f:
            for key in sorted(meta):
                f.write(f"# {key}={_cell(meta[key])}\n")
            frame.to_csv(f, index=False, float_format="%.17g", na_rep="", lineterminator="\n")
    emit_table(["path", "theta", "C", "u_hat", "k"], [{"path": str(out), **meta}])
    return EXIT_OK


def cmd_solve(settings: Dict[str, Any]) -> int:
    theta = _require(settings, "theta")
    kappa = _require(settings, "kappa")
    overrides = _numerics(settings)
    overrides["seed"] = settings.get("seed")
    overrides["init_sign"] = settings.get("init_sign")
    cfg = SolverConfig.from_overrides(theta, kappa, **overrides)

    out_dir = _output_dir(settings)
    image = bool(settings.get("image"))
    solver = SolverAgent(
        checkpoint_dir=str(out_dir / "checkpoints") if settings.get("checkpoints") else None,
        image=image,
        progress=bool(settings.get("progress")),
    )
    result = solver.run_to_equilibrium(cfg)

    g = cfg.grid
    stem = result_stem(g.L, g.N, theta, kappa, result.t_checkpoint, run=cfg.seed)
    meta = {"theta": theta, "kappa": kappa, "t_final": result.t_final, "seed": cfg.seed}
    files = dump_field(result.final_field, out_dir, stem, meta, image=image)
    summary = result.to_dict()
    wall = summary.pop("wall_time_s")
    files["summary"] = str(out_dir / f"{stem}_summary.json")
    _write_json(Path(files["summary"]), {"config": cfg.to_dict(), "result": summary, "files": files,
                                         "timing": {"wall_time_s": wall}})

    row = {
        "theta": theta, "kappa": kappa, "max_u": result.max_u, "min_u": result.min_u,
        "energy": result.energy, "classification": result.classification, "converged": result.converged,
        "t_final": result.t_final, "flags": result.flags,
    }
    emit_table(list(row), [row], settings.get("format") or "csv")
    if not result.converged:
        logger.warning("Run stopped at t_max=%g with residual %.3e", cfg.t_max, result.residual_inf)
        print(f"warning: t_max={cfg.t_max:g} reached without convergence "
              f"(residual {result.residual_inf:.3e} >= {cfg.residual_tol:g})", file=sys.stderr)
    return EXIT_NUMERICAL if FAILURE_FLAGS.intersection(result.flags) else EXIT_OK


def cmd_sweep(settings: Dict[str, Any]) -> int:
    preset = PRESETS[settings["preset"]] if settings.get("preset") else None
    if preset is not None:
        thetas = _float_list(settings["theta"], "theta") if settings.get("theta") is not None else list(preset.thetas)
        kappas = _float_list(settings["kappa"], "kappa") if settings.get("kappa") is not None else list(preset.kappas)
    else:
        thetas = _float_list(settings.get("theta"), "theta")
        kappas = _float_list(settings.get("kappa"), "kappa")
    seeds = _int_list(settings.get("seeds"), "seeds")
    numerics = _numerics(settings)
    jobs = int(settings["jobs"]) if settings.get("jobs") is not None else _default_jobs()

    out_dir = _output_dir(settings)
    agent = SweepAgent(
        numerics=numerics,
        jobs=jobs,
        near_threshold_factor=float(settings.get("near_threshold_factor") or 4.0),
        progress=bool(settings.get("progress")),
    )
    records = agent.sweep_grid(thetas, kappas, seeds)
    lam = continuum_lambda1(agent.config_for(thetas[0], kappas[0], seeds[0]).grid)
    RecordStore(str(out_dir / "records.json"), lambda1=lam).store_many(records)

    verdict = monotonicity_verdict(records)
    comparison = compare_with_reference(records, preset) if preset else []
    csv_path = write_records_csv(records, str(out_dir / "sweep_records.csv"))
    manifest_path = write_manifest(
        str(out_dir / "sweep_manifest.json"),
        numerics={**numerics, "seeds": seeds, "thetas": thetas, "kappas": kappas},
        records=records,
        extra={"preset": preset.name if preset else None, "monotonicity": verdict, "reference": comparison},
    )
    logger.info("Wrote %s and %s", csv_path, manifest_path)

    columns = ["theta", "kappa", "seed", "u_theta", "max_u", "energy", "classification", "flags"]
    if settings.get("format") == "json":
        rows = [{c: r.to_dict()[c] for c in columns} for r in records]
        payload = {"records": rows, "monotonicity": verdict, "reference": comparison}
        sys.stdout.write(json.dumps(json_safe(payload), indent=2) + "\n")
    else:
        emit_table(columns, [r.to_dict() for r in records])
        print(f"monotonicity\t{'strictly-decreasing' if verdict['monotone'] else 'violated'}")
        for row in comparison:
            print(f"reference\ttheta={row['theta']}\tkappa={row['kappa']}\tdeviation={_cell(row['deviation'])}\t"
                  f"{'pass' if row['passed'] else 'fail'}")

    failed = [r for r in records if r.classification == FAILED]
    anomalous = [r for r in records if r.anomalies]
    if failed or anomalous:
        logger.error("%d failed and %d anomalous record(s)", len(failed), len(anomalous))
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_phi_scan(settings: Dict[str, Any]) -> int:
    smax = float(settings.get("smax", 3.0))
    points = int(settings.get("points", 301))
    if not (smax > 0 and points >= 2):
        raise ValidationError(f"need smax > 0 and points >= 2, got smax={smax}, points={points}")

    meta: Dict[str, Any] = {}
    if settings.get("field"):
        u, meta = read_csv(settings["field"])
        source = Path(settings["field"]).stem
    elif settings.get("eigenfunction"):
        g = GridGeometry(float(settings.get("L") or DEFAULT_L), int(settings.get("n") or 128))
        u = eigenfunction(g)
        source = "eigenfunction"
    else:
        raise ValidationError("phi-scan needs --eigenfunction or --field PATH")

    theta = float(settings["theta"]) if settings.get("theta") is not None else meta.get("theta")
    kappa = float(settings["kappa"]) if settings.get("kappa") is not None else meta.get("kappa")
    if theta is None or kappa is None:
        raise ValidationError("--theta and --kappa are required (or a field sidecar carrying them)")
    agent = DiagnosticsAgent(theta, kappa, C=float(settings.get("C") or DEFAULT_C))
    scan = agent.phi_scan(u, np.linspace(0.0, smax, points))

    fmt = settings.get("format") or "csv"
    out = Path(settings.get("out") or _output_dir(settings) / f"phi_scan_{source}_theta={theta:.4f}_kappa={kappa:.4f}.{fmt}")
    if fmt == "json":
        _write_json(out, scan.to_dict())
    else:
        scan.to_csv(out)

    bound = None
    g = u.geometry
    if source == "eigenfunction" and kappa < kappa_c(theta, continuum_lambda1(g)):
        bound = s_phi_bound(theta, kappa, g)
    row = {
        "path": str(out),
        "sign_change_lo": scan.sign_change[0] if scan.sign_change else None,
        "sign_change_hi": scan.sign_change[1] if scan.sign_change else None,
        "s_phi_bound": bound,
        "kappa_c": kappa_c(theta, continuum_lambda1(g)),
        "kappa_c_discrete": kappa_c(theta, discrete_lambda1(g)),
    }
    emit_table(list(row), [row], fmt)
    return EXIT_OK


def cmd_threshold(settings: Dict[str, Any]) -> int:
    theta = _require(settings, "theta")
    lo = _require(settings, "kappa_lo")
    hi = _require(settings, "kappa_hi")
    PotentialParams(theta)
    agent = SweepAgent(
        numerics=_numerics(settings),
        near_threshold_factor=float(settings.get("near_threshold_factor") or 4.0),
    )
    est = agent.threshold_probe(
        theta, lo, hi,
        seeds=_int_list(settings.get("seeds"), "seeds"),
        resolution=float(settings.get("resolution") or 5e-3),
    )
    _write_json(_output_dir(settings) / f"threshold_theta={theta:.4f}.json", est.to_dict())
    d = est.to_dict()
    columns = ["theta", "kappa_lo", "kappa_hi", "estimate", "kappa_c", "kappa_c_discrete",
               "contains_kappa_c", "contains_kappa_c_discrete"]
    emit_table(columns, [d], settings.get("format") or "csv")
    return EXIT_OK


COMMANDS = {
    "utheta": cmd_utheta,
    "potential-table": cmd_potential_table,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "phi-scan": cmd_phi_scan,
    "threshold": cmd_threshold,
}


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    _configure_logging(args)

    try:
        settings = resolve_settings(args)
        return COMMANDS[args.command](settings)
    except (ValidationError, StabilityError, FieldFormatError) as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PhaseFieldError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
