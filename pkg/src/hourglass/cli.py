"""Command-line front end: run a named experiment, write a JSON report and CSV data.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 internal error.  Flags override config-file values, which override defaults.
The output directory can also be set with the HOURGLASS_OUTPUT_DIR environment
variable (below the flag, above the config file).
"""
from __future__ import annotations

import argparse
import configparser
import difflib
import json
import math
import os
import re
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConvergenceError, DomainError, HourglassError
from .manifold import ManifoldParams, TangentState

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INTERNAL = 0, 2, 3, 4
OUTPUT_ENV = "HOURGLASS_OUTPUT_DIR"
DEFAULT_TOL = 1e-8

# name -> (description, [(param, type, default, help)])
EXPERIMENTS = {
    "integrate": ("integrate one geodesic and monitor E, P, L", [
        ("x", float, 0.0, "initial x"),
        ("y", float, 0.3, "initial height"),
        ("sigma", float, 0.0, "initial longitude"),
        ("vx", float, 1.0, "initial x-velocity"),
        ("vy", float, 0.2, "initial y-velocity"),
        ("vsigma", float, 0.5, "initial longitude velocity"),
        ("t_end", float, 10.0, "final time"),
    ]),
    "tonelli": ("shortest closed curve in homotopy class m", [
        ("m", int, 1, "homotopy class"),
        ("n_nodes", int, 0, "node count (0: 16*|m|+1)"),
    ]),
    "audit": ("compare covers of the class-m minimiser with class n*m minimisers", [
        ("m", int, 1, "homotopy class"),
        ("n_max", int, 10, "largest cover multiple"),
        ("n_list", str, "", "explicit comma-separated multiples"),
    ]),
    "limit": ("long free-boundary minimisers and their limit in a window", [
        ("n_max", int, 8, "largest half-width of the slab"),
    ]),
    "alpha": ("alpha(c) analytically and by grid search", [
        ("c", str, "-2:2:0.5", "start:stop:step or comma list"),
        ("grid", int, 128, "grid points per axis"),
    ]),
    "calibrate": ("calibration residual along an equator orbit", [
        ("c", float, 2.0, "cohomology class"),
        ("vx", float, math.nan, "x-velocity (default c/2)"),
        ("t_end", float, 50.0, "horizon"),
    ]),
    "xyz": ("periodic destabilisation of the spin chain", [
        ("p", int, 1, "period"),
        ("n_max", int, 200, "largest number of periods"),
        ("n_list", str, "", "explicit comma-separated multiples"),
    ]),
}


class ConfigError(HourglassError):
    pass


@dataclass
class ExperimentSpec:
    name: str
    manifold: ManifoldParams
    params: dict
    tol: float = DEFAULT_TOL
    output_dir: Path = Path("results")
    workers: int = 1

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.name!r}")
        if not self.tol > 0.0:
            raise ConfigError("tol must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "manifold": self.manifold.to_dict(),
            "params": self.params,
            "tol": self.tol,
            "output_dir": str(self.output_dir),
            "workers": self.workers,
        }


@dataclass
class ReportEnvelope:
    spec: dict
    build: str
    wall_time: float
    payload: dict
    files: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"spec": self.spec, "build": self.build, "wall_time": self.wall_time,
                           "payload": self.payload, "files": self.files}, indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")


def build_id() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def list_experiments() -> str:
    lines = ["experiments:"]
    for name, (desc, params) in EXPERIMENTS.items():
        lines.append(f"  {name:<10} {desc}")
        for p, typ, default, hlp in params:
            lines.append(f"      --{p.replace('_', '-')} ({typ.__name__}, default {default}): {hlp}")
    return "\n".join(lines)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def _c_values(text: str) -> list[float]:
    text = text.strip()
    if ":" in text:
        a, b, step = (float(v) for v in text.split(":"))
        if step <= 0 or b < a:
            raise ConfigError("c range needs start <= stop and step > 0")
        count = int(math.floor((b - a) / step + 1e-9)) + 1
        return [a + k * step for k in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]


# ---------------------------------------------------------------------------------
# experiments


def _write(out: Path, name: str, text: str, files: list):
    path = out / name
    path.write_text(text)
    files.append(name)


def _run_integrate(spec, out, files):
    from .geodesic_flow import conserved_quantities, integrate_geodesic, reparametrization_check

    p = spec.params
    state = TangentState.at(p["x"], p["y"], p["sigma"], p["vx"], p["vy"], p["vsigma"])
    traj = integrate_geodesic(state, p["t_end"], spec.tol, spec.manifold.pole_switch)
    _write(out, "trajectory.csv", traj.to_csv(), files)
    inv = conserved_quantities(state)
    return {
        "samples": len(traj),
        "initial_invariants": inv.as_tuple(),
        "invariant_drift": traj.invariant_drift.as_tuple(),
        "lagrangian_deviation": reparametrization_check(traj),
        "final_state": traj.final.as_array().tolist(),
    }


def _run_tonelli(spec, out, files):
    from .variational import tonelli_minimize

    p = spec.params
    curve = tonelli_minimize(p["m"], n_nodes=p["n_nodes"] or None, tol=spec.tol, omega=spec.manifold.omega)
    csv_path, json_path = curve.write(out / f"tonelli_m{p['m']}")
    files += [csv_path.name, json_path.name]
    return {"length": curve.length, **{k: curve.meta.get(k) for k in
                                       ("grad_norm", "seeds_tried", "local_minima", "seed", "converged")}}


def _run_audit(spec, out, files):
    from .classa_audit import audit_tonelli, best_return_times, oscillation_measure

    p = spec.params
    omega = spec.manifold.omega
    if p["n_list"]:
        n_list = _int_list(p["n_list"])
    else:
        n_list = set(range(1, min(10, p["n_max"]) + 1))
        n_list |= {n for n, _ in best_return_times(p["m"], omega, 5) if n <= p["n_max"]}
    report = audit_tonelli(p["m"], sorted(n_list), spec.tol, omega, workers=spec.workers)
    _write(out, "audit_rows.csv", report.rows_csv(), files)
    osc = []
    for n, curve in report.curves.items():
        for delta in (0.1, 0.2, 0.3):
            rec = oscillation_measure(curve, delta)
            osc.append({"n": n, "delta": delta, "measure": rec.measure, "bound": rec.bound})
    return {**report.to_dict(), "oscillation": osc}


def _run_limit(spec, out, files):
    from .classa_audit import limit_geodesic

    curve = limit_geodesic(spec.params["n_max"], spec.tol)
    csv_path, json_path = curve.write(out / "limit_curve")
    files += [csv_path.name, json_path.name]
    keys = ("window_distances", "window_max_abs_y", "window_max_vx_error", "window_sigma_mean", "grad_norm")
    return {k: curve.meta.get(k) for k in keys}


def _run_alpha(spec, out, files):
    from .mather import GridSpec, alpha_concavity_check, alpha_grid_search, alpha_table_csv

    cs = _c_values(spec.params["c"])
    grid = GridSpec.cube(spec.params["grid"])
    results = [alpha_grid_search(c, grid) for c in cs]
    _write(out, "alpha.csv", alpha_table_csv(results), files)
    return {
        "sign_convention": "alpha(c) = inf of the measure action = -c^2/4; effective Hamiltonian = -alpha = c^2/4",
        "rows": [{"c": r.c, "analytic": r.analytic, "grid_value": r.grid_value, "grid_bound": float(r.grid_bound),
                  "grid_minimizer": r.grid_minimizer} for r in results],
        "concave": alpha_concavity_check(cs) if len(cs) >= 3 else None,
    }


def _run_calibrate(spec, out, files):
    from .geodesic_flow import integrate_geodesic
    from .mather import calibration_check, effective_hamiltonian

    p = spec.params
    vx = p["c"] / 2.0 if math.isnan(p["vx"]) else p["vx"]
    traj = integrate_geodesic(TangentState.at(0.0, 0.0, 0.0, vx, 0.0, 0.0), p["t_end"], min(spec.tol, 1e-10))
    _write(out, "calibration_trajectory.csv", traj.to_csv(), files)
    return {"c": p["c"], "vx": vx, "effective_hamiltonian": effective_hamiltonian(p["c"]),
            "residual": calibration_check(traj, p["c"])}


def _run_xyz(spec, out, files):
    from .xyz_chain import periodic_destabilization

    p = spec.params
    n_list = _int_list(p["n_list"]) if p["n_list"] else None
    report = periodic_destabilization(p["p"], n_list, spec.tol, spec.manifold.omega, n_max=p["n_max"])
    _write(out, "xyz_rows.csv", report.rows_csv(), files)
    return report.to_dict()


RUNNERS = {
    "integrate": _run_integrate,
    "tonelli": _run_tonelli,
    "audit": _run_audit,
    "limit": _run_limit,
    "alpha": _run_alpha,
    "calibrate": _run_calibrate,
    "xyz": _run_xyz,
}


def run(spec: ExperimentSpec) -> ReportEnvelope:
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list = []
    t0 = time.perf_counter()
    payload = RUNNERS[spec.name](spec, out, files)
    env = ReportEnvelope(spec.to_dict(), build_id(), time.perf_counter() - t0, payload, files)
    report_name = f"{spec.name}_report.json"
    (out / report_name).write_text(env.to_json())
    env.files.append(report_name)
    return env


# ---------------------------------------------------------------------------------
# argument handling


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hourglass", description="Experiments on the hourglass manifold.",
                                 epilog=list_experiments(), formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"hourglass {build_id()}")
    sub = ap.add_subparsers(dest="experiment")
    sub.add_parser("list", help="list experiments")
    for name, (desc, params) in EXPERIMENTS.items():
        sp = sub.add_parser(name, help=desc, description=desc)
        sp.add_argument("--config", help="INI file with [manifold], [run] and [%s] sections" % name)
        sp.add_argument("--omega", help="rotation number: float, fraction a/b, 'default' or 'golden'")
        sp.add_argument("--tol", type=float, help=f"solver tolerance (default {DEFAULT_TOL:g})")
        sp.add_argument("--output-dir", help=f"where reports go (also ${OUTPUT_ENV}; default ./results)")
        sp.add_argument("--workers", type=int, help="worker processes for independent solves (default 1)")
        for p, typ, _, hlp in params:
            sp.add_argument("--" + p.replace("_", "-"), dest=p, type=typ, help=hlp)
    return ap


def _validate_params(name: str, params: dict):
    """Parse list-valued parameters early so bad input fails before any output is written."""
    if params.get("n_list"):
        if any(n < 1 for n in _int_list(params["n_list"])):
            raise ConfigError("n_list entries must be positive")
    if name == "alpha":
        if not _c_values(params["c"]):
            raise ConfigError("no c values given")
        if params["grid"] < 32:
            raise ConfigError("grid must be at least 32")
    for key in ("m", "p", "n_max"):
        if key in params and params[key] == 0:
            raise ConfigError(f"{key} must be nonzero")


def resolve_spec(args: argparse.Namespace, environ=None) -> ExperimentSpec:
    """Merge defaults, config file, environment and flags into an ExperimentSpec."""
    environ = os.environ if environ is None else environ
    name = args.experiment
    cfg = configparser.ConfigParser()
    if args.config:
        try:
            with open(args.config) as fh:
                cfg.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    try:
        manifold_data = dict(cfg["manifold"]) if cfg.has_section("manifold") else {}
        if args.omega is not None:
            manifold_data["omega"] = args.omega
        manifold = ManifoldParams.from_mapping(manifold_data)
        run_sec = cfg["run"] if cfg.has_section("run") else {}
        tol = args.tol if args.tol is not None else float(run_sec.get("tol", DEFAULT_TOL))
        workers = args.workers if args.workers is not None else int(run_sec.get("workers", os.cpu_count() or 1))
        out = args.output_dir or environ.get(OUTPUT_ENV) or run_sec.get("output_dir") or "results"
        section = cfg[name] if cfg.has_section(name) else {}
        params = {}
        for p, typ, default, _ in EXPERIMENTS[name][1]:
            value = getattr(args, p, None)
            if value is None:
                value = typ(section[p]) if p in section else default
            params[p] = value
        _validate_params(name, params)
        known = {p for p, *_ in EXPERIMENTS[name][1]}
        unknown = set(section) - known - set(cfg.defaults())
        if unknown:
            raise ConfigError(f"unknown keys in [{name}]: {', '.join(sorted(unknown))}")
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentSpec(name, manifold, params, tol, Path(out), workers)


_NEGATIVE = re.compile(r"^-[\d.]")


def _join_negative_values(argv: list) -> list:
    """Glue '--flag -2:2:0.5' into '--flag=-2:2:0.5' so argparse does not read the value as an option."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] == "list":
        print(list_experiments())
        return EXIT_OK
    first = argv[0]
    if not first.startswith("-") and first not in EXPERIMENTS:
        hint = difflib.get_close_matches(first, list(EXPERIMENTS), n=1)
        msg = f"hourglass: unknown experiment {first!r}"
        if hint:
            msg += f"; did you mean {hint[0]!r}?"
        print(msg, file=sys.stderr)
        return EXIT_CONFIG
    argv = _join_negative_values(argv)
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.experiment in (None, "list"):
        print(list_experiments())
        return EXIT_OK
    try:
        spec = resolve_spec(args)
    except (ConfigError, DomainError) as exc:
        print(f"hourglass: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        env = run(spec)
    except ConvergenceError as exc:
        print(f"hourglass: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, DomainError) as exc:
        print(f"hourglass: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as an internal error code
        print(f"hourglass: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    print(f"wrote {', '.join(env.files)} to {spec.output_dir}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
