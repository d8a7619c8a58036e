"""Command-line front end: ``gasbath {dsf,coeffs,evolve,validate,sweep}``.

Exit status: 0 success, 1 validation failure, 2 configuration or usage error,
3 physical-domain error, 4 monitor violation, 5 numerical non-convergence.
Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, brownian, kinetics
from .config import RunConfig, load_config, parse_config
from .errors import (CondensationError, ConfigError, ConvergenceError, DomainError,
                     GasbathError, MonitorViolation, StepSizeError)
from .validate import SCOPES, run_checks


LOG_ENV = "GASBATH_LOG_LEVEL"
DSF_COLUMNS = ("q", "E", "S", "model", "statistics", "z")
MOMENT_COLUMNS = ("time",) + tuple(
    f"{name}_{axis}" for name in ("x", "p", "xx", "xp", "pp") for axis in (1, 2, 3)
)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_DOMAIN, EXIT_MONITOR, EXIT_CONVERGENCE = range(6)


class _Output:
    """Writes named artifacts to ``--out`` or, without it, to stdout."""

    def __init__(self, out_dir, stdout):
        self.dir = Path(out_dir) if out_dir else None
        self.stdout = stdout
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name, text):
        if self.dir is None:
            self.stdout.write(text)
            return None
        path = self.dir / name
        path.write_text(text)
        return path

    def path(self, name):
        return (self.dir or Path.cwd()) / name


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv_text(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_text(data):
    return json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"real": obj.real.tolist(), "imag": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# commands


def cmd_dsf(config: RunConfig):
    """Rows ``(q, E, S, model, statistics, z)`` over the configured grid."""
    params = config.gas_parameters()
    model = config.dsf_model(params)
    d = config["dsf"]
    q_grid = np.linspace(d["q_min"], d["q_max"], d["n_q"])
    E_grid = np.linspace(d["E_min"], d["E_max"], d["n_E"])
    name = d["model"].strip().lower()
    rows = []
    for q in q_grid:
        for E in E_grid:
            try:
                value = float(model.evaluate(float(q), float(E)))
            except DomainError as exc:
                raise DomainError(f"dsf model {name!r} at q={q!r}, E={E!r}: {exc}") from exc
            rows.append((float(q), float(E), value, name, params.statistics.value, params.z))
    return _csv_text(DSF_COLUMNS, rows)


def cmd_coeffs(config: RunConfig) -> dict:
    params = config.gas_parameters()
    coeffs = brownian.brownian_coefficients(config.tmatrix(), params)
    report = coeffs.to_dict()
    report.update(schema="gasbath.coeffs/1", alpha=params.alpha, n=params.n,
                  seed=config.get("run", "seed"))
    return report


def _pauli_run(config: RunConfig):
    params = config.gas_parameters()
    g, e = config["grid"], config["evolve"]
    tmatrix = config.tmatrix()
    grid = kinetics.RadialMomentumGrid.for_params(params, g["nodes"], widths=g["widths"],
                                                  kind=g["kind"])
    kernel = kinetics.build_pauli_kernel(grid, tmatrix, config.dsf_model(params), params,
                                         n_angular=g["n_angular"], q_max=g["q_max"])
    P0 = kinetics.canonical_state(grid, params, beta=e["initial_beta"])
    dt = e["dt"] if e["dt"] is not None else kinetics.suggest_dt(float(kernel.loss.max()))
    traj = kinetics.evolve_pauli(P0, kernel, dt, e["steps"], record_every=e["record_every"])
    rows = []
    equipartition = 3.0 * params.M / params.beta
    for t, P in zip(traj.times, traj.states):
        obs = kinetics.pauli_observables(P, grid, params.M)
        rows.append([float(t)] + [obs[c] for c in kinetics.TRAJECTORY_COLUMNS[1:]])
        # a canonical start must stay at equipartition
        deviation = abs(obs["mean_p2"] / equipartition - 1.0)
        if e["initial_beta"] is None and deviation > e["tolerance"]:
            raise MonitorViolation(
                f"<p^2> left equipartition by {deviation:.3g} (tolerance {e['tolerance']:.3g})",
                {"time": float(t), "checks": {"mean_p2_deviation": deviation},
                 "failed": ["stationarity"], "P": P},
            )
    return _csv_text(kinetics.TRAJECTORY_COLUMNS, rows)


def _lindblad_run(config: RunConfig):
    params = config.gas_parameters()
    g, e = config["grid"], config["evolve"]
    width = math.sqrt(params.M / params.beta)
    grid = kinetics.UniformGrid1D.from_extent(g["widths"] * width, g["nodes"])
    gen = kinetics.build_1d_lindblad(grid, config.tmatrix(), config.dsf_model(params), params,
                                     q_max=g["q_max"])
    rho0 = kinetics.canonical_density_matrix(grid, params, beta=e["initial_beta"])
    dt = e["dt"] if e["dt"] is not None else 1.0 / gen.spectral_bound()
    traj = kinetics.evolve_density_matrix(rho0, gen, dt, e["steps"],
                                          monitor_every=e["monitor_every"],
                                          record_every=e["record_every"], M=params.M)
    rows = [[float(t)] + [obs[c] for c in kinetics.TRAJECTORY_COLUMNS[1:]]
            for t, obs in zip(traj.times, traj.observables)]
    return _csv_text(kinetics.TRAJECTORY_COLUMNS, rows)


def _moments_run(config: RunConfig):
    params = config.gas_parameters()
    e = config["evolve"]
    coeffs = brownian.brownian_coefficients(config.tmatrix(), params)
    start_beta = e["initial_beta"] if e["initial_beta"] is not None else params.beta
    # minimum-uncertainty position spread at the starting temperature
    width_x = params.hbar / (2.0 * math.sqrt(params.M / start_beta))
    start = brownian.GaussianMomentState.thermal(params.M, start_beta, params.hbar,
                                                 width_x=width_x)
    if e["dt"] is not None:
        dt = e["dt"]
    elif coeffs.gamma_eff > 0:
        dt = 10.0 / coeffs.gamma_eff / e["steps"]
    else:
        dt = 1.0
    steps = range(0, e["steps"] + 1, e["record_every"])
    times = [k * dt for k in steps]
    if times[-1] != e["steps"] * dt:
        times.append(e["steps"] * dt)
    states = brownian.qbm_moment_evolution(start, coeffs, times)
    rows = []
    for t, s in zip(times, states):
        rows.append([t] + [float(v) for name in ("x", "p", "xx", "xp", "pp")
                           for v in getattr(s, name)])
    return _csv_text(MOMENT_COLUMNS, rows)


EVOLVE_MODES = {"pauli": _pauli_run, "lindblad1d": _lindblad_run, "qbm-moments": _moments_run}


def cmd_evolve(config: RunConfig, mode: str | None = None) -> str:
    mode = (mode or config.get("evolve", "mode")).strip().lower()
    if mode not in EVOLVE_MODES:
        raise ConfigError(f"unknown evolve mode {mode!r} (known: {', '.join(EVOLVE_MODES)})")
    return EVOLVE_MODES[mode](config)


def cmd_validate(scopes=None) -> tuple[dict, bool]:
    results = run_checks(scopes)
    passed = all(r.verdict == "pass" for r in results)
    report = {
        "schema": "gasbath.validate/1",
        "version": __version__,
        "scopes": list(scopes) if scopes else list(SCOPES),
        "passed": passed,
        "checks": [r.to_dict() for r in results],
    }
    return report, passed


def _sweep_one(args):
    text, source, dotted, value, command, out_dir, mode = args
    config = parse_config(text, source).with_override(dotted, value)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if command == "dsf":
            (out / "dsf.csv").write_text(cmd_dsf(config))
        elif command == "coeffs":
            (out / "coeffs.json").write_text(_json_text(cmd_coeffs(config)))
        elif command == "evolve":
            (out / "trajectory.csv").write_text(cmd_evolve(config, mode))
        else:
            raise ConfigError(f"sweep command must be dsf, coeffs or evolve, not {command!r}")
    except GasbathError as exc:
        error = {"error": type(exc).__name__, "message": str(exc)}
        (out / "error.json").write_text(_json_text(error))
        return {"value": value, "status": "error", **error, "dir": out.name}
    return {"value": value, "status": "ok", "dir": out.name}


def cmd_sweep(config: RunConfig, config_text: str, out_dir, mode=None) -> dict:
    s = config["sweep"]
    if not s["parameter"] or not s["values"]:
        raise ConfigError(f"{config.source}: sweep needs [sweep] parameter and values")
    if out_dir is None:
        raise ConfigError("sweep writes one directory per run; give --out")
    config.with_override(s["parameter"], s["values"][0])  # validates the parameter name
    jobs = [(config_text, config.source, s["parameter"], value, s["command"],
             str(Path(out_dir) / f"run_{i:03d}"), mode)
            for i, value in enumerate(s["values"])]
    if s["workers"] > 1:
        with ProcessPoolExecutor(max_workers=s["workers"]) as pool:
            runs = list(pool.map(_sweep_one, jobs))
    else:
        runs = [_sweep_one(job) for job in jobs]
    return {"schema": "gasbath.sweep/1", "parameter": s["parameter"], "command": s["command"],
            "runs": runs}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gasbath",
        description="Test particle in an ideal quantum gas: structure factors, "
                    "collision dynamics and the Brownian limit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p, required=True):
        p.add_argument("--config", required=required, help="run configuration file")
        p.add_argument("--out", help="output directory (default: write to stdout)")
        return p

    with_config(sub.add_parser("dsf", help="tabulate S(q, E) as CSV"))
    with_config(sub.add_parser("coeffs", help="Brownian-limit coefficients as JSON"))
    evolve = with_config(sub.add_parser("evolve", help="time evolution, trajectory CSV"))
    evolve.add_argument("--mode", choices=sorted(EVOLVE_MODES), help="overrides evolve.mode")
    validate = sub.add_parser("validate", help="run the invariant suite")
    validate.add_argument("--scope", action="append", choices=sorted(SCOPES),
                          help="restrict to a scope (repeatable)")
    validate.add_argument("--out", help="output directory (default: write to stdout)")
    sweep = with_config(sub.add_parser("sweep", help="run one command over a parameter list"))
    sweep.add_argument("--mode", choices=sorted(EVOLVE_MODES), help="evolve mode for sweeps")
    return parser


def _error(stderr, exc, code, **extra):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    payload.update(extra)
    stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    out = _Output(args.out, stdout)
    try:
        if args.command == "validate":
            report, passed = cmd_validate(args.scope)
            out.write("validate.json", _json_text(report))
            return EXIT_OK if passed else EXIT_FAILED

        config = load_config(args.config)
        if args.out is None and config.get("output", "directory"):
            out = _Output(config.get("output", "directory"), stdout)
            args.out = str(out.dir)
        if args.command == "dsf":
            out.write("dsf.csv", cmd_dsf(config))
        elif args.command == "coeffs":
            out.write("coeffs.json", _json_text(cmd_coeffs(config)))
        elif args.command == "evolve":
            out.write("trajectory.csv", cmd_evolve(config, args.mode))
        elif args.command == "sweep":
            text = Path(args.config).read_text()
            report = cmd_sweep(config, text, args.out, args.mode)
            out.write("sweep.json", _json_text(report))
            if any(run["status"] != "ok" for run in report["runs"]):
                return EXIT_FAILED
        return EXIT_OK
    except ConfigError as exc:
        return _error(stderr, exc, EXIT_CONFIG)
    except MonitorViolation as exc:
        path = out.path("monitor_snapshot.json")
        path.write_text(_json_text({"schema": "gasbath.snapshot/1", "message": str(exc),
                                    **exc.snapshot}))
        return _error(stderr, exc, EXIT_MONITOR, snapshot=str(path))
    except StepSizeError as exc:
        return _error(stderr, exc, EXIT_DOMAIN, suggested_dt=exc.suggested_dt)
    except CondensationError as exc:
        return _error(stderr, exc, EXIT_DOMAIN, regime="condensed")
    except DomainError as exc:
        return _error(stderr, exc, EXIT_DOMAIN)
    except ConvergenceError as exc:
        return _error(stderr, exc, EXIT_CONVERGENCE, diagnostics=exc.diagnostics)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
