"""Command-line front end.

Subcommands
-----------
run          simulate a configuration; write ledger CSV, JSON summary and
             per-step snapshots
audit        recompute the full audit from a stored run's config echo and
             snapshots (bit-identical ledger for an identical build)
sweep-tau    time-step refinement ladder
sweep-delta  regularization refinement ladder
oracle-check brute-force optimality comparison on a tiny instance
validate     material/scenario/config admissibility report

Exit codes: 0 all enabled checks pass, 1 a check failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audit import AuditOptions, audit_trajectory
from .config import ConfigError, RunConfig, parse_config
from .convergence import oracle_small, sweep_delta, sweep_tau
from .stepper import StepState, Trajectory, run as run_simulation
from .stepper_errors import SolverError, StepError

SNAPSHOT_COLUMNS = ("index", "u_value", "u_slope", "v_value", "v_slope", "z")


# ----------------------------------------------------------------------
# Output helpers
# ----------------------------------------------------------------------
def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_snapshot(path: Path, state: StepState, spaces):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_COLUMNS)
        uv = spaces.u_values(state.u)
        us = spaces.u_slopes(state.u)
        vv = spaces.u_values(state.v)
        vs = spaces.u_slopes(state.v)
        for i in range(spaces.n_z):
            writer.writerow(
                [str(i)]
                + [repr(float(col[i])) for col in (uv, us, vv, vs, state.z)]
            )


def _write_run_outputs(outdir: Path, cfg: RunConfig, traj: Trajectory, ledger) -> dict:
    outdir.mkdir(parents=True, exist_ok=True)
    echo = dict(cfg.echo)
    echo["derived"] = cfg.metadata
    echo["version"] = __version__
    _write_json(outdir / "config_echo.json", echo)
    ledger.write_csv(outdir / cfg.output.ledger)
    summary = ledger.summary()
    summary["metadata"] = cfg.metadata
    _write_json(outdir / cfg.output.summary, summary)
    stride = cfg.output.snapshot_stride
    if stride >= 1:
        snapdir = outdir / "snapshots"
        snapdir.mkdir(exist_ok=True)
        marks = set(range(0, traj.num_steps + 1, stride)) | {0, traj.num_steps}
        for m in sorted(marks):
            _write_snapshot(snapdir / f"step_{m:05d}.csv", traj.states[m], traj.spaces)
    return summary


def _print_checks(ledger) -> bool:
    ok = True
    for name, check in ledger.checks.items():
        passed = bool(check.get("passed", True))
        ok = ok and passed
        print(f"check {name}: {'PASS' if passed else 'FAIL'}")
    return ok


def _apply_seed(cfg: RunConfig, seed) -> RunConfig:
    if seed is None:
        return cfg
    audit = dataclasses.replace(cfg.audit, seed=int(seed))
    echo = dict(cfg.echo)
    echo["seed"] = int(seed)
    return dataclasses.replace(cfg, audit=audit, seed=int(seed), echo=echo)


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------
def _cmd_run(args) -> int:
    cfg = _apply_seed(parse_config(args.config), args.seed)
    spaces = cfg.build_spaces()
    traj = run_simulation(
        spaces, cfg.material, cfg.scenario, cfg.time_grid, cfg.solver, metadata=cfg.metadata
    )
    ledger = audit_trajectory(traj, cfg.audit)
    _write_run_outputs(Path(args.out), cfg, traj, ledger)
    ok = _print_checks(ledger)
    if args.strict:
        limit_ok = ledger.checks["energy_inequality"]["limit_form_min_slack"] >= -cfg.audit.eps_audit
        print(f"check limit_form_energy_inequality: {'PASS' if limit_ok else 'FAIL'} (strict)")
        ok = ok and limit_ok
    print(f"ledger: {Path(args.out) / cfg.output.ledger}")
    return 0 if ok else 1


def _load_snapshot(path: Path, spaces):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != SNAPSHOT_COLUMNS:
            raise ConfigError(f"{path}: unexpected snapshot columns {header}")
        rows = list(reader)
    if len(rows) != spaces.n_z:
        raise ConfigError(f"{path}: expected {spaces.n_z} rows, found {len(rows)}")
    data = np.array([[float(v) for v in row[1:]] for row in rows])
    u = spaces.hermite_interpolate(data[:, 0], data[:, 1])
    v = spaces.hermite_interpolate(data[:, 2], data[:, 3])
    return u, v, data[:, 4]


def _rebuild_trajectory(cfg: RunConfig, snapdir: Path) -> Trajectory:
    spaces = cfg.build_spaces()
    num_steps = cfg.time_grid.num_steps
    fields = []
    for m in range(num_steps + 1):
        path = snapdir / f"step_{m:05d}.csv"
        if not path.exists():
            raise ConfigError(
                f"missing snapshot {path}; re-auditing needs snapshot_stride=1"
            )
        fields.append(_load_snapshot(path, spaces))
    b_samples = []
    load_samples = []
    for m in range(num_steps + 1):
        data = cfg.scenario.eval_data(spaces, cfg.time_grid.time(m), cfg.time_grid.final_time)
        b_samples.append(data.b_dofs)
        load_samples.append(data.load_vector)
    tau = cfg.time_grid.tau
    u0, v0, z0 = fields[0]
    u_minus1 = u0 - tau * v0
    states = [StepState(m=0, u=u0, u_prev=u_minus1, u_prevprev=u_minus1, v=v0, z=z0, z_prev=z0)]
    for m in range(1, num_steps + 1):
        u, v, z = fields[m]
        states.append(
            StepState(
                m=m,
                u=u,
                u_prev=fields[m - 1][0],
                u_prevprev=fields[m - 2][0] if m >= 2 else u_minus1,
                v=v,
                z=z,
                z_prev=fields[m - 1][2],
            )
        )
    return Trajectory(
        spaces=spaces,
        material=cfg.material,
        scenario=cfg.scenario,
        time_grid=cfg.time_grid,
        states=tuple(states),
        b_samples=tuple(b_samples),
        load_samples=tuple(load_samples),
        metadata=cfg.metadata,
    )


def _load_echo(path) -> RunConfig:
    """Parse a config or config echo (which carries extra metadata keys)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(data, dict):
        data.pop("derived", None)
        data.pop("version", None)
    from .config import parse_config_data

    return parse_config_data(data)


def _cmd_audit(args) -> int:
    cfg = _apply_seed(_load_echo(args.config), args.seed)
    snapdir = Path(args.config).parent / "snapshots"
    traj = _rebuild_trajectory(cfg, snapdir)
    ledger = audit_trajectory(traj, cfg.audit)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ledger.write_csv(outdir / cfg.output.ledger)
    summary = ledger.summary()
    summary["metadata"] = cfg.metadata
    _write_json(outdir / cfg.output.summary, summary)
    ok = _print_checks(ledger)
    return 0 if ok else 1


def _cmd_sweep_tau(args) -> int:
    cfg = _apply_seed(parse_config(args.config), args.seed)
    spaces = cfg.build_spaces()
    base = cfg.time_grid.num_steps
    counts = [base * 2**i for i in range(args.levels)]
    report = sweep_tau(
        spaces, cfg.material, cfg.scenario, cfg.time_grid.final_time, counts, cfg.solver
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / cfg.output.report, report.to_dict())
    print(f"sweep-tau: {'PASS' if report.passed else 'FAIL'} "
          f"(differences {list(report.differences)})")
    return 0 if report.passed else 1


def _cmd_sweep_delta(args) -> int:
    cfg = _apply_seed(parse_config(args.config), args.seed)
    spaces = cfg.build_spaces()
    deltas = [cfg.material.delta * 10.0**-i for i in range(args.levels)]
    report = sweep_delta(
        spaces, cfg.material, cfg.scenario, cfg.time_grid, deltas, cfg.solver
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / cfg.output.report, report.to_dict())
    print(f"sweep-delta: {'PASS' if report.passed else 'FAIL'} "
          f"(monitors {report.monitors['sqrt_delta_sup_u_H2']})")
    return 0 if report.passed else 1


def _cmd_oracle_check(args) -> int:
    cfg = _apply_seed(parse_config(args.config), args.seed)
    spaces = cfg.build_spaces()
    report = oracle_small(spaces, cfg.material, cfg.scenario, cfg.time_grid, cfg.solver)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / cfg.output.report, report)
    worst_value = max((s["value_gap"] for s in report["steps"]), default=0.0)
    worst_z = max((s["z_gap"] for s in report["steps"]), default=0.0)
    print(
        f"oracle-check: {'PASS' if report['passed'] else 'FAIL'} "
        f"(max value gap {worst_value:.3e}, max z gap {worst_z:.3e})"
    )
    return 0 if report["passed"] else 1


def _cmd_validate(args) -> int:
    cfg = parse_config(args.config)
    issues = list(cfg.material.validate())
    spaces = cfg.build_spaces()
    issues += cfg.scenario.check_regularity(spaces, cfg.time_grid.final_time)
    if issues:
        for item in issues:
            print(f"violation: {item}")
        return 1
    print("configuration valid")
    print(f"tau = {cfg.time_grid.tau:.6g}, nodes = {cfg.mesh.num_elements + 1}")
    if cfg.metadata["neumann_empty"]:
        print("note: both endpoints are clamped (no traction boundary)")
    return 0


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------
def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="damagebar",
        description="1D dynamic damage simulator with per-step energy auditing",
    )
    parser.add_argument("--version", action="version", version=f"damagebar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default="out"):
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p_run = sub.add_parser("run", help="simulate and audit a configuration")
    common(p_run)
    p_run.add_argument(
        "--strict", action="store_true", help="treat informational checks as failures"
    )

    p_audit = sub.add_parser("audit", help="re-audit a stored run (config echo + snapshots)")
    common(p_audit, out_default="reaudit")

    for name in ("sweep-tau", "sweep-delta"):
        p_sweep = sub.add_parser(name, help=f"{name.replace('-', ' ')} refinement ladder")
        common(p_sweep)
        p_sweep.add_argument("--levels", type=int, default=3, help="number of ladder levels")

    p_oracle = sub.add_parser("oracle-check", help="brute-force optimality comparison")
    common(p_oracle)

    p_val = sub.add_parser("validate", help="validate a configuration")
    p_val.add_argument("--config", required=True, help="JSON configuration file")
    return parser


_DISPATCH = {
    "run": _cmd_run,
    "audit": _cmd_audit,
    "sweep-tau": _cmd_sweep_tau,
    "sweep-delta": _cmd_sweep_delta,
    "oracle-check": _cmd_oracle_check,
    "validate": _cmd_validate,
}


def cli(argv=None) -> int:
    """Parse arguments and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors and 0 for --help/--version.
        return int(exc.code or 0)
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, StepError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
