"""JSON run configuration: strict parsing, defaults, echo.

Unknown keys are rejected with a suggestion, every validation error names
the offending key path, and the fully-defaulted configuration is echoed so
a stored run can be re-audited from its own metadata alone.
"""

from __future__ import annotations

import difflib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .audit import AuditOptions
from .discretization import DiscreteSpaces, Mesh1D, gauss_order_for
from .material import MaterialModel
from .scenarios import BoundaryMotion, InitialState, Scenario, VolumeLoad
from .stepper import SolverOptions, TimeGrid

__all__ = ["ConfigError", "OutputSpec", "RunConfig", "parse_config", "parse_config_data"]


class ConfigError(ValueError):
    """Configuration file is malformed; the message names the key path."""


_BOUNDARY_KEYS = {
    "constant": {"value"},
    "ramp": {"rate"},
    "sine": {"amplitude", "omega"},
}
_LOAD_KEYS = {
    "zero": set(),
    "constant": {"value"},
    "pulse": {"amplitude", "speed", "width", "center"},
}

_TOP_KEYS = ("mesh", "time", "material", "scenario", "solver", "output", "seed")


@dataclass(frozen=True)
class OutputSpec:
    ledger: str = "ledger.csv"
    summary: str = "summary.json"
    report: str = "report.json"
    snapshot_stride: int = 1


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration with the objects it builds and its echo."""

    mesh: Mesh1D
    time_grid: TimeGrid
    material: MaterialModel
    scenario: Scenario
    solver: SolverOptions
    audit: AuditOptions
    output: OutputSpec
    seed: int
    echo: dict = field(default_factory=dict)

    def build_spaces(self) -> DiscreteSpaces:
        return DiscreteSpaces(self.mesh, n_gauss=max(5, gauss_order_for(self.material)))

    @property
    def metadata(self) -> dict:
        return {
            "neumann_empty": len(self.mesh.dirichlet) == 2,
            "tau": self.time_grid.tau,
            "seed": self.seed,
        }


# ----------------------------------------------------------------------
# Low-level helpers
# ----------------------------------------------------------------------
def _reject_unknown(section: dict, allowed, path: str):
    for key in section:
        if key not in allowed:
            hint = difflib.get_close_matches(key, list(allowed), n=1)
            suffix = f" (did you mean {hint[0]!r}?)" if hint else ""
            raise ConfigError(f"{path}{key}: unknown key{suffix}")


def _number(section, key, path, default, kind=float, minimum=None, strict=False):
    raw = section.get(key, default)
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{path}{key}: expected a number, got {raw!r}")
    if kind is int and int(raw) != raw:
        raise ConfigError(f"{path}{key}: expected an integer, got {raw!r}")
    value = kind(raw)
    if minimum is not None:
        if strict and not value > minimum:
            raise ConfigError(f"{path}{key}: must be > {minimum}, got {value}")
        if not strict and not value >= minimum:
            raise ConfigError(f"{path}{key}: must be >= {minimum}, got {value}")
    return value


def _section(data, key, path=""):
    raw = data.get(key, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}{key}: expected an object")
    return raw


# ----------------------------------------------------------------------
# Section parsers
# ----------------------------------------------------------------------
def _parse_mesh(data) -> Mesh1D:
    sec = _section(data, "mesh")
    _reject_unknown(sec, {"L", "N", "dirichlet"}, "mesh.")
    length = _number(sec, "L", "mesh.", 1.0, minimum=0.0, strict=True)
    n = _number(sec, "N", "mesh.", 32, kind=int, minimum=1)
    dirichlet = sec.get("dirichlet", ["left", "right"])
    if not isinstance(dirichlet, (list, tuple)):
        raise ConfigError("mesh.dirichlet: expected a list of endpoint names")
    try:
        return Mesh1D(length=length, num_elements=n, dirichlet=tuple(dirichlet))
    except ValueError as exc:
        raise ConfigError(f"mesh.dirichlet: {exc}") from exc


def _parse_time(data) -> TimeGrid:
    sec = _section(data, "time")
    _reject_unknown(sec, {"T", "M"}, "time.")
    final = _number(sec, "T", "time.", 1.0, minimum=0.0, strict=True)
    steps = _number(sec, "M", "time.", 100, kind=int, minimum=1)
    return TimeGrid(final_time=final, num_steps=steps)


def _parse_material(data) -> MaterialModel:
    sec = _section(data, "material")
    _reject_unknown(sec, {"eta", "kappa", "h", "f", "c0", "p", "delta"}, "material.")
    eta = _number(sec, "eta", "material.", 0.1, minimum=0.0, strict=True)
    kappa = _number(sec, "kappa", "material.", 0.5, minimum=0.0)
    c0 = _number(sec, "c0", "material.", 1.0, minimum=0.0, strict=True)
    p = _number(sec, "p", "material.", 2.0, minimum=1.0, strict=True)
    delta = _number(sec, "delta", "material.", 1e-3, minimum=0.0)
    h = sec.get("h", [eta, 0.0, 1.0 - eta])
    f = sec.get("f", [kappa, -kappa])
    for name, coeffs in (("h", h), ("f", f)):
        if not isinstance(coeffs, (list, tuple)) or not coeffs or not all(
            isinstance(c, (int, float)) and not isinstance(c, bool) for c in coeffs
        ):
            raise ConfigError(f"material.{name}: expected a nonempty list of coefficients")
    material = MaterialModel(
        eta=eta, kappa=kappa, c0=c0, p=p, delta=delta, h_coeffs=tuple(h), f_coeffs=tuple(f)
    )
    problems = material.validate()
    if problems:
        raise ConfigError("material: " + "; ".join(problems))
    return material


def _parse_scenario(data) -> Scenario:
    sec = _section(data, "scenario")
    _reject_unknown(sec, {"boundary", "load", "initial"}, "scenario.")

    bnd = _section(sec, "boundary", "scenario.")
    family = bnd.get("family", "constant")
    if family not in _BOUNDARY_KEYS:
        raise ConfigError(
            f"scenario.boundary.family: unknown family {family!r}; "
            f"choose from {sorted(_BOUNDARY_KEYS)}"
        )
    _reject_unknown(bnd, {"family"} | _BOUNDARY_KEYS[family], "scenario.boundary.")
    boundary = BoundaryMotion(
        family=family,
        value=_number(bnd, "value", "scenario.boundary.", 0.0),
        rate=_number(bnd, "rate", "scenario.boundary.", 0.0),
        amplitude=_number(bnd, "amplitude", "scenario.boundary.", 0.0),
        omega=_number(bnd, "omega", "scenario.boundary.", 1.0),
    )

    ld = _section(sec, "load", "scenario.")
    lfamily = ld.get("family", "zero")
    if lfamily not in _LOAD_KEYS:
        raise ConfigError(
            f"scenario.load.family: unknown family {lfamily!r}; choose from {sorted(_LOAD_KEYS)}"
        )
    _reject_unknown(ld, {"family"} | _LOAD_KEYS[lfamily], "scenario.load.")
    load = VolumeLoad(
        family=lfamily,
        value=_number(ld, "value", "scenario.load.", 0.0),
        amplitude=_number(ld, "amplitude", "scenario.load.", 0.0),
        speed=_number(ld, "speed", "scenario.load.", 0.0),
        width=_number(ld, "width", "scenario.load.", 0.1, minimum=0.0, strict=True),
        center=_number(ld, "center", "scenario.load.", 0.0),
    )

    ini = _section(sec, "initial", "scenario.")
    _reject_unknown(ini, {"u0", "v0", "z0"}, "scenario.initial.")
    z0 = _number(ini, "z0", "scenario.initial.", 1.0)
    try:
        initial = InitialState(u0=ini.get("u0", "zero"), v0=ini.get("v0", "zero"), z0=z0)
    except ValueError as exc:
        raise ConfigError(f"scenario.initial: {exc}") from exc
    return Scenario(boundary=boundary, load=load, initial=initial)


def _parse_solver(data, seed) -> tuple:
    sec = _section(data, "solver")
    _reject_unknown(
        sec,
        {
            "tol_z",
            "tol_alt",
            "tol_momentum",
            "max_sweeps",
            "max_newton",
            "eps_active",
            "eps_audit",
            "vi_tol",
            "xi_tol",
            "n_random_directions",
        },
        "solver.",
    )
    tol_z = _number(sec, "tol_z", "solver.", 1e-9, minimum=0.0, strict=True)
    tol_momentum = _number(sec, "tol_momentum", "solver.", 1e-9, minimum=0.0, strict=True)
    solver = SolverOptions(
        tol_z=tol_z,
        tol_alt=_number(sec, "tol_alt", "solver.", 1e-10, minimum=0.0, strict=True),
        tol_momentum=tol_momentum,
        max_sweeps=_number(sec, "max_sweeps", "solver.", 200, kind=int, minimum=1),
        max_newton=_number(sec, "max_newton", "solver.", 100, kind=int, minimum=1),
    )
    audit = AuditOptions(
        eps_audit=_number(sec, "eps_audit", "solver.", 1e-7, minimum=0.0, strict=True),
        eps_active=_number(sec, "eps_active", "solver.", 1e-10, minimum=0.0, strict=True),
        vi_tol=_number(sec, "vi_tol", "solver.", 1e-8, minimum=0.0, strict=True),
        xi_tol=_number(sec, "xi_tol", "solver.", 1e-8, minimum=0.0, strict=True),
        tol_momentum=tol_momentum,
        tol_kkt=tol_z,
        n_random_directions=_number(sec, "n_random_directions", "solver.", 3, kind=int, minimum=0),
        seed=seed,
    )
    return solver, audit


def _parse_output(data) -> OutputSpec:
    sec = _section(data, "output")
    _reject_unknown(sec, {"ledger", "summary", "report", "snapshot_stride"}, "output.")
    for key in ("ledger", "summary", "report"):
        if key in sec and (not isinstance(sec[key], str) or not sec[key]):
            raise ConfigError(f"output.{key}: expected a nonempty file name")
    return OutputSpec(
        ledger=sec.get("ledger", "ledger.csv"),
        summary=sec.get("summary", "summary.json"),
        report=sec.get("report", "report.json"),
        snapshot_stride=_number(sec, "snapshot_stride", "output.", 1, kind=int, minimum=0),
    )


# ----------------------------------------------------------------------
# Entry points
# ----------------------------------------------------------------------
def parse_config_data(data: dict) -> RunConfig:
    """Validate a configuration dictionary and build the run objects."""
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a JSON object")
    _reject_unknown(data, _TOP_KEYS, "")
    mesh = _parse_mesh(data)
    time_grid = _parse_time(data)
    material = _parse_material(data)
    scenario = _parse_scenario(data)
    seed = _number(data, "seed", "", 12345, kind=int, minimum=0)
    solver, audit = _parse_solver(data, seed)
    output = _parse_output(data)

    echo = {
        "mesh": {"L": mesh.length, "N": mesh.num_elements, "dirichlet": list(mesh.dirichlet)},
        "time": {"T": time_grid.final_time, "M": time_grid.num_steps},
        "material": {
            "eta": material.eta,
            "kappa": material.kappa,
            "h": list(material.h_coeffs),
            "f": list(material.f_coeffs),
            "c0": material.c0,
            "p": material.p,
            "delta": material.delta,
        },
        "scenario": {
            "boundary": {
                "family": scenario.boundary.family,
                **{
                    k: getattr(scenario.boundary, k)
                    for k in _BOUNDARY_KEYS[scenario.boundary.family]
                },
            },
            "load": {
                "family": scenario.load.family,
                **{k: getattr(scenario.load, k) for k in _LOAD_KEYS[scenario.load.family]},
            },
            "initial": {
                "u0": scenario.initial.u0,
                "v0": scenario.initial.v0,
                "z0": scenario.initial.z0,
            },
        },
        "solver": {
            "tol_z": solver.tol_z,
            "tol_alt": solver.tol_alt,
            "tol_momentum": solver.tol_momentum,
            "max_sweeps": solver.max_sweeps,
            "max_newton": solver.max_newton,
            "eps_active": audit.eps_active,
            "eps_audit": audit.eps_audit,
            "vi_tol": audit.vi_tol,
            "xi_tol": audit.xi_tol,
            "n_random_directions": audit.n_random_directions,
        },
        "output": {
            "ledger": output.ledger,
            "summary": output.summary,
            "report": output.report,
            "snapshot_stride": output.snapshot_stride,
        },
        "seed": seed,
    }
    return RunConfig(
        mesh=mesh,
        time_grid=time_grid,
        material=material,
        scenario=scenario,
        solver=solver,
        audit=audit,
        output=output,
        seed=seed,
        echo=echo,
    )


def parse_config(path) -> RunConfig:
    """Parse and validate a JSON configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config_data(data)
