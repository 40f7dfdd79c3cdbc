"""damagebar: 1D dynamic damage simulator with per-step energy auditing.

Simulates a damageable elastic bar with inertia by recursive incremental
minimization (implicit time stepping of the coupled wave/damage system with
irreversibility and a fourth-order displacement regularization) and certifies
every step against the discrete energy-dissipation inequality, the damage
variational inequality and the reconstructed obstacle reaction force.
"""

__version__ = "0.1.0"

from .audit import (
    AuditOptions,
    EnergyLedger,
    SubgradientField,
    audit_trajectory,
    energy_inequality_check,
    external_work_increment,
    error_increments,
    free_energy,
    kinetic_energy,
    vi_check,
    xi_checks,
    xi_reconstruct,
)
from .config import ConfigError, RunConfig, parse_config, parse_config_data
from .convergence import ConvergenceReport, apriori_monitor, oracle_small, sweep_delta, sweep_tau
from .discretization import DiscreteSpaces, Mesh1D
from .material import MaterialModel, default_material
from .scenarios import (
    BoundaryMotion,
    InitialState,
    Scenario,
    VolumeLoad,
    onset_strain,
    quiescent_scenario,
    stretch_scenario,
)
from .stepper import (
    SolverOptions,
    StepProblem,
    StepState,
    TimeGrid,
    Trajectory,
    functional_value,
    gradient_check,
    incremental_step,
    interpolant_eval,
    minimize_u,
    minimize_z,
    run,
)
from .stepper_errors import SolverError, StepError

__all__ = [
    "AuditOptions",
    "BoundaryMotion",
    "ConfigError",
    "ConvergenceReport",
    "DiscreteSpaces",
    "EnergyLedger",
    "InitialState",
    "MaterialModel",
    "Mesh1D",
    "RunConfig",
    "Scenario",
    "SolverError",
    "SolverOptions",
    "StepError",
    "StepProblem",
    "StepState",
    "SubgradientField",
    "TimeGrid",
    "Trajectory",
    "VolumeLoad",
    "apriori_monitor",
    "audit_trajectory",
    "default_material",
    "energy_inequality_check",
    "error_increments",
    "external_work_increment",
    "free_energy",
    "functional_value",
    "gradient_check",
    "incremental_step",
    "interpolant_eval",
    "kinetic_energy",
    "minimize_u",
    "minimize_z",
    "onset_strain",
    "oracle_small",
    "parse_config",
    "parse_config_data",
    "quiescent_scenario",
    "run",
    "stretch_scenario",
    "sweep_delta",
    "sweep_tau",
    "vi_check",
    "xi_checks",
    "xi_reconstruct",
]
