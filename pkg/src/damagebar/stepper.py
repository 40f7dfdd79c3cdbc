"""Incremental minimization time stepper.

Each step minimizes the functional

    F(u, z) = (1/p) int |z'|^p + int W(u', z) + int f(z) - <load, u>
              + (delta/2) int |u''|^2
              + (1/(2 tau)) ||z - z_prev||^2_{L2}
              + (1/(2 tau^2)) ||u - 2 u_prev + u_prevprev||^2_{L2}

over displacements with the prescribed boundary trace and damage fields
constrained to ``0 <= z <= z_prev`` (irreversibility).  The two proximal
terms encode the inertia (second difference quotient of u) and the damage
rate penalty.  The joint minimizer is found by alternating the two exactly
solvable subproblems:

* u-subproblem: a symmetric positive definite linear solve,
* z-subproblem: a box-constrained smooth minimization solved by projected
  Newton with active-set freezing and an Armijo-projected-gradient fallback.

Velocities are difference quotients ``v_m = (u_m - u_prev)/tau``; the
fictitious pre-initial displacement ``u_{-1} = u0 - tau v0`` seeds the first
step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .discretization import DiscreteSpaces
from .material import MaterialModel
from .scenarios import Scenario
from .stepper_errors import SolverError, StepError

__all__ = [
    "TimeGrid",
    "SolverOptions",
    "StepProblem",
    "StepState",
    "Trajectory",
    "functional_value",
    "minimize_u",
    "minimize_z",
    "momentum_residual",
    "kkt_residual",
    "z_gradient",
    "incremental_step",
    "run",
    "interpolant_eval",
    "gradient_check",
]

_FEAS_TOL = 1e-12
_TRACE_TOL = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant partition of [0, T] into M steps of length tau = T/M."""

    final_time: float
    num_steps: int

    def __post_init__(self):
        if not self.final_time > 0.0:
            raise ValueError(f"final time must be positive, got {self.final_time}")
        if self.num_steps < 1:
            raise ValueError(f"need at least one step, got {self.num_steps}")

    @property
    def tau(self) -> float:
        return self.final_time / self.num_steps

    def time(self, m: int) -> float:
        return m * self.tau


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances of the alternating solver.

    ``tol_z`` bounds the projected-gradient (KKT) residual of the damage
    subproblem, ``tol_momentum`` the Euclidean residual of the force balance
    on the free DoFs, ``tol_alt`` the relative functional decrease per sweep.
    """

    tol_z: float = 1e-9
    tol_alt: float = 1e-10
    tol_momentum: float = 1e-9
    max_sweeps: int = 200
    max_newton: int = 100

    def __post_init__(self):
        for name in ("tol_z", "tol_alt", "tol_momentum"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.max_sweeps < 1 or self.max_newton < 1:
            raise ValueError("iteration limits must be at least 1")


@dataclass(frozen=True)
class StepProblem:
    """Frozen context of one incremental step."""

    spaces: DiscreteSpaces
    material: MaterialModel
    tau: float
    u_prev: np.ndarray
    u_prevprev: np.ndarray
    z_prev: np.ndarray
    b_dofs: np.ndarray
    load: np.ndarray
    options: SolverOptions = field(default_factory=SolverOptions)

    @property
    def bc_values(self) -> np.ndarray:
        return self.b_dofs[self.spaces.dirichlet_value_dofs]


@dataclass(frozen=True)
class StepState:
    """Converged fields of one step plus solver diagnostics."""

    m: int
    u: np.ndarray
    u_prev: np.ndarray
    u_prevprev: np.ndarray
    v: np.ndarray
    z: np.ndarray
    z_prev: np.ndarray
    sweeps: int = 0
    functional_history: tuple = ()
    kkt_residual: float = 0.0
    momentum_residual: float = 0.0


# ----------------------------------------------------------------------
# Functional and its pieces
# ----------------------------------------------------------------------
def _check_feasible(u, z, prob: StepProblem):
    if np.min(z) < -_FEAS_TOL or np.max(z - prob.z_prev) > _FEAS_TOL:
        raise ValueError("damage iterate violates 0 <= z <= z_prev")
    bc = prob.bc_values
    trace = u[prob.spaces.dirichlet_value_dofs]
    if np.max(np.abs(trace - bc)) > _TRACE_TOL * (1.0 + float(np.max(np.abs(bc), initial=0.0))):
        raise ValueError("displacement iterate violates the prescribed boundary trace")


def _elastic_quad(u, prob: StepProblem):
    """Point values 0.5 * c0 * u'(x_q)^2, shape (n_el, Q)."""
    du = prob.spaces.u_deriv_at_quad(u)
    return 0.5 * prob.material.c0 * du**2


def functional_value(u: np.ndarray, z: np.ndarray, prob: StepProblem) -> float:
    """Value of the incremental functional at an admissible pair (u, z)."""
    _check_feasible(u, z, prob)
    sp, mat = prob.spaces, prob.material
    zq = sp.z_at_quad(z)
    grad_term = sp.p_laplacian_energy(z, mat)
    elastic = sp.integrate(mat.h(zq) * _elastic_quad(u, prob))
    potential = sp.integrate(mat.f(zq))
    load_term = -float(prob.load @ u)
    reg = 0.5 * mat.delta * float(u @ sp.bilaplacian @ u)
    dz = z - prob.z_prev
    prox_z = 0.5 / prob.tau * float(dz @ sp.mass_z @ dz)
    du = u - 2.0 * prob.u_prev + prob.u_prevprev
    prox_u = 0.5 / prob.tau**2 * float(du @ sp.mass_u @ du)
    return grad_term + elastic + potential + load_term + reg + prox_z + prox_u


# ----------------------------------------------------------------------
# Displacement subproblem (linear SPD solve)
# ----------------------------------------------------------------------
def _u_system(z, prob: StepProblem):
    sp, mat = prob.spaces, prob.material
    matrix = sp.mass_u / prob.tau**2 + sp.stiffness(z, mat) + mat.delta * sp.bilaplacian
    rhs = sp.mass_u @ (2.0 * prob.u_prev - prob.u_prevprev) / prob.tau**2 + prob.load
    return matrix, rhs


def minimize_u(z: np.ndarray, prob: StepProblem):
    """Exact minimizer of the functional in u at fixed damage.

    Solves ``(M/tau^2 + K(z) + delta B) u = M (2 u_prev - u_prevprev)/tau^2
    + load`` with the boundary values eliminated.  Returns the DoF vector
    and the Euclidean residual on the free DoFs.
    """
    matrix, rhs = _u_system(z, prob)
    return prob.spaces.solve_dirichlet(matrix, rhs, prob.bc_values)


def momentum_residual(u, z, prob: StepProblem) -> float:
    """Euclidean norm of the discrete force-balance residual (free DoFs)."""
    matrix, rhs = _u_system(z, prob)
    r = (matrix @ u - rhs)[prob.spaces.free_u]
    return float(np.linalg.norm(r))


# ----------------------------------------------------------------------
# Damage subproblem (projected Newton over the box [0, z_prev])
# ----------------------------------------------------------------------
def _z_objective(z, elastic_q, prob: StepProblem):
    sp, mat = prob.spaces, prob.material
    zq = sp.z_at_quad(z)
    val = sp.p_laplacian_energy(z, mat)
    val += sp.integrate(mat.h(zq) * elastic_q)
    val += sp.integrate(mat.f(zq))
    dz = z - prob.z_prev
    val += 0.5 / prob.tau * float(dz @ sp.mass_z @ dz)
    return val


def z_gradient(u, z, prob: StepProblem) -> np.ndarray:
    """Gradient of the incremental functional in the nodal damage basis."""
    sp, mat = prob.spaces, prob.material
    elastic_q = _elastic_quad(u, prob)
    zq = sp.z_at_quad(z)
    g = sp.p_laplacian_grad(z, mat)
    g += sp.z_load_vector(mat.h_prime(zq) * elastic_q + mat.f_prime(zq))
    g += sp.mass_z @ (z - prob.z_prev) / prob.tau
    return g


def _z_hessian(u, z, prob: StepProblem) -> np.ndarray:
    sp, mat = prob.spaces, prob.material
    elastic_q = _elastic_quad(u, prob)
    zq = sp.z_at_quad(z)
    hess = sp.p_laplacian_hess(z, mat)
    hess += sp.weighted_mass_z(mat.h_second(zq) * elastic_q + mat.f_second(zq))
    hess += sp.mass_z / prob.tau
    return hess


def kkt_residual(u, z, prob: StepProblem) -> float:
    """Projected-gradient norm || z - Pi_[0, z_prev](z - grad) ||."""
    g = z_gradient(u, z, prob)
    return float(np.linalg.norm(z - np.clip(z - g, 0.0, prob.z_prev)))


def minimize_z(u: np.ndarray, prob: StepProblem, z_start: np.ndarray | None = None):
    """Box-constrained minimizer of the functional in z at fixed u.

    Projected Newton: nodes pinned at a bound with outward gradient are
    frozen, the Newton step is taken on the free set and projected back
    onto the box, with Armijo backtracking.  Falls back to a projected
    gradient step whenever the Newton direction is unusable.  Returns
    ``(z, kkt_residual, iterations)``; raises ``SolverError`` when the KKT
    residual does not reach ``tol_z`` within ``max_newton`` iterations.
    """
    opts = prob.options
    lo = np.zeros_like(prob.z_prev)
    hi = prob.z_prev
    z = np.clip(prob.z_prev.copy() if z_start is None else z_start.copy(), lo, hi)
    elastic_q = _elastic_quad(u, prob)
    obj = _z_objective(z, elastic_q, prob)
    residual = math.inf
    for it in range(opts.max_newton):
        g = z_gradient(u, z, prob)
        residual = float(np.linalg.norm(z - np.clip(z - g, lo, hi)))
        if residual <= opts.tol_z:
            return z, residual, it
        active = ((z <= lo) & (g > 0.0)) | ((z >= hi) & (g < 0.0))
        free = ~active
        direction = np.zeros_like(z)
        if np.any(free):
            hess = _z_hessian(u, z, prob)
            try:
                c, low = scipy.linalg.cho_factor(hess[np.ix_(free, free)], check_finite=False)
                direction[free] = scipy.linalg.cho_solve((c, low), -g[free], check_finite=False)
            except scipy.linalg.LinAlgError:
                direction[free] = -g[free]
            if float(g[free] @ direction[free]) >= 0.0:
                direction[free] = -g[free]
        else:
            direction = -g

        # Armijo backtracking along the projected path.  The absolute slack
        # admits steps whose decrease falls below floating-point resolution
        # of the objective (the endgame of a converging Newton iteration).
        slack = 1e-14 * (1.0 + abs(obj))
        accepted = False
        for descent in (direction, -g):
            alpha = 1.0
            for _ in range(60):
                trial = np.clip(z + alpha * descent, lo, hi)
                move = trial - z
                if not np.any(move):
                    break
                trial_obj = _z_objective(trial, elastic_q, prob)
                if trial_obj <= obj + 1e-4 * float(g @ move) + slack:
                    z, obj, accepted = trial, trial_obj, True
                    break
                alpha *= 0.5
            if accepted:
                break
        if not accepted:
            break
    g = z_gradient(u, z, prob)
    residual = float(np.linalg.norm(z - np.clip(z - g, lo, hi)))
    if residual <= opts.tol_z:
        return z, residual, opts.max_newton
    raise SolverError(
        f"damage subproblem stalled: projected-gradient residual {residual:.3e} "
        f"> tol {opts.tol_z:.1e}",
        residual=residual,
    )


# ----------------------------------------------------------------------
# One incremental step (alternating minimization)
# ----------------------------------------------------------------------
def incremental_step(prob: StepProblem, m: int) -> StepState:
    """Jointly minimize the step functional by alternating u- and z-solves.

    Sweeps run until the functional decrease per sweep is below
    ``tol_alt * (1 + |value|)`` and both stationarity residuals are within
    tolerance.  The recorded functional history is nonincreasing.
    """
    opts = prob.options
    u = prob.u_prev.copy()
    u[prob.spaces.dirichlet_value_dofs] = prob.bc_values
    z = prob.z_prev.copy()
    history = [functional_value(u, z, prob)]
    kkt = math.inf
    mom = math.inf
    sweeps = 0
    for sweep in range(1, opts.max_sweeps + 1):
        sweeps = sweep
        z, _, _ = minimize_z(u, prob, z_start=z)
        u, _ = minimize_u(z, prob)
        value = functional_value(u, z, prob)
        drop = history[-1] - value
        history.append(value)
        kkt = kkt_residual(u, z, prob)
        mom = momentum_residual(u, z, prob)
        if (
            drop <= opts.tol_alt * (1.0 + abs(value))
            and kkt <= opts.tol_z
            and mom <= opts.tol_momentum
        ):
            break
    else:
        raise StepError(
            f"step {m}: alternating minimization did not converge in "
            f"{opts.max_sweeps} sweeps (kkt={kkt:.3e}, momentum={mom:.3e})",
            step=m,
            kkt_residual=kkt,
            momentum_residual=mom,
        )
    v = (u - prob.u_prev) / prob.tau
    for arr in (u, v, z):
        arr.flags.writeable = False
    return StepState(
        m=m,
        u=u,
        u_prev=prob.u_prev,
        u_prevprev=prob.u_prevprev,
        v=v,
        z=z,
        z_prev=prob.z_prev,
        sweeps=sweeps,
        functional_history=tuple(history),
        kkt_residual=kkt,
        momentum_residual=mom,
    )


# ----------------------------------------------------------------------
# Trajectory and time loop
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Trajectory:
    """Complete discrete evolution plus the sampled data it consumed."""

    spaces: DiscreteSpaces
    material: MaterialModel
    scenario: Scenario
    time_grid: TimeGrid
    states: tuple
    b_samples: tuple
    load_samples: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def tau(self) -> float:
        return self.time_grid.tau

    @property
    def num_steps(self) -> int:
        return self.time_grid.num_steps

    def state(self, m: int) -> StepState:
        return self.states[m]

    def field_at(self, m: int, name: str) -> np.ndarray:
        if name == "u":
            return self.states[m].u
        if name == "v":
            return self.states[m].v
        if name == "z":
            return self.states[m].z
        if name == "b":
            return self.b_samples[m]
        if name == "load":
            return self.load_samples[m]
        raise ValueError(f"unknown field {name!r}")


def run(
    spaces: DiscreteSpaces,
    material: MaterialModel,
    scenario: Scenario,
    time_grid: TimeGrid,
    options: SolverOptions | None = None,
    metadata: dict | None = None,
) -> Trajectory:
    """Run the recursive incremental minimization over the whole time grid."""
    options = options or SolverOptions()
    problems = material.validate()
    if problems:
        raise ValueError("cannot run with inadmissible material: " + "; ".join(problems))

    u0, v0, z0 = scenario.initial_fields(spaces)
    tau = time_grid.tau
    b_samples = []
    load_samples = []
    for m in range(time_grid.num_steps + 1):
        data = scenario.eval_data(spaces, time_grid.time(m), time_grid.final_time)
        b_samples.append(data.b_dofs)
        load_samples.append(data.load_vector)

    bc_dofs = spaces.dirichlet_value_dofs
    if np.max(np.abs(u0[bc_dofs] - b_samples[0][bc_dofs]), initial=0.0) > _TRACE_TOL:
        raise ValueError("initial displacement is incompatible with the boundary data at t=0")

    meta = dict(metadata or {})
    meta.setdefault("neumann_empty", len(spaces.mesh.dirichlet) == 2)

    u_minus1 = u0 - tau * v0
    for arr in (u0, v0, z0, u_minus1):
        arr.flags.writeable = False
    states = [
        StepState(m=0, u=u0, u_prev=u_minus1, u_prevprev=u_minus1, v=v0, z=z0, z_prev=z0)
    ]
    for m in range(1, time_grid.num_steps + 1):
        prev = states[-1]
        prob = StepProblem(
            spaces=spaces,
            material=material,
            tau=tau,
            u_prev=prev.u,
            u_prevprev=states[-2].u if m >= 2 else u_minus1,
            z_prev=prev.z,
            b_dofs=b_samples[m],
            load=load_samples[m],
            options=options,
        )
        state = incremental_step(prob, m)
        # Projection guarantees these exactly; fail loudly if ever violated.
        if np.any(state.z > prev.z) or np.any(state.z < 0.0):
            raise StepError(f"step {m}: irreversibility/box constraint broken", step=m)
        states.append(state)
    return Trajectory(
        spaces=spaces,
        material=material,
        scenario=scenario,
        time_grid=time_grid,
        states=tuple(states),
        b_samples=tuple(b_samples),
        load_samples=tuple(load_samples),
        metadata=meta,
    )


# ----------------------------------------------------------------------
# Interpolants in time
# ----------------------------------------------------------------------
def _locate(t: float, tau: float, num_steps: int):
    """Step index m = ceil(t/tau) with snapping to the grid against round-off."""
    if t < -1e-12 or t > num_steps * tau * (1.0 + 1e-12):
        raise ValueError(f"time {t} outside [0, {num_steps * tau}]")
    s = t / tau
    r = round(s)
    if abs(s - r) <= 1e-9 * max(1.0, abs(s)):
        s = float(r)
    m = int(math.ceil(s))
    m = min(max(m, 0), num_steps)
    return m, s


def interpolant_eval(traj: Trajectory, t: float, kind: str, name: str) -> np.ndarray:
    """Evaluate a stored field between grid points.

    ``kind="right"`` is the backward-constant interpolant (value of the
    covering step), ``kind="left"`` the forward-constant one (previous
    step, clamped at 0), ``kind="linear"`` blends the two with the local
    fraction ``beta = (t - (m-1) tau)/tau``.  At grid points all three
    agree with the stored step value.
    """
    m, s = _locate(t, traj.tau, traj.num_steps)
    if kind == "right":
        return traj.field_at(m, name)
    if kind == "left":
        return traj.field_at(max(0, m - 1), name)
    if kind == "linear":
        if m == 0:
            return traj.field_at(0, name)
        beta = min(max(s - (m - 1), 0.0), 1.0)
        right = traj.field_at(m, name)
        left = traj.field_at(max(0, m - 1), name)
        return beta * right + (1.0 - beta) * left
    raise ValueError(f"unknown interpolant kind {kind!r}")


# ----------------------------------------------------------------------
# Finite-difference validation of the analytic gradients
# ----------------------------------------------------------------------
def gradient_check(u: np.ndarray, z: np.ndarray, prob: StepProblem, step: float = 1e-5) -> dict:
    """Compare analytic gradients of the step functional with central differences.

    The damage iterate must be strictly inside the box by at least the
    finite-difference step.  Returns the relative errors per block and the
    raw gradients.
    """
    sp = prob.spaces
    grad_u = (
        sp.mass_u @ (u - 2.0 * prob.u_prev + prob.u_prevprev) / prob.tau**2
        + sp.stiffness(z, prob.material) @ u
        + prob.material.delta * sp.bilaplacian @ u
        - prob.load
    )
    grad_z = z_gradient(u, z, prob)

    fd_u = np.zeros(sp.n_u)
    for i in sp.free_u:
        up = u.copy()
        up[i] += step
        um = u.copy()
        um[i] -= step
        fd_u[i] = (functional_value(up, z, prob) - functional_value(um, z, prob)) / (2 * step)
    fd_z = np.zeros(sp.n_z)
    for i in range(sp.n_z):
        zp = z.copy()
        zp[i] += step
        zm = z.copy()
        zm[i] -= step
        fd_z[i] = (functional_value(u, zp, prob) - functional_value(u, zm, prob)) / (2 * step)

    free = sp.free_u
    err_u = np.linalg.norm(fd_u[free] - grad_u[free]) / max(np.linalg.norm(grad_u[free]), 1e-12)
    err_z = np.linalg.norm(fd_z - grad_z) / max(np.linalg.norm(grad_z), 1e-12)
    return {
        "rel_error_u": float(err_u),
        "rel_error_z": float(err_z),
        "max_rel_error": float(max(err_u, err_z)),
        "grad_u": grad_u,
        "grad_z": grad_z,
    }
