"""Energy accounting and optimality certification for a computed trajectory.

For every step the auditor evaluates the discrete energy-dissipation
inequality

    F(t) + K(t) + D(0,t) + E(0,t)  <=  F(0) + K(0) + W_ext(0,t)

where F is the free energy (damage-gradient + elastic + potential + the
fourth-order regularization), K the kinetic energy of the difference-quotient
velocity, D the accumulated damage dissipation, W_ext the external work in
its summation-by-parts form (five summands) and E the time-discretization
error term.  The slack (right minus left side) must be nonnegative up to
solver tolerance for exact incremental minimizers.

It also reconstructs the reaction force ``xi`` that keeps the damage
nonnegative,

    xi = -chi_{z=0} max(0, W_z(e, z) + f'(z)),

checks its sign and support, and certifies the per-step variational
inequality of the damage subproblem on a set of admissible test directions.

Everything here is a pure function of the trajectory; re-auditing stored
snapshots reproduces the ledger bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .material import MaterialModel
from .stepper import StepProblem, Trajectory, kkt_residual, momentum_residual, z_gradient

__all__ = [
    "AuditOptions",
    "LedgerRow",
    "EnergyLedger",
    "SubgradientField",
    "free_energy",
    "kinetic_energy",
    "dissipation_increment",
    "external_work_increment",
    "error_increments",
    "ibp_identity",
    "feasibility_violations",
    "xi_reconstruct",
    "xi_checks",
    "vi_check",
    "energy_inequality_check",
    "audit_trajectory",
]

LEDGER_COLUMNS = (
    "m",
    "t",
    "F",
    "K",
    "D",
    "Wext_1",
    "Wext_2",
    "Wext_3",
    "Wext_4",
    "Wext_5",
    "E1",
    "E2",
    "slack",
    "xi_min",
    "vi_min",
)


@dataclass(frozen=True)
class AuditOptions:
    """Tolerances and sampling controls of the auditor.

    The energy slack is allowed down to ``-eps_audit * (1 + |RHS|)``: solver
    tolerances enter the inequality linearly, so the slack floor scales with
    the audited quantity.  ``eps_active`` realizes the set {z = 0}; the
    damage solver projects exactly onto the bound, so the threshold only
    guards round-off.
    """

    eps_audit: float = 1e-7
    eps_active: float = 1e-10
    vi_tol: float = 1e-8
    xi_tol: float = 1e-8
    tol_momentum: float = 1e-9
    tol_kkt: float = 1e-9
    n_random_directions: int = 3
    seed: int = 12345


# ----------------------------------------------------------------------
# Energy pieces
# ----------------------------------------------------------------------
def free_energy(u: np.ndarray, z: np.ndarray, spaces, material: MaterialModel) -> float:
    """Damage-gradient + elastic + potential energy + regularization part."""
    zq = spaces.z_at_quad(z)
    du = spaces.u_deriv_at_quad(u)
    value = spaces.p_laplacian_energy(z, material)
    value += spaces.integrate(0.5 * material.h(zq) * material.c0 * du**2)
    value += spaces.integrate(material.f(zq))
    value += 0.5 * material.delta * float(u @ spaces.bilaplacian @ u)
    return value


def kinetic_energy(v: np.ndarray, spaces) -> float:
    """(1/2) ||v||^2 in the displacement mass inner product."""
    return 0.5 * float(v @ spaces.mass_u @ v)


def dissipation_increment(z: np.ndarray, z_prev: np.ndarray, spaces, tau: float) -> float:
    """tau * ||(z - z_prev)/tau||^2, the damage dissipation of one step."""
    dz = z - z_prev
    return float(dz @ spaces.mass_z @ dz) / tau


def _rate_samples(traj: Trajectory):
    """Difference quotients a_m = (b_m - b_{m-1})/tau with a_0 := a_1.

    The start value makes the discrete summation-by-parts identity exact and
    matches the boundary velocity in the limit.
    """
    tau = traj.tau
    rates = [None] * (traj.num_steps + 1)
    for m in range(1, traj.num_steps + 1):
        rates[m] = (traj.b_samples[m] - traj.b_samples[m - 1]) / tau
    rates[0] = rates[1]
    return rates


def external_work_increment(traj: Trajectory, m: int) -> tuple:
    """The five external-work summands contributed by step m.

    1. stress against the boundary motion,
    2. velocity against the second difference quotient of the boundary data,
    3. increment of the boundary pairing ``<v(t), b_rate(t)>`` (telescopes),
    4. load against the relative motion,
    5. regularization form against the boundary motion.
    """
    if m < 1:
        raise ValueError("external work increments start at step 1")
    sp, mat = traj.spaces, traj.material
    rates = _rate_samples(traj)
    state = traj.states[m]
    db = traj.b_samples[m] - traj.b_samples[m - 1]
    v_prev = traj.states[m - 1].v
    mass = sp.mass_u

    w1 = float(state.u @ sp.stiffness(state.z, mat) @ db)
    w2 = -float(v_prev @ mass @ (rates[m] - rates[m - 1]))
    if m == 1:
        w3 = float((state.v - v_prev) @ mass @ rates[1])
    else:
        w3 = float(state.v @ mass @ rates[m]) - float(v_prev @ mass @ rates[m - 1])
    w4 = float(traj.load_samples[m] @ ((state.u - traj.states[m - 1].u) - db))
    w5 = mat.delta * float(state.u @ sp.bilaplacian @ db)
    return (w1, w2, w3, w4, w5)


def ibp_identity(traj: Trajectory, upto: int | None = None) -> tuple:
    """Both sides of the discrete summation-by-parts identity.

    Left: accumulated ``<v_m - v_{m-1}, a_m>``.  Right: boundary pairing at
    the final step minus the initial one, minus the accumulated
    ``<v_{m-1}, a_m - a_{m-1}>``.  Equal up to round-off.
    """
    upto = traj.num_steps if upto is None else upto
    rates = _rate_samples(traj)
    mass = traj.spaces.mass_u
    lhs = 0.0
    corr = 0.0
    for m in range(1, upto + 1):
        lhs += float((traj.states[m].v - traj.states[m - 1].v) @ mass @ rates[m])
        corr += float(traj.states[m - 1].v @ mass @ (rates[m] - rates[m - 1]))
    rhs = (
        float(traj.states[upto].v @ mass @ rates[upto])
        - float(traj.states[0].v @ mass @ rates[0])
        - corr
    )
    return lhs, rhs


def error_increments(traj: Trajectory, m: int) -> tuple:
    """Discretization error contributed by step m, split as (E1, E2).

    E1 pairs the degradation drop against the previous strain plus the
    driving density against the damage rate.  E2 is the same construction
    for the potential ``f``; it equals the integrated second-order Taylor
    remainder of ``f`` around the new damage value, so it vanishes
    identically for affine ``f``.
    """
    if m < 1:
        raise ValueError("error increments start at step 1")
    sp, mat = traj.spaces, traj.material
    z_now = sp.z_at_quad(traj.states[m].z)
    z_old = sp.z_at_quad(traj.states[m - 1].z)
    du_old = sp.u_deriv_at_quad(traj.states[m - 1].u)
    du_now = sp.u_deriv_at_quad(traj.states[m].u)

    e1 = sp.integrate(0.5 * (mat.h(z_old) - mat.h(z_now)) * mat.c0 * du_old**2)
    e1 += sp.integrate(0.5 * mat.h_prime(z_now) * mat.c0 * du_now**2 * (z_now - z_old))

    # Taylor remainder of f at z_now evaluated at z_old (orders >= 2).
    d = z_old - z_now
    remainder = np.zeros_like(d)
    coeffs = mat.f_coeffs
    factorial = 1.0
    for k in range(2, len(coeffs)):
        factorial *= k
        deriv = P.polyder(coeffs, k)
        remainder += P.polyval(z_now, deriv) / factorial * d**k
    e2 = sp.integrate(remainder)
    return float(e1), float(e2)


# ----------------------------------------------------------------------
# Feasibility, residuals
# ----------------------------------------------------------------------
def feasibility_violations(traj: Trajectory) -> list:
    """Exact irreversibility/box checks plus the boundary trace; no tolerance
    on the damage constraints."""
    issues = []
    for m, state in enumerate(traj.states):
        if np.any(state.z < 0.0) or np.any(state.z > 1.0):
            issues.append(f"step {m}: damage outside [0, 1]")
        if m >= 1 and np.any(state.z > traj.states[m - 1].z):
            issues.append(f"step {m}: irreversibility violated")
        bc = traj.spaces.dirichlet_value_dofs
        gap = np.max(np.abs(state.u[bc] - traj.b_samples[m][bc]), initial=0.0)
        if gap > 1e-10 * (1.0 + float(np.max(np.abs(traj.b_samples[m][bc]), initial=0.0))):
            issues.append(f"step {m}: boundary trace off by {gap:.3e}")
    return issues


def _step_problem(traj: Trajectory, m: int) -> StepProblem:
    state = traj.states[m]
    return StepProblem(
        spaces=traj.spaces,
        material=traj.material,
        tau=traj.tau,
        u_prev=state.u_prev,
        u_prevprev=state.u_prevprev,
        z_prev=state.z_prev,
        b_dofs=traj.b_samples[m],
        load=traj.load_samples[m],
    )


def residual_report(traj: Trajectory, options: AuditOptions) -> dict:
    """Recompute force-balance and damage KKT residuals for every step."""
    mom = [0.0]
    kkt = [0.0]
    for m in range(1, traj.num_steps + 1):
        prob = _step_problem(traj, m)
        state = traj.states[m]
        mom.append(momentum_residual(state.u, state.z, prob))
        kkt.append(kkt_residual(state.u, state.z, prob))
    return {
        "max_momentum_residual": float(max(mom)),
        "max_kkt_residual": float(max(kkt)),
        "passed": bool(
            max(mom) <= options.tol_momentum and max(kkt) <= options.tol_kkt
        ),
    }


# ----------------------------------------------------------------------
# Subgradient reconstruction
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class SubgradientField:
    """Nodal reaction force keeping z >= 0, with its active set."""

    xi: np.ndarray
    active: np.ndarray
    drive: np.ndarray

    @property
    def min(self) -> float:
        return float(np.min(self.xi)) if self.xi.size else 0.0


def xi_reconstruct(u, z, spaces, material: MaterialModel, eps_active: float = 1e-10) -> SubgradientField:
    """Closed-form subgradient ``-chi_{z<=eps} max(0, W_z + f')`` nodewise.

    The strain at a node is the slope DoF of the conforming displacement,
    so the driving density is evaluated exactly at the nodes.
    """
    slopes = spaces.u_slopes(u)
    drive = 0.5 * material.h_prime(z) * material.c0 * slopes**2 + material.f_prime(z)
    active = z <= eps_active
    xi = np.where(active, -np.maximum(0.0, drive), 0.0)
    return SubgradientField(xi=xi, active=active, drive=drive)


def xi_checks(traj: Trajectory, options: AuditOptions) -> dict:
    """Sign, support and orthogonality of the reconstructed subgradient.

    The run integral of ``xi`` against the damage rate is accumulated with
    lumped nodal weights over nodes that were already fully damaged when the
    step began; there the rate vanishes up to the activation threshold, so
    the integral must be zero within tolerance.  Contributions of the single
    step in which a node first reaches the bound are reported separately
    (``transition_integral``) and tolerated.  The consolidated inequality
    (damage evolution against nonpositive test directions, with the
    subgradient added back) is sampled with seeded random directions.
    """
    sp, mat = traj.spaces, traj.material
    weights = sp.lumped_z_weights()
    rng = np.random.default_rng(options.seed)
    max_xi = -math.inf
    support_bad = 0
    counted = 0.0
    transition = 0.0
    scale_abs = 0.0
    cons_min = math.inf
    any_active = False
    for m in range(1, traj.num_steps + 1):
        state = traj.states[m]
        fieldm = xi_reconstruct(state.u, state.z, sp, mat, options.eps_active)
        any_active = any_active or bool(np.any(fieldm.active))
        max_xi = max(max_xi, float(np.max(fieldm.xi)))
        support_bad += int(np.sum((np.abs(fieldm.xi) > 0.0) & ~fieldm.active))
        dz = state.z - state.z_prev
        terms = weights * fieldm.xi * dz
        was_active = state.z_prev <= options.eps_active
        counted += float(np.sum(terms[was_active]))
        transition += float(np.sum(terms[~was_active]))
        scale_abs += float(np.sum(np.abs(terms)))

        prob = _step_problem(traj, m)
        g = z_gradient(state.u, state.z, prob)
        cons_scale = 1.0 + float(np.sum(np.abs(g))) + float(np.sum(weights * np.abs(fieldm.xi)))
        for _ in range(options.n_random_directions):
            zeta = -rng.uniform(0.0, 1.0, sp.n_z)
            value = float(g @ zeta) + float(np.sum(weights * fieldm.xi * zeta))
            cons_min = min(cons_min, value / cons_scale)
    ortho_scale = 1.0 + scale_abs
    return {
        "max_xi": max_xi,
        "support_violations": support_bad,
        "orthogonality_integral": counted,
        "transition_integral": transition,
        "orthogonality_scale": ortho_scale,
        "consolidated_min_scaled": cons_min if cons_min < math.inf else 0.0,
        "active_set_hit": any_active,
        "passed": bool(
            max_xi <= 1e-15
            and support_bad == 0
            and abs(counted) <= options.xi_tol * ortho_scale
            and (cons_min == math.inf or cons_min >= -options.xi_tol)
        ),
    }


# ----------------------------------------------------------------------
# Variational inequality of the damage subproblem
# ----------------------------------------------------------------------
def vi_values_for_step(traj: Trajectory, m: int, options: AuditOptions, rng) -> tuple:
    """VI pairing ``<grad, zeta - z_m>`` over the canonical direction set.

    Directions: zero, the previous damage, the minimizer itself, the
    box-extremal direction that minimizes the pairing (zero where the
    gradient is positive, the upper bound elsewhere), plus seeded random
    admissible fields.  Returns (most negative value, scale).
    """
    state = traj.states[m]
    prob = _step_problem(traj, m)
    g = z_gradient(state.u, state.z, prob)
    hi = state.z_prev
    directions = [
        np.zeros_like(state.z),
        hi,
        state.z,
        np.where(g > 0.0, 0.0, hi),
    ]
    for _ in range(options.n_random_directions):
        directions.append(rng.uniform(0.0, 1.0, state.z.size) * hi)
    worst = min(float(g @ (zeta - state.z)) for zeta in directions)
    scale = 1.0 + float(np.sum(np.abs(g)))
    return worst, scale


def vi_check(traj: Trajectory, options: AuditOptions | None = None) -> dict:
    """Certify the per-step variational inequality over sampled directions."""
    options = options or AuditOptions()
    rng = np.random.default_rng(options.seed)
    per_step = [0.0]
    scaled = [0.0]
    for m in range(1, traj.num_steps + 1):
        worst, scale = vi_values_for_step(traj, m, options, rng)
        per_step.append(worst)
        scaled.append(worst / scale)
    min_scaled = float(min(scaled))
    return {
        "per_step_min": per_step,
        "min_scaled": min_scaled,
        "passed": bool(min_scaled >= -options.vi_tol),
        "seed": options.seed,
    }


# ----------------------------------------------------------------------
# Energy inequality
# ----------------------------------------------------------------------
def energy_inequality_check(traj: Trajectory, options: AuditOptions | None = None) -> dict:
    """Per-step slack of the discrete energy-dissipation inequality.

    Also reports the slack of the limit form with the regularization terms
    dropped on both sides (informational: only the regularized inequality
    is guaranteed at the discrete level when delta > 0).
    """
    options = options or AuditOptions()
    sp, mat = traj.spaces, traj.material
    state0 = traj.states[0]
    f0 = free_energy(state0.u, state0.z, sp, mat)
    k0 = kinetic_energy(state0.v, sp)
    reg0 = 0.5 * mat.delta * float(state0.u @ sp.bilaplacian @ state0.u)

    slacks = [0.0]
    limit_slacks = [0.0]
    rhs_values = [f0 + k0]
    diss = 0.0
    e1 = 0.0
    e2 = 0.0
    wext = np.zeros(5)
    for m in range(1, traj.num_steps + 1):
        state = traj.states[m]
        wext += np.array(external_work_increment(traj, m))
        de1, de2 = error_increments(traj, m)
        e1 += de1
        e2 += de2
        diss += dissipation_increment(state.z, state.z_prev, sp, traj.tau)
        fm = free_energy(state.u, state.z, sp, mat)
        km = kinetic_energy(state.v, sp)
        rhs = f0 + k0 + float(np.sum(wext))
        lhs = fm + km + diss + e1 + e2
        slacks.append(rhs - lhs)
        rhs_values.append(rhs)
        regm = 0.5 * mat.delta * float(state.u @ sp.bilaplacian @ state.u)
        limit_rhs = rhs - reg0 - wext[4]
        limit_lhs = lhs - regm
        limit_slacks.append(limit_rhs - limit_lhs)

    slacks = np.asarray(slacks)
    rhs_values = np.asarray(rhs_values)
    floors = -options.eps_audit * (1.0 + np.abs(rhs_values))
    return {
        "slacks": slacks,
        "rhs": rhs_values,
        "floors": floors,
        "limit_slacks": np.asarray(limit_slacks),
        "min_slack": float(np.min(slacks)),
        "worst_margin": float(np.min(slacks - floors)),
        "passed": bool(np.all(slacks >= floors)),
    }


# ----------------------------------------------------------------------
# Ledger assembly
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class LedgerRow:
    m: int
    t: float
    free_energy: float
    kinetic: float
    dissipation: float
    wext: tuple
    e1: float
    e2: float
    slack: float
    xi_min: float
    vi_min: float

    def as_csv(self) -> list:
        return (
            [str(self.m), repr(self.t), repr(self.free_energy), repr(self.kinetic), repr(self.dissipation)]
            + [repr(w) for w in self.wext]
            + [repr(self.e1), repr(self.e2), repr(self.slack), repr(self.xi_min), repr(self.vi_min)]
        )


@dataclass
class EnergyLedger:
    """Per-step energy accounting rows plus the audit verdicts."""

    rows: list
    options: AuditOptions
    checks: dict = field(default_factory=dict)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(LEDGER_COLUMNS)
            for row in self.rows:
                writer.writerow(row.as_csv())

    @property
    def min_slack(self) -> float:
        return min(row.slack for row in self.rows)

    @property
    def passed(self) -> bool:
        return all(check.get("passed", True) for check in self.checks.values())

    def summary(self) -> dict:
        out = {
            "passed": self.passed,
            "min_slack": self.min_slack,
            "max_slack": max(row.slack for row in self.rows),
            "final_free_energy": self.rows[-1].free_energy,
            "final_kinetic": self.rows[-1].kinetic,
            "final_dissipation": self.rows[-1].dissipation,
            "checks": {},
        }
        for name, check in self.checks.items():
            entry = {k: v for k, v in check.items() if np.isscalar(v) or isinstance(v, (bool, int, float, str))}
            out["checks"][name] = entry
        return out


def audit_trajectory(traj: Trajectory, options: AuditOptions | None = None) -> EnergyLedger:
    """Run every check and assemble the per-step ledger."""
    options = options or AuditOptions()
    sp, mat = traj.spaces, traj.material
    energy = energy_inequality_check(traj, options)
    vi = vi_check(traj, options)
    xi = xi_checks(traj, options)
    residuals = residual_report(traj, options)
    feas = feasibility_violations(traj)

    rows = []
    diss = 0.0
    e1 = 0.0
    e2 = 0.0
    wext = np.zeros(5)
    for m in range(traj.num_steps + 1):
        state = traj.states[m]
        if m >= 1:
            wext += np.array(external_work_increment(traj, m))
            de1, de2 = error_increments(traj, m)
            e1 += de1
            e2 += de2
            diss += dissipation_increment(state.z, state.z_prev, sp, traj.tau)
        xi_field = xi_reconstruct(state.u, state.z, sp, mat, options.eps_active)
        rows.append(
            LedgerRow(
                m=m,
                t=traj.time_grid.time(m),
                free_energy=free_energy(state.u, state.z, sp, mat),
                kinetic=kinetic_energy(state.v, sp),
                dissipation=diss,
                wext=tuple(float(w) for w in wext),
                e1=e1,
                e2=e2,
                slack=float(energy["slacks"][m]),
                xi_min=xi_field.min,
                vi_min=float(vi["per_step_min"][m]),
            )
        )

    checks = {
        "energy_inequality": {
            "passed": energy["passed"],
            "min_slack": energy["min_slack"],
            "worst_margin": energy["worst_margin"],
            "limit_form_min_slack": float(np.min(energy["limit_slacks"])),
        },
        "feasibility": {"passed": not feas, "violations": feas},
        "variational_inequality": {"passed": vi["passed"], "min_scaled": vi["min_scaled"]},
        "subgradient": xi,
        "residuals": residuals,
    }
    return EnergyLedger(rows=rows, options=options, checks=checks)
