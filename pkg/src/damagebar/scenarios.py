"""Closed-form time-dependent data: boundary displacement, load, initial state.

Restricting the data to closed-form families guarantees the smoothness the
scheme needs (twice continuously differentiable boundary motion with a
Lipschitz second derivative, Lipschitz-in-time load) without any numerical
mollification.

Boundary families
-----------------
constant : ``b(x, t) = value``
ramp     : ``b(x, t) = rate * t * x`` (linear stretching of the bar)
sine     : ``b(x, t) = amplitude * sin(omega * t) * x``

Load families
-------------
zero     : no volume force
constant : ``l(x, t) = value``
pulse    : ``l(x, t) = amplitude * exp(-((x - center - speed*t) / width)**2)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretization import DiscreteSpaces
from .material import MaterialModel

__all__ = [
    "BoundaryMotion",
    "VolumeLoad",
    "InitialState",
    "Scenario",
    "DataSample",
    "onset_strain",
    "quiescent_scenario",
    "stretch_scenario",
]

_BOUNDARY_FAMILIES = ("constant", "ramp", "sine")
_LOAD_FAMILIES = ("zero", "constant", "pulse")
_U0_FAMILIES = ("zero", "boundary")
_V0_FAMILIES = ("zero", "boundary_rate")


@dataclass(frozen=True)
class BoundaryMotion:
    """Prescribed displacement field b(x, t), defined on the whole bar."""

    family: str = "constant"
    value: float = 0.0
    rate: float = 0.0
    amplitude: float = 0.0
    omega: float = 1.0

    def __post_init__(self):
        if self.family not in _BOUNDARY_FAMILIES:
            raise ValueError(
                f"unknown boundary family {self.family!r}; choose from {_BOUNDARY_FAMILIES}"
            )

    def value_at(self, x, t):
        if self.family == "constant":
            return np.full_like(np.asarray(x, dtype=float), self.value)
        if self.family == "ramp":
            return self.rate * t * np.asarray(x, dtype=float)
        return self.amplitude * math.sin(self.omega * t) * np.asarray(x, dtype=float)

    def slope_at(self, x, t):
        x = np.asarray(x, dtype=float)
        if self.family == "constant":
            return np.zeros_like(x)
        if self.family == "ramp":
            return np.full_like(x, self.rate * t)
        return np.full_like(x, self.amplitude * math.sin(self.omega * t))

    def dt_value_at(self, x, t):
        x = np.asarray(x, dtype=float)
        if self.family == "constant":
            return np.zeros_like(x)
        if self.family == "ramp":
            return self.rate * x
        return self.amplitude * self.omega * math.cos(self.omega * t) * x

    def dt_slope_at(self, x, t):
        x = np.asarray(x, dtype=float)
        if self.family == "constant":
            return np.zeros_like(x)
        if self.family == "ramp":
            return np.full_like(x, self.rate)
        return np.full_like(x, self.amplitude * self.omega * math.cos(self.omega * t))

    def dtt_value_at(self, x, t):
        x = np.asarray(x, dtype=float)
        if self.family in ("constant", "ramp"):
            return np.zeros_like(x)
        return -self.amplitude * self.omega**2 * math.sin(self.omega * t) * x

    def dtt_slope_at(self, x, t):
        x = np.asarray(x, dtype=float)
        if self.family in ("constant", "ramp"):
            return np.zeros_like(x)
        return np.full_like(x, -self.amplitude * self.omega**2 * math.sin(self.omega * t))


@dataclass(frozen=True)
class VolumeLoad:
    """Distributed force density l(x, t)."""

    family: str = "zero"
    value: float = 0.0
    amplitude: float = 0.0
    speed: float = 0.0
    width: float = 0.1
    center: float = 0.0

    def __post_init__(self):
        if self.family not in _LOAD_FAMILIES:
            raise ValueError(
                f"unknown load family {self.family!r}; choose from {_LOAD_FAMILIES}"
            )
        if self.family == "pulse" and not self.width > 0.0:
            raise ValueError(f"pulse width must be positive, got {self.width}")

    def value_at(self, x, t):
        x = np.asarray(x, dtype=float)
        if self.family == "zero":
            return np.zeros_like(x)
        if self.family == "constant":
            return np.full_like(x, self.value)
        arg = (x - self.center - self.speed * t) / self.width
        return self.amplitude * np.exp(-(arg**2))


@dataclass(frozen=True)
class InitialState:
    """Initial displacement, velocity and damage.

    ``u0 = "boundary"`` starts from the boundary field at t = 0 (compatible
    start); ``v0 = "boundary_rate"`` starts with the boundary velocity, which
    suppresses the start-up waves of a ramp.  ``z0`` is a uniform damage
    level in [0, 1].
    """

    u0: str = "zero"
    v0: str = "zero"
    z0: float = 1.0

    def __post_init__(self):
        if self.u0 not in _U0_FAMILIES:
            raise ValueError(f"unknown u0 family {self.u0!r}; choose from {_U0_FAMILIES}")
        if self.v0 not in _V0_FAMILIES:
            raise ValueError(f"unknown v0 family {self.v0!r}; choose from {_V0_FAMILIES}")
        if not 0.0 <= self.z0 <= 1.0:
            raise ValueError(f"z0 must lie in [0, 1], got {self.z0}")


@dataclass(frozen=True)
class DataSample:
    """Discrete realization of the data at one time instant."""

    b_dofs: np.ndarray
    bdot_dofs: np.ndarray
    bddot_dofs: np.ndarray
    load_vector: np.ndarray


@dataclass(frozen=True)
class Scenario:
    boundary: BoundaryMotion = field(default_factory=BoundaryMotion)
    load: VolumeLoad = field(default_factory=VolumeLoad)
    initial: InitialState = field(default_factory=InitialState)

    # ------------------------------------------------------------------
    def eval_data(self, spaces: DiscreteSpaces, t: float, final_time: float | None = None) -> DataSample:
        """Project the closed-form data at time t onto the discrete spaces.

        The boundary field and its time derivatives become Hermite
        interpolants (value and slope at every node); the load becomes the
        assembled force functional.  Raises when t is outside [0, T] if the
        final time is supplied.
        """
        if t < -1e-12 or (final_time is not None and t > final_time * (1.0 + 1e-12)):
            raise ValueError(f"time {t} outside [0, {final_time}]")
        nodes = spaces.mesh.nodes
        b = spaces.hermite_interpolate(
            self.boundary.value_at(nodes, t), self.boundary.slope_at(nodes, t)
        )
        bdot = spaces.hermite_interpolate(
            self.boundary.dt_value_at(nodes, t), self.boundary.dt_slope_at(nodes, t)
        )
        bddot = spaces.hermite_interpolate(
            self.boundary.dtt_value_at(nodes, t), self.boundary.dtt_slope_at(nodes, t)
        )
        load = spaces.load_vector(self.load.value_at(spaces.qx, t))
        return DataSample(b_dofs=b, bdot_dofs=bdot, bddot_dofs=bddot, load_vector=load)

    def initial_fields(self, spaces: DiscreteSpaces):
        """Initial (u, v, z) DoF vectors in the discrete spaces."""
        nodes = spaces.mesh.nodes
        if self.initial.u0 == "boundary":
            u0 = spaces.hermite_interpolate(
                self.boundary.value_at(nodes, 0.0), self.boundary.slope_at(nodes, 0.0)
            )
        else:
            u0 = np.zeros(spaces.n_u)
        if self.initial.v0 == "boundary_rate":
            v0 = spaces.hermite_interpolate(
                self.boundary.dt_value_at(nodes, 0.0), self.boundary.dt_slope_at(nodes, 0.0)
            )
        else:
            v0 = np.zeros(spaces.n_u)
        z0 = np.full(spaces.n_z, float(self.initial.z0))
        return u0, v0, z0

    # ------------------------------------------------------------------
    def check_regularity(self, spaces: DiscreteSpaces, final_time: float, n_samples: int = 7) -> list:
        """Numerically re-check the smoothness the closed forms promise.

        Central finite differences of the boundary data must match the
        analytic time derivatives; a Lipschitz bound on the load is probed
        on a sample grid.  Returns a list of violation strings.
        """
        issues = []
        dt = max(final_time, 1.0) * 1e-6
        times = np.linspace(dt, max(final_time - dt, dt), n_samples)
        for t in times:
            hi = self.eval_data(spaces, t + dt)
            lo = self.eval_data(spaces, t - dt)
            mid = self.eval_data(spaces, t)
            fd1 = (hi.b_dofs - lo.b_dofs) / (2.0 * dt)
            fd2 = (hi.bdot_dofs - lo.bdot_dofs) / (2.0 * dt)
            scale = 1.0 + np.linalg.norm(mid.bdot_dofs)
            if np.linalg.norm(fd1 - mid.bdot_dofs) > 1e-6 * scale:
                issues.append(f"boundary rate inconsistent at t={t:.4g}")
            scale = 1.0 + np.linalg.norm(mid.bddot_dofs)
            if np.linalg.norm(fd2 - mid.bddot_dofs) > 1e-6 * scale:
                issues.append(f"boundary acceleration inconsistent at t={t:.4g}")
        return issues


# ----------------------------------------------------------------------
# Derived quantities and presets
# ----------------------------------------------------------------------
def onset_strain(material: MaterialModel) -> float:
    """Strain at which damage starts from the undamaged state.

    Damage begins once the driving density at z = 1 turns positive, i.e.
    ``(1/2) h'(1) c0 e**2 = -f'(1)``.  For the default potential
    ``f = kappa (1 - z)`` this is ``e* = sqrt(2 kappa / (h'(1) c0))``.
    Raises when ``h'(1) = 0`` (no finite onset strain exists).
    """
    hp1 = float(material.h_prime(1.0))
    if hp1 <= 0.0:
        raise ValueError("h'(1) = 0: damage has no finite onset strain")
    threshold = max(0.0, -float(material.f_prime(1.0)))
    return math.sqrt(2.0 * threshold / (hp1 * material.c0))


def quiescent_scenario() -> Scenario:
    """Bar at rest: zero data, undamaged initial state."""
    return Scenario()


def stretch_scenario(rate: float = 0.5, smooth_start: bool = True) -> Scenario:
    """Linear stretching ramp ``b = rate * t * x`` clamped at both ends.

    With ``smooth_start`` the initial velocity matches the ramp, so the
    motion stays affine in space until damage localizes; otherwise the bar
    starts at rest and the ramp launches waves.
    """
    return Scenario(
        boundary=BoundaryMotion(family="ramp", rate=rate),
        load=VolumeLoad(family="zero"),
        initial=InitialState(u0="zero", v0="boundary_rate" if smooth_start else "zero", z0=1.0),
    )
