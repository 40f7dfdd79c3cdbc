"""Constitutive model for the damageable elastic bar.

The elastic energy density is ``W(e, z) = (1/2) h(z) c0 e**2`` where ``e`` is
the scalar strain, ``z`` in [0, 1] is the damage variable (1 = sound material,
0 = maximal damage) and ``h`` is a nondecreasing degradation function bounded
below by ``eta > 0`` so that the material never loses all stiffness.  The
damage potential ``f`` carries the activation threshold; in the default
preset ``f(z) = kappa * (1 - z)``.

Both ``h`` and ``f`` are polynomials given by coefficient lists (ascending
powers), which makes the admissibility checks (``h >= eta``, ``h' >= 0``,
``f >= 0``) meaningful via dense grid sampling plus exact differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = ["MaterialModel", "default_material", "Z_TOL"]

# Slack allowed when checking z in [0, 1]; solver iterates project exactly,
# so anything beyond round-off indicates a usage error.
Z_TOL = 1e-9

_VALIDATION_GRID = np.linspace(0.0, 1.0, 1001)


@dataclass(frozen=True)
class MaterialModel:
    """Coefficients of the constitutive functions and their admissibility.

    Parameters
    ----------
    eta : float
        Positive lower bound required of the degradation function ``h``.
    h_coeffs : tuple of float
        Polynomial coefficients of ``h`` on [0, 1], ascending powers.
    f_coeffs : tuple of float
        Polynomial coefficients of the damage potential ``f``, ascending.
    c0 : float
        Scalar stiffness (the 1D reduction of the elasticity tensor).
    p : float
        Exponent of the damage-gradient term, ``> 1``.
    delta : float
        Nonnegative weight of the fourth-order displacement regularization.
    kappa : float
        Activation threshold embedded in the default ``f(z) = kappa*(1-z)``.
    """

    eta: float = 0.1
    h_coeffs: tuple = (0.1, 0.0, 0.9)
    f_coeffs: tuple = (0.5, -0.5)
    c0: float = 1.0
    p: float = 2.0
    delta: float = 1e-3
    kappa: float = 0.5

    def __post_init__(self):
        # Construction never raises: ``validate`` is a report-only check so
        # that inadmissible models can still be inspected.  Run setup and
        # config parsing reject models whose report is nonempty.
        object.__setattr__(self, "h_coeffs", tuple(float(c) for c in self.h_coeffs))
        object.__setattr__(self, "f_coeffs", tuple(float(c) for c in self.f_coeffs))

    # ------------------------------------------------------------------
    # Constitutive functions
    # ------------------------------------------------------------------
    def h(self, z):
        """Degradation function h(z)."""
        return P.polyval(z, self.h_coeffs)

    def h_prime(self, z):
        """Derivative h'(z)."""
        return P.polyval(z, P.polyder(self.h_coeffs))

    def h_second(self, z):
        """Second derivative h''(z)."""
        return P.polyval(z, P.polyder(self.h_coeffs, 2))

    def f(self, z):
        """Damage potential f(z)."""
        return P.polyval(z, self.f_coeffs)

    def f_prime(self, z):
        """Derivative f'(z)."""
        return P.polyval(z, P.polyder(self.f_coeffs))

    def f_second(self, z):
        """Second derivative f''(z)."""
        return P.polyval(z, P.polyder(self.f_coeffs, 2))

    # ------------------------------------------------------------------
    # Energy density and its partial derivatives
    # ------------------------------------------------------------------
    def elastic_density(self, e, z):
        """Elastic energy density W(e, z) = (1/2) h(z) c0 e**2."""
        self._check_z(z)
        return 0.5 * self.h(z) * self.c0 * np.asarray(e) ** 2

    def stress(self, e, z):
        """Stress W_e(e, z) = h(z) c0 e (partial derivative in the strain)."""
        self._check_z(z)
        return self.h(z) * self.c0 * np.asarray(e)

    def damage_drive(self, e, z):
        """Damage driving density W_z(e, z) = (1/2) h'(z) c0 e**2.

        Nonnegative because h is nondecreasing.
        """
        self._check_z(z)
        return 0.5 * self.h_prime(z) * self.c0 * np.asarray(e) ** 2

    # ------------------------------------------------------------------
    # Admissibility
    # ------------------------------------------------------------------
    def validate(self) -> list:
        """Check the coefficient assumptions on a 1001-point grid of [0, 1].

        Returns a list of human-readable violation strings; an empty list
        means the model is admissible.
        """
        issues = []
        if not self.eta > 0.0:
            issues.append(f"eta must be positive, got {self.eta}")
        if not self.c0 > 0.0:
            issues.append(f"c0 must be positive, got {self.c0}")
        if not self.p > 1.0:
            issues.append(f"p must exceed 1, got {self.p}")
        if self.delta < 0.0:
            issues.append(f"delta must be nonnegative, got {self.delta}")
        if self.kappa < 0.0:
            issues.append(f"kappa must be nonnegative, got {self.kappa}")
        grid = _VALIDATION_GRID
        hv = P.polyval(grid, self.h_coeffs)
        if np.min(hv) < self.eta - 1e-12:
            issues.append(
                f"h >= eta violated: min h = {np.min(hv):.6g} < eta = {self.eta}"
            )
        hp = P.polyval(grid, P.polyder(self.h_coeffs))
        if np.min(hp) < -1e-12:
            issues.append(f"h' >= 0 violated: min h' = {np.min(hp):.6g}")
        fv = P.polyval(grid, self.f_coeffs)
        if np.min(fv) < -1e-12:
            issues.append(f"f >= 0 violated: min f = {np.min(fv):.6g}")
        return issues

    # ------------------------------------------------------------------
    @staticmethod
    def _check_z(z):
        z = np.asarray(z, dtype=float)
        if z.size and (np.min(z) < -Z_TOL or np.max(z) > 1.0 + Z_TOL):
            raise ValueError(
                f"damage out of range [0, 1]: min={np.min(z)}, max={np.max(z)}"
            )

    @property
    def h_degree(self) -> int:
        return len(self.h_coeffs) - 1

    @property
    def f_degree(self) -> int:
        return len(self.f_coeffs) - 1


def default_material(**overrides) -> MaterialModel:
    """Quadratic-degradation preset: h = eta + (1-eta) z^2, f = kappa (1-z).

    Keeps the per-step damage subproblem convex, so the incremental
    minimizer provably reaches the global optimum.  Keyword overrides
    replace individual fields; ``eta`` and ``kappa`` overrides rebuild the
    dependent coefficient lists unless those are given explicitly.
    """
    eta = float(overrides.pop("eta", 0.1))
    kappa = float(overrides.pop("kappa", 0.5))
    fields = {
        "eta": eta,
        "kappa": kappa,
        "h_coeffs": (eta, 0.0, 1.0 - eta),
        "f_coeffs": (kappa, -kappa),
    }
    fields.update(overrides)
    return MaterialModel(**fields)
