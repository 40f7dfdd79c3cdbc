"""1D finite element spaces for the coupled displacement/damage problem.

Displacements live in a C1-conforming piecewise-cubic (Hermite) space with
two degrees of freedom per node, value and slope, so the fourth-order
regularization form ``int u'' v'' dx`` is exactly representable.  The damage
field lives in the piecewise-linear nodal space, which makes ``|z'|``
constant per element and the damage-gradient energy closed-form.

All element integrals are evaluated with a fixed Gauss rule per element.
The rule is chosen exact for every polynomial integrand that occurs
(Hermite mass: degree 6; degradation-weighted stiffness: degree 4 plus the
degree of ``h``), so assembly agrees with analytic element integrals to
round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .material import MaterialModel

__all__ = ["Mesh1D", "DiscreteSpaces", "gauss_order_for"]


# ----------------------------------------------------------------------
# Mesh
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Mesh1D:
    """Uniform mesh of the interval (0, L).

    ``dirichlet`` names the endpoints where the displacement value is
    prescribed; it must be nonempty.  Clamping only one end leaves the other
    end traction-free (the natural condition of the weak form).
    """

    length: float
    num_elements: int
    dirichlet: tuple = ("left", "right")

    def __post_init__(self):
        if not self.length > 0.0:
            raise ValueError(f"mesh length must be positive, got {self.length}")
        if self.num_elements < 1:
            raise ValueError(f"need at least one element, got {self.num_elements}")
        ends = tuple(self.dirichlet)
        if not ends:
            raise ValueError("at least one endpoint must carry a Dirichlet condition")
        if any(e not in ("left", "right") for e in ends) or len(set(ends)) != len(ends):
            raise ValueError(f"dirichlet must be a subset of ('left','right'), got {ends}")
        object.__setattr__(self, "dirichlet", ends)

    @property
    def h(self) -> float:
        return self.length / self.num_elements

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.num_elements + 1)

    @property
    def dirichlet_nodes(self) -> tuple:
        out = []
        if "left" in self.dirichlet:
            out.append(0)
        if "right" in self.dirichlet:
            out.append(self.num_elements)
        return tuple(out)


def gauss_order_for(material: MaterialModel) -> int:
    """Points needed so every polynomial integrand of this model is exact.

    Highest degrees: Hermite mass 6, degradation-weighted ``u' v'`` is
    ``4 + deg h``, damage-potential terms are ``deg f``.
    """
    deg = max(6, 4 + material.h_degree, material.f_degree)
    return max(3, math.ceil((deg + 1) / 2))


# ----------------------------------------------------------------------
# Hermite shape functions on the reference interval [0, 1]
# ----------------------------------------------------------------------
def _hermite_tables(xi: np.ndarray, h: float):
    """Values/derivatives of the four Hermite shape functions at points xi.

    Slope DoFs are scaled by the element length so DoF vectors hold the
    physical derivative at the nodes.  Derivatives are with respect to the
    physical coordinate.
    """
    one = np.ones_like(xi)
    val = np.stack(
        [
            1.0 - 3.0 * xi**2 + 2.0 * xi**3,
            h * (xi - 2.0 * xi**2 + xi**3),
            3.0 * xi**2 - 2.0 * xi**3,
            h * (-(xi**2) + xi**3),
        ],
        axis=-1,
    )
    d1 = np.stack(
        [
            (-6.0 * xi + 6.0 * xi**2) / h,
            one - 4.0 * xi + 3.0 * xi**2,
            (6.0 * xi - 6.0 * xi**2) / h,
            -2.0 * xi + 3.0 * xi**2,
        ],
        axis=-1,
    )
    d2 = np.stack(
        [
            (-6.0 + 12.0 * xi) / h**2,
            (-4.0 + 6.0 * xi) / h,
            (6.0 - 12.0 * xi) / h**2,
            (-2.0 + 6.0 * xi) / h,
        ],
        axis=-1,
    )
    return val, d1, d2


class DiscreteSpaces:
    """Assembled constant matrices and quadrature tables for one mesh.

    Attributes
    ----------
    mass_u : ndarray (n_u, n_u)
        Hermite mass matrix (symmetric positive definite).
    bilaplacian : ndarray (n_u, n_u)
        Matrix of ``int u'' v'' dx`` (symmetric positive semidefinite;
        annihilates affine fields).
    mass_z : ndarray (n_z, n_z)
        Nodal mass matrix of the piecewise-linear space.
    """

    def __init__(self, mesh: Mesh1D, n_gauss: int = 5):
        if n_gauss < 3:
            raise ValueError(f"need at least 3 Gauss points, got {n_gauss}")
        self.mesh = mesh
        self.n_gauss = int(n_gauss)
        n_el = mesh.num_elements
        h = mesh.h

        self.n_u = 2 * (n_el + 1)
        self.n_z = n_el + 1

        # Gauss rule mapped to [0, 1]; element weights carry the length h.
        pts, wts = np.polynomial.legendre.leggauss(self.n_gauss)
        self.qp_ref = 0.5 * (pts + 1.0)
        self.qw = 0.5 * wts * h  # physical weights, identical for all elements
        # Physical quadrature coordinates, shape (n_el, n_gauss).
        self.qx = mesh.nodes[:-1, None] + h * self.qp_ref[None, :]

        # Shape-function tables on the reference element (uniform mesh:
        # identical for every element).
        self.herm_val, self.herm_d1, self.herm_d2 = _hermite_tables(self.qp_ref, h)
        self.lin_val = np.stack([1.0 - self.qp_ref, self.qp_ref], axis=-1)

        # Element -> global DoF maps.
        el = np.arange(n_el)
        self.u_dofmap = np.stack([2 * el, 2 * el + 1, 2 * el + 2, 2 * el + 3], axis=-1)
        self.z_dofmap = np.stack([el, el + 1], axis=-1)

        # Constant matrices.
        self.mass_u = self._assemble_u(np.einsum("q,qi,qj->ij", self.qw, self.herm_val, self.herm_val))
        self.bilaplacian = self._assemble_u(np.einsum("q,qi,qj->ij", self.qw, self.herm_d2, self.herm_d2))
        self.mass_z = self._assemble_z(np.einsum("q,qi,qj->ij", self.qw, self.lin_val, self.lin_val))
        for mat in (self.mass_u, self.bilaplacian, self.mass_z):
            mat.flags.writeable = False

        # Dirichlet bookkeeping: only the value DoF is constrained at a
        # clamped node; the slope DoF stays free (the condition fixes the
        # trace, not the derivative).
        self.dirichlet_value_dofs = np.array([2 * n for n in mesh.dirichlet_nodes], dtype=int)
        free = np.ones(self.n_u, dtype=bool)
        free[self.dirichlet_value_dofs] = False
        self.free_u = np.flatnonzero(free)

    # ------------------------------------------------------------------
    # Scatter helpers
    # ------------------------------------------------------------------
    def _assemble_u(self, elem: np.ndarray) -> np.ndarray:
        """Scatter one 4x4 element matrix (same for all elements) into u-space."""
        elem = 0.5 * (elem + elem.T)
        out = np.zeros((self.n_u, self.n_u))
        for e in range(self.mesh.num_elements):
            idx = self.u_dofmap[e]
            out[np.ix_(idx, idx)] += elem
        return out

    def _assemble_z(self, elem: np.ndarray) -> np.ndarray:
        elem = 0.5 * (elem + elem.T)
        out = np.zeros((self.n_z, self.n_z))
        for e in range(self.mesh.num_elements):
            idx = self.z_dofmap[e]
            out[np.ix_(idx, idx)] += elem
        return out

    # ------------------------------------------------------------------
    # Field evaluation at quadrature points
    # ------------------------------------------------------------------
    def z_at_quad(self, z: np.ndarray) -> np.ndarray:
        """Piecewise-linear field at the quadrature points, shape (n_el, Q)."""
        return np.einsum("qi,ei->eq", self.lin_val, z[self.z_dofmap])

    def u_deriv_at_quad(self, u: np.ndarray) -> np.ndarray:
        """First derivative of a Hermite field at quadrature points."""
        return np.einsum("qi,ei->eq", self.herm_d1, u[self.u_dofmap])

    def u_val_at_quad(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("qi,ei->eq", self.herm_val, u[self.u_dofmap])

    def integrate(self, values: np.ndarray) -> float:
        """Integrate point values of shape (n_el, Q) with the element rule."""
        return float(np.einsum("eq,q->", values, self.qw))

    # ------------------------------------------------------------------
    # Degradation-weighted stiffness
    # ------------------------------------------------------------------
    def stiffness(self, z: np.ndarray, material: MaterialModel) -> np.ndarray:
        """Assemble ``int h(z) c0 u' v' dx`` on the displacement space.

        ``z`` is the nodal damage field, interpolated linearly inside each
        element.  The result is symmetric positive semidefinite and becomes
        positive definite once Dirichlet values are eliminated.
        """
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n_z,):
            raise ValueError(f"expected nodal damage of length {self.n_z}, got {z.shape}")
        material._check_z(z)
        hq = material.h(self.z_at_quad(z)) * material.c0  # (n_el, Q)
        elem = np.einsum("eq,q,qi,qj->eij", hq, self.qw, self.herm_d1, self.herm_d1)
        elem = 0.5 * (elem + elem.transpose(0, 2, 1))  # exact symmetry
        out = np.zeros((self.n_u, self.n_u))
        for e in range(self.mesh.num_elements):
            idx = self.u_dofmap[e]
            out[np.ix_(idx, idx)] += elem[e]
        return out

    def load_vector(self, quad_values: np.ndarray) -> np.ndarray:
        """Assemble ``int g v dx`` from point values g of shape (n_el, Q)."""
        contrib = np.einsum("eq,q,qi->ei", quad_values, self.qw, self.herm_val)
        out = np.zeros(self.n_u)
        np.add.at(out, self.u_dofmap, contrib)
        return out

    def z_load_vector(self, quad_values: np.ndarray) -> np.ndarray:
        """Assemble ``int g w dx`` against the nodal damage basis."""
        contrib = np.einsum("eq,q,qi->ei", quad_values, self.qw, self.lin_val)
        out = np.zeros(self.n_z)
        np.add.at(out, self.z_dofmap, contrib)
        return out

    def weighted_mass_z(self, quad_values: np.ndarray) -> np.ndarray:
        """Assemble ``int g v w dx`` on the nodal space from point values g."""
        elem = np.einsum("eq,q,qi,qj->eij", quad_values, self.qw, self.lin_val, self.lin_val)
        elem = 0.5 * (elem + elem.transpose(0, 2, 1))
        out = np.zeros((self.n_z, self.n_z))
        for e in range(self.mesh.num_elements):
            idx = self.z_dofmap[e]
            out[np.ix_(idx, idx)] += elem[e]
        return out

    def lumped_z_weights(self) -> np.ndarray:
        """Diagonal (lumped) nodal weights ``int phi_i dx``."""
        return self.mass_z @ np.ones(self.n_z)

    # ------------------------------------------------------------------
    # Damage-gradient (p-Laplacian) energy
    # ------------------------------------------------------------------
    def _slopes(self, z: np.ndarray) -> np.ndarray:
        return (z[1:] - z[:-1]) / self.mesh.h

    @staticmethod
    def _p_smooth(p: float) -> float:
        # Exponents below 2 make |z'|^(p-2) singular at z' = 0; a tiny
        # isotropic smoothing keeps the Hessian finite.  Exact for p >= 2.
        return 1e-12 if p < 2.0 else 0.0

    def p_laplacian_energy(self, z: np.ndarray, material: MaterialModel) -> float:
        """Exact damage-gradient energy ``(1/p) int |z'|^p dx``."""
        p = material.p
        s = self._slopes(np.asarray(z, dtype=float))
        eps = self._p_smooth(p)
        mag = np.sqrt(s**2 + eps**2) if eps else np.abs(s)
        return float(self.mesh.h / p * np.sum(mag**p))

    def p_laplacian_grad(self, z: np.ndarray, material: MaterialModel) -> np.ndarray:
        """Gradient of the damage-gradient energy in the nodal basis.

        Exact for piecewise-linear fields: the slope is constant per
        element, so each element contributes ``+-|s|^(p-2) s`` to its two
        end nodes.
        """
        p = material.p
        s = self._slopes(np.asarray(z, dtype=float))
        eps = self._p_smooth(p)
        flux = (s**2 + eps**2) ** ((p - 2.0) / 2.0) * s if eps else np.abs(s) ** (p - 2.0) * s
        out = np.zeros(self.n_z)
        out[:-1] -= flux
        out[1:] += flux
        return out

    def p_laplacian_hess(self, z: np.ndarray, material: MaterialModel) -> np.ndarray:
        """Hessian of the damage-gradient energy (positive semidefinite for p >= 2)."""
        p = material.p
        s = self._slopes(np.asarray(z, dtype=float))
        eps = self._p_smooth(p)
        if eps:
            w = (s**2 + eps**2) ** ((p - 4.0) / 2.0) * ((p - 1.0) * s**2 + eps**2)
        else:
            w = (p - 1.0) * np.abs(s) ** (p - 2.0)
        w = w / self.mesh.h
        out = np.zeros((self.n_z, self.n_z))
        idx = np.arange(self.n_z - 1)
        np.add.at(out, (idx, idx), w)
        np.add.at(out, (idx + 1, idx + 1), w)
        np.add.at(out, (idx, idx + 1), -w)
        np.add.at(out, (idx + 1, idx), -w)
        return out

    # ------------------------------------------------------------------
    # Norms
    # ------------------------------------------------------------------
    def norm(self, field: np.ndarray, which: str, p: float = 2.0) -> float:
        """Norms used by the a priori monitors.

        ``which`` is one of ``"L2"``, ``"H1"``, ``"H2"`` (seminorm, u-space)
        or ``"W1p"`` (z-space, exponent ``p``).  The space is inferred from
        the vector length; a mismatch raises.
        """
        field = np.asarray(field, dtype=float)
        if which in ("H1", "H2"):
            self._expect_u(field, which)
        elif which == "W1p":
            self._expect_z(field, which)
        elif which == "L2":
            if field.shape == (self.n_u,):
                return math.sqrt(max(float(field @ self.mass_u @ field), 0.0))
            if field.shape == (self.n_z,):
                return math.sqrt(max(float(field @ self.mass_z @ field), 0.0))
            raise ValueError(f"field of shape {field.shape} fits neither space")
        else:
            raise ValueError(f"unknown norm {which!r}")

        if which == "H1":
            du = self.u_deriv_at_quad(field)
            return math.sqrt(
                max(float(field @ self.mass_u @ field) + self.integrate(du**2), 0.0)
            )
        if which == "H2":
            return math.sqrt(max(float(field @ self.bilaplacian @ field), 0.0))
        # W1p
        zq = self.z_at_quad(field)
        s = self._slopes(field)
        val_part = self.integrate(np.abs(zq) ** p)
        grad_part = self.mesh.h * np.sum(np.abs(s) ** p)
        return float((val_part + grad_part) ** (1.0 / p))

    def _expect_u(self, field, which):
        if field.shape != (self.n_u,):
            raise ValueError(f"{which} norm needs a displacement field of length {self.n_u}")

    def _expect_z(self, field, which):
        if field.shape != (self.n_z,):
            raise ValueError(f"{which} norm needs a nodal field of length {self.n_z}")

    # ------------------------------------------------------------------
    # Interpolation into the displacement space
    # ------------------------------------------------------------------
    def hermite_interpolate(self, values: np.ndarray, slopes: np.ndarray) -> np.ndarray:
        """DoF vector of the Hermite interpolant with given nodal data."""
        out = np.empty(self.n_u)
        out[0::2] = values
        out[1::2] = slopes
        return out

    def u_values(self, u: np.ndarray) -> np.ndarray:
        return u[0::2]

    def u_slopes(self, u: np.ndarray) -> np.ndarray:
        return u[1::2]

    # ------------------------------------------------------------------
    # Linear solves with Dirichlet elimination
    # ------------------------------------------------------------------
    def solve_dirichlet(self, matrix: np.ndarray, rhs: np.ndarray, bc_values: np.ndarray) -> tuple:
        """Solve ``matrix @ u = rhs`` with prescribed Dirichlet value DoFs.

        The system restricted to the free DoFs is symmetric positive
        definite (half bandwidth 3 with Hermite numbering); a Cholesky
        factorization solves it directly.  Returns the full DoF vector and
        the Euclidean residual norm on the free DoFs.
        """
        u = np.zeros(self.n_u)
        u[self.dirichlet_value_dofs] = bc_values
        free = self.free_u
        reduced_rhs = rhs[free] - matrix[np.ix_(free, self.dirichlet_value_dofs)] @ bc_values
        a = matrix[np.ix_(free, free)]
        c, low = scipy.linalg.cho_factor(a, check_finite=False)
        u[free] = scipy.linalg.cho_solve((c, low), reduced_rhs, check_finite=False)
        residual = float(np.linalg.norm(a @ u[free] - reduced_rhs))
        return u, residual
