"""Shared fixtures and an independent exact-integration oracle.

The oracle represents element fields as numpy ``Polynomial`` objects in the
local coordinate ``xi`` in [0, 1] and integrates products symbolically
(antiderivative evaluation), giving a code path fully independent of the
package's Gauss-quadrature assembly.
"""

import numpy as np
import pytest
from numpy.polynomial import Polynomial as Poly

from damagebar import DiscreteSpaces, Mesh1D, default_material


# ----------------------------------------------------------------------
# Exact element integration in the local coordinate
# ----------------------------------------------------------------------
def hermite_polys(h):
    """The four cubic shape functions on [0, 1], slope DoFs scaled by h."""
    return (
        Poly([1.0, 0.0, -3.0, 2.0]),
        Poly([0.0, 1.0, -2.0, 1.0]) * h,
        Poly([0.0, 0.0, 3.0, -2.0]),
        Poly([0.0, 0.0, -1.0, 1.0]) * h,
    )


def element_u_poly(dofs, h):
    """Hermite field on one element as a polynomial in xi."""
    shapes = hermite_polys(h)
    return sum(float(d) * s for d, s in zip(dofs, shapes))


def element_z_poly(z_left, z_right):
    return Poly([float(z_left), float(z_right) - float(z_left)])


def integrate_element(poly, h):
    """Exact integral over one element of length h of a polynomial in xi."""
    anti = poly.integ()
    return h * (anti(1.0) - anti(0.0))


def compose(coeffs, inner):
    """Polynomial composition c0 + c1*inner + c2*inner^2 + ..."""
    result = Poly([0.0])
    power = Poly([1.0])
    for c in coeffs:
        result = result + float(c) * power
        power = power * inner
    return result


# ----------------------------------------------------------------------
# Fixtures
# ----------------------------------------------------------------------
@pytest.fixture
def material():
    return default_material()


@pytest.fixture
def mesh2():
    return Mesh1D(length=1.0, num_elements=2)


@pytest.fixture
def spaces2(mesh2):
    return DiscreteSpaces(mesh2)


@pytest.fixture
def spaces8():
    return DiscreteSpaces(Mesh1D(length=1.0, num_elements=8))


def rng(seed=0):
    return np.random.default_rng(seed)
