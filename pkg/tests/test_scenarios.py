import numpy as np
import pytest

from damagebar import (
    BoundaryMotion,
    InitialState,
    Scenario,
    VolumeLoad,
    default_material,
    onset_strain,
    quiescent_scenario,
    stretch_scenario,
)
from damagebar.material import MaterialModel


class TestBoundaryData:
    def test_constant_has_no_rates(self, spaces8):
        sc = Scenario(boundary=BoundaryMotion(family="constant", value=0.3))
        data = sc.eval_data(spaces8, 0.7)
        np.testing.assert_array_equal(data.bdot_dofs, np.zeros(spaces8.n_u))
        np.testing.assert_array_equal(data.bddot_dofs, np.zeros(spaces8.n_u))

    def test_ramp_rates_are_analytic(self, spaces8):
        rate = 0.5
        sc = stretch_scenario(rate=rate)
        data = sc.eval_data(spaces8, 0.4)
        expected_b = spaces8.hermite_interpolate(
            rate * 0.4 * spaces8.mesh.nodes, np.full(spaces8.n_z, rate * 0.4)
        )
        expected_bdot = spaces8.hermite_interpolate(
            rate * spaces8.mesh.nodes, np.full(spaces8.n_z, rate)
        )
        np.testing.assert_allclose(data.b_dofs, expected_b, rtol=1e-14)
        np.testing.assert_allclose(data.bdot_dofs, expected_bdot, rtol=1e-14)
        np.testing.assert_array_equal(data.bddot_dofs, np.zeros(spaces8.n_u))

    def test_sine_rates_match_finite_differences(self, spaces8):
        sc = Scenario(boundary=BoundaryMotion(family="sine", amplitude=0.7, omega=3.0))
        dt = 1e-6
        for t in (0.2, 0.55, 0.9):
            hi = sc.eval_data(spaces8, t + dt)
            lo = sc.eval_data(spaces8, t - dt)
            mid = sc.eval_data(spaces8, t)
            fd_rate = (hi.b_dofs - lo.b_dofs) / (2 * dt)
            fd_acc = (hi.bdot_dofs - lo.bdot_dofs) / (2 * dt)
            np.testing.assert_allclose(fd_rate, mid.bdot_dofs, rtol=1e-8, atol=1e-8)
            np.testing.assert_allclose(fd_acc, mid.bddot_dofs, rtol=1e-8, atol=1e-8)

    def test_time_domain_enforced(self, spaces8):
        sc = quiescent_scenario()
        with pytest.raises(ValueError):
            sc.eval_data(spaces8, -0.5)
        with pytest.raises(ValueError):
            sc.eval_data(spaces8, 1.5, final_time=1.0)

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            BoundaryMotion(family="polynomial")
        with pytest.raises(ValueError):
            VolumeLoad(family="spike")


class TestLoadData:
    def test_constant_load_functional(self, spaces8):
        sc = Scenario(load=VolumeLoad(family="constant", value=2.0))
        data = sc.eval_data(spaces8, 0.1)
        ones = spaces8.hermite_interpolate(np.ones(spaces8.n_z), np.zeros(spaces8.n_z))
        assert data.load_vector @ ones == pytest.approx(2.0 * spaces8.mesh.length, rel=1e-13)

    def test_pulse_travels(self, spaces8):
        sc = Scenario(load=VolumeLoad(family="pulse", amplitude=1.0, speed=0.5, width=0.1, center=0.2))
        early = sc.eval_data(spaces8, 0.0).load_vector
        late = sc.eval_data(spaces8, 1.0).load_vector
        # Center of mass of the load functional moves to the right.
        x_dofs = spaces8.hermite_interpolate(spaces8.mesh.nodes, np.ones(spaces8.n_z))
        ones = spaces8.hermite_interpolate(np.ones(spaces8.n_z), np.zeros(spaces8.n_z))
        com_early = (early @ x_dofs) / (early @ ones)
        com_late = (late @ x_dofs) / (late @ ones)
        assert com_late > com_early + 0.3

    def test_pulse_width_positive(self):
        with pytest.raises(ValueError):
            VolumeLoad(family="pulse", width=0.0)


class TestInitialState:
    def test_defaults(self, spaces8):
        u0, v0, z0 = quiescent_scenario().initial_fields(spaces8)
        np.testing.assert_array_equal(u0, np.zeros(spaces8.n_u))
        np.testing.assert_array_equal(v0, np.zeros(spaces8.n_u))
        np.testing.assert_array_equal(z0, np.ones(spaces8.n_z))

    def test_boundary_rate_start(self, spaces8):
        rate = 2.0
        _, v0, _ = stretch_scenario(rate=rate).initial_fields(spaces8)
        expected = spaces8.hermite_interpolate(
            rate * spaces8.mesh.nodes, np.full(spaces8.n_z, rate)
        )
        np.testing.assert_allclose(v0, expected, rtol=1e-14)

    def test_z0_range_enforced(self):
        with pytest.raises(ValueError):
            InitialState(z0=1.2)
        with pytest.raises(ValueError):
            InitialState(u0="random")

    def test_builtin_scenarios_regular(self, spaces8):
        for sc in (quiescent_scenario(), stretch_scenario(rate=1.0)):
            assert sc.check_regularity(spaces8, 1.0) == []


class TestOnsetStrain:
    def test_default_preset_value(self):
        # (1/2) h'(1) c0 e*^2 = kappa with h'(1) = 1.8: e* = sqrt(1/1.8).
        e_star = onset_strain(default_material())
        assert e_star == pytest.approx(np.sqrt(1.0 / 1.8), rel=1e-12)
        assert e_star == pytest.approx(0.745, abs=5e-4)

    def test_zero_threshold(self):
        assert onset_strain(default_material(kappa=0.0)) == 0.0

    def test_threshold_scaling(self):
        base = onset_strain(default_material(kappa=0.5))
        doubled = onset_strain(default_material(kappa=1.0))
        assert doubled == pytest.approx(np.sqrt(2.0) * base, rel=1e-12)

    def test_flat_degradation_signals(self):
        flat = MaterialModel(eta=0.1, h_coeffs=(0.5,))
        with pytest.raises(ValueError):
            onset_strain(flat)
