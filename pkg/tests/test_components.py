"""Component constructors against direct implementations of their balance laws."""

import numpy as np
import pytest

from h2ph.components import (
    CompressorParams,
    DeviceKind,
    SectorDeviceParams,
    StorageParams,
    make_compressor,
    make_junction,
    make_pipe,
    make_sector_device,
    make_storage,
    nernst_open_circuit,
    weymouth_mean_pressure,
)
from h2ph.phblock import validate_structure

from fixtures import (
    RHO,
    electrolyzer_params,
    fuel_cell_params,
    pipe_params,
    random_states,
    storage_params,
)
from oracles import (
    compressor_derivatives,
    device_current,
    device_overpotential_derivative,
    device_terminal_voltage,
    pipe_flow_derivative,
    storage_pressure_derivative,
)


class TestWeymouthMeanPressure:
    def cubic_form(self, p_l, p_r):
        return (2.0 / 3.0) * (p_l**3 - p_r**3) / (p_l**2 - p_r**2)

    def test_hand_values(self):
        assert weymouth_mean_pressure(2.0, 1.0) == pytest.approx(14.0 / 9.0, rel=1e-15)
        assert weymouth_mean_pressure(3.0, 1.0) == pytest.approx(13.0 / 6.0, rel=1e-15)
        assert weymouth_mean_pressure(2.0, 1.0) == pytest.approx(
            self.cubic_form(2.0, 1.0), rel=1e-15)
        assert weymouth_mean_pressure(3.0, 1.0) == pytest.approx(
            self.cubic_form(3.0, 1.0), rel=1e-15)

    def test_equal_pressure_limit(self):
        for p in (1.0, 3.7e6):
            assert weymouth_mean_pressure(p, p) == pytest.approx(p, rel=1e-15)

    def test_factored_matches_rational_form(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            p_l, p_r = rng.uniform(1e5, 1e7, 2)
            assert weymouth_mean_pressure(p_l, p_r) == pytest.approx(
                self.cubic_form(p_l, p_r), rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            weymouth_mean_pressure(0.0, 1.0)
        with pytest.raises(ValueError):
            weymouth_mean_pressure(1.0, -2.0)


class TestPipe:
    def test_flat_pipe_has_no_disturbance(self):
        block = make_pipe(pipe_params(incline=0.0))
        assert block.disturbance[0] == 0.0

    def test_inclined_pipe_disturbance(self):
        params = pipe_params(incline=0.12)
        block = make_pipe(params)
        want = (-params.gravity * params.length * np.sin(0.12)
                * params.mean_pressure / params.sound_speed**2)
        assert block.disturbance[0] == pytest.approx(want, rel=1e-15)

    def test_rhs_matches_direct_equation(self):
        params = pipe_params(incline=0.05)
        block = make_pipe(params)
        scale = params.state_scale
        rng = np.random.default_rng(4)
        for _ in range(1000):
            q = float(rng.uniform(-3.0, 3.0))
            p_l = float(rng.uniform(1e5, 6e6))
            p_r = float(rng.uniform(1e5, 6e6))
            got = block.rhs([scale * q], [p_l - p_r])[0]
            want = scale * pipe_flow_derivative(params, q, p_l, p_r)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_friction_equals_quadratic_drag(self):
        params = pipe_params()
        block = make_pipe(params)
        lam_l = params.friction_coefficient * params.length
        rng = np.random.default_rng(6)
        for _ in range(200):
            q = float(rng.uniform(-5.0, 5.0))
            x = np.array([params.state_scale * q])
            drag = float((block.dissipation_at(x) @ block.grad_hamiltonian(x))[0])
            assert drag == pytest.approx(lam_l * abs(q) * q, rel=1e-12, abs=1e-15)


class TestStorage:
    def test_costate_recovers_pressure(self):
        params = storage_params()
        block = make_storage(params)
        for p in (0.0, 1e5, 3.33e6):
            assert block.grad_hamiltonian(np.array([params.state_scale * p]))[0] \
                == pytest.approx(p, rel=1e-14)

    def test_steady_state_balances_leak(self):
        params = storage_params(leak=1e-8)
        block = make_storage(params)
        q_ex = 0.05
        p_star = params.rho * q_ex / params.leak_coeff
        assert block.rhs([params.state_scale * p_star], [0.0, q_ex])[0] \
            == pytest.approx(0.0, abs=1e-12)

    def test_rhs_matches_direct_equation(self):
        params = storage_params(leak=2e-9)
        block = make_storage(params)
        rng = np.random.default_rng(8)
        for _ in range(500):
            p = float(rng.uniform(0.0, 7e6))
            q_net = float(rng.uniform(-2.0, 2.0))
            q_ex = float(rng.uniform(-2.0, 2.0))
            got = block.rhs([params.state_scale * p], [q_net, q_ex])[0]
            want = params.state_scale * storage_pressure_derivative(params, p, q_net, q_ex)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-14)

    def test_zero_leak_rejected_for_storage(self):
        params = StorageParams(volume=10.0, temperature=300.0, leak_coeff=0.0)
        with pytest.raises(ValueError, match="leak_coeff"):
            make_storage(params)


class TestJunction:
    def test_capacity_hand_value(self):
        # two pipes of 1000 m x 0.5 m^2 at rho=0.09, c=1300
        block = make_junction([(1000.0, 0.5), (1000.0, 0.5)], rho=0.09, sound_speed=1300.0)
        want = 2.0 * (1000.0 * 0.5) / (2.0 * 0.09 * 1300.0**2)
        assert 1.0 / block.quadratic.weights[0] == pytest.approx(want, rel=1e-14)
        assert want == pytest.approx(3.288e-3, rel=1e-3)

    def test_capacity_linear_in_length(self):
        c1 = 1.0 / make_junction([(500.0, 0.2)], rho=RHO).quadratic.weights[0]
        c2 = 1.0 / make_junction([(1000.0, 0.2)], rho=RHO).quadratic.weights[0]
        assert c2 == pytest.approx(2.0 * c1, rel=1e-14)

    def test_costate_recovers_pressure(self):
        block = make_junction([(2000.0, 0.07)], rho=RHO)
        capacity = 1.0 / block.quadratic.weights[0]
        assert block.grad_hamiltonian(np.array([capacity * 2.5e6]))[0] \
            == pytest.approx(2.5e6, rel=1e-13)

    def test_no_incident_edges_rejected(self):
        with pytest.raises(ValueError, match="incident"):
            make_junction([], rho=RHO)


class TestCompressor:
    def params(self, plenum_loss=1e-9):
        return CompressorParams(plenum_volume=20.0, sonic_velocity=1320.0,
                                plenum_loss=plenum_loss, duct_length=30.0, duct_area=0.05,
                                outlet_length=20.0, outlet_area=0.05, rho=RHO)

    def test_zero_boost_duct_is_frictionless_pipe(self):
        _, duct, _ = make_compressor(self.params())
        dp_grid = 1234.5
        assert duct.rhs([0.7], [dp_grid, 0.0])[0] == pytest.approx(dp_grid, rel=1e-15)

    def test_balanced_lossless_plenum_is_stationary(self):
        plenum, _, _ = make_compressor(self.params(plenum_loss=0.0))
        assert plenum.rhs([5.0], [0.0])[0] == 0.0

    def test_rhs_matches_direct_equations(self):
        params = self.params(plenum_loss=3e-9)
        plenum, duct, throttle = make_compressor(params)
        rng = np.random.default_rng(10)
        for _ in range(1000):
            p_i = float(rng.uniform(1e5, 7e6))
            q_f, q_m = rng.uniform(-3.0, 3.0, 2)
            p_l = float(rng.uniform(1e5, 7e6))
            p_r = float(rng.uniform(1e5, 7e6))
            boost = float(rng.uniform(-1e5, 1e5))
            want = compressor_derivatives(params, p_i, q_f, q_m, p_l, p_r, boost)
            got_p = plenum.rhs([params.plenum_state_scale * p_i], [q_f - q_m])[0]
            got_f = duct.rhs([params.duct_state_scale * q_f], [p_l - p_i, boost])[0]
            got_m = throttle.rhs([params.throttle_state_scale * q_m], [p_i - p_r])[0]
            assert got_p == pytest.approx(params.plenum_state_scale * want[0], rel=1e-12)
            assert got_f == pytest.approx(params.duct_state_scale * want[1],
                                          rel=1e-12, abs=1e-12)
            assert got_m == pytest.approx(params.throttle_state_scale * want[2],
                                          rel=1e-12, abs=1e-12)


class TestSectorDevice:
    def test_current_flow_conversion(self):
        params = electrolyzer_params()
        q_sc = 100.0 / params.flow_to_current
        want = 100.0 * 2.016e-3 / (2.0 * 0.0899 * 9.6485e4)
        assert q_sc == pytest.approx(want, rel=1e-12)
        assert q_sc == pytest.approx(1.162e-5, rel=1e-3)

    def test_power_identity_electrolyzer(self):
        params = electrolyzer_params()
        block = make_sector_device(params)
        v_oc = params.resolved_open_circuit_voltage()
        c_a = params.capacitance
        rng = np.random.default_rng(12)
        for _ in range(1000):
            v_a = float(rng.uniform(-2.0, 20.0))
            q_sc = float(rng.uniform(0.0, 5e-5))
            y = block.output([c_a * v_a], [q_sc])[0]
            i = device_current(params, q_sc)
            v = device_terminal_voltage(params, v_a, q_sc, v_oc)
            assert y * q_sc == pytest.approx(i * v, rel=1e-12, abs=1e-12)

    def test_fuel_cell_output_reflects_inverse_power_flow(self):
        params = fuel_cell_params()
        block = make_sector_device(params)
        v_oc = params.open_circuit_voltage
        c_a = params.capacitance
        rng = np.random.default_rng(14)
        for _ in range(200):
            v_a = float(rng.uniform(0.0, 5.0))
            q_sc = float(rng.uniform(0.0, 5e-5))
            y = block.output([c_a * v_a], [q_sc])[0]
            v = device_terminal_voltage(params, v_a, q_sc, v_oc)
            assert y == pytest.approx(-params.flow_to_current * v, rel=1e-12)

    def test_open_circuit_output_is_offset(self):
        block = make_sector_device(electrolyzer_params())
        np.testing.assert_allclose(block.output([0.0], [0.0]), block.output_offset)

    def test_output_at_small_overpotential(self):
        params = electrolyzer_params()
        block = make_sector_device(params)
        got = block.output([params.capacitance * 0.1], [0.0])[0]
        want = params.flow_to_current * 0.1 + block.output_offset[0]
        assert got == pytest.approx(want, rel=1e-13)

    def test_output_slope_in_state(self):
        for params in (electrolyzer_params(), fuel_cell_params()):
            block = make_sector_device(params)
            y0 = block.output([0.0], [0.3e-5])[0]
            y1 = block.output([1.0], [0.3e-5])[0]
            assert y1 - y0 == pytest.approx(
                params.flow_to_current / params.capacitance, rel=1e-12)

    def test_dynamics_match_direct_equation(self):
        params = fuel_cell_params()
        block = make_sector_device(params)
        c_a = params.capacitance
        rng = np.random.default_rng(16)
        for _ in range(500):
            v_a = float(rng.uniform(-5.0, 5.0))
            q_sc = float(rng.uniform(-1e-5, 1e-4))
            got = block.rhs([c_a * v_a], [q_sc])[0]
            want = c_a * device_overpotential_derivative(params, v_a, q_sc)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-15)

    def test_nonpositive_open_circuit_rejected(self):
        with pytest.raises(ValueError, match="open_circuit_voltage"):
            SectorDeviceParams(
                kind=DeviceKind.FUEL_CELL, activation_resistance=0.3,
                double_layer_capacitance=800.0, cell_area=0.1, n_cells=50,
                membrane_thickness=1.25e-4, membrane_conductivity=8.0,
                open_circuit_voltage=-5.0)


class TestNernst:
    def test_standard_conditions(self):
        for n_c in (1, 50):
            assert nernst_open_circuit(n_c, 298.15, 1.0, 1.0, 1.0) \
                == pytest.approx(n_c * 1.23, rel=1e-14)

    def test_temperature_coefficient(self):
        base = nernst_open_circuit(1, 298.15, 1.0, 1.0, 1.0)
        warm = nernst_open_circuit(1, 308.15, 1.0, 1.0, 1.0)
        assert warm - base == pytest.approx(-0.009, rel=1e-10)

    def test_linearity_in_cell_count(self):
        one = nernst_open_circuit(1, 330.0, 2.0, 0.5, 1.2)
        two = nernst_open_circuit(2, 330.0, 2.0, 0.5, 1.2)
        assert two == pytest.approx(2.0 * one, rel=1e-14)

    def test_rejects_nonpositive_inputs(self):
        with pytest.raises(ValueError):
            nernst_open_circuit(1, -1.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            nernst_open_circuit(1, 300.0, 0.0, 1.0, 1.0)


class TestStructuralInvariants:
    def all_blocks(self):
        plenum, duct, throttle = make_compressor(CompressorParams(
            plenum_volume=20.0, sonic_velocity=1320.0, plenum_loss=1e-9,
            duct_length=30.0, duct_area=0.05, outlet_length=20.0, outlet_area=0.05,
            rho=RHO))
        return [
            make_pipe(pipe_params(incline=0.08)),
            make_storage(storage_params()),
            make_junction([(2000.0, 0.07), (30.0, 0.05)], rho=RHO),
            plenum, duct, throttle,
            make_sector_device(electrolyzer_params()),
            make_sector_device(fuel_cell_params()),
        ]

    def test_every_block_validates(self):
        rng = np.random.default_rng(20)
        for block in self.all_blocks():
            report = validate_structure(block, random_states(block.n, 100, rng, scale=2.0))
            assert report.passed, str(report)
            for check in report.checks:
                if check.name in ("interconnection skew-symmetry", "feedthrough PSD"):
                    assert check.worst == 0.0

    def test_hamiltonians_are_quadratic(self):
        rng = np.random.default_rng(22)
        for block in self.all_blocks():
            w = block.quadratic.weights[0]
            assert w > 0.0
            for _ in range(20):
                x = rng.standard_normal(1)
                alpha = float(rng.uniform(-3.0, 3.0))
                assert block.hamiltonian(x) == pytest.approx(0.5 * w * x[0]**2, rel=1e-13)
                np.testing.assert_allclose(block.grad_hamiltonian(alpha * x),
                                           alpha * block.grad_hamiltonian(x), rtol=1e-12)
