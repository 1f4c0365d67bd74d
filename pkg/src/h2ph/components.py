"""Constructors for the network component blocks.

Each constructor returns a scalar-state :class:`~h2ph.phblock.PhBlock` whose
co-state recovers the physical quantity (pressure in Pa, volumetric flow in
m^3/s, activation overpotential in V).  All quantities are SI; energies are
in joules.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from .phblock import PhBlock, quadratic_block

# Hydrogen property defaults at standard conditions.  These are configuration
# values, overridable per network description.
HYDROGEN_DENSITY = 0.0899        # kg/m^3
HYDROGEN_SOUND_SPEED = 1320.0    # m/s
GRAVITY = 9.81                   # m/s^2

# Electrochemical constants.
FARADAY = 9.6485e4               # C/mol
GAS_CONSTANT = 8.314             # J/(mol K)
H2_MOLAR_MASS = 2.016e-3         # kg/mol
ELECTRONS_PER_H2 = 2
V_STANDARD = 1.23                # V, per-cell open-circuit voltage at standard conditions
BETA_T = 0.0009                  # V/K, temperature coefficient of the open-circuit voltage
T_STANDARD = 298.15              # K
P_STANDARD = 101325.0            # Pa


class DeviceKind(enum.Enum):
    ELECTROLYZER = "electrolyzer"
    FUEL_CELL = "fuel_cell"


def _require(cond: bool, message: str):
    if not cond:
        raise ValueError(message)


# -- parameter records -------------------------------------------------------

@dataclass(frozen=True)
class PipeParams:
    """Lumped pipe segment; ``mean_pressure`` is frozen at build time."""

    area: float               # m^2
    diameter: float            # m
    length: float              # m
    darcy_lambda: float        # dimensionless friction factor
    incline: float             # rad, in [-pi/2, pi/2]
    mean_pressure: float       # Pa
    rho: float = HYDROGEN_DENSITY
    sound_speed: float = HYDROGEN_SOUND_SPEED
    gravity: float = GRAVITY

    def __post_init__(self):
        for f in ("area", "diameter", "length", "mean_pressure", "rho", "sound_speed", "gravity"):
            _require(getattr(self, f) > 0.0, f"pipe: {f} must be > 0, got {getattr(self, f)}")
        _require(self.darcy_lambda >= 0.0, "pipe: darcy_lambda must be >= 0")
        _require(abs(self.incline) <= math.pi / 2.0, "pipe: |incline| must be <= pi/2")

    @property
    def friction_coefficient(self) -> float:
        """lambda_hat = lambda c^2 rho^2 / (2 D A^2 p_M)."""
        return (self.darcy_lambda * self.sound_speed**2 * self.rho**2
                / (2.0 * self.diameter * self.area**2 * self.mean_pressure))

    @property
    def state_scale(self) -> float:
        """x = state_scale * q."""
        return self.rho * self.length / self.area


@dataclass(frozen=True)
class StorageParams:
    volume: float              # m^3
    temperature: float         # K
    leak_coeff: float          # >= 0; > 0 required for storage nodes
    molar_mass: float = H2_MOLAR_MASS    # kg/mol
    gas_constant: float = GAS_CONSTANT   # J/(mol K)
    rho: float = HYDROGEN_DENSITY

    def __post_init__(self):
        for f in ("volume", "temperature", "molar_mass", "gas_constant", "rho"):
            _require(getattr(self, f) > 0.0, f"storage: {f} must be > 0, got {getattr(self, f)}")
        _require(self.leak_coeff >= 0.0, "storage: leak_coeff must be >= 0")

    @property
    def state_scale(self) -> float:
        """x = state_scale * p."""
        return self.molar_mass * self.volume / (self.rho * self.gas_constant * self.temperature)


@dataclass(frozen=True)
class CompressorParams:
    plenum_volume: float       # m^3
    sonic_velocity: float      # m/s, inlet stagnation value
    plenum_loss: float         # >= 0
    duct_length: float         # m
    duct_area: float           # m^2
    outlet_length: float       # m
    outlet_area: float         # m^2
    rho: float = HYDROGEN_DENSITY

    def __post_init__(self):
        for f in ("plenum_volume", "sonic_velocity", "duct_length", "duct_area",
                  "outlet_length", "outlet_area", "rho"):
            _require(getattr(self, f) > 0.0, f"compressor: {f} must be > 0, got {getattr(self, f)}")
        _require(self.plenum_loss >= 0.0, "compressor: plenum_loss must be >= 0")

    @property
    def plenum_state_scale(self) -> float:
        return self.plenum_volume / (self.rho * self.sonic_velocity**2)

    @property
    def duct_state_scale(self) -> float:
        return self.rho * self.duct_length / self.duct_area

    @property
    def throttle_state_scale(self) -> float:
        return self.rho * self.outlet_length / self.outlet_area


@dataclass(frozen=True)
class NernstConditions:
    """Operating point for the open-circuit voltage; partial pressures in Pa."""

    temperature: float
    p_h2: float
    p_o2: float
    p_h2o: float

    def __post_init__(self):
        for f in ("temperature", "p_h2", "p_o2", "p_h2o"):
            _require(getattr(self, f) > 0.0, f"nernst: {f} must be > 0, got {getattr(self, f)}")


@dataclass(frozen=True)
class SectorDeviceParams:
    """Electrolyzer or fuel cell stack, equivalent-circuit form.

    Exactly one of ``open_circuit_voltage`` (full-stack value in V) or
    ``nernst`` must be given; both are constant-per-device by assumption.
    """

    kind: DeviceKind
    activation_resistance: float          # Ohm
    double_layer_capacitance: float       # F/m^2, per cell
    cell_area: float                      # m^2
    n_cells: int
    membrane_thickness: float             # m
    membrane_conductivity: float          # S/m
    open_circuit_voltage: float | None = None
    nernst: NernstConditions | None = None
    faraday: float = FARADAY
    electrons: int = ELECTRONS_PER_H2
    molar_mass: float = H2_MOLAR_MASS
    rho: float = HYDROGEN_DENSITY

    def __post_init__(self):
        for f in ("activation_resistance", "double_layer_capacitance", "cell_area",
                  "membrane_thickness", "membrane_conductivity", "faraday", "molar_mass", "rho"):
            _require(getattr(self, f) > 0.0, f"sector device: {f} must be > 0, got {getattr(self, f)}")
        _require(self.n_cells >= 1, "sector device: n_cells must be >= 1")
        _require(self.electrons >= 1, "sector device: electrons must be >= 1")
        _require((self.open_circuit_voltage is None) != (self.nernst is None),
                 "sector device: give exactly one of open_circuit_voltage or nernst")
        if self.open_circuit_voltage is not None:
            _require(self.open_circuit_voltage > 0.0,
                     "sector device: open_circuit_voltage must be > 0")

    @property
    def capacitance(self) -> float:
        """Total double-layer capacitance C_a = C_cell * A / n_c."""
        return self.double_layer_capacitance * self.cell_area / self.n_cells

    @property
    def flow_to_current(self) -> float:
        """i = flow_to_current * q; equals z rho F / M_H2."""
        return self.electrons * self.rho * self.faraday / self.molar_mass

    def resolved_open_circuit_voltage(self) -> float:
        if self.open_circuit_voltage is not None:
            return self.open_circuit_voltage
        c = self.nernst
        return nernst_open_circuit(
            self.n_cells, c.temperature,
            c.p_h2 / P_STANDARD, c.p_o2 / P_STANDARD, c.p_h2o / P_STANDARD)


# -- operations ---------------------------------------------------------------

def weymouth_mean_pressure(p_left: float, p_right: float) -> float:
    """Mean pressure (2/3)(p_l + p_r - p_l p_r / (p_l + p_r)).

    The factored form is finite at p_l == p_r (value p_l), where the
    equivalent cubic/quadratic ratio has a removable singularity.
    """
    _require(p_left > 0.0 and p_right > 0.0,
             f"weymouth mean pressure needs positive pressures, got ({p_left}, {p_right})")
    return (2.0 / 3.0) * (p_left + p_right - p_left * p_right / (p_left + p_right))


def nernst_open_circuit(
    n_cells: int,
    temperature: float,
    h2_activity: float,
    o2_activity: float,
    h2o_activity: float,
    v_standard: float = V_STANDARD,
    beta_t: float = BETA_T,
    t_standard: float = T_STANDARD,
    gas_constant: float = GAS_CONSTANT,
    faraday: float = FARADAY,
) -> float:
    """Open-circuit stack voltage from the Nernst relation.

    Activities are partial pressures normalized to standard pressure
    (dimensionless); at unit activities and T = T_st this reduces to
    n_cells * v_standard.
    """
    _require(n_cells >= 1, "nernst: n_cells must be >= 1")
    _require(temperature > 0.0, "nernst: temperature must be > 0")
    _require(h2_activity > 0.0 and o2_activity > 0.0 and h2o_activity > 0.0,
             "nernst: activities must be > 0")
    per_cell = (v_standard
                - beta_t * (temperature - t_standard)
                + gas_constant * temperature / (2.0 * faraday)
                * math.log(h2_activity / (math.sqrt(o2_activity) * h2o_activity)))
    return n_cells * per_cell


def make_pipe(params: PipeParams, name: str = "pipe") -> PhBlock:
    """Pipe block: state x = (rho L / A) q, port u = p_l - p_r, output y = q."""
    s = params.state_scale
    w = 1.0 / s
    lam_l = params.friction_coefficient * params.length
    d = (-params.gravity * params.length * math.sin(params.incline)
         * params.mean_pressure / params.sound_speed**2)
    return quadratic_block(
        weights=[w],
        damping_abs=[lam_l * w],   # R(x) = lam_hat L |q| = (lam_hat L / s) |x|
        input_matrix=[[1.0]],
        disturbance=[d],
        name=name,
        state_labels=("q",),
        port_labels=("dp",),
    )


def make_storage(params: StorageParams, name: str = "storage") -> PhBlock:
    """Storage block: x = (M V / rho R T) p, ports (q_in - q_out, q_ex), y = (p, p).

    Requires a strictly positive leak coefficient; the dissipation entry is
    r_s / rho so the dynamics reproduce the mass balance with loss term
    -(r_s / rho) p against the co-state p.
    """
    _require(params.leak_coeff > 0.0, "storage: leak_coeff must be > 0 for a storage node")
    s = params.state_scale
    return quadratic_block(
        weights=[1.0 / s],
        damping_const=[params.leak_coeff / params.rho],
        input_matrix=[[1.0, 1.0]],
        name=name,
        state_labels=("p",),
        port_labels=("q_net", "q_ex"),
    )


def junction_capacity(incident_edges: Sequence[tuple[float, float]],
                      rho: float, sound_speed: float) -> float:
    """Lumped capacity C = sum_l L_l A_l / (2 rho c^2) over incident edges."""
    _require(len(incident_edges) > 0, "junction: needs at least one incident edge")
    _require(rho > 0.0 and sound_speed > 0.0, "junction: rho and sound_speed must be > 0")
    return sum(length * area for length, area in incident_edges) / (2.0 * rho * sound_speed**2)


def make_junction(incident_edges: Sequence[tuple[float, float]],
                  rho: float = HYDROGEN_DENSITY,
                  sound_speed: float = HYDROGEN_SOUND_SPEED,
                  name: str = "junction") -> PhBlock:
    """Lossless junction block: x = C p with C from the incident (L, A) pairs."""
    c_i = junction_capacity(incident_edges, rho, sound_speed)
    return quadratic_block(
        weights=[1.0 / c_i],
        input_matrix=[[1.0, 1.0]],
        name=name,
        state_labels=("p",),
        port_labels=("q_net", "q_ex"),
    )


def make_compressor(params: CompressorParams, name: str = "compressor"):
    """Compressor as (plenum, duct, throttle) blocks.

    plenum:   x = V_p/(rho a01^2) p_i,  u = q_f - q_m,          y = p_i
    duct:     x = rho L_c/A_1 q_f,      u = (p_l - p_i, dp),    y = (q_f, q_f)
    throttle: x = rho L_o/A_o q_m,      u = p_i - p_r,          y = q_m
    """
    plenum = quadratic_block(
        weights=[1.0 / params.plenum_state_scale],
        damping_const=[params.plenum_loss / params.rho],
        input_matrix=[[1.0]],
        name=f"{name}:plenum",
        state_labels=("p",),
        port_labels=("q_net",),
    )
    duct = quadratic_block(
        weights=[1.0 / params.duct_state_scale],
        input_matrix=[[1.0, 1.0]],
        name=f"{name}:duct",
        state_labels=("q",),
        port_labels=("dp_grid", "dp_boost"),
    )
    throttle = quadratic_block(
        weights=[1.0 / params.throttle_state_scale],
        input_matrix=[[1.0]],
        name=f"{name}:throttle",
        state_labels=("q",),
        port_labels=("dp",),
    )
    return plenum, duct, throttle


def make_sector_device(params: SectorDeviceParams, name: str = "device") -> PhBlock:
    """Electrolyzer / fuel cell block with feedthrough and output offset.

    State x = C_a v_a; input u = q_sc (hydrogen produced by an electrolyzer,
    hydrogen drawn from storage by a fuel cell; both nonnegative in normal
    operation); output y = +(z rho F / M) v for electrolyzers and
    -(z rho F / M) v for fuel cells, so y * u is the electrical power.
    """
    k = params.flow_to_current
    v_oc = params.resolved_open_circuit_voltage()
    _require(v_oc > 0.0, "sector device: open-circuit voltage must be > 0")
    ohmic = params.n_cells * params.membrane_thickness / (
        params.membrane_conductivity * params.cell_area)
    sign = 1.0 if params.kind is DeviceKind.ELECTROLYZER else -1.0
    return quadratic_block(
        weights=[1.0 / params.capacitance],
        damping_const=[1.0 / params.activation_resistance],
        input_matrix=[[k]],
        feedthrough=[[ohmic * k * k]],
        output_offset=[sign * k * v_oc],
        name=name,
        state_labels=("v_a",),
        port_labels=("q_sc",),
    )
