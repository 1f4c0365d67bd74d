"""Shared test networks, built programmatically in canonical order."""

import math

import numpy as np

from h2ph.components import (
    CompressorParams,
    DeviceKind,
    NernstConditions,
    PipeParams,
    SectorDeviceParams,
    StorageParams,
    weymouth_mean_pressure,
)
from h2ph.phblock import quadratic_block
from h2ph.topology import (
    EdgeDecl,
    EdgeKind,
    NetworkConstants,
    NetworkTopology,
    NodeDecl,
    NodeKind,
    SectorDeviceDecl,
)

RHO = 0.0899
SOUND = 1320.0
P_NOM = 3.0e6
PIPE_LENGTH = 2000.0
PIPE_DIAMETER = 0.3
PIPE_AREA = math.pi * PIPE_DIAMETER**2 / 4.0
DARCY = 0.011


def pipe_params(incline=0.0, p_left=P_NOM, p_right=P_NOM, length=PIPE_LENGTH):
    return PipeParams(
        area=PIPE_AREA, diameter=PIPE_DIAMETER, length=length, darcy_lambda=DARCY,
        incline=incline, mean_pressure=weymouth_mean_pressure(p_left, p_right),
        rho=RHO, sound_speed=SOUND)


def storage_params(leak=1.5e-10, volume=50.0):
    return StorageParams(volume=volume, temperature=293.15, leak_coeff=leak, rho=RHO)


def compressor_params(plenum_loss=1e-9):
    return CompressorParams(
        plenum_volume=20.0, sonic_velocity=SOUND, plenum_loss=plenum_loss,
        duct_length=30.0, duct_area=0.05, outlet_length=20.0, outlet_area=0.05, rho=RHO)


def electrolyzer_params():
    return SectorDeviceParams(
        kind=DeviceKind.ELECTROLYZER, activation_resistance=0.25,
        double_layer_capacitance=1000.0, cell_area=0.1, n_cells=50,
        membrane_thickness=1.78e-4, membrane_conductivity=10.0,
        nernst=NernstConditions(temperature=323.15, p_h2=3.0e6, p_o2=1.0e5, p_h2o=1.0e5),
        rho=RHO)


def fuel_cell_params():
    return SectorDeviceParams(
        kind=DeviceKind.FUEL_CELL, activation_resistance=0.3,
        double_layer_capacitance=800.0, cell_area=0.1, n_cells=50,
        membrane_thickness=1.25e-4, membrane_conductivity=8.0,
        open_circuit_voltage=55.0, rho=RHO)


def fig1_topology(incline_e2=0.0, leak=1.5e-10, with_devices=True,
                  plenum_loss=1e-9) -> NetworkTopology:
    """The seven-node example network: three storages, three junctions, one
    compressor, one electrolyzer on n1 and one fuel cell on n2."""
    constants = NetworkConstants(rho=RHO, sound_speed=SOUND)
    nodes = [
        NodeDecl("n1", NodeKind.STORAGE, P_NOM, storage_params(leak)),
        NodeDecl("n2", NodeKind.STORAGE, P_NOM, storage_params(leak)),
        NodeDecl("n3", NodeKind.STORAGE, P_NOM, storage_params(leak)),
        NodeDecl("n4", NodeKind.JUNCTION, P_NOM),
        NodeDecl("n5", NodeKind.JUNCTION, P_NOM),
        NodeDecl("n6", NodeKind.JUNCTION, P_NOM),
        NodeDecl("n7", NodeKind.COMPRESSOR_PLENUM, P_NOM, compressor_params(plenum_loss)),
    ]
    edges = [
        EdgeDecl("e1", "n1", "n4", EdgeKind.PIPE, pipe_params()),
        EdgeDecl("e2", "n4", "n5", EdgeKind.PIPE, pipe_params(incline=incline_e2)),
        EdgeDecl("e3", "n5", "n2", EdgeKind.PIPE, pipe_params()),
        EdgeDecl("e4", "n5", "n6", EdgeKind.PIPE, pipe_params()),
        EdgeDecl("e5", "n6", "n7", EdgeKind.COMPRESSOR_DUCT),
        EdgeDecl("e6", "n7", "n3", EdgeKind.COMPRESSOR_THROTTLE),
    ]
    devices = []
    if with_devices:
        devices = [
            SectorDeviceDecl("ely1", DeviceKind.ELECTROLYZER, "n1", electrolyzer_params()),
            SectorDeviceDecl("fc1", DeviceKind.FUEL_CELL, "n2", fuel_cell_params()),
        ]
    topo = NetworkTopology(nodes, edges, devices, constants=constants, name="fig1")
    report = topo.validate()
    assert report.passed, str(report)
    return topo


def two_storage_topology(leak=1e-8, q_nominal=P_NOM) -> NetworkTopology:
    """Two leaky storages joined by one flat pipe."""
    constants = NetworkConstants(rho=RHO, sound_speed=SOUND)
    nodes = [
        NodeDecl("s1", NodeKind.STORAGE, q_nominal, storage_params(leak)),
        NodeDecl("s2", NodeKind.STORAGE, q_nominal, storage_params(leak)),
    ]
    edges = [EdgeDecl("pipe", "s1", "s2", EdgeKind.PIPE, pipe_params())]
    topo = NetworkTopology(nodes, edges, constants=constants, name="twostorage")
    assert topo.validate().passed
    return topo


def junction_pair_topology() -> NetworkTopology:
    """Two lossless junctions and one flat pipe (used for exact equilibria)."""
    constants = NetworkConstants(rho=RHO, sound_speed=SOUND)
    nodes = [
        NodeDecl("j1", NodeKind.JUNCTION, P_NOM),
        NodeDecl("j2", NodeKind.JUNCTION, P_NOM),
    ]
    edges = [EdgeDecl("pipe", "j1", "j2", EdgeKind.PIPE, pipe_params())]
    topo = NetworkTopology(nodes, edges, constants=constants, name="junctionpair")
    assert topo.validate().passed
    return topo


def scalar_decay_block():
    """x' = -x + u with H = x^2/2; closed form e^-t under zero input."""
    return quadratic_block(weights=[1.0], damping_const=[1.0], input_matrix=[[1.0]],
                           name="scalar decay", state_labels=("x",), port_labels=("u",))


def random_states(n, count, rng, scale=1.0):
    return [scale * rng.standard_normal(n) for _ in range(count)]
