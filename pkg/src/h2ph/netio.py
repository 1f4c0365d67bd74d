"""Declarative network and scenario files (YAML) plus the results writer.

The network file is a nested key/value tree with typed scalars and lists; all
units are SI except molar masses, which are accepted in g/mol and converted.
Schema and physics violations are collected with file/line locations instead
of failing at the first problem.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np
import yaml

from . import components as comp
from .assembly import GridSystem
from .sim import InputSeries, Scenario, Trajectory
from .topology import (
    EdgeDecl,
    EdgeKind,
    NetworkConstants,
    NetworkTopology,
    NodeDecl,
    NodeKind,
    SectorDeviceDecl,
)


@dataclass(frozen=True)
class FileIssue:
    path: str
    line: int | None
    rule: str
    message: str

    def __str__(self) -> str:
        loc = self.path if self.line is None else f"{self.path}:{self.line}"
        return f"{loc}: {self.rule}: {self.message}"


class FileFormatError(ValueError):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("\n".join(str(i) for i in self.issues))


class NetworkFileError(FileFormatError):
    pass


class ScenarioFileError(FileFormatError):
    pass


def _line_map(text: str) -> dict:
    """YAML tree paths ('edges[2].length') to 1-based line numbers."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    marks: dict[str, int] = {}

    def walk(node, path):
        marks[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                walk(value, f"{path}.{key.value}" if path else str(key.value))
        elif isinstance(node, yaml.SequenceNode):
            for i, value in enumerate(node.value):
                walk(value, f"{path}[{i}]")

    if root is not None:
        walk(root, "")
    return marks


class _Collector:
    """Gathers issues while a file is being interpreted."""

    def __init__(self, path: str, text: str):
        self.path = path
        self.lines = _line_map(text)
        self.issues: list[FileIssue] = []

    def add(self, where: str, rule: str, message: str):
        self.issues.append(FileIssue(self.path, self.lines.get(where), rule, message))

    def require(self, mapping, where, key, rule="missing key", kind=None):
        if not isinstance(mapping, dict) or key not in mapping:
            self.add(where, rule, f"required key {key!r} is missing")
            return None
        value = mapping[key]
        if kind is float:
            try:
                return float(value)
            except (TypeError, ValueError):
                self.add(f"{where}.{key}", "type", f"{key!r} must be a number, got {value!r}")
                return None
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                self.add(f"{where}.{key}", "type", f"{key!r} must be an integer, got {value!r}")
                return None
        if kind is str and not isinstance(value, str):
            self.add(f"{where}.{key}", "type", f"{key!r} must be a string, got {value!r}")
            return None
        return value

    def optional(self, mapping, where, key, default, kind=float):
        if not isinstance(mapping, dict) or key not in mapping:
            return default
        return self.require(mapping, where, key, kind=kind)

    def raise_if_failed(self, exc_type):
        if self.issues:
            raise exc_type(self.issues)


def _load_yaml(path: str, exc_type):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise exc_type([FileIssue(path, None, "io", str(err))]) from err
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        line = None
        mark = getattr(err, "problem_mark", None)
        if mark is not None:
            line = mark.line + 1
        raise exc_type([FileIssue(path, line, "syntax", str(err).replace("\n", " "))]) from err
    if not isinstance(data, dict):
        raise exc_type([FileIssue(path, 1, "schema", "top level must be a mapping")])
    return data, text


_NODE_KINDS = {"storage": NodeKind.STORAGE, "junction": NodeKind.JUNCTION,
               "compressor": NodeKind.COMPRESSOR_PLENUM}
_EDGE_KINDS = {"pipe": EdgeKind.PIPE, "duct": EdgeKind.COMPRESSOR_DUCT,
               "throttle": EdgeKind.COMPRESSOR_THROTTLE}
_DEVICE_KINDS = {"electrolyzer": comp.DeviceKind.ELECTROLYZER,
                 "fuel_cell": comp.DeviceKind.FUEL_CELL}


def parse_network(path: str) -> NetworkTopology:
    """Parse and validate a network file; returns a validated topology.

    All schema, physics and topology violations are raised together as a
    :class:`NetworkFileError`, each carrying a file location.
    """
    data, text = _load_yaml(path, NetworkFileError)
    col = _Collector(path, text)

    cdata = data.get("constants") or {}
    constants = NetworkConstants(
        rho=col.optional(cdata, "constants", "rho", comp.HYDROGEN_DENSITY) or comp.HYDROGEN_DENSITY,
        sound_speed=col.optional(cdata, "constants", "sound_speed",
                                 comp.HYDROGEN_SOUND_SPEED) or comp.HYDROGEN_SOUND_SPEED,
        gravity=col.optional(cdata, "constants", "gravity", comp.GRAVITY) or comp.GRAVITY,
    )

    nominal = {}
    nodes = []
    for i, entry in enumerate(data.get("nodes") or []):
        where = f"nodes[{i}]"
        if not isinstance(entry, dict):
            col.add(where, "schema", "node entry must be a mapping")
            continue
        node_id = col.require(entry, where, "id", kind=str)
        kind_s = col.require(entry, where, "kind", kind=str)
        p_nom = col.require(entry, where, "nominal_pressure", kind=float)
        if node_id is None or kind_s is None or p_nom is None:
            continue
        if kind_s not in _NODE_KINDS:
            col.add(f"{where}.kind", "schema",
                    f"unknown node kind {kind_s!r} (storage, junction, compressor)")
            continue
        kind = _NODE_KINDS[kind_s]
        nominal[node_id] = p_nom
        params = None
        try:
            if kind is NodeKind.STORAGE:
                params = comp.StorageParams(
                    volume=col.require(entry, where, "volume", kind=float) or 0.0,
                    temperature=col.require(entry, where, "temperature", kind=float) or 0.0,
                    leak_coeff=col.require(entry, where, "leak_coeff", kind=float) or 0.0,
                    molar_mass=1e-3 * col.optional(entry, where, "molar_mass", 1e3 * comp.H2_MOLAR_MASS),
                    gas_constant=col.optional(entry, where, "gas_constant", comp.GAS_CONSTANT),
                    rho=constants.rho)
            elif kind is NodeKind.COMPRESSOR_PLENUM:
                params = comp.CompressorParams(
                    plenum_volume=col.require(entry, where, "plenum_volume", kind=float) or 0.0,
                    sonic_velocity=col.require(entry, where, "sonic_velocity", kind=float) or 0.0,
                    plenum_loss=col.optional(entry, where, "plenum_loss", 0.0),
                    duct_length=col.require(entry, where, "duct_length", kind=float) or 0.0,
                    duct_area=col.require(entry, where, "duct_area", kind=float) or 0.0,
                    outlet_length=col.require(entry, where, "outlet_length", kind=float) or 0.0,
                    outlet_area=col.require(entry, where, "outlet_area", kind=float) or 0.0,
                    rho=constants.rho)
        except ValueError as err:
            col.add(where, "physics", f"node {node_id!r}: {err}")
            continue
        nodes.append(NodeDecl(id=node_id, kind=kind, nominal_pressure=p_nom, params=params))

    edges = []
    for i, entry in enumerate(data.get("edges") or []):
        where = f"edges[{i}]"
        if not isinstance(entry, dict):
            col.add(where, "schema", "edge entry must be a mapping")
            continue
        edge_id = col.require(entry, where, "id", kind=str)
        source = col.require(entry, where, "source", kind=str)
        sink = col.require(entry, where, "sink", kind=str)
        kind_s = col.require(entry, where, "kind", kind=str)
        if None in (edge_id, source, sink, kind_s):
            continue
        if kind_s not in _EDGE_KINDS:
            col.add(f"{where}.kind", "schema",
                    f"unknown edge kind {kind_s!r} (pipe, duct, throttle)")
            continue
        kind = _EDGE_KINDS[kind_s]
        params = None
        if kind is EdgeKind.PIPE:
            if source not in nominal or sink not in nominal:
                col.add(where, "reference",
                        f"pipe {edge_id!r} references unknown node "
                        f"{source if source not in nominal else sink!r}")
                continue
            diameter = col.require(entry, where, "diameter", kind=float)
            length = col.require(entry, where, "length", kind=float)
            lam = col.require(entry, where, "darcy_lambda", kind=float)
            if None in (diameter, length, lam):
                continue
            area = col.optional(entry, where, "area",
                                float(np.pi) * diameter**2 / 4.0 if diameter else None)
            try:
                mean_p = comp.weymouth_mean_pressure(nominal[source], nominal[sink])
                params = comp.PipeParams(
                    area=area, diameter=diameter, length=length, darcy_lambda=lam,
                    incline=col.optional(entry, where, "incline", 0.0),
                    mean_pressure=mean_p, rho=constants.rho,
                    sound_speed=constants.sound_speed, gravity=constants.gravity)
            except ValueError as err:
                col.add(where, "physics", f"edge {edge_id!r}: {err}")
                continue
        edges.append(EdgeDecl(id=edge_id, source=source, sink=sink, kind=kind, params=params))

    devices = []
    for i, entry in enumerate(data.get("devices") or []):
        where = f"devices[{i}]"
        if not isinstance(entry, dict):
            col.add(where, "schema", "device entry must be a mapping")
            continue
        dev_id = col.require(entry, where, "id", kind=str)
        kind_s = col.require(entry, where, "kind", kind=str)
        storage = col.require(entry, where, "storage", kind=str)
        if None in (dev_id, kind_s, storage):
            continue
        if kind_s not in _DEVICE_KINDS:
            col.add(f"{where}.kind", "schema",
                    f"unknown device kind {kind_s!r} (electrolyzer, fuel_cell)")
            continue
        kind = _DEVICE_KINDS[kind_s]
        nernst = None
        v_oc = None
        if "nernst" in entry and "open_circuit_voltage" in entry:
            col.add(where, "schema",
                    f"device {dev_id!r}: give open_circuit_voltage or nernst, not both")
            continue
        if "nernst" in entry:
            ndata = entry["nernst"] or {}
            nwhere = f"{where}.nernst"
            nernst = dict(
                temperature=col.require(ndata, nwhere, "temperature", kind=float),
                p_h2=col.require(ndata, nwhere, "p_h2", kind=float),
                p_o2=col.require(ndata, nwhere, "p_o2", kind=float),
                p_h2o=col.require(ndata, nwhere, "p_h2o", kind=float))
            if None in nernst.values():
                continue
        else:
            v_oc = col.require(entry, where, "open_circuit_voltage", kind=float)
            if v_oc is None:
                continue
        try:
            params = comp.SectorDeviceParams(
                kind=kind,
                activation_resistance=col.require(entry, where, "activation_resistance",
                                                  kind=float) or 0.0,
                double_layer_capacitance=col.require(entry, where, "double_layer_capacitance",
                                                     kind=float) or 0.0,
                cell_area=col.require(entry, where, "cell_area", kind=float) or 0.0,
                n_cells=col.require(entry, where, "n_cells", kind=int) or 1,
                membrane_thickness=col.require(entry, where, "membrane_thickness",
                                               kind=float) or 0.0,
                membrane_conductivity=col.require(entry, where, "membrane_conductivity",
                                                  kind=float) or 0.0,
                open_circuit_voltage=v_oc,
                nernst=comp.NernstConditions(**nernst) if nernst else None,
                molar_mass=1e-3 * col.optional(entry, where, "molar_mass",
                                               1e3 * comp.H2_MOLAR_MASS),
                rho=constants.rho)
        except ValueError as err:
            col.add(where, "physics", f"device {dev_id!r}: {err}")
            continue
        devices.append(SectorDeviceDecl(id=dev_id, kind=kind, attached_storage=storage,
                                        params=params))

    col.raise_if_failed(NetworkFileError)
    name = data.get("name") or os.path.splitext(os.path.basename(path))[0]
    topo = NetworkTopology(nodes, edges, devices, constants=constants, name=str(name))
    report = topo.validate()
    if not report.passed:
        id_lines = {}
        for i, nd in enumerate(nodes):
            id_lines[nd.id] = col.lines.get(f"nodes[{i}]")
        for i, ed in enumerate(edges):
            id_lines[ed.id] = col.lines.get(f"edges[{i}]")
        for i, dv in enumerate(devices):
            id_lines[dv.id] = col.lines.get(f"devices[{i}]")
        issues = []
        for iss in report.issues:
            line = next((ln for eid, ln in id_lines.items() if repr(eid) in iss.message), None)
            issues.append(FileIssue(path, line, iss.rule, iss.message))
        raise NetworkFileError(issues)
    return topo


def serialize_network(topology: NetworkTopology) -> str:
    """Canonical file text for a validated topology; inverse of parse_network."""
    topology._require_validated()
    doc: dict = {
        "name": topology.name,
        "constants": {
            "rho": topology.constants.rho,
            "sound_speed": topology.constants.sound_speed,
            "gravity": topology.constants.gravity,
        },
        "nodes": [],
        "edges": [],
    }
    for nd in topology.nodes:
        entry = {"id": nd.id,
                 "kind": {NodeKind.STORAGE: "storage", NodeKind.JUNCTION: "junction",
                          NodeKind.COMPRESSOR_PLENUM: "compressor"}[nd.kind],
                 "nominal_pressure": nd.nominal_pressure}
        p = nd.params
        if nd.kind is NodeKind.STORAGE:
            entry.update(volume=p.volume, temperature=p.temperature,
                         leak_coeff=p.leak_coeff, molar_mass=1e3 * p.molar_mass,
                         gas_constant=p.gas_constant)
        elif nd.kind is NodeKind.COMPRESSOR_PLENUM:
            entry.update(plenum_volume=p.plenum_volume, sonic_velocity=p.sonic_velocity,
                         plenum_loss=p.plenum_loss, duct_length=p.duct_length,
                         duct_area=p.duct_area, outlet_length=p.outlet_length,
                         outlet_area=p.outlet_area)
        doc["nodes"].append(entry)
    for ed in topology.edges:
        entry = {"id": ed.id, "source": ed.source, "sink": ed.sink,
                 "kind": {EdgeKind.PIPE: "pipe", EdgeKind.COMPRESSOR_DUCT: "duct",
                          EdgeKind.COMPRESSOR_THROTTLE: "throttle"}[ed.kind]}
        if ed.kind is EdgeKind.PIPE:
            p = ed.params
            entry.update(length=p.length, diameter=p.diameter, area=p.area,
                         darcy_lambda=p.darcy_lambda, incline=p.incline)
        doc["edges"].append(entry)
    if topology.devices:
        doc["devices"] = []
        for dv in topology.devices:
            p = dv.params
            entry = {"id": dv.id,
                     "kind": {comp.DeviceKind.ELECTROLYZER: "electrolyzer",
                              comp.DeviceKind.FUEL_CELL: "fuel_cell"}[dv.kind],
                     "storage": dv.attached_storage,
                     "activation_resistance": p.activation_resistance,
                     "double_layer_capacitance": p.double_layer_capacitance,
                     "cell_area": p.cell_area,
                     "n_cells": p.n_cells,
                     "membrane_thickness": p.membrane_thickness,
                     "membrane_conductivity": p.membrane_conductivity,
                     "molar_mass": 1e3 * p.molar_mass}
            if p.open_circuit_voltage is not None:
                entry["open_circuit_voltage"] = p.open_circuit_voltage
            else:
                entry["nernst"] = {"temperature": p.nernst.temperature, "p_h2": p.nernst.p_h2,
                                   "p_o2": p.nernst.p_o2, "p_h2o": p.nernst.p_h2o}
            doc["devices"].append(entry)
    return yaml.safe_dump(doc, sort_keys=False)


# -- scenario files --------------------------------------------------------------


@dataclass
class RunSpec:
    """A scenario bound to a system, plus the integrator settings to use."""

    scenario: Scenario
    method: str
    step: float
    newton_tol: float


_CHANNEL_GROUPS = {"q_ex": "q_ex", "q_sc": "q_sc", "dp": "dp_boost"}


def parse_scenario(path: str, system: GridSystem) -> RunSpec:
    """Parse a scenario file against a system's input and state layout.

    Channels the file does not mention default to zero with a warning.
    """
    data, text = _load_yaml(path, ScenarioFileError)
    col = _Collector(path, text)
    duration = col.require(data, "", "duration", kind=float)
    method = col.optional(data, "", "method", "midpoint", kind=str)
    step = col.optional(data, "", "step", 0.01)
    newton_tol = col.optional(data, "", "newton_tol", 1e-12)
    interpolation = col.optional(data, "", "interpolation", "zoh", kind=str)
    if method not in ("midpoint", "rk4"):
        col.add("method", "schema", f"unknown method {method!r} (midpoint, rk4)")
    if interpolation not in ("zoh", "linear"):
        col.add("interpolation", "schema",
                f"unknown interpolation {interpolation!r} (zoh, linear)")

    initial = data.get("initial") or {}
    maps = {"pressures": system.node_state, "flows": system.edge_state,
            "overpotentials": system.device_state}
    overrides = {}
    for group, index in maps.items():
        gdata = initial.get(group) or {}
        if not isinstance(gdata, dict):
            col.add(f"initial.{group}", "schema", f"{group} must be a mapping")
            continue
        values = {}
        for key, value in gdata.items():
            if key not in index:
                col.add(f"initial.{group}.{key}", "reference",
                        f"unknown element id {key!r}")
                continue
            values[key] = float(value)
        overrides[group] = values

    channels = {}
    for group, gdata in (data.get("inputs") or {}).items():
        if group not in _CHANNEL_GROUPS:
            col.add(f"inputs.{group}", "schema",
                    f"unknown input group {group!r} (q_ex, q_sc, dp)")
            continue
        if not isinstance(gdata, dict):
            col.add(f"inputs.{group}", "schema", "input group must map ids to series")
            continue
        for key, series in gdata.items():
            label = f"{_CHANNEL_GROUPS[group]}:{key}"
            where = f"inputs.{group}.{key}"
            if label not in system.input_index:
                col.add(where, "reference",
                        f"system has no input channel {label!r}")
                continue
            if isinstance(series, (int, float)):
                times, values = [0.0], [float(series)]
            elif isinstance(series, list) and all(
                    isinstance(p, list) and len(p) == 2 for p in series):
                times = [float(p[0]) for p in series]
                values = [float(p[1]) for p in series]
            else:
                col.add(where, "schema",
                        "series must be a number or a list of [time, value] pairs")
                continue
            try:
                channels[label] = InputSeries(times, values, mode=interpolation)
            except ValueError as err:
                col.add(where, "schema", str(err))
    col.raise_if_failed(ScenarioFileError)

    silent = sorted(set(system.input_labels) - set(channels))
    if silent:
        warnings.warn(
            f"{path}: input channels default to zero: {', '.join(silent)}",
            stacklevel=2)

    x0 = system.initial_state(pressures=overrides.get("pressures"),
                              flows=overrides.get("flows"),
                              overpotentials=overrides.get("overpotentials"))
    name = str(data.get("name") or os.path.splitext(os.path.basename(path))[0])
    scenario = Scenario(duration=duration, initial_state=x0,
                        inputs=channels if channels else None, name=name)
    return RunSpec(scenario=scenario, method=method, step=step, newton_tol=newton_tol)


def parse_state_file(path: str, system: GridSystem) -> np.ndarray:
    """State vector from a {pressures/flows/overpotentials: {id: value}} file."""
    data, text = _load_yaml(path, ScenarioFileError)
    col = _Collector(path, text)
    maps = {"pressures": system.node_state, "flows": system.edge_state,
            "overpotentials": system.device_state}
    overrides = {}
    for group, gdata in data.items():
        if group not in maps:
            col.add(group, "schema",
                    f"unknown group {group!r} (pressures, flows, overpotentials)")
            continue
        values = {}
        for key, value in (gdata or {}).items():
            if key not in maps[group]:
                col.add(f"{group}.{key}", "reference", f"unknown element id {key!r}")
                continue
            values[key] = float(value)
        overrides[group] = values
    col.raise_if_failed(ScenarioFileError)
    return system.initial_state(pressures=overrides.get("pressures"),
                                flows=overrides.get("flows"),
                                overpotentials=overrides.get("overpotentials"))


def parse_constant_inputs(path: str, system: GridSystem) -> np.ndarray:
    """Constant input vector from a {q_ex/q_sc/dp: {id: value}} file."""
    data, text = _load_yaml(path, ScenarioFileError)
    col = _Collector(path, text)
    u = np.zeros(system.m)
    for group, gdata in data.items():
        if group not in _CHANNEL_GROUPS:
            col.add(group, "schema", f"unknown input group {group!r} (q_ex, q_sc, dp)")
            continue
        for key, value in (gdata or {}).items():
            label = f"{_CHANNEL_GROUPS[group]}:{key}"
            if label not in system.input_index:
                col.add(f"{group}.{key}", "reference", f"system has no input channel {label!r}")
                continue
            u[system.input_index[label]] = float(value)
    col.raise_if_failed(ScenarioFileError)
    return u


# -- results ----------------------------------------------------------------------

LEDGER_COLUMNS = ("dissipation", "supply", "feedthrough_loss", "disturbance_work")


def _fmt(value: float) -> str:
    return repr(float(value))


def write_results(trajectory: Trajectory, report, out_dir: str,
                  gnuplot: bool = False) -> list[str]:
    """Write trajectory CSV (and audit report / gnuplot file) to a directory.

    CSV columns: t, states, outputs, H, then the four instantaneous ledger
    terms; floats are printed with shortest round-trip precision.
    """
    os.makedirs(out_dir, exist_ok=True)
    n = trajectory.x.shape[1]
    m = trajectory.y.shape[1]
    state_labels = list(trajectory.state_labels) or [f"x{i}" for i in range(n)]
    output_labels = list(trajectory.output_labels) or [f"y{i}" for i in range(m)]
    header = ["t"] + state_labels + output_labels + ["H"] + list(LEDGER_COLUMNS)

    paths = []
    csv_path = os.path.join(out_dir, "trajectory.csv")
    with open(csv_path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(trajectory.n_samples):
            row = ([_fmt(trajectory.t[k])]
                   + [_fmt(v) for v in trajectory.x[k]]
                   + [_fmt(v) for v in trajectory.y[k]]
                   + [_fmt(trajectory.H[k])]
                   + [_fmt(trajectory.power[key][k]) for key in LEDGER_COLUMNS])
            fh.write(",".join(row) + "\n")
    paths.append(csv_path)

    if report is not None:
        report_path = os.path.join(out_dir, "report.txt")
        with open(report_path, "w") as fh:
            fh.write(report.to_text())
        paths.append(report_path)

    if gnuplot:
        dat_path = os.path.join(out_dir, "trajectory.dat")
        with open(dat_path, "w") as fh:
            fh.write("# " + " ".join(header) + "\n")
            for k in range(trajectory.n_samples):
                row = ([_fmt(trajectory.t[k])]
                       + [_fmt(v) for v in trajectory.x[k]]
                       + [_fmt(v) for v in trajectory.y[k]]
                       + [_fmt(trajectory.H[k])]
                       + [_fmt(trajectory.power[key][k]) for key in LEDGER_COLUMNS])
                fh.write(" ".join(row) + "\n")
        paths.append(dat_path)
    return paths


def read_trajectory_csv(path: str) -> dict:
    """Columns of a results CSV keyed by header name."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = {name: np.array([float(r[i]) for r in rows]) for i, name in enumerate(header)}
    return cols
