"""Stacking and interconnection of component blocks into network systems.

The node blocks (pressure dynamics) and edge blocks (flow dynamics) are first
stacked diagonally, then interconnected through the incidence matrix, which
appears as the off-diagonal blocks of the grid's skew interconnection matrix.
Sector-conversion devices are appended afterwards; their hydrogen throughput
input is routed both into the attached storage port and into the device state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .components import DeviceKind, make_junction, make_compressor, make_pipe, \
    make_sector_device, make_storage
from .phblock import PhBlock, PowerTerms, quadratic_block
from .topology import EdgeDecl, EdgeKind, NetworkTopology, NodeKind, TopologyCounts


class AssemblyError(ValueError):
    pass


@dataclass
class AttachedDevice:
    """A sector-conversion device block, ready to couple to its storage node."""

    id: str
    kind: DeviceKind
    block: PhBlock


@dataclass
class GridSystem:
    """An assembled network system wrapping one big port-Hamiltonian block.

    State layout: node states (storage, junction, compressor plenum), then
    edge states (pipes, duct/throttle pairs), then device states for coupled
    systems.  ``state_scales`` maps states to physical values via
    x = state_scales * physical.
    """

    block: PhBlock
    incidence: np.ndarray
    counts: TopologyCounts
    node_state: dict
    edge_state: dict
    device_state: dict
    input_index: dict
    state_scales: np.ndarray
    reference_physical: np.ndarray
    edge_ids: tuple
    output_labels: tuple
    coupled: bool = False
    name: str = "grid"

    @property
    def n(self) -> int:
        return self.block.n

    @property
    def m(self) -> int:
        return self.block.m

    @property
    def state_labels(self):
        return self.block.state_labels

    @property
    def input_labels(self):
        return self.block.port_labels

    def rhs(self, x, u):
        return self.block.rhs(x, u)

    def output(self, x, u):
        return self.block.output(x, u)

    def power_terms(self, x, u) -> PowerTerms:
        return self.block.power_terms(x, u)

    def hamiltonian(self, x) -> float:
        return self.block.hamiltonian(np.asarray(x, dtype=float))

    @property
    def reference_state(self) -> np.ndarray:
        return self.state_scales * self.reference_physical

    def initial_state(self, pressures=None, flows=None, overpotentials=None) -> np.ndarray:
        """State vector from physical values; unset entries take the reference
        (nominal pressures, zero flows, zero overpotentials)."""
        phys = self.reference_physical.copy()
        for mapping, index in ((pressures, self.node_state),
                               (flows, self.edge_state),
                               (overpotentials, self.device_state)):
            for key, value in (mapping or {}).items():
                if key not in index:
                    raise KeyError(f"{self.name}: unknown element id {key!r}")
                phys[index[key]] = float(value)
        return self.state_scales * phys

    def physical_state(self, x) -> np.ndarray:
        """Pressures / flows / overpotentials recovered from a state vector."""
        return np.asarray(x, dtype=float) / self.state_scales

    def input_vector(self, channels: dict) -> np.ndarray:
        """Dense input vector from a {channel label: value} mapping."""
        u = np.zeros(self.m)
        for key, value in channels.items():
            if key not in self.input_index:
                raise KeyError(f"{self.name}: unknown input channel {key!r}")
            u[self.input_index[key]] = float(value)
        return u


# -- component block construction --------------------------------------------


def _edge_dims(topology: NetworkTopology, edge: EdgeDecl) -> tuple[float, float]:
    """(length, area) of any edge, for junction capacity sums."""
    if edge.kind is EdgeKind.PIPE:
        return edge.params.length, edge.params.area
    comp = topology.compressor_of_edge(edge).params
    if edge.kind is EdgeKind.COMPRESSOR_DUCT:
        return comp.duct_length, comp.duct_area
    return comp.outlet_length, comp.outlet_area


def build_node_blocks(topology: NetworkTopology) -> list[PhBlock]:
    """One block per node, in canonical node order."""
    compressors = {}
    blocks = []
    for nd in topology.nodes:
        if nd.kind is NodeKind.STORAGE:
            blocks.append(make_storage(nd.params, name=f"storage {nd.id}"))
        elif nd.kind is NodeKind.JUNCTION:
            dims = [_edge_dims(topology, ed) for ed in topology.incident_edges(nd.id)]
            if not dims:
                raise AssemblyError(f"junction {nd.id!r} has no incident edges")
            blocks.append(make_junction(dims, rho=topology.constants.rho,
                                        sound_speed=topology.constants.sound_speed,
                                        name=f"junction {nd.id}"))
        else:
            compressors[nd.id] = make_compressor(nd.params, name=f"compressor {nd.id}")
            blocks.append(compressors[nd.id][0])
    topology._compressor_blocks = compressors  # reused for the edge pass
    return blocks


def build_edge_blocks(topology: NetworkTopology) -> list[PhBlock]:
    """One block per edge, in canonical edge order (pipes, then duct/throttle)."""
    compressors = getattr(topology, "_compressor_blocks", None)
    blocks = []
    for ed in topology.edges:
        if ed.kind is EdgeKind.PIPE:
            blocks.append(make_pipe(ed.params, name=f"pipe {ed.id}"))
            continue
        plenum_id = topology.compressor_of_edge(ed).id
        if compressors is None or plenum_id not in compressors:
            trio = make_compressor(topology.node(plenum_id).params,
                                   name=f"compressor {plenum_id}")
        else:
            trio = compressors[plenum_id]
        blocks.append(trio[1] if ed.kind is EdgeKind.COMPRESSOR_DUCT else trio[2])
    return blocks


def build_device_blocks(topology: NetworkTopology) -> list[AttachedDevice]:
    return [AttachedDevice(id=dev.id, kind=dev.kind,
                           block=make_sector_device(dev.params, name=f"device {dev.id}"))
            for dev in topology.devices]


# -- stacking ------------------------------------------------------------------


def _require_scalar_quadratic(blocks, what):
    for b in blocks:
        if b.n != 1 or b.quadratic is None:
            raise AssemblyError(f"{what} block {b.name!r} must be scalar with quadratic form")


def stack_nodes(topology: NetworkTopology, node_blocks) -> PhBlock:
    """Diagonal stack of the pressure dynamics.

    Inputs are the per-node flow differences followed by the exogenous flows
    of storage and junction nodes; outputs are all node pressures followed by
    the storage/junction pressures again.
    """
    topology._require_validated()
    counts = topology.counts
    n_nodes = counts.nodes
    if len(node_blocks) != n_nodes:
        raise AssemblyError(f"expected {n_nodes} node blocks, got {len(node_blocks)}")
    _require_scalar_quadratic(node_blocks, "node")
    sf = counts.storages + counts.junctions
    for nd, blk in zip(topology.nodes, node_blocks):
        want = 1 if nd.kind is NodeKind.COMPRESSOR_PLENUM else 2
        if blk.m != want:
            raise AssemblyError(
                f"node ordering violation at {nd.id!r}: block {blk.name!r} has "
                f"{blk.m} ports, expected {want}")

    weights = np.array([b.quadratic.weights[0] for b in node_blocks])
    a = np.array([b.quadratic.damping_const[0] for b in node_blocks])
    bb = np.array([b.quadratic.damping_abs[0] for b in node_blocks])
    B = np.zeros((n_nodes, n_nodes + sf))
    B[:, :n_nodes] = np.eye(n_nodes)
    B[:sf, n_nodes:] = np.eye(sf)
    state_labels = tuple(f"p:{nd.id}" for nd in topology.nodes)
    port_labels = tuple(f"q_net:{nd.id}" for nd in topology.nodes) + \
        tuple(f"q_ex:{nd.id}" for nd in topology.nodes[:sf])
    return quadratic_block(
        weights=weights, damping_const=a, damping_abs=bb, input_matrix=B,
        name=f"{topology.name}:nodes", state_labels=state_labels, port_labels=port_labels)


def stack_edges(topology: NetworkTopology, edge_blocks) -> PhBlock:
    """Diagonal stack of the flow dynamics.

    Inputs are the per-edge pressure differences followed by one boost
    pressure per compressor, routed into that compressor's duct row.
    """
    topology._require_validated()
    counts = topology.counts
    n_edges = counts.edges
    if len(edge_blocks) != n_edges:
        raise AssemblyError(f"expected {n_edges} edge blocks, got {len(edge_blocks)}")
    _require_scalar_quadratic(edge_blocks, "edge")
    n_comp = counts.compressors
    for ed, blk in zip(topology.edges, edge_blocks):
        want = 2 if ed.kind is EdgeKind.COMPRESSOR_DUCT else 1
        if blk.m != want:
            raise AssemblyError(
                f"edge pairing violation at {ed.id!r}: block {blk.name!r} has "
                f"{blk.m} ports, expected {want}")

    weights = np.array([b.quadratic.weights[0] for b in edge_blocks])
    a = np.array([b.quadratic.damping_const[0] for b in edge_blocks])
    bb = np.array([b.quadratic.damping_abs[0] for b in edge_blocks])
    d = np.array([b.disturbance[0] for b in edge_blocks])
    B = np.zeros((n_edges, n_edges + n_comp))
    B[:, :n_edges] = np.eye(n_edges)
    first_pair = n_edges - 2 * n_comp
    plenum_ids = []
    for i in range(n_comp):
        B[first_pair + 2 * i, n_edges + i] = 1.0
        plenum_ids.append(topology.compressor_of_edge(topology.edges[first_pair + 2 * i]).id)
    state_labels = tuple(f"q:{ed.id}" for ed in topology.edges)
    port_labels = tuple(f"dp:{ed.id}" for ed in topology.edges) + \
        tuple(f"dp_boost:{pid}" for pid in plenum_ids)
    return quadratic_block(
        weights=weights, damping_const=a, damping_abs=bb, input_matrix=B,
        disturbance=d, name=f"{topology.name}:edges",
        state_labels=state_labels, port_labels=port_labels)


def interconnect_grid(node_sys: PhBlock, edge_sys: PhBlock, incidence: np.ndarray,
                      name: str = "grid") -> PhBlock:
    """Close the node/edge loop through the incidence matrix.

    The node flow ports receive the incidence-weighted edge flows and the edge
    pressure ports receive the negative transposed incidence-weighted node
    pressures, which places the incidence matrix in the skew interconnection
    of the closed system.  Remaining inputs are the exogenous flows and the
    compressor boosts.
    """
    inc = np.asarray(incidence, dtype=float)
    n_nodes, n_edges = node_sys.n, edge_sys.n
    if inc.shape != (n_nodes, n_edges):
        raise AssemblyError(
            f"incidence shape {inc.shape} does not match {n_nodes} nodes x {n_edges} edges")
    if node_sys.quadratic is None or edge_sys.quadratic is None:
        raise AssemblyError("stacked systems must carry quadratic forms")
    sf = node_sys.m - n_nodes
    n_comp = edge_sys.m - n_edges

    dim = n_nodes + n_edges
    J = np.zeros((dim, dim))
    J[:n_nodes, n_nodes:] = inc
    J[n_nodes:, :n_nodes] = -inc.T
    weights = np.concatenate([node_sys.quadratic.weights, edge_sys.quadratic.weights])
    a = np.concatenate([node_sys.quadratic.damping_const, edge_sys.quadratic.damping_const])
    bb = np.concatenate([node_sys.quadratic.damping_abs, edge_sys.quadratic.damping_abs])
    d = np.concatenate([node_sys.disturbance, edge_sys.disturbance])
    B = np.zeros((dim, sf + n_comp))
    B[:n_nodes, :sf] = node_sys.input_matrix[:, n_nodes:]
    B[n_nodes:, sf:] = edge_sys.input_matrix[:, n_edges:]

    state_labels = tuple(node_sys.state_labels) + tuple(edge_sys.state_labels)
    port_labels = tuple(node_sys.port_labels[n_nodes:]) + tuple(edge_sys.port_labels[n_edges:])
    return quadratic_block(
        weights=weights, interconnection=J, damping_const=a, damping_abs=bb,
        input_matrix=B, disturbance=d, name=name,
        state_labels=state_labels, port_labels=port_labels)


def couple_sector(grid: GridSystem, device_blocks) -> GridSystem:
    """Append sector-conversion devices to an assembled grid.

    Each hydrogen throughput input q_sc drives both the device state (scaled
    by the flow-to-current factor) and the attached storage's exogenous-flow
    port: positively for electrolyzers (production into storage), negatively
    for fuel cells (draw from storage).  Devices must sit on the
    lowest-indexed storage nodes, in device order.
    """
    devices = list(device_blocks)
    if not devices:
        return grid
    n_dev = len(devices)
    counts = grid.counts
    if n_dev > counts.storages:
        raise AssemblyError(f"{n_dev} devices exceed {counts.storages} storage nodes")
    if counts.devices and n_dev != counts.devices:
        raise AssemblyError(f"topology declares {counts.devices} devices, got {n_dev}")
    _require_scalar_quadratic([d.block for d in devices], "device")
    for dev in devices:
        if dev.block.m != 1:
            raise AssemblyError(f"device {dev.id!r} must have exactly one port")

    g = grid.block
    dim = g.n + n_dev
    J = np.zeros((dim, dim))
    J[:g.n, :g.n] = g.interconnection_at(np.zeros(g.n))
    weights = np.concatenate([g.quadratic.weights,
                              [d.block.quadratic.weights[0] for d in devices]])
    a = np.concatenate([g.quadratic.damping_const,
                        [d.block.quadratic.damping_const[0] for d in devices]])
    bb = np.concatenate([g.quadratic.damping_abs,
                         [d.block.quadratic.damping_abs[0] for d in devices]])
    d_vec = np.concatenate([g.disturbance, np.zeros(n_dev)])
    B = np.zeros((dim, g.m))
    B[:g.n, :] = g.input_matrix
    D = np.zeros((g.m, g.m))
    offset = np.zeros(g.m)
    port_labels = list(g.port_labels)
    for i, dev in enumerate(devices):
        if abs(B[i, i] - 1.0) > 0.0:
            raise AssemblyError(
                f"device {dev.id!r} must attach to storage state {i} "
                f"({g.state_labels[i]}) with a plain exogenous-flow port")
        if dev.kind is DeviceKind.FUEL_CELL:
            B[i, i] = -1.0
        B[g.n + i, i] = dev.block.input_matrix[0, 0]
        D[i, i] = dev.block.feedthrough[0, 0]
        offset[i] = dev.block.output_offset[0]
        port_labels[i] = f"q_sc:{dev.id}"

    state_labels = tuple(g.state_labels) + tuple(f"va:{dev.id}" for dev in devices)
    block = quadratic_block(
        weights=weights, interconnection=J, damping_const=a, damping_abs=bb,
        input_matrix=B, feedthrough=D, disturbance=d_vec, output_offset=offset,
        name=f"{grid.name}:coupled", state_labels=state_labels,
        port_labels=tuple(port_labels))

    device_state = {dev.id: g.n + i for i, dev in enumerate(devices)}
    scales = np.concatenate([grid.state_scales,
                             [1.0 / d.block.quadratic.weights[0] for d in devices]])
    ref = np.concatenate([grid.reference_physical, np.zeros(n_dev)])
    return GridSystem(
        block=block, incidence=grid.incidence, counts=counts,
        node_state=dict(grid.node_state), edge_state=dict(grid.edge_state),
        device_state=device_state,
        input_index={lab: i for i, lab in enumerate(block.port_labels)},
        state_scales=scales, reference_physical=ref,
        edge_ids=grid.edge_ids,
        output_labels=_output_labels(block.port_labels, counts, grid.edge_ids),
        coupled=True, name=f"{grid.name}:coupled")


def _output_labels(port_labels, counts: TopologyCounts, edge_ids) -> tuple:
    """Port-conjugate output names: device ports, pressures, duct flows."""
    first_pair = counts.edges - 2 * counts.compressors
    duct_ids = [edge_ids[first_pair + 2 * i] for i in range(counts.compressors)]
    labels = []
    for lab in port_labels:
        kind, _, ident = lab.partition(":")
        if kind == "q_sc":
            labels.append(f"y_sc:{ident}")
        elif kind == "q_ex":
            labels.append(f"p:{ident}")
        else:  # dp_boost column selects that compressor's duct flow
            labels.append(f"q:{duct_ids.pop(0)}")
    return tuple(labels)


def build_grid(topology: NetworkTopology, name: str | None = None) -> GridSystem:
    """Assemble the interconnected hydrogen grid for a validated topology."""
    topology._require_validated()
    counts = topology.counts
    node_sys = stack_nodes(topology, build_node_blocks(topology))
    edge_sys = stack_edges(topology, build_edge_blocks(topology))
    inc = topology.incidence()
    block = interconnect_grid(node_sys, edge_sys, inc,
                              name=name or topology.name)
    scales = 1.0 / block.quadratic.weights
    ref = np.concatenate([
        np.array([nd.nominal_pressure for nd in topology.nodes]),
        np.zeros(counts.edges),
    ])
    edge_ids = tuple(ed.id for ed in topology.edges)
    return GridSystem(
        block=block, incidence=inc, counts=counts,
        node_state={nd.id: i for i, nd in enumerate(topology.nodes)},
        edge_state={ed.id: counts.nodes + i for i, ed in enumerate(topology.edges)},
        device_state={},
        input_index={lab: i for i, lab in enumerate(block.port_labels)},
        state_scales=scales, reference_physical=ref,
        edge_ids=edge_ids,
        output_labels=_output_labels(block.port_labels, counts, edge_ids),
        coupled=False, name=name or topology.name)


def build_coupled(topology: NetworkTopology, name: str | None = None) -> GridSystem:
    """Assemble the sector-coupled system (grid plus conversion devices)."""
    grid = build_grid(topology, name=name)
    coupled = couple_sector(grid, build_device_blocks(topology))
    return coupled
