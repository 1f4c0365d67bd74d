"""Typed network graph for the hydrogen grid and its power-coupling devices.

A :class:`NetworkTopology` collects declared nodes, edges and sector devices,
validates the structural conventions (compressor duct/throttle pairing,
dedicated storage per conversion device, connectivity) and freezes canonical
index maps: storage nodes first (device-attached ones leading, electrolyzers
before fuel cells), then junctions, then compressor plenums; pipe edges first,
then one adjacent duct/throttle pair per compressor.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .components import (
    CompressorParams,
    DeviceKind,
    GRAVITY,
    HYDROGEN_DENSITY,
    HYDROGEN_SOUND_SPEED,
    PipeParams,
    SectorDeviceParams,
    StorageParams,
)


class NodeKind(enum.Enum):
    STORAGE = "storage"
    JUNCTION = "junction"
    COMPRESSOR_PLENUM = "compressor"


class EdgeKind(enum.Enum):
    PIPE = "pipe"
    COMPRESSOR_DUCT = "duct"
    COMPRESSOR_THROTTLE = "throttle"


@dataclass(frozen=True)
class NetworkConstants:
    rho: float = HYDROGEN_DENSITY
    sound_speed: float = HYDROGEN_SOUND_SPEED
    gravity: float = GRAVITY


@dataclass(frozen=True)
class NodeDecl:
    id: str
    kind: NodeKind
    nominal_pressure: float
    params: StorageParams | CompressorParams | None = None


@dataclass(frozen=True)
class EdgeDecl:
    id: str
    source: str
    sink: str
    kind: EdgeKind
    params: PipeParams | None = None


@dataclass(frozen=True)
class SectorDeviceDecl:
    id: str
    kind: DeviceKind
    attached_storage: str
    params: SectorDeviceParams | None = None


@dataclass(frozen=True)
class TopologyCounts:
    storages: int
    junctions: int
    compressors: int
    electrolyzers: int
    fuel_cells: int
    pipes: int

    @property
    def nodes(self) -> int:
        return self.storages + self.junctions + self.compressors

    @property
    def edges(self) -> int:
        return self.pipes + 2 * self.compressors

    @property
    def devices(self) -> int:
        return self.electrolyzers + self.fuel_cells

    def __str__(self) -> str:
        return (f"S={self.storages} F={self.junctions} C={self.compressors} "
                f"E={self.electrolyzers} L={self.fuel_cells}")


@dataclass(frozen=True)
class TopologyIssue:
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.rule}: {self.message}"


@dataclass(frozen=True)
class TopologyReport:
    issues: tuple
    counts: TopologyCounts | None

    @property
    def passed(self) -> bool:
        return not self.issues

    def __str__(self) -> str:
        if self.passed:
            return f"topology OK ({self.counts})"
        return "topology INVALID\n" + "\n".join("  " + str(i) for i in self.issues)


class UnvalidatedTopologyError(RuntimeError):
    pass


class NetworkTopology:
    """Declared hydrogen network; call :meth:`validate` before use."""

    def __init__(self, nodes, edges, devices=(), constants: NetworkConstants | None = None,
                 name: str = "network"):
        self.name = name
        self.nodes = list(nodes)
        self.edges = list(edges)
        self.devices = list(devices)
        self.constants = constants if constants is not None else NetworkConstants()
        self._validated = False
        self._counts: TopologyCounts | None = None
        self.node_index: dict[str, int] = {}
        self.edge_index: dict[str, int] = {}
        self.device_index: dict[str, int] = {}

    # -- validation --------------------------------------------------------

    def validate(self) -> TopologyReport:
        issues: list[TopologyIssue] = []
        add = lambda rule, msg: issues.append(TopologyIssue(rule, msg))

        node_by_id: dict[str, NodeDecl] = {}
        for nd in self.nodes:
            if nd.id in node_by_id:
                add("unique node id", f"duplicate node id {nd.id!r}")
            node_by_id[nd.id] = nd
            if not (nd.nominal_pressure > 0.0):
                add("positive nominal pressure",
                    f"node {nd.id!r} has nominal_pressure {nd.nominal_pressure}")
            if nd.kind is NodeKind.STORAGE and not isinstance(nd.params, StorageParams):
                add("storage parameters", f"storage node {nd.id!r} needs StorageParams")
            if nd.kind is NodeKind.COMPRESSOR_PLENUM and not isinstance(nd.params, CompressorParams):
                add("compressor parameters",
                    f"compressor node {nd.id!r} needs CompressorParams")

        edge_ids = set()
        for ed in self.edges:
            if ed.id in edge_ids:
                add("unique edge id", f"duplicate edge id {ed.id!r}")
            edge_ids.add(ed.id)
            if ed.source == ed.sink:
                add("no self-loop", f"edge {ed.id!r} connects {ed.source!r} to itself")
            for end in (ed.source, ed.sink):
                if end not in node_by_id:
                    add("resolved endpoint", f"edge {ed.id!r} references unknown node {end!r}")
            if ed.kind is EdgeKind.PIPE:
                if not isinstance(ed.params, PipeParams):
                    add("pipe parameters", f"pipe {ed.id!r} needs PipeParams")
                for end in (ed.source, ed.sink):
                    nd = node_by_id.get(end)
                    if nd is not None and nd.kind is NodeKind.COMPRESSOR_PLENUM:
                        add("pipe endpoints",
                            f"pipe {ed.id!r} may not attach to compressor plenum {end!r}")

        # compressor duct/throttle pairing
        plenum_ids = [nd.id for nd in self.nodes if nd.kind is NodeKind.COMPRESSOR_PLENUM]
        duct_of: dict[str, EdgeDecl] = {}
        throttle_of: dict[str, EdgeDecl] = {}
        for ed in self.edges:
            src = node_by_id.get(ed.source)
            snk = node_by_id.get(ed.sink)
            if ed.kind is EdgeKind.COMPRESSOR_DUCT:
                if snk is None or snk.kind is not NodeKind.COMPRESSOR_PLENUM:
                    add("duct direction", f"duct {ed.id!r} must flow into a compressor plenum")
                elif ed.sink in duct_of:
                    add("one duct per plenum",
                        f"plenum {ed.sink!r} has ducts {duct_of[ed.sink].id!r} and {ed.id!r}")
                else:
                    duct_of[ed.sink] = ed
                if src is not None and src.kind is NodeKind.COMPRESSOR_PLENUM:
                    add("duct source", f"duct {ed.id!r} must start at a storage or junction node")
            elif ed.kind is EdgeKind.COMPRESSOR_THROTTLE:
                if src is None or src.kind is not NodeKind.COMPRESSOR_PLENUM:
                    add("throttle direction", f"throttle {ed.id!r} must leave a compressor plenum")
                elif ed.source in throttle_of:
                    add("one throttle per plenum",
                        f"plenum {ed.source!r} has throttles {throttle_of[ed.source].id!r} and {ed.id!r}")
                else:
                    throttle_of[ed.source] = ed
                if snk is not None and snk.kind is NodeKind.COMPRESSOR_PLENUM:
                    add("throttle sink", f"throttle {ed.id!r} must end at a storage or junction node")
        for pid in plenum_ids:
            if pid not in duct_of:
                add("one duct per plenum", f"plenum {pid!r} has no incident duct")
            if pid not in throttle_of:
                add("one throttle per plenum", f"plenum {pid!r} has no incident throttle")
            extra = [ed.id for ed in self.edges
                     if pid in (ed.source, ed.sink)
                     and ed is not duct_of.get(pid) and ed is not throttle_of.get(pid)]
            if extra:
                add("plenum degree", f"plenum {pid!r} has extra incident edges {extra}")

        # sector devices: dedicated storage attachment
        device_ids = set()
        used_storage: dict[str, str] = {}
        for dev in self.devices:
            if dev.id in device_ids:
                add("unique device id", f"duplicate device id {dev.id!r}")
            device_ids.add(dev.id)
            nd = node_by_id.get(dev.attached_storage)
            if nd is None:
                add("device attachment",
                    f"device {dev.id!r} references unknown node {dev.attached_storage!r}")
            elif nd.kind is not NodeKind.STORAGE:
                add("device attachment",
                    f"device {dev.id!r} must attach to a storage node, "
                    f"{dev.attached_storage!r} is {nd.kind.value}")
            elif dev.attached_storage in used_storage:
                add("dedicated storage",
                    f"storage {dev.attached_storage!r} already serves device "
                    f"{used_storage[dev.attached_storage]!r}")
            else:
                used_storage[dev.attached_storage] = dev.id
            if not isinstance(dev.params, SectorDeviceParams):
                add("device parameters", f"device {dev.id!r} needs SectorDeviceParams")
            elif dev.params.kind is not dev.kind:
                add("device parameters",
                    f"device {dev.id!r} is {dev.kind.value} but params are {dev.params.kind.value}")

        # connectivity of the undirected hydrogen graph
        if not self.nodes:
            add("non-empty network", "network has no nodes")
        elif not issues:
            adjacency: dict[str, set[str]] = {nd.id: set() for nd in self.nodes}
            for ed in self.edges:
                adjacency[ed.source].add(ed.sink)
                adjacency[ed.sink].add(ed.source)
            seen = {self.nodes[0].id}
            stack = [self.nodes[0].id]
            while stack:
                for nb in adjacency[stack.pop()]:
                    if nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
            missing = [nd.id for nd in self.nodes if nd.id not in seen]
            if missing:
                add("connected graph", f"nodes unreachable from {self.nodes[0].id!r}: {missing}")

        if issues:
            self._validated = False
            return TopologyReport(issues=tuple(issues), counts=None)

        self._freeze_order(node_by_id, duct_of, throttle_of)
        counts = TopologyCounts(
            storages=sum(1 for nd in self.nodes if nd.kind is NodeKind.STORAGE),
            junctions=sum(1 for nd in self.nodes if nd.kind is NodeKind.JUNCTION),
            compressors=len(plenum_ids),
            electrolyzers=sum(1 for d in self.devices if d.kind is DeviceKind.ELECTROLYZER),
            fuel_cells=sum(1 for d in self.devices if d.kind is DeviceKind.FUEL_CELL),
            pipes=sum(1 for ed in self.edges if ed.kind is EdgeKind.PIPE),
        )
        self._counts = counts
        self._validated = True
        return TopologyReport(issues=(), counts=counts)

    def _freeze_order(self, node_by_id, duct_of, throttle_of):
        """Reorder declarations into the canonical index layout."""
        electrolyzers = [d for d in self.devices if d.kind is DeviceKind.ELECTROLYZER]
        fuel_cells = [d for d in self.devices if d.kind is DeviceKind.FUEL_CELL]
        self.devices = electrolyzers + fuel_cells
        attached = [node_by_id[d.attached_storage] for d in self.devices]
        attached_ids = {nd.id for nd in attached}
        free_storage = [nd for nd in self.nodes
                        if nd.kind is NodeKind.STORAGE and nd.id not in attached_ids]
        junctions = [nd for nd in self.nodes if nd.kind is NodeKind.JUNCTION]
        plenums = [nd for nd in self.nodes if nd.kind is NodeKind.COMPRESSOR_PLENUM]
        self.nodes = attached + free_storage + junctions + plenums

        pipes = [ed for ed in self.edges if ed.kind is EdgeKind.PIPE]
        pairs = []
        for nd in plenums:
            pairs.extend([duct_of[nd.id], throttle_of[nd.id]])
        self.edges = pipes + pairs

        self.node_index = {nd.id: i for i, nd in enumerate(self.nodes)}
        self.edge_index = {ed.id: i for i, ed in enumerate(self.edges)}
        self.device_index = {d.id: i for i, d in enumerate(self.devices)}

    # -- accessors -----------------------------------------------------------

    @property
    def validated(self) -> bool:
        return self._validated

    def _require_validated(self):
        if not self._validated:
            raise UnvalidatedTopologyError(
                f"topology {self.name!r} must pass validate() before use")

    @property
    def counts(self) -> TopologyCounts:
        self._require_validated()
        return self._counts

    def node(self, node_id: str) -> NodeDecl:
        self._require_validated()
        return self.nodes[self.node_index[node_id]]

    def incident_edges(self, node_id: str) -> list[EdgeDecl]:
        self._require_validated()
        return [ed for ed in self.edges if node_id in (ed.source, ed.sink)]

    def compressor_of_edge(self, edge: EdgeDecl) -> NodeDecl:
        """The plenum node a duct or throttle edge belongs to."""
        self._require_validated()
        pid = edge.sink if edge.kind is EdgeKind.COMPRESSOR_DUCT else edge.source
        return self.nodes[self.node_index[pid]]

    def incidence(self) -> np.ndarray:
        """Node-edge incidence matrix: +1 at (sink, edge), -1 at (source, edge)."""
        self._require_validated()
        mat = np.zeros((len(self.nodes), len(self.edges)), dtype=int)
        for j, ed in enumerate(self.edges):
            mat[self.node_index[ed.source], j] = -1
            mat[self.node_index[ed.sink], j] = 1
        return mat


def validate_topology(topology: NetworkTopology) -> TopologyReport:
    """Validate structural conventions; issues are reported, not raised."""
    return topology.validate()


def build_incidence(topology: NetworkTopology) -> np.ndarray:
    """Incidence matrix of a validated topology (rejects unvalidated input)."""
    return topology.incidence()
