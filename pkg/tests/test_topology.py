"""Topology validation, canonical ordering and the incidence matrix."""

import numpy as np
import pytest

from h2ph.components import DeviceKind
from h2ph.topology import (
    EdgeDecl,
    EdgeKind,
    NetworkConstants,
    NetworkTopology,
    NodeDecl,
    NodeKind,
    SectorDeviceDecl,
    UnvalidatedTopologyError,
    build_incidence,
    validate_topology,
)

from fixtures import (
    P_NOM,
    RHO,
    SOUND,
    compressor_params,
    electrolyzer_params,
    fig1_topology,
    fuel_cell_params,
    pipe_params,
    storage_params,
    two_storage_topology,
)


def storage(node_id, **kw):
    return NodeDecl(node_id, NodeKind.STORAGE, P_NOM, storage_params(**kw))


def junction(node_id, p=P_NOM):
    return NodeDecl(node_id, NodeKind.JUNCTION, p)


def pipe(edge_id, src, dst):
    return EdgeDecl(edge_id, src, dst, EdgeKind.PIPE, pipe_params())


class TestIncidence:
    def test_fig1_matrix(self):
        topo = fig1_topology()
        inc = build_incidence(topo)
        want = np.array([
            # e1  e2  e3  e4  e5  e6
            [-1,  0,  0,  0,  0,  0],   # n1
            [ 0,  0,  1,  0,  0,  0],   # n2
            [ 0,  0,  0,  0,  0,  1],   # n3
            [ 1, -1,  0,  0,  0,  0],   # n4
            [ 0,  1, -1, -1,  0,  0],   # n5
            [ 0,  0,  0,  1, -1,  0],   # n6
            [ 0,  0,  0,  0,  1, -1],   # n7
        ])
        assert inc.shape == (7, 6)
        np.testing.assert_array_equal(inc, want)

    def test_single_edge(self):
        topo = two_storage_topology()
        np.testing.assert_array_equal(build_incidence(topo), [[-1], [1]])

    def test_incidence_properties(self):
        topo = fig1_topology()
        inc = build_incidence(topo)
        np.testing.assert_array_equal(inc.sum(axis=0), np.zeros(6, dtype=int))
        degree = {nd.id: 0 for nd in topo.nodes}
        for ed in topo.edges:
            degree[ed.source] += 1
            degree[ed.sink] += 1
        for nd in topo.nodes:
            row = inc[topo.node_index[nd.id]]
            assert int(np.count_nonzero(row)) == degree[nd.id]

    def test_rank_is_nodes_minus_one_for_connected_graphs(self):
        for topo in (fig1_topology(), two_storage_topology()):
            inc = build_incidence(topo)
            assert np.linalg.matrix_rank(inc.astype(float)) == len(topo.nodes) - 1

    def test_unvalidated_topology_rejected(self):
        topo = NetworkTopology([storage("a"), storage("b")],
                               [pipe("e", "a", "b")])
        with pytest.raises(UnvalidatedTopologyError):
            build_incidence(topo)


class TestValidate:
    def test_fig1_counts(self):
        topo = fig1_topology()
        report = validate_topology(topo)
        assert report.passed
        c = report.counts
        assert (c.storages, c.junctions, c.compressors) == (3, 3, 1)
        assert (c.electrolyzers, c.fuel_cells) == (1, 1)
        assert str(c) == "S=3 F=3 C=1 E=1 L=1"

    def test_two_ducts_into_one_plenum_names_the_plenum(self):
        nodes = [storage("s1"), junction("j1"),
                 NodeDecl("c1", NodeKind.COMPRESSOR_PLENUM, P_NOM, compressor_params())]
        edges = [
            pipe("p1", "s1", "j1"),
            EdgeDecl("d1", "s1", "c1", EdgeKind.COMPRESSOR_DUCT),
            EdgeDecl("d2", "j1", "c1", EdgeKind.COMPRESSOR_DUCT),
            EdgeDecl("t1", "c1", "j1", EdgeKind.COMPRESSOR_THROTTLE),
        ]
        report = NetworkTopology(nodes, edges).validate()
        assert not report.passed
        assert any("'c1'" in str(i) and "duct" in str(i) for i in report.issues)

    def test_device_on_junction_rejected(self):
        nodes = [storage("s1"), junction("j1")]
        edges = [pipe("p1", "s1", "j1")]
        devices = [SectorDeviceDecl("ely", DeviceKind.ELECTROLYZER, "j1",
                                    electrolyzer_params())]
        report = NetworkTopology(nodes, edges, devices).validate()
        assert not report.passed
        assert any("storage node" in str(i) for i in report.issues)

    def test_second_device_on_same_storage_rejected(self):
        nodes = [storage("s1"), storage("s2")]
        edges = [pipe("p1", "s1", "s2")]
        devices = [
            SectorDeviceDecl("ely", DeviceKind.ELECTROLYZER, "s1", electrolyzer_params()),
            SectorDeviceDecl("fc", DeviceKind.FUEL_CELL, "s1", fuel_cell_params()),
        ]
        report = NetworkTopology(nodes, edges, devices).validate()
        assert not report.passed
        assert any("dedicated storage" in str(i) for i in report.issues)

    def test_duplicate_node_id_rejected(self):
        report = NetworkTopology([storage("a"), storage("a")], []).validate()
        assert any("duplicate node id" in str(i) for i in report.issues)

    def test_nonpositive_nominal_pressure_rejected(self):
        nodes = [NodeDecl("a", NodeKind.STORAGE, -1.0, storage_params()), storage("b")]
        report = NetworkTopology(nodes, [pipe("e", "a", "b")]).validate()
        assert any("nominal pressure" in str(i) for i in report.issues)

    def test_disconnected_graph_rejected(self):
        nodes = [storage("a"), storage("b"), storage("c"), storage("d")]
        edges = [pipe("e1", "a", "b"), pipe("e2", "c", "d")]
        report = NetworkTopology(nodes, edges).validate()
        assert any("unreachable" in str(i) for i in report.issues)

    def test_self_loop_rejected(self):
        report = NetworkTopology([storage("a")], [pipe("e", "a", "a")]).validate()
        assert any("itself" in str(i) for i in report.issues)

    def test_pipe_to_plenum_rejected(self):
        nodes = [storage("s1"), junction("j1"),
                 NodeDecl("c1", NodeKind.COMPRESSOR_PLENUM, P_NOM, compressor_params())]
        edges = [
            pipe("p1", "s1", "j1"),
            pipe("p2", "j1", "c1"),
            EdgeDecl("d1", "j1", "c1", EdgeKind.COMPRESSOR_DUCT),
            EdgeDecl("t1", "c1", "s1", EdgeKind.COMPRESSOR_THROTTLE),
        ]
        report = NetworkTopology(nodes, edges).validate()
        assert any("may not attach" in str(i) for i in report.issues)


class TestCanonicalOrder:
    def shuffled_fig1(self):
        """Fig. 1 declared in a deliberately non-canonical order."""
        constants = NetworkConstants(rho=RHO, sound_speed=SOUND)
        nodes = [
            junction("n4"), NodeDecl("n7", NodeKind.COMPRESSOR_PLENUM, P_NOM,
                                     compressor_params()),
            storage("n3"), junction("n5"), storage("n1"), junction("n6"), storage("n2"),
        ]
        edges = [
            EdgeDecl("e6", "n7", "n3", EdgeKind.COMPRESSOR_THROTTLE),
            EdgeDecl("e2", "n4", "n5", EdgeKind.PIPE, pipe_params()),
            EdgeDecl("e5", "n6", "n7", EdgeKind.COMPRESSOR_DUCT),
            EdgeDecl("e1", "n1", "n4", EdgeKind.PIPE, pipe_params()),
            EdgeDecl("e3", "n5", "n2", EdgeKind.PIPE, pipe_params()),
            EdgeDecl("e4", "n5", "n6", EdgeKind.PIPE, pipe_params()),
        ]
        devices = [
            SectorDeviceDecl("fc1", DeviceKind.FUEL_CELL, "n2", fuel_cell_params()),
            SectorDeviceDecl("ely1", DeviceKind.ELECTROLYZER, "n1", electrolyzer_params()),
        ]
        return NetworkTopology(nodes, edges, devices, constants=constants, name="fig1s")

    def test_storage_junction_compressor_order(self):
        topo = self.shuffled_fig1()
        assert topo.validate().passed
        kinds = [nd.kind for nd in topo.nodes]
        assert kinds == [NodeKind.STORAGE] * 3 + [NodeKind.JUNCTION] * 3 \
            + [NodeKind.COMPRESSOR_PLENUM]
        # device-attached storages lead, electrolyzer-attached first
        assert [nd.id for nd in topo.nodes[:3]] == ["n1", "n2", "n3"]
        assert [d.id for d in topo.devices] == ["ely1", "fc1"]

    def test_duct_throttle_adjacency(self):
        topo = self.shuffled_fig1()
        topo.validate()
        m, n_comp = len(topo.edges), 1
        for i in range(1, n_comp + 1):
            duct = topo.edges[m - 2 * n_comp + 2 * i - 2]
            throttle = topo.edges[m - 2 * n_comp + 2 * i - 1]
            assert duct.kind is EdgeKind.COMPRESSOR_DUCT
            assert throttle.kind is EdgeKind.COMPRESSOR_THROTTLE
            assert duct.sink == throttle.source

    def test_duct_column_index_formula(self):
        # the duct column (1-based) is M-2C+2i-1, which equals the selected
        # output flow index M+2(i-C)-1 for every compressor i
        for m, n_comp in ((6, 1), (12, 3), (9, 2)):
            for i in range(1, n_comp + 1):
                assert m - 2 * n_comp + 2 * i - 1 == m + 2 * (i - n_comp) - 1
