import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netlength.network import (
    NetworkFormatError,
    NetworkLocation,
    PointSet,
    RoadNetwork,
    SnapWarning,
    load_network,
    load_points,
    snap_points,
    validate,
    write_network,
    write_points,
)
from netlength.synth import grid_network, hybrid_network


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def grid_files(tmp_path):
    net = grid_network(3, 3)
    write_network(net, tmp_path / "nodes.csv", tmp_path / "edges.csv")
    return tmp_path


def test_single_edge_total_length(tmp_path):
    n = _write(tmp_path / "n.csv", "node_id,x,y\na,0,0\nb,1,0\n")
    e = _write(tmp_path / "e.csv", "edge_id,from_node,to_node,length\ne1,a,b,1.0\n")
    assert load_network(n, e).total_length == 1.0


def test_grid_total_length(grid_files):
    net = load_network(grid_files / "nodes.csv", grid_files / "edges.csv")
    assert (net.n_nodes, net.n_edges) == (9, 12)
    assert net.total_length == 12.0


def test_blank_length_is_euclidean(tmp_path):
    n = _write(tmp_path / "n.csv", "node_id,x,y\na,0,0\nb,3,4\n")
    e = _write(tmp_path / "e.csv", "edge_id,from_node,to_node,length\ne1,a,b,\n")
    assert load_network(n, e).edge_length[0] == 5.0


def test_length_column_optional(tmp_path):
    n = _write(tmp_path / "n.csv", "node_id,x,y\na,0,0\nb,3,4\n")
    e = _write(tmp_path / "e.csv", "edge_id,from_node,to_node\ne1,a,b\n")
    assert load_network(n, e).total_length == 5.0


@pytest.mark.parametrize(
    "edges, line, fragment",
    [
        ("edge_id,from_node,to_node,length\ne1,a,b,1\ne2,a,z,1\n", 3, "dangling"),
        ("edge_id,from_node,to_node,length\ne1,a,b,1\ne1,b,a,2\n", 3, "duplicate edge_id"),
        ("edge_id,from_node,to_node,length\ne1,a,b,-1\n", 2, "nonpositive"),
        ("edge_id,from_node,to_node,length\ne1,a,b,0\n", 2, "nonpositive"),
        ("edge_id,from_node,to_node,length\ne1,a,b,xyz\n", 2, "cannot parse"),
        ("edge_id,from_node,to_node,length\ne1,a,b\n", 2, "expected 4 fields"),
        ("edge_id,from_node,length\ne1,a,1\n", 1, "to_node"),
    ],
)
def test_edge_errors_carry_line_numbers(tmp_path, edges, line, fragment):
    n = _write(tmp_path / "n.csv", "node_id,x,y\na,0,0\nb,1,0\n")
    e = _write(tmp_path / "e.csv", edges)
    with pytest.raises(NetworkFormatError) as exc:
        load_network(n, e)
    assert exc.value.line == line
    assert fragment in str(exc.value)
    assert f":{line}" in str(exc.value)


def test_node_errors(tmp_path):
    n = _write(tmp_path / "n.csv", "node_id,x,y\na,0,0\na,1,0\n")
    e = _write(tmp_path / "e.csv", "edge_id,from_node,to_node,length\n")
    with pytest.raises(NetworkFormatError, match="duplicate node_id"):
        load_network(n, e)
    n = _write(tmp_path / "n.csv", "node_id,x,y\na,0,nan\n")
    with pytest.raises(NetworkFormatError, match="non-finite"):
        load_network(n, e)
    _write(tmp_path / "empty.csv", "")
    with pytest.raises(NetworkFormatError, match="empty file"):
        load_network(tmp_path / "empty.csv", e)


def test_roundtrip_preserves_structure(tmp_path):
    net = hybrid_network()
    write_network(net, tmp_path / "n.csv", tmp_path / "e.csv")
    back = load_network(tmp_path / "n.csv", tmp_path / "e.csv")
    assert back.edge_ids == net.edge_ids
    np.testing.assert_array_equal(back.edge_length, net.edge_length)
    assert back.total_length == net.total_length


def test_load_is_deterministic_and_permutation_invariant(tmp_path, grid_files):
    a = load_network(grid_files / "nodes.csv", grid_files / "edges.csv")
    b = load_network(grid_files / "nodes.csv", grid_files / "edges.csv")
    assert a.edge_ids == b.edge_ids and a.node_ids == b.node_ids
    lines = (grid_files / "edges.csv").read_text().splitlines()
    rev = "\n".join([lines[0]] + lines[1:][::-1]) + "\n"
    _write(tmp_path / "rev.csv", rev)
    nl = (grid_files / "nodes.csv").read_text().splitlines()
    _write(tmp_path / "nrev.csv", "\n".join([nl[0]] + nl[1:][::-1]) + "\n")
    c = load_network(tmp_path / "nrev.csv", tmp_path / "rev.csv")
    assert c.total_length == a.total_length


def test_total_length_matches_sum():
    net = hybrid_network()
    assert math.isclose(net.total_length, math.fsum(net.edge_length), rel_tol=1e-9)


def test_components_partition_nodes():
    nodes = {"a": (0, 0), "b": (1, 0), "c": (0, 5), "d": (2, 5), "e": (9, 9)}
    net = RoadNetwork(nodes, [("0", "a", "b", None), ("1", "c", "d", None), ("2", "d", "e", None)])
    comp = net.component
    assert net.n_components == 2
    assert comp[net.node_index("a")] == comp[net.node_index("b")]
    assert comp[net.node_index("c")] == comp[net.node_index("e")]
    assert comp[net.node_index("a")] != comp[net.node_index("c")]


def test_validate_reports(caplog):
    rep = validate(grid_network(3, 3))
    assert rep.valid and rep.n_components == 1
    assert rep.degree_histogram == {2: 4, 3: 4, 4: 1}
    two = RoadNetwork({"a": (0, 0), "b": (1, 0), "c": (5, 5), "d": (6, 5)},
                      [("0", "a", "b", None), ("1", "c", "d", None)])
    with caplog.at_level("WARNING"):
        rep = validate(two)
    assert rep.n_components == 2 and rep.valid
    assert any("components" in r.message for r in caplog.records)
    loop = RoadNetwork({"a": (0, 0), "b": (1, 0)}, [("0", "a", "b", None), ("1", "a", "a", 1.0)])
    rep = validate(loop)
    assert not rep.valid and rep.self_loops == ["1"]
    assert rep.as_dict()["valid"] is False


def test_network_rejects_bad_edges():
    with pytest.raises(ValueError):
        RoadNetwork({"a": (0, 0)}, [("0", "a", "z", 1.0)])
    with pytest.raises(ValueError):
        RoadNetwork({"a": (0, 0), "b": (1, 0)}, [("0", "a", "b", 0.0)])


def test_parallel_edges_are_kept():
    net = RoadNetwork({"a": (0, 0), "b": (1, 0)}, [("x", "a", "b", 1.0), ("y", "a", "b", 2.0)])
    assert net.n_edges == 2 and net.total_length == 3.0
    assert validate(net).valid


def test_pointset_validation():
    net = grid_network(2, 2)
    with pytest.raises(ValueError, match="outside"):
        PointSet(net, [0], [1.5])
    with pytest.raises(ValueError):
        PointSet(net, [9], [0.1])
    p = PointSet(net, [0, 1], [0.2, 0.3], [True, False])
    assert p.n == 2 and p.point_ids == ("0", "1")
    assert p.subset([1]).labels.tolist() == [False]
    with pytest.raises(ValueError):
        p.edge[0] = 1


def test_load_points_both_forms(tmp_path):
    net = grid_network(2, 2)
    write_network(net, tmp_path / "n.csv", tmp_path / "e.csv")
    _write(tmp_path / "p.csv", "point_id,edge_id,offset,label\np1,0,0.25,1\np2,1,0.5,0\n")
    pts = load_points(tmp_path / "p.csv", net)
    assert pts.point_ids == ("p1", "p2") and pts.labels.tolist() == [True, False]
    _write(tmp_path / "q.csv", "point_id,x,y\nq1,0.5,0.1\n")
    pts = load_points(tmp_path / "q.csv", net)
    assert net.edge_ids[pts.edge[0]] == "0" and pts.offset[0] == pytest.approx(0.5)
    _write(tmp_path / "r.csv", "point_id,edge_id,offset\nr1,0,7\n")
    with pytest.raises(NetworkFormatError, match="outside") as exc:
        load_points(tmp_path / "r.csv", net)
    assert exc.value.line == 2
    _write(tmp_path / "s.csv", "point_id,edge_id,offset\ns1,nope,0.1\n")
    with pytest.raises(NetworkFormatError, match="unknown edge_id"):
        load_points(tmp_path / "s.csv", net)


def test_points_roundtrip(tmp_path):
    net = grid_network(3, 3)
    pts = PointSet(net, [0, 3, 7], [0.1, 0.123456789012345, 1.0], [True, False, True], ("a", "b", "c"))
    write_points(pts, tmp_path / "p.csv")
    back = load_points(tmp_path / "p.csv", net)
    np.testing.assert_array_equal(back.offset, pts.offset)
    assert back.point_ids == pts.point_ids


def test_snap_examples():
    net = RoadNetwork({"a": (0, 0), "b": (1, 0)}, [("e", "a", "b", None)])
    p = snap_points(net, [(0.5, 0.2)])
    assert p.offset[0] == pytest.approx(0.5) and p.snap_distance[0] == pytest.approx(0.2)
    p = snap_points(net, [(0.3, 0.0)])
    assert p.offset[0] == 0.3 and p.snap_distance[0] == 0.0


def test_snap_tie_goes_to_lowest_edge_id():
    # point equidistant from two parallel roads
    nodes = {"a": (0, 0), "b": (1, 0), "c": (0, 1), "d": (1, 1)}
    net = RoadNetwork(nodes, [("10", "c", "d", None), ("2", "a", "b", None)])
    p = snap_points(net, [(0.5, 0.5)])
    assert net.edge_ids[p.edge[0]] == "2"


def test_snap_warning_beyond_threshold():
    net = RoadNetwork({"a": (0, 0), "b": (1, 0)}, [("e", "a", "b", None)])
    with pytest.warns(SnapWarning):
        snap_points(net, [(0.5, 3.0)], threshold=1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        snap_points(net, [(0.5, 0.5)], threshold=1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 11), st.floats(0.01, 0.99)), min_size=1, max_size=10))
def test_snap_reproduces_on_network_points(locs):
    net = grid_network(3, 3)
    pts = PointSet(net, [e for e, _ in locs], [t for _, t in locs])
    again = snap_points(net, pts.coordinates())
    np.testing.assert_array_equal(again.edge, pts.edge)
    np.testing.assert_allclose(again.offset, pts.offset, atol=1e-12)


def test_location_helpers():
    net = grid_network(2, 2)
    loc = net.location("0", 0.5)
    assert loc == NetworkLocation("0", 0.5)
    with pytest.raises(ValueError):
        net.location("0", 2.0)
