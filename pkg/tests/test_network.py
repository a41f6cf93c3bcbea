import gzip
import hashlib
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
import synth
from roadcorpus.errors import EmptyNetwork, SchemaError, UnknownRoad
from roadcorpus.geo import haversine_m
from roadcorpus.ingest import OsmNode, OsmWay, normalize_tags
from roadcorpus.network import (
    aggregate_road_meta,
    build_network,
    connected_roads,
    dumps_snapshot,
    load_snapshot,
    network_from_dict,
    network_to_dict,
    save_snapshot,
)


def _nodes(coords):
    return [OsmNode(i, lat, lon) for i, (lat, lon) in coords.items()]


def _way(wid, refs, **tags):
    tags.setdefault("highway", "residential")
    return OsmWay(wid, tuple(refs), tags)


# A=1 B=2 C=3 D=4 E=5 around a junction at B
COORDS = {1: (0.0, -0.002), 2: (0.0, 0.0), 3: (0.0, 0.002), 4: (0.002, 0.0), 5: (-0.002, 0.0), 6: (0.0, 0.004)}


def test_single_way_no_junction():
    net = build_network(_nodes(COORDS), [_way(1, [1, 2, 3], name="X")])
    assert len(net.segments) == 1
    assert net.segments[0].node_ids == (1, 2, 3)


def test_crossing_splits_into_four():
    net = build_network(_nodes(COORDS), [_way(1, [1, 2, 3], name="X"), _way(2, [4, 2, 5], name="Y")])
    assert [s.node_ids for s in net.segments] == [(1, 2), (2, 3), (4, 2), (2, 5)]
    assert [s.way_ids for s in net.segments] == [(1,), (1,), (2,), (2,)]


def test_end_to_end_ways_merge():
    net = build_network(_nodes(COORDS), [_way(7, [1, 2], name="X"), _way(3, [2, 3, 6], name="X")])
    assert len(net.segments) == 1
    assert set(net.segments[0].node_ids) == {1, 2, 3, 6}
    assert net.segments[0].way_ids == (3, 7)


def test_different_tags_do_not_merge():
    net = build_network(_nodes(COORDS), [_way(1, [1, 2], name="X", maxspeed="50"), _way(2, [2, 3], name="X", maxspeed="60")])
    assert len(net.segments) == 2


def test_stacked_nodes_collapse():
    coords = dict(COORDS)
    coords[9] = coords[2]
    net = build_network(_nodes(coords), [_way(1, [1, 2, 3], name="X"), _way(2, [4, 9, 5], name="Y")])
    assert len(net.segments) == 4
    assert all(9 not in s.node_ids for s in net.segments)


def test_empty_network():
    with pytest.raises(EmptyNetwork):
        build_network(_nodes(COORDS), [_way(1, [1], name="X")])


def test_aggregate_examples():
    segs = [
        synth.make_segment(0, [(0, 0), (0, 0.0009)], "R", speed=50, lanes=2),
        synth.make_segment(1, [(0, 0.001), (0, 0.0037)], "R", speed=60, lanes=4),
    ]
    assert aggregate_road_meta((0,), segs).maxspeed_kmh == 50
    meta = aggregate_road_meta((0, 1), segs)
    assert meta.maxspeed_kmh == 60
    assert meta.segment_count == 2
    assert meta.total_length_m == pytest.approx(segs[0].meta.length_m + segs[1].meta.length_m, rel=1e-12)

    eq = [
        synth.make_segment(0, [(0, 0), (0, 0.001)], "R", lanes=2),
        synth.make_segment(1, [(1, 0), (1, 0.001)], "R", lanes=4),
    ]
    # lengths differ by float noise at different latitudes; force exact equality
    eq[1].meta = eq[1].meta._replace(length_m=eq[0].meta.length_m)
    assert aggregate_road_meta((0, 1), eq).lanes == 4
    assert aggregate_road_meta((0, 1), eq).maxspeed_kmh is None


def test_aggregate_class_tie_prefers_higher_class():
    segs = [
        synth.make_segment(0, [(0, 0), (0, 0.001)], "R", road_type="residential"),
        synth.make_segment(1, [(0, 0), (0, 0.001)], "R", road_type="primary"),
    ]
    assert aggregate_road_meta((0, 1), segs).road_type == "primary"


def test_connected_roads_examples():
    # plus shape: X east-west, Y north-south, Z isolated
    coords = dict(COORDS)
    coords.update({20: (0.01, 0.01), 21: (0.01, 0.011)})
    ways = [_way(1, [1, 2, 3], name="X"), _way(2, [4, 2, 5], name="Y"), _way(3, [20, 21], name="Z")]
    net = build_network(_nodes(coords), ways)
    assert connected_roads("X", net) == [("Y", (0.0, 0.0))]
    assert connected_roads("Z", net) == []
    with pytest.raises(UnknownRoad):
        connected_roads("Nope", net)


def test_connected_roads_two_junctions():
    # six nodes: P runs 1-2-3-6, Q loops 4-2 ... 3-5 so they share nodes 2 and 3
    coords = {1: (0.0, 0.0), 2: (0.0, 0.001), 3: (0.0, 0.002), 6: (0.0, 0.003), 4: (0.001, 0.001), 5: (0.001, 0.002)}
    ways = [_way(1, [1, 2, 3, 6], name="P"), _way(2, [2, 4, 5, 3], name="Q")]
    net = build_network(_nodes(coords), ways)
    assert connected_roads("P", net) == [("Q", (0.0, 0.001)), ("Q", (0.0, 0.002))]


def test_connected_roads_symmetric(grid_net):
    for x in grid_net.roads:
        for y, q in connected_roads(x, grid_net):
            assert (x, q) in connected_roads(y, grid_net)


def _reference_segments(coords, ways):
    prepared = [(w.id, list(w.node_refs), normalize_tags(w.tags).merge_key()) for w in ways]
    return oracles.split_and_merge(prepared, coords)


@given(st.integers(0, 10_000), st.integers(5, 200), st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_build_matches_reference(seed, n_ways, keys):
    coords, raw = synth.random_lattice_ways(seed, n_ways=n_ways, keys=keys)
    ways = [_way(wid, refs, **tags) for wid, refs, tags in raw]
    net = build_network(_nodes(coords), ways)
    got = sorted(
        ((tuple(sorted(set(s.way_ids))), tuple(sorted(set(s.node_ids))), (s.meta.name, s.meta.road_type, s.meta.maxspeed_kmh, s.meta.lanes)) for s in net.segments),
        key=repr,
    )
    assert got == _reference_segments(coords, ways)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_length_conservation(seed):
    coords, raw = synth.random_lattice_ways(seed, n_ways=40, keys=2)
    ways = [_way(wid, refs, **tags) for wid, refs, tags in raw]
    net = build_network(_nodes(coords), ways)
    per_way = math.fsum(haversine_m(coords[a], coords[b]) for w in ways for a, b in zip(w.node_refs, w.node_refs[1:]))
    assert net.total_length_m() == pytest.approx(per_way, rel=1e-6)


def test_seg_ids_follow_way_order(grid_net):
    firsts = [min(s.way_ids) for s in grid_net.segments]
    assert firsts == sorted(firsts)


def test_snapshot_roundtrip(tmp_path, grid_net):
    p = tmp_path / "net.json.gz"
    save_snapshot(grid_net, p, config={"seed": 1})
    back = load_snapshot(p)
    assert dumps_snapshot(back, {"seed": 1}) == dumps_snapshot(grid_net, {"seed": 1})
    p2 = tmp_path / "again.json.gz"
    save_snapshot(back, p2, config={"seed": 1})
    assert hashlib.sha256(p.read_bytes()).hexdigest() == hashlib.sha256(p2.read_bytes()).hexdigest()
    assert gzip.decompress(p.read_bytes()).startswith(b"{")


def test_rebuild_is_byte_identical(grid_parsed):
    nodes, ways, stats = grid_parsed
    a = dumps_snapshot(build_network(nodes, ways, stats.bounds))
    b = dumps_snapshot(build_network(list(reversed(nodes)), list(reversed(ways)), stats.bounds))
    assert a == b


def test_snapshot_schema_errors(grid_net, tmp_path):
    doc = network_to_dict(grid_net)
    doc["schema"] = "other"
    with pytest.raises(SchemaError):
        network_from_dict(doc)
    doc = network_to_dict(grid_net)
    del doc["segments"][0]["geometry"]
    with pytest.raises(SchemaError):
        network_from_dict(doc)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SchemaError):
        load_snapshot(bad)


def test_road_lookup_is_normalized(grid_net):
    assert grid_net.road("springfield  road").name == "Springfield Road"
    assert grid_net.canonical_name("ILAM ROAD") == "Ilam Road"
