import json
import random
import re

import pytest

import synth
from roadcorpus.corpus import (
    FORMATS,
    RecordReader,
    fmt_point,
    gen_p2dr,
    gen_p2s,
    gen_point_pairs,
    gen_r2c,
    gen_r2i,
    gen_s2i,
    generate,
    load_templates,
    manifest_path,
    render_and_emit,
    render_records,
    templates_for,
    verify_item,
)
from roadcorpus.geo import GeoPoint
from roadcorpus.ingest import OsmNode, OsmWay
from roadcorpus.network import build_network, connected_roads
from roadcorpus.spatial import project_to_segment


@pytest.fixture(scope="module")
def items(grid_net):
    return generate(grid_net, seed=5, p2s_per_segment=2, n_pairs=120, n_p2dr=60)


def test_templates_have_enough_prompts():
    doc = load_templates()
    assert set(doc["formats"]) == set(FORMATS)
    for fmt in FORMATS:
        assert len(set(templates_for(fmt))) >= 5


def test_r2i_one_per_road(grid_net):
    items = gen_r2i(grid_net)
    assert [it.fields["name"] for it in items] == list(grid_net.roads)
    spring = next(it for it in items if it.fields["name"] == "Springfield Road")
    for key in ("Type: secondary", "Speed limit: 50 km/h", "Lanes: 2", "Total length:", "Segments:"):
        assert key in spring.answer
    # avenues carry no maxspeed anywhere
    rossall = next(it for it in items if it.fields["name"] == "Rossall Street")
    assert "Speed limit: unknown" in rossall.answer


def test_p2s_counts_and_on_segment(grid_net):
    items = gen_p2s(grid_net, n_per_segment=2, seed=1)
    assert len(items) == 2 * len(grid_net.segments)
    for it in items:
        seg = grid_net.segments[it.source["seg_id"]]
        q = GeoPoint(*it.source["point"])
        assert project_to_segment(q, seg).distance_m < 0.5
        assert it.fields["point"] == fmt_point(q)


def test_p2s_ten_segment_network():
    net = synth.random_network(10, 4)
    assert len(gen_p2s(net, n_per_segment=2)) == 20


def test_s2i_named_only(grid_net):
    items = gen_s2i(grid_net)
    assert len(items) == len(grid_net.named_segment_ids)
    assert all("unnamed" not in it.answer for it in items)


def test_r2c_matches_connected_roads(grid_net):
    for it in gen_r2c(grid_net):
        links = connected_roads(it.fields["name"], grid_net)
        assert it.answer == "; ".join(f"{n} at {fmt_point(q)}" for n, q in links)


def test_r2c_chain():
    # three roads in a row: A meets B at one node, B meets C at another
    pts = [synth.offset(0, 0), synth.offset(0, 100), synth.offset(0, 200), synth.offset(0, 300)]
    nodes = [OsmNode(i + 1, *p) for i, p in enumerate(pts)]
    ways = [OsmWay(i + 1, (i + 1, i + 2), {"highway": "residential", "name": n}) for i, n in enumerate("ABC")]
    net = build_network(nodes, ways)
    got = {it.fields["name"]: it.answer for it in gen_r2c(net)}
    assert got == {
        "A": f"B at {fmt_point(pts[1])}",
        "B": f"A at {fmt_point(pts[1])}; C at {fmt_point(pts[2])}",
        "C": f"B at {fmt_point(pts[2])}",
    }


def test_point_pairs(grid_net):
    dist = gen_point_pairs(grid_net, 50, seed=2, kind="distance")
    dirs = gen_point_pairs(grid_net, 50, seed=2, kind="direction")
    assert len(dist) == len(dirs) == 50
    assert all(it.fields["p1"] != it.fields["p2"] for it in dist)
    # disjoint streams: the two kinds do not reuse the same pairs
    assert [it.fields["p1"] for it in dist] != [it.fields["p1"] for it in dirs]
    with pytest.raises(ValueError):
        gen_point_pairs(grid_net, 1, kind="speed")


def test_p2dr_entries(grid_net):
    for it in gen_p2dr(grid_net, 30, seed=3):
        assert verify_item(it, grid_net) == []


def test_every_item_verifies(items, grid_net):
    bad = [(it.format, it.source_key, verify_item(it, grid_net)) for it in items if verify_item(it, grid_net)]
    assert bad == []


def test_verify_detects_tampering(items, grid_net):
    it = next(i for i in items if i.format == "PP_DIST")
    it2 = type(it)(it.format, it.source_key, {**it.fields, "facts": "1 m"}, it.city, it.source)
    assert verify_item(it2, grid_net)
    r2i = next(i for i in items if i.format == "R2I")
    wrong = r2i.fields["facts"].replace("Lanes: 2", "Lanes: 3")
    assert verify_item(type(r2i)("R2I", r2i.source_key, {**r2i.fields, "facts": wrong}, "", {}), grid_net)


@pytest.mark.parametrize("flavor", ["pretrain", "instruct"])
def test_emitted_records_read_back(flavor, items, grid_net, tmp_path):
    path = tmp_path / f"{flavor}.jsonl"
    render_and_emit(items, flavor, path, seed=9, city="Gridton")
    reader = RecordReader(grid_net)
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(records) == len(items)
    for rec in records:
        assert verify_item(reader.item(rec), grid_net) == [], rec


def test_empty_corpus(tmp_path):
    m = render_and_emit([], "instruct", tmp_path / "empty.jsonl")
    assert (tmp_path / "empty.jsonl").read_text() == ""
    assert m["total"] == 0 and set(m["counts"].values()) == {0}
    assert manifest_path(tmp_path / "empty.jsonl").exists()


def test_same_seed_same_bytes(items, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    render_and_emit(items, "instruct", a, seed=3)
    render_and_emit(list(reversed(items)), "instruct", b, seed=3)
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.jsonl"
    render_and_emit(items, "instruct", c, seed=4)
    assert sorted(a.read_text().splitlines()) == sorted(c.read_text().splitlines())
    assert a.read_bytes() != c.read_bytes()


def test_template_cycling(items):
    ordered = sorted(items, key=lambda it: (it.format, it.source_key))
    recs = render_records(items, "instruct", seed=0)
    by_prompt = {r["prompt"]: r for r in recs}
    position = {}
    for it in ordered:
        i = position.get(it.format, 0)
        position[it.format] = i + 1
        templates = templates_for(it.format)
        assert templates[i % len(templates)].format(**it.fields, city=it.city) in by_prompt


def test_template_diversity(items):
    recs = render_records(items, "instruct", seed=0)
    for fmt in FORMATS:
        prompts = [r["prompt"] for r in recs if r["format"] == fmt]
        prefixes = {p[:12] for p in prompts}
        assert len(prefixes) >= 5, fmt


def test_generation_is_deterministic(grid_net):
    a = generate(grid_net, seed=1, n_pairs=20, n_p2dr=20)
    b = generate(grid_net, seed=1, n_pairs=20, n_p2dr=20)
    assert [(i.format, i.fields) for i in a] == [(i.format, i.fields) for i in b]


def test_coordinates_have_five_decimals(items):
    coord = re.compile(r"\((-?\d+\.\d+), (-?\d+\.\d+)\)")
    for it in random.Random(0).sample(items, 80):
        found = coord.findall(it.pretrain_doc)
        if it.format != "R2I":
            assert found, it.format
        for lat, lon in found:
            assert len(lat.split(".")[1]) == 5 and len(lon.split(".")[1]) == 5


def test_r2c_junction_on_rounding_boundary():
    # a junction whose latitude sits exactly half a unit between two 5-decimal renderings
    pts = [(-43.424425, 172.7332), (-43.424425, 172.7342), (-43.423425, 172.7342)]
    nodes = [OsmNode(i + 1, *p) for i, p in enumerate(pts)]
    ways = [OsmWay(1, (1, 2), {"highway": "residential", "name": "A"}), OsmWay(2, (2, 3), {"highway": "residential", "name": "B"})]
    net = build_network(nodes, ways)
    for it in gen_r2c(net):
        assert verify_item(it, net) == []
