"""Supervision corpora: the seven text formats, rendering, JSONL emission, round-trip checks."""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import IoFailure
from .geo import DIRECTIONS, GeoPoint, direction_between, haversine_m, interpolate, quantize
from .network import RoadNetwork, connected_roads
from .spatial import DEFAULT_RADIUS_M, density_sample, directional_nearest, project_to_segment

FORMATS = ("R2I", "P2S", "S2I", "R2C", "PP_DIST", "PP_DIR", "P2DR")
COORD_DECIMALS = 5
MIN_PAIR_DISTANCE_M = 10.0
ON_SEGMENT_TOLERANCE_M = 0.5

# RNG stream tags; every random draw is keyed on (seed, stream, ...)
STREAM_P2S = 11
STREAM_PP_DIST = 20
STREAM_PP_DIR = 40
STREAM_P2DR = 60


@lru_cache(maxsize=1)
def load_templates() -> dict:
    text = resources.files("roadcorpus").joinpath("templates.json").read_text(encoding="utf-8")
    return json.loads(text)


def fmt_point(p) -> str:
    return f"({p[0]:.{COORD_DECIMALS}f}, {p[1]:.{COORD_DECIMALS}f})"


def fmt_polyline(points) -> str:
    return " -> ".join(fmt_point(p) for p in points)


def fmt_speed(v) -> str:
    return "unknown" if v is None else f"{v} km/h"


def fmt_lanes(v) -> str:
    return "unknown" if v is None else str(v)


def fmt_meters(v: float) -> str:
    return f"{round(v)} m"


@dataclass
class SupervisionItem:
    format: str
    source_key: tuple
    fields: dict
    city: str = ""
    source: dict = field(default_factory=dict)

    @property
    def answer(self) -> str:
        return load_templates()["formats"][self.format]["answer"].format(**self.fields, city=self.city)

    @property
    def pretrain_doc(self) -> str:
        tpl = load_templates()["formats"][self.format]
        title = tpl["title"].format(**self.fields, city=self.city)
        body = tpl["doc"].format(**self.fields, city=self.city)
        return f"{title}\n\n{body}"

    @property
    def instruction_pairs(self) -> list[tuple[str, str]]:
        answer = self.answer
        return [(t.format(**self.fields, city=self.city), answer) for t in templates_for(self.format)]


def templates_for(fmt: str) -> list[str]:
    return load_templates()["formats"][fmt]["prompts"]


def _meta_facts(meta, *, with_name=True, prefix=""):
    parts = [prefix] if prefix else []
    if with_name:
        parts.append(f"Name: {meta.name if meta.name is not None else 'unnamed'}")
    parts += [
        f"Type: {meta.road_type}",
        f"Speed limit: {fmt_speed(meta.maxspeed_kmh)}",
        f"Lanes: {fmt_lanes(meta.lanes)}",
        f"Length: {fmt_meters(meta.length_m)}",
    ]
    return "; ".join(parts)


def gen_r2i(network: RoadNetwork):
    items = []
    for name, road in network.roads.items():
        m = road.meta
        facts = "; ".join(
            [
                f"Type: {m.road_type}",
                f"Speed limit: {fmt_speed(m.maxspeed_kmh)}",
                f"Lanes: {fmt_lanes(m.lanes)}",
                f"Total length: {fmt_meters(m.total_length_m)}",
                f"Segments: {m.segment_count}",
            ]
        )
        items.append(SupervisionItem("R2I", (name,), {"name": name, "facts": facts}, network.city, {"road": name}))
    return items


def point_on_segment(seg, rng, tries: int = 32):
    """Arc-length-uniform point on ``seg`` whose 5-decimal rendering stays on the segment."""
    best = None
    for _ in range(tries):
        q = quantize(interpolate(seg.geometry, seg.cumlen, float(rng.random())), COORD_DECIMALS)
        d = project_to_segment(q, seg).distance_m
        if d < ON_SEGMENT_TOLERANCE_M:
            return q
        if best is None or d < best[0]:
            best = (d, q)
    return best[1]


def gen_p2s(network: RoadNetwork, n_per_segment: int = 1, seed: int = 0):
    items = []
    for seg in network.segments:
        for j in range(n_per_segment):
            rng = np.random.default_rng([seed, STREAM_P2S, seg.seg_id, j])
            q = point_on_segment(seg, rng)
            facts = _meta_facts(seg.meta, prefix=f"Segment: {fmt_polyline(seg.geometry)}")
            items.append(
                SupervisionItem(
                    "P2S",
                    (seg.seg_id, j),
                    {"point": fmt_point(q), "facts": facts},
                    network.city,
                    {"seg_id": seg.seg_id, "point": list(q)},
                )
            )
    return items


def gen_s2i(network: RoadNetwork):
    items = []
    for seg in network.segments:
        if seg.meta.name is None:
            continue
        items.append(
            SupervisionItem(
                "S2I",
                (seg.seg_id,),
                {
                    "polyline": fmt_polyline(seg.geometry),
                    "start": fmt_point(seg.geometry[0]),
                    "end": fmt_point(seg.geometry[-1]),
                    "facts": _meta_facts(seg.meta),
                },
                network.city,
                {"seg_id": seg.seg_id},
            )
        )
    return items


def gen_r2c(network: RoadNetwork):
    items = []
    for name in network.roads:
        links = connected_roads(name, network)
        if not links:
            continue
        facts = "; ".join(f"{other} at {fmt_point(q)}" for other, q in links)
        items.append(SupervisionItem("R2C", (name,), {"name": name, "facts": facts}, network.city, {"road": name}))
    return items


def sample_pairs(network: RoadNetwork, n: int, seed: int, stream: int, cell_km: float = 1.0):
    """``n`` quantized point pairs from two density-sampled streams, none closer than 10 m."""
    pairs = []
    batch = 0
    while len(pairs) < n:
        a = density_sample(network, n, cell_km, seed, stream * 1000 + 2 * batch)
        b = density_sample(network, n, cell_km, seed, stream * 1000 + 2 * batch + 1)
        order = np.random.default_rng([seed, stream, batch]).permutation(len(b))
        for p1, j in zip(a, order.tolist()):
            q1, q2 = quantize(p1), quantize(b[j])
            if haversine_m(q1, q2) >= MIN_PAIR_DISTANCE_M:
                pairs.append((q1, q2))
                if len(pairs) == n:
                    break
        batch += 1
    return pairs


def gen_point_pairs(network: RoadNetwork, n: int, seed: int = 0, kind: str = "distance", cell_km: float = 1.0):
    if kind not in ("distance", "direction"):
        raise ValueError(f"unknown pair kind {kind!r}")
    fmt = "PP_DIST" if kind == "distance" else "PP_DIR"
    stream = STREAM_PP_DIST if kind == "distance" else STREAM_PP_DIR
    items = []
    for i, (p1, p2) in enumerate(sample_pairs(network, n, seed, stream, cell_km)):
        facts = fmt_meters(haversine_m(p1, p2)) if kind == "distance" else direction_between(p1, p2)
        items.append(
            SupervisionItem(
                fmt,
                (i,),
                {"p1": fmt_point(p1), "p2": fmt_point(p2), "facts": facts},
                network.city,
                {"p1": list(p1), "p2": list(p2)},
            )
        )
    return items


def fmt_directional(result: dict) -> str:
    return "; ".join(f"{d}: {result[d][0]} ({fmt_meters(result[d][1])})" for d in DIRECTIONS if d in result)


def gen_p2dr(network: RoadNetwork, n: int, seed: int = 0, r: float = DEFAULT_RADIUS_M, cell_km: float = 1.0):
    items = []
    for i, p in enumerate(density_sample(network, n, cell_km, seed, STREAM_P2DR)):
        q = quantize(p)
        result = directional_nearest(q, network, r)
        if not result:
            continue
        items.append(
            SupervisionItem(
                "P2DR", (i,), {"point": fmt_point(q), "facts": fmt_directional(result)}, network.city, {"point": list(q)}
            )
        )
    return items


def generate(network: RoadNetwork, formats=FORMATS, seed: int = 0, p2s_per_segment: int = 1, n_pairs: int = 1000, n_p2dr: int = 1000, r: float = DEFAULT_RADIUS_M, cell_km: float = 1.0, n_pairs_dir: int | None = None):
    if n_pairs_dir is None:
        n_pairs_dir = n_pairs
    items = []
    for fmt in formats:
        if fmt == "R2I":
            items += gen_r2i(network)
        elif fmt == "P2S":
            items += gen_p2s(network, p2s_per_segment, seed)
        elif fmt == "S2I":
            items += gen_s2i(network)
        elif fmt == "R2C":
            items += gen_r2c(network)
        elif fmt == "PP_DIST":
            items += gen_point_pairs(network, n_pairs, seed, "distance", cell_km)
        elif fmt == "PP_DIR":
            items += gen_point_pairs(network, n_pairs_dir, seed, "direction", cell_km)
        elif fmt == "P2DR":
            items += gen_p2dr(network, n_p2dr, seed, r, cell_km)
        else:
            raise ValueError(f"unknown format {fmt!r}")
    return items


def render_records(items, flavor: str, seed: int = 0):
    """Ordered JSON-ready records: sorted by (format, source), template i mod T, then shuffled."""
    if flavor not in ("pretrain", "instruct"):
        raise ValueError(f"unknown flavor {flavor!r}")
    ordered = sorted(items, key=lambda it: (it.format, it.source_key))
    records = []
    position = {}
    for it in ordered:
        i = position.get(it.format, 0)
        position[it.format] = i + 1
        if flavor == "pretrain":
            records.append({"text": it.pretrain_doc, "format": it.format, "city": it.city})
        else:
            templates = templates_for(it.format)
            prompt = templates[i % len(templates)].format(**it.fields, city=it.city)
            records.append({"prompt": prompt, "answer": it.answer, "format": it.format, "city": it.city})
    order = np.random.default_rng(seed).permutation(len(records)) if records else []
    return [records[j] for j in order]


def render_and_emit(items, flavor: str, path, seed: int = 0, city: str = "", params: dict | None = None, extract_sha256: str = ""):
    """Write a JSONL corpus and its ``.manifest.json`` sidecar; returns the manifest."""
    path = Path(path)
    records = render_records(items, flavor, seed)
    counts = {f: 0 for f in FORMATS}
    for rec in records:
        counts[rec["format"]] += 1
    manifest = {
        "city": city,
        "flavor": flavor,
        "seed": seed,
        "counts": counts,
        "total": len(records),
        "engine_version": __version__,
        "templates_version": load_templates()["version"],
        "extract_sha256": extract_sha256,
        "parameters": {"coord_decimals": COORD_DECIMALS, **(params or {})},
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        with open(manifest_path(path), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write corpus {path}: {exc}") from None
    return manifest


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name[: -len(path.suffix)] + ".manifest.json" if path.suffix else path.name + ".manifest.json")


# -- round-trip checks -------------------------------------------------------

_PT = r"\((-?\d+\.\d+), (-?\d+\.\d+)\)"
_META = re.compile(
    r"^(?:Segment: (?P<seg>.*?); )?(?:Name: (?P<name>.*); )?Type: (?P<type>[^;]*); "
    r"Speed limit: (?P<speed>[^;]*); Lanes: (?P<lanes>[^;]*); (?:Total length|Length): (?P<length>\d+) m"
    r"(?:; Segments: (?P<count>\d+))?$"
)
_LINK = re.compile(r"(.+?) at " + _PT + r"(?:; |$)")
_DIR_ENTRY = re.compile(r"(N|NE|E|SE|S|SW|W|NW): (.+?) \((\d+) m\)(?:; |$)")


def parse_point(text: str) -> GeoPoint:
    m = re.fullmatch(_PT, text.strip())
    if not m:
        raise ValueError(f"not a coordinate: {text!r}")
    return GeoPoint(float(m.group(1)), float(m.group(2)))


def _parse_speed(s):
    return None if s == "unknown" else _num(s.removesuffix(" km/h"))


def _num(s):
    v = float(s)
    return int(v) if v.is_integer() else v


def _check(cond, what, problems):
    if not cond:
        problems.append(what)


def verify_item(item: SupervisionItem, network: RoadNetwork, r: float = DEFAULT_RADIUS_M) -> list[str]:
    """Re-derive every value in the rendered answer from the network; returns problems (empty if ok)."""
    problems: list[str] = []
    ans = item.answer
    fmt = item.format
    if fmt in ("R2I", "P2S", "S2I"):
        m = _META.match(ans)
        if not m:
            return [f"unparseable answer {ans!r}"]
        if fmt == "R2I":
            meta = network.roads[item.fields["name"]].meta
            length, name = meta.total_length_m, item.fields["name"]
            _check(int(m.group("count")) == meta.segment_count, "segment count", problems)
        else:
            if fmt == "P2S":
                q = parse_point(item.fields["point"])
                seg = network.segments[item.source["seg_id"]]
                _check(project_to_segment(q, seg).distance_m < ON_SEGMENT_TOLERANCE_M, "point off segment", problems)
                geom = [parse_point(t) for t in m.group("seg").split(" -> ")]
                _check(
                    len(geom) == len(seg.geometry) and all(haversine_m(a, b) < 1.2 for a, b in zip(geom, seg.geometry)),
                    "geometry",
                    problems,
                )
                _check(
                    abs(sum(haversine_m(a, b) for a, b in zip(geom, geom[1:])) - seg.meta.length_m)
                    <= 1.2 * len(geom) + 0.5,
                    "geometry length",
                    problems,
                )
            else:
                seg = network.segments[item.source["seg_id"]]
            meta = seg.meta
            length, name = meta.length_m, meta.name if meta.name is not None else "unnamed"
            _check(m.group("name") == name, "name", problems)
        _check(m.group("type") == meta.road_type, "road type", problems)
        _check(_parse_speed(m.group("speed")) == meta.maxspeed_kmh, "speed", problems)
        _check((None if m.group("lanes") == "unknown" else int(m.group("lanes"))) == meta.lanes, "lanes", problems)
        _check(abs(int(m.group("length")) - length) <= 0.5, "length", problems)
    elif fmt == "R2C":
        # coordinates compare as rendered text: a float tolerance of half a unit misfires on exact .5 boundaries
        found = [(g[0], f"({g[1]}, {g[2]})") for g in _LINK.findall(ans)]
        truth = connected_roads(item.fields["name"], network)
        _check(len(found) == len(truth), "connection count", problems)
        for (n1, q1), (n2, q2) in zip(found, truth):
            _check(n1 == n2 and q1 == fmt_point(q2), f"link {n1}", problems)
    elif fmt in ("PP_DIST", "PP_DIR"):
        p1, p2 = parse_point(item.fields["p1"]), parse_point(item.fields["p2"])
        _check(haversine_m(p1, p2) >= MIN_PAIR_DISTANCE_M, "pair too close", problems)
        if fmt == "PP_DIST":
            _check(ans == fmt_meters(haversine_m(p1, p2)), "distance", problems)
        else:
            _check(ans == direction_between(p1, p2), "direction", problems)
    elif fmt == "P2DR":
        q = parse_point(item.fields["point"])
        truth = directional_nearest(q, network, r)
        found = {d: (n, int(x)) for d, n, x in _DIR_ENTRY.findall(ans)}
        _check(set(found) == set(truth), "directions", problems)
        for d, (n, x) in found.items():
            if d in truth:
                _check(n == truth[d][0] and abs(x - truth[d][1]) <= 0.5, f"direction {d}", problems)
    else:
        problems.append(f"unknown format {fmt}")
    return problems


# -- reading emitted records back ---------------------------------------------


def _template_regex(template: str, city: str):
    """Regex matching a filled template; each placeholder becomes a named group."""
    out = []
    seen = set()
    for literal, fname, _, _ in string.Formatter().parse(template):
        out.append(re.escape(literal))
        if fname is None:
            continue
        if fname == "city":
            out.append(re.escape(city))
        elif fname in seen:
            out.append(f"(?P={fname})")
        else:
            seen.add(fname)
            out.append(f"(?P<{fname}>.+?)" if fname != "facts" else "(?P<facts>.+)")
    return re.compile("".join(out), re.DOTALL)


class RecordReader:
    """Rebuild SupervisionItems from emitted JSONL records, using only their text.

    Segment-level items are matched back to a segment through the rendered
    polyline, so verification never sees generator-side bookkeeping.
    """

    def __init__(self, network: RoadNetwork):
        self.network = network
        self._by_polyline = {}
        for seg in network.segments:
            self._by_polyline.setdefault(fmt_polyline(seg.geometry), []).append(seg.seg_id)

    def segment_for(self, polyline: str, meta_text: str | None = None):
        ids = self._by_polyline.get(polyline, [])
        if len(ids) > 1 and meta_text is not None:
            # stacked duplicates: pick the one whose metadata renders identically
            for sid in ids:
                if _meta_facts(self.network.segments[sid].meta) == meta_text:
                    return sid
        return ids[0] if ids else None

    def item(self, record: dict) -> SupervisionItem:
        fmt, city = record["format"], record.get("city", "")
        tpl = load_templates()["formats"][fmt]
        fields = None
        if "text" in record:
            title, _, body = record["text"].partition("\n\n")
            m = _template_regex(tpl["doc"], city).fullmatch(body)
            if m:
                fields = m.groupdict()
        else:
            for t in tpl["prompts"]:
                m = _template_regex(t, city).fullmatch(record["prompt"])
                if m:
                    fields = {**m.groupdict(), "facts": record["answer"]}
                    break
        if fields is None:
            raise ValueError(f"record does not match any {fmt} template")
        source = {}
        if fmt == "P2S":
            seg_text, _, meta_text = fields["facts"].removeprefix("Segment: ").partition("; ")
            source["seg_id"] = self.segment_for(seg_text, meta_text)
        elif fmt == "S2I":
            source["seg_id"] = self.segment_for(fields["polyline"], fields["facts"])
        if "seg_id" in source and source["seg_id"] is None:
            raise ValueError("record geometry matches no segment")
        return SupervisionItem(fmt, (), fields, city, source)
