"""Road network construction: segments, named roads, connectivity, snapshots."""

from __future__ import annotations

import gzip
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import BadInput, EmptyNetwork, SchemaError, UnknownRoad, UnsupportedAoi
from .geo import GeoPoint, _finish, cumulative_lengths, haversine_m, project_edges
from .index import GridIndex
from .ingest import HIGHWAY_CLASSES, normalize_tags

SNAPSHOT_SCHEMA = "roadcorpus.network"
SNAPSHOT_VERSION = 1


class Bbox(NamedTuple):
    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float


class SegmentMeta(NamedTuple):
    name: str | None
    road_type: str
    maxspeed_kmh: int | float | None
    lanes: int | None
    length_m: float


@dataclass(eq=False)
class RoadSegment:
    seg_id: int
    geometry: tuple[GeoPoint, ...]
    meta: SegmentMeta
    node_ids: tuple[int, ...]
    way_ids: tuple[int, ...] = ()
    lats: np.ndarray = field(init=False, repr=False)
    lons: np.ndarray = field(init=False, repr=False)
    cumlen: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.lats = np.array([p[0] for p in self.geometry], dtype=float)
        self.lons = np.array([p[1] for p in self.geometry], dtype=float)
        self.cumlen = cumulative_lengths(self.geometry)

    @property
    def endpoint_node_ids(self):
        return (self.node_ids[0], self.node_ids[-1])

    @property
    def name(self):
        return self.meta.name


class RoadMeta(NamedTuple):
    total_length_m: float
    road_type: str
    maxspeed_kmh: int | float | None
    lanes: int | None
    segment_count: int


@dataclass
class NamedRoad:
    name: str
    segment_ids: tuple[int, ...]
    meta: RoadMeta


def class_rank(road_type: str):
    """Sort key: lower is a higher road class (motorway first)."""
    if road_type in HIGHWAY_CLASSES:
        return (HIGHWAY_CLASSES.index(road_type), "")
    return (len(HIGHWAY_CLASSES), road_type)


def _weighted_mode(pairs, prefer):
    """Length-weighted mode of (value, length) pairs; ``prefer`` picks among tied values."""
    weights = defaultdict(list)
    for value, length in pairs:
        if value is not None:
            weights[value].append(length)
    if not weights:
        return None
    totals = {v: math.fsum(ls) for v, ls in weights.items()}
    best = max(totals.values())
    return prefer([v for v, w in totals.items() if w == best])


def aggregate_road_meta(road_or_ids, segments) -> RoadMeta:
    """Aggregate member segment metadata into road-level metadata.

    Categorical attributes take the length-weighted mode over segments that
    carry them; ties go to the larger number, or the higher road class.
    """
    ids = road_or_ids.segment_ids if isinstance(road_or_ids, NamedRoad) else road_or_ids
    if not ids:
        raise ValueError("a named road needs at least one segment")
    metas = [segments[i].meta for i in ids]
    return RoadMeta(
        total_length_m=math.fsum(m.length_m for m in metas),
        road_type=_weighted_mode(((m.road_type, m.length_m) for m in metas), lambda vs: min(vs, key=class_rank)),
        maxspeed_kmh=_weighted_mode(((m.maxspeed_kmh, m.length_m) for m in metas), max),
        lanes=_weighted_mode(((m.lanes, m.length_m) for m in metas), max),
        segment_count=len(metas),
    )


class RoadNetwork:
    """Immutable road graph built from segments; query helpers live in ``spatial``."""

    def __init__(self, segments, aoi_bbox=None, index_cell_m: float = 500.0, city: str = "", source_sha256: str = ""):
        self.segments: list[RoadSegment] = list(segments)
        if not self.segments:
            raise EmptyNetwork("road network has no segments")
        for i, s in enumerate(self.segments):
            if s.seg_id != i:
                raise ValueError("segments must be ordered by dense seg_id")
        self.city = city
        self.source_sha256 = source_sha256
        self.index_cell_m = float(index_cell_m)

        by_name = defaultdict(list)
        adjacency = defaultdict(set)
        for s in self.segments:
            if s.meta.name is not None:
                by_name[s.meta.name].append(s.seg_id)
            for nid in s.node_ids:
                adjacency[nid].add(s.seg_id)
        self.node_adjacency = dict(adjacency)
        self.roads = {
            name: NamedRoad(name, tuple(ids), aggregate_road_meta(tuple(ids), self.segments))
            for name, ids in sorted(by_name.items())
        }
        self._name_keys = {_name_key(n): n for n in self.roads}

        if aoi_bbox is None:
            lats = np.concatenate([s.lats for s in self.segments])
            lons = np.concatenate([s.lons for s in self.segments])
            aoi_bbox = (lats.min(), lons.min(), lats.max(), lons.max())
        self.aoi_bbox = Bbox(*map(float, aoi_bbox))
        b = self.aoi_bbox
        if max(abs(b.min_lat), abs(b.max_lat)) > 85.0 or b.max_lon - b.min_lon > 180.0 or b.min_lon > b.max_lon:
            raise UnsupportedAoi(f"AOI {tuple(b)} is polar or crosses the antimeridian")

        self._edge_off = np.zeros(len(self.segments) + 1, dtype=np.int64)
        np.cumsum([len(s.geometry) - 1 for s in self.segments], out=self._edge_off[1:])
        self._e_lat1 = np.concatenate([s.lats[:-1] for s in self.segments])
        self._e_lon1 = np.concatenate([s.lons[:-1] for s in self.segments])
        self._e_lat2 = np.concatenate([s.lats[1:] for s in self.segments])
        self._e_lon2 = np.concatenate([s.lons[1:] for s in self.segments])
        self._v_off = self._edge_off + np.arange(len(self.segments) + 1)
        self._v_lat = np.concatenate([s.lats for s in self.segments])
        self._v_lon = np.concatenate([s.lons for s in self.segments])

    @cached_property
    def spatial_index(self) -> GridIndex:
        return GridIndex((s for s in self.segments if s.meta.name is not None), self.index_cell_m)

    @cached_property
    def named_segment_ids(self) -> np.ndarray:
        return np.array([s.seg_id for s in self.segments if s.meta.name is not None], dtype=np.int64)

    @cached_property
    def node_coords(self) -> set[tuple[float, float]]:
        return {p for s in self.segments for p in s.geometry}

    def road(self, name: str) -> NamedRoad:
        try:
            return self.roads[name]
        except KeyError:
            canon = self._name_keys.get(_name_key(name))
            if canon is None:
                raise UnknownRoad(f"unknown road {name!r}") from None
            return self.roads[canon]

    def canonical_name(self, name: str) -> str | None:
        if name in self.roads:
            return name
        return self._name_keys.get(_name_key(name))

    def total_length_m(self) -> float:
        return math.fsum(s.meta.length_m for s in self.segments)

    def project_many(self, p, seg_ids):
        """``project_to_segment`` for many segments in one vectorised pass."""
        seg_ids = np.asarray(seg_ids, dtype=np.int64)
        if seg_ids.size == 0:
            return []
        starts = self._edge_off[seg_ids]
        counts = self._edge_off[seg_ids + 1] - starts
        group_start = np.zeros(len(seg_ids), dtype=np.int64)
        np.cumsum(counts[:-1], out=group_start[1:])
        edges = np.repeat(starts - group_start, counts) + np.arange(int(counts.sum()))
        plat, plon = float(p[0]), float(p[1])
        d2, t = project_edges(
            plat, plon, self._e_lat1[edges], self._e_lon1[edges], self._e_lat2[edges], self._e_lon2[edges]
        )
        mins = np.minimum.reduceat(d2, group_start)
        hit = np.flatnonzero(d2 == np.repeat(mins, counts))
        owner = np.repeat(np.arange(len(seg_ids)), counts)[hit]
        _, first = np.unique(owner, return_index=True)
        win = hit[first]
        out = []
        for j, sid in enumerate(seg_ids.tolist()):
            w = int(win[j])
            s = self.segments[sid]
            out.append(_finish(plat, plon, s.lats, s.lons, s.cumlen, w - int(group_start[j]), float(t[w]), sid))
        return out


def _name_key(name: str) -> str:
    from .ingest import normalize_name

    return (normalize_name(name) or "").casefold()


def _dedupe_refs(refs):
    out = [refs[0]]
    for r in refs[1:]:
        if r != out[-1]:
            out.append(r)
    return out


def build_network(nodes, ways, aoi_bbox=None, index_cell_m: float = 500.0, city: str = "", source_sha256: str = "") -> RoadNetwork:
    """Split ways at junction nodes, merge tag-identical chains through degree-2 nodes.

    A junction is a node used by two or more distinct ways, or used twice
    by one way. Merging compares (name, highway class, maxspeed, lanes).
    Segments are numbered by the smallest (way id, chain position) they
    contain.
    """
    # nodes stacked on one coordinate collapse onto the smallest id
    canon_of_coord = {}
    canon = {}
    coords = {}
    for n in sorted(nodes, key=lambda n: n.id):
        c = canon_of_coord.setdefault((n.lat, n.lon), n.id)
        canon[n.id] = c
        coords[c] = (n.lat, n.lon)
    ways = sorted(ways, key=lambda w: w.id)

    prepared = []
    users = defaultdict(set)
    repeated = set()
    for w in ways:
        refs = _dedupe_refs([canon[r] for r in w.node_refs if r in canon])
        if len(refs) < 2:
            continue
        seen = set()
        for r in refs:
            users[r].add(w.id)
            if r in seen:
                repeated.add(r)
            seen.add(r)
        prepared.append((w.id, refs, normalize_tags(w.tags).merge_key()))

    def is_junction(nid):
        return nid in repeated or len(users[nid]) >= 2

    # chains: (way_id, pos, nodes, key)
    chains = []
    for wid, refs, key in prepared:
        start = 0
        pos = 0
        for i in range(1, len(refs)):
            if i == len(refs) - 1 or is_junction(refs[i]):
                chains.append((wid, pos, refs[start : i + 1], key))
                pos += 1
                start = i

    ends = defaultdict(list)
    for ci, (_, _, ns, _) in enumerate(chains):
        ends[ns[0]].append(ci)
        ends[ns[-1]].append(ci)

    def partner(node, ci):
        """The chain to merge with across ``node``, or None."""
        inc = ends[node]
        if len(inc) != 2:
            return None
        a, b = inc
        other = b if a == ci else a
        if other == ci or (a != ci and b != ci):
            return None
        if chains[other][3] != chains[ci][3]:
            return None
        return other

    visited = [False] * len(chains)
    groups = []
    for ci in range(len(chains)):
        if visited[ci]:
            continue
        visited[ci] = True
        seq = list(chains[ci][2])
        members = [ci]
        cur = ci
        while True:
            nxt = partner(seq[-1], cur)
            if nxt is None or visited[nxt]:
                break
            ns = chains[nxt][2]
            seq.extend((ns if ns[0] == seq[-1] else ns[::-1])[1:])
            visited[nxt] = True
            members.append(nxt)
            cur = nxt
        cur = ci
        while True:
            prv = partner(seq[0], cur)
            if prv is None or visited[prv]:
                break
            ns = chains[prv][2]
            seq[:0] = (ns if ns[-1] == seq[0] else ns[::-1])[:-1]
            visited[prv] = True
            members.append(prv)
            cur = prv
        groups.append((seq, chains[ci][3], sorted({chains[m][0] for m in members})))

    segments = []
    for seq, key, way_ids in groups:
        geometry = [GeoPoint(*coords[nid]) for nid in seq]
        length = math.fsum(haversine_m(a, b) for a, b in zip(geometry, geometry[1:]))
        name, road_type, speed, lanes = key
        segments.append(
            RoadSegment(
                seg_id=len(segments),
                geometry=tuple(geometry),
                meta=SegmentMeta(name, road_type, speed, lanes, length),
                node_ids=tuple(seq),
                way_ids=tuple(way_ids),
            )
        )
    if not segments:
        raise EmptyNetwork("no road segments could be built from the extract")
    return RoadNetwork(segments, aoi_bbox, index_cell_m=index_cell_m, city=city, source_sha256=source_sha256)


def connected_roads(road_name: str, network: RoadNetwork):
    """Other named roads sharing an OSM node with ``road_name``, with the node's coordinate."""
    road = network.road(road_name)
    found = set()
    for sid in road.segment_ids:
        seg = network.segments[sid]
        for nid, coord in zip(seg.node_ids, seg.geometry):
            for other in network.node_adjacency.get(nid, ()):
                oname = network.segments[other].meta.name
                if oname is not None and oname != road.name:
                    found.add((oname, nid, coord))
    return sorted(((n, GeoPoint(*c)) for n, _, c in found), key=lambda e: (e[0], e[1].lat, e[1].lon))


# -- snapshots ---------------------------------------------------------------


def network_to_dict(network: RoadNetwork, config: dict | None = None, stats: dict | None = None) -> dict:
    return {
        "schema": SNAPSHOT_SCHEMA,
        "version": SNAPSHOT_VERSION,
        "city": network.city,
        "source_sha256": network.source_sha256,
        "aoi_bbox": list(network.aoi_bbox),
        "index_cell_m": network.index_cell_m,
        "config": config or {},
        "ingest_stats": stats or {},
        "segments": [
            {
                "id": s.seg_id,
                "geometry": [[p.lat, p.lon] for p in s.geometry],
                "nodes": list(s.node_ids),
                "ways": list(s.way_ids),
                "name": s.meta.name,
                "road_type": s.meta.road_type,
                "maxspeed_kmh": s.meta.maxspeed_kmh,
                "lanes": s.meta.lanes,
                "length_m": s.meta.length_m,
            }
            for s in network.segments
        ],
    }


def dumps_snapshot(network, config=None, stats=None) -> bytes:
    doc = network_to_dict(network, config, stats)
    return (json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n").encode("utf-8")


def save_snapshot(network, path, config=None, stats=None) -> None:
    data = dumps_snapshot(network, config, stats)
    path = str(path)
    try:
        if path.endswith(".gz"):
            with open(path, "wb") as fh, gzip.GzipFile(fileobj=fh, mode="wb", mtime=0, filename="") as gz:
                gz.write(data)
        else:
            with open(path, "wb") as fh:
                fh.write(data)
    except OSError as exc:
        raise BadInput(f"cannot write snapshot {path}: {exc}") from None


def load_snapshot(path, index_cell_m: float | None = None) -> RoadNetwork:
    path = str(path)
    try:
        opener = gzip.open if path.endswith(".gz") else open
        with opener(path, "rb") as fh:
            doc = json.loads(fh.read().decode("utf-8"))
    except OSError as exc:
        raise BadInput(f"cannot read snapshot {path}: {exc}") from None
    except ValueError as exc:
        raise SchemaError(f"snapshot {path} is not valid JSON: {exc}") from None
    return network_from_dict(doc, index_cell_m)


def network_from_dict(doc: dict, index_cell_m: float | None = None) -> RoadNetwork:
    if doc.get("schema") != SNAPSHOT_SCHEMA or doc.get("version") != SNAPSHOT_VERSION:
        raise SchemaError(f"unsupported snapshot schema {doc.get('schema')!r} v{doc.get('version')!r}")
    try:
        segments = [
            RoadSegment(
                seg_id=d["id"],
                geometry=tuple(GeoPoint(lat, lon) for lat, lon in d["geometry"]),
                meta=SegmentMeta(d["name"], d["road_type"], d["maxspeed_kmh"], d["lanes"], d["length_m"]),
                node_ids=tuple(d["nodes"]),
                way_ids=tuple(d["ways"]),
            )
            for d in doc["segments"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed snapshot segment: {exc}") from None
    return RoadNetwork(
        segments,
        doc.get("aoi_bbox"),
        index_cell_m=index_cell_m if index_cell_m is not None else doc.get("index_cell_m", 500.0),
        city=doc.get("city", ""),
        source_sha256=doc.get("source_sha256", ""),
    )


def network_summary(network: RoadNetwork) -> dict:
    """Table-style city summary: AOI area, segment count, named roads, total length."""
    b = network.aoi_bbox
    height = haversine_m((b.min_lat, b.min_lon), (b.max_lat, b.min_lon))
    mid = (b.min_lat + b.max_lat) / 2.0
    width = haversine_m((mid, b.min_lon), (mid, b.max_lon))
    return {
        "city": network.city,
        "aoi_bbox": list(b),
        "area_km2": height * width / 1e6,
        "segments": len(network.segments),
        "named_segments": int(network.named_segment_ids.size),
        "named_roads": len(network.roads),
        "total_length_km": network.total_length_m() / 1000.0,
    }
