"""Spatial queries over a RoadNetwork: nearest roads, directional retrieval, sampling."""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from .errors import EmptyNetwork
from .geo import (
    DIRECTIONS,
    EARTH_RADIUS_M,
    M_PER_DEG,
    GeoPoint,
    ProjectionResult,
    compass_of,
    initial_bearing_deg,
    project_to_polyline,
)
from .network import RoadNetwork, RoadSegment

DEFAULT_RADIUS_M = 4000.0
_SECTOR_EDGES = np.array([22.5, 67.5, 112.5, 157.5, 202.5, 247.5, 292.5, 337.5])


def project_to_segment(p, seg: RoadSegment) -> ProjectionResult:
    return project_to_polyline(p, seg.lats, seg.lons, seg.cumlen, seg.seg_id)


def _rank(best: dict, k: int):
    return sorted(best.items(), key=lambda kv: (kv[1], kv[0]))[:k]


def nearest_roads(p, network: RoadNetwork, k: int = 10):
    """The ``k`` closest named roads to ``p`` as ``[(name, distance_m), ...]``.

    Road distance is the minimum projection distance over its segments.
    Ties go to the lexicographically smaller name. The grid is searched in
    growing rings until no unseen segment could beat the current k-th road,
    so the answer is identical to a full scan.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    idx = network.spatial_index
    if len(idx) == 0:
        raise EmptyNetwork("network has no named segments")
    lat, lon = float(p[0]), float(p[1])
    r0, c0 = idx.cell_of(lat, lon)
    best: dict[str, float] = {}
    seen: set[int] = set()
    ring = 0
    while True:
        fresh = set()
        for cell in idx.ring(r0, c0, ring):
            for sid in idx.cells.get(cell, ()):
                if sid not in seen:
                    fresh.add(int(sid))
        if fresh:
            seen |= fresh
            for res in network.project_many((lat, lon), sorted(fresh)):
                name = network.segments[res.seg_id].meta.name
                if res.distance_m < best.get(name, math.inf):
                    best[name] = res.distance_m
        if idx.covers_all(r0, c0, ring):
            break
        if len(best) >= k:
            kth = _rank(best, k)[-1][1]
            if kth < idx.outside_bound_m(lat, lon, r0, c0, ring):
                break
        ring += 1
    return _rank(best, k)


def roads_within(p, network: RoadNetwork, radius_m: float):
    """Named roads with any segment within ``radius_m``: ``[(name, distance_m)]`` sorted by name."""
    ids = network.spatial_index.within_box(p[0], p[1], radius_m)
    best: dict[str, float] = {}
    for res in network.project_many(p, ids):
        if res.distance_m <= radius_m:
            name = network.segments[res.seg_id].meta.name
            if res.distance_m < best.get(name, math.inf):
                best[name] = res.distance_m
    return sorted(best.items())


def vertex_sectors(p, lats: np.ndarray, lons: np.ndarray, radius_m: float):
    """Sector index (0=N..7=NW) of each vertex, or -1 when outside the radius or coincident with ``p``."""
    phi1 = math.radians(p[0])
    phi2 = np.radians(lats)
    dlam = np.radians(lons - p[1])
    a = np.sin(np.radians(lats - p[0]) / 2.0) ** 2 + math.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    dist = 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(1.0, a)))
    y = np.sin(dlam) * np.cos(phi2)
    x = math.cos(phi1) * np.sin(phi2) - math.sin(phi1) * np.cos(phi2) * np.cos(dlam)
    bearing = np.degrees(np.arctan2(y, x)) % 360.0
    bearing = np.where(bearing >= 360.0, 0.0, bearing)
    sector = np.digitize(bearing, _SECTOR_EDGES) % 8
    same = (lats == p[0]) & (lons == p[1])
    return np.where((dist <= radius_m) & ~same, sector, -1)


def directional_ranked(p, network: RoadNetwork, r: float = DEFAULT_RADIUS_M, k: int = 10):
    """Per compass direction, the ``k`` closest named roads inside that sector.

    A segment is a candidate for direction d when one of its vertices lies in
    sector d within ``r``; it then counts for d only if its projected point
    (the closest point of the segment to ``p``) also lies in sector d within
    ``r``. A projected point coinciding with ``p`` lies in every sector.
    Directions without any road are omitted.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    lat, lon = float(p[0]), float(p[1])
    ids = network.spatial_index.within_box(lat, lon, r)
    near = [res for res in network.project_many((lat, lon), ids) if res.distance_m <= r]
    per_dir: dict[str, dict[str, float]] = defaultdict(dict)
    if not near:
        return {}
    # sectors of every candidate vertex in one pass, folded into a per-segment 8-bit mask
    sids = np.array([res.seg_id for res in near], dtype=np.int64)
    starts, stops = network._v_off[sids], network._v_off[sids + 1]
    counts = stops - starts
    offs = np.zeros(len(sids), dtype=np.int64)
    np.cumsum(counts[:-1], out=offs[1:])
    verts = np.repeat(starts - offs, counts) + np.arange(int(counts.sum()))
    vs = vertex_sectors((lat, lon), network._v_lat[verts], network._v_lon[verts], r)
    owner = np.repeat(np.arange(len(sids)), counts)
    inside = vs >= 0
    masks = np.zeros(len(sids), dtype=np.int64)
    np.bitwise_or.at(masks, owner[inside], np.left_shift(1, vs[inside]))
    for res, mask in zip(near, masks.tolist()):
        if not mask:
            continue
        if res.point.lat == lat and res.point.lon == lon:
            dirs = [d for i, d in enumerate(DIRECTIONS) if mask >> i & 1]
        else:
            d = compass_of(initial_bearing_deg((lat, lon), res.point))
            dirs = [d] if mask >> DIRECTIONS.index(d) & 1 else []
        name = network.segments[res.seg_id].meta.name
        for d in dirs:
            if res.distance_m < per_dir[d].get(name, math.inf):
                per_dir[d][name] = res.distance_m
    return {d: _rank(per_dir[d], k) for d in DIRECTIONS if per_dir.get(d)}


def directional_nearest(p, network: RoadNetwork, r: float = DEFAULT_RADIUS_M):
    """Closest named road in each of the eight compass sectors: ``{dir: (name, distance_m)}``."""
    return {d: ranked[0] for d, ranked in directional_ranked(p, network, r, k=1).items()}


# -- density-aware sampling ---------------------------------------------------


def apportion(total: int, weights) -> list[int]:
    """Largest-remainder apportionment of ``total`` over integer ``weights``.

    Exact integer arithmetic; remainder ties go to the earlier index.
    """
    weights = [int(w) for w in weights]
    wsum = sum(weights)
    if wsum <= 0:
        raise ValueError("weights must have a positive sum")
    counts = [total * w // wsum for w in weights]
    rems = [total * w % wsum for w in weights]
    left = total - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-rems[i], i))
    for i in order[:left]:
        counts[i] += 1
    return counts


class SampleGrid:
    """Uniform cell_km grid over the AOI used for density-aware sampling."""

    def __init__(self, network: RoadNetwork, cell_km: float = 1.0):
        b = network.aoi_bbox
        self.bbox = b
        self.cell_km = float(cell_km)
        mid = math.radians((b.min_lat + b.max_lat) / 2.0)
        self.dlat = cell_km * 1000.0 / M_PER_DEG
        self.dlon = cell_km * 1000.0 / (M_PER_DEG * math.cos(mid))
        self.nrows = max(1, math.ceil((b.max_lat - b.min_lat) / self.dlat))
        self.ncols = max(1, math.ceil((b.max_lon - b.min_lon) / self.dlon))
        self.weights = self._segment_counts(network)

    def cell_rect(self, row, col):
        b = self.bbox
        lat_lo = b.min_lat + row * self.dlat
        lon_lo = b.min_lon + col * self.dlon
        return lat_lo, min(lat_lo + self.dlat, b.max_lat), lon_lo, min(lon_lo + self.dlon, b.max_lon)

    def _segment_counts(self, network):
        counts = defaultdict(int)
        for seg in network.segments:
            for cell in self.cells_touched(seg):
                counts[cell] += 1
        return dict(sorted(counts.items()))

    def cells_touched(self, seg: RoadSegment):
        b = self.bbox
        cells = set()
        for i in range(len(seg.geometry) - 1):
            y1 = (seg.lats[i] - b.min_lat) / self.dlat
            x1 = (seg.lons[i] - b.min_lon) / self.dlon
            y2 = (seg.lats[i + 1] - b.min_lat) / self.dlat
            x2 = (seg.lons[i + 1] - b.min_lon) / self.dlon
            r_lo = max(0, int(math.floor(min(y1, y2))))
            r_hi = min(self.nrows - 1, int(math.floor(max(y1, y2))))
            c_lo = max(0, int(math.floor(min(x1, x2))))
            c_hi = min(self.ncols - 1, int(math.floor(max(x1, x2))))
            for r in range(r_lo, r_hi + 1):
                for c in range(c_lo, c_hi + 1):
                    if (r, c) not in cells and _clip_hits(x1, y1, x2, y2, c, r, c + 1, r + 1):
                        cells.add((r, c))
        return cells


def _clip_hits(x1, y1, x2, y2, xmin, ymin, xmax, ymax) -> bool:
    """Liang-Barsky: does the segment (x1,y1)-(x2,y2) meet the closed rectangle?"""
    t0, t1 = 0.0, 1.0
    dx, dy = x2 - x1, y2 - y1
    for p_, q_ in ((-dx, x1 - xmin), (dx, xmax - x1), (-dy, y1 - ymin), (dy, ymax - y1)):
        if p_ == 0:
            if q_ < 0:
                return False
            continue
        t = q_ / p_
        if p_ < 0:
            if t > t1:
                return False
            t0 = max(t0, t)
        else:
            if t < t0:
                return False
            t1 = min(t1, t)
    return t0 <= t1


def density_sample(network: RoadNetwork, total_n: int, cell_km: float = 1.0, seed: int = 0, stream: int = 0, grid: SampleGrid | None = None):
    """Draw ``total_n`` points with per-cell counts proportional to segment density.

    Each cell draws from its own generator keyed on (seed, stream, row, col),
    so the output does not depend on iteration order. Points come back in
    row-major cell order.
    """
    if total_n < 1:
        raise ValueError("total_n must be >= 1")
    grid = grid or SampleGrid(network, cell_km)
    if not grid.weights:
        raise EmptyNetwork("no segment intersects the sampling grid")
    cells = list(grid.weights)
    alloc = apportion(total_n, [grid.weights[c] for c in cells])
    points = []
    for (row, col), n in zip(cells, alloc):
        if n == 0:
            continue
        rng = np.random.default_rng([seed, stream, row, col])
        lat_lo, lat_hi, lon_lo, lon_hi = grid.cell_rect(row, col)
        u = rng.random((n, 2))
        for a, b in u:
            points.append(GeoPoint(float(lat_lo + a * (lat_hi - lat_lo)), float(lon_lo + b * (lon_hi - lon_lo))))
    return points
