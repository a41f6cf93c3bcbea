"""Uniform lat/lon cell grid mapping cells to segment ids."""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from .geo import EARTH_RADIUS_M, M_PER_DEG, lon_gap_lower_bound_m, lon_span_deg

# absolute slack (m) on pruning bounds; covers floor() rounding at cell edges
_BOUND_SLACK_M = 1e-3


class GridIndex:
    """Each segment is registered in every cell its bounding box overlaps.

    A segment absent from a block of cells therefore lies entirely outside
    that block, which is what makes the ring search exact.
    """

    def __init__(self, segments, cell_m: float = 500.0):
        self.cell_m = float(cell_m)
        segments = list(segments)
        self.seg_ids = np.array([s.seg_id for s in segments], dtype=np.int64)
        if not segments:
            self.lat0 = self.lon0 = 0.0
            self.dlat = self.dlon = 1.0
            self.nrows = self.ncols = 0
            self.min_cos = 1.0
            self.cells = {}
            return
        bb = np.array([(s.lats.min(), s.lons.min(), s.lats.max(), s.lons.max()) for s in segments])
        self.lat0 = float(bb[:, 0].min())
        self.lon0 = float(bb[:, 1].min())
        lat1 = float(bb[:, 2].max())
        lon1 = float(bb[:, 3].max())
        mid = math.radians((self.lat0 + lat1) / 2.0)
        self.dlat = self.cell_m / M_PER_DEG
        self.dlon = self.cell_m / (M_PER_DEG * math.cos(mid))
        self.nrows = int(math.floor((lat1 - self.lat0) / self.dlat)) + 1
        self.ncols = int(math.floor((lon1 - self.lon0) / self.dlon)) + 1
        self.min_cos = min(math.cos(math.radians(self.lat0)), math.cos(math.radians(lat1)))
        self.bbox = bb
        cells = defaultdict(list)
        for s, (a, b, c, d) in zip(segments, bb):
            r_lo, c_lo = self.cell_of(a, b)
            r_hi, c_hi = self.cell_of(c, d)
            for r in range(max(r_lo, 0), min(r_hi, self.nrows - 1) + 1):
                for col in range(max(c_lo, 0), min(c_hi, self.ncols - 1) + 1):
                    cells[(r, col)].append(s.seg_id)
        self.cells = {k: np.array(sorted(v), dtype=np.int64) for k, v in cells.items()}

    def __len__(self):
        return len(self.seg_ids)

    def cell_of(self, lat, lon):
        return (
            int(math.floor((lat - self.lat0) / self.dlat)),
            int(math.floor((lon - self.lon0) / self.dlon)),
        )

    def ring(self, r0, c0, k):
        """Cell keys at Chebyshev distance exactly ``k`` from (r0, c0), clipped to the grid."""
        if k == 0:
            if 0 <= r0 < self.nrows and 0 <= c0 < self.ncols:
                yield (r0, c0)
            return
        cl = max(c0 - k, 0)
        ch = min(c0 + k, self.ncols - 1)
        for r in (r0 - k, r0 + k):
            if 0 <= r < self.nrows:
                for c in range(cl, ch + 1):
                    yield (r, c)
        rl = max(r0 - k + 1, 0)
        rh = min(r0 + k - 1, self.nrows - 1)
        for c in (c0 - k, c0 + k):
            if 0 <= c < self.ncols:
                for r in range(rl, rh + 1):
                    yield (r, c)

    def covers_all(self, r0, c0, k):
        return r0 - k <= 0 and c0 - k <= 0 and r0 + k >= self.nrows - 1 and c0 + k >= self.ncols - 1

    def outside_bound_m(self, lat, lon, r0, c0, k):
        """Lower bound on the distance from (lat, lon) to any segment not yet seen after ring ``k``."""
        bounds = []
        if r0 - k > 0:
            edge = self.lat0 + (r0 - k) * self.dlat
            bounds.append(EARTH_RADIUS_M * math.radians(lat - edge))
        if r0 + k < self.nrows - 1:
            edge = self.lat0 + (r0 + k + 1) * self.dlat
            bounds.append(EARTH_RADIUS_M * math.radians(edge - lat))
        if c0 - k > 0:
            edge = self.lon0 + (c0 - k) * self.dlon
            bounds.append(lon_gap_lower_bound_m(lat, lon - edge, self.min_cos))
        if c0 + k < self.ncols - 1:
            edge = self.lon0 + (c0 + k + 1) * self.dlon
            bounds.append(lon_gap_lower_bound_m(lat, edge - lon, self.min_cos))
        if not bounds:
            return math.inf
        return max(0.0, min(bounds) - _BOUND_SLACK_M)

    def within_box(self, lat, lon, radius_m):
        """Sorted ids of segments whose bbox meets the box enclosing the ``radius_m`` disc around the point."""
        if not self.cells:
            return np.empty(0, dtype=np.int64)
        half_lat = math.degrees(radius_m / EARTH_RADIUS_M)
        lo_lat, hi_lat = lat - half_lat, lat + half_lat
        band_cos = min(
            self.min_cos,
            math.cos(math.radians(min(89.9, max(abs(lo_lat), abs(hi_lat))))),
        )
        half_lon = lon_span_deg(lat, radius_m, band_cos)
        lo_lon, hi_lon = lon - half_lon, lon + half_lon
        r_lo, c_lo = self.cell_of(lo_lat, lo_lon)
        r_hi, c_hi = self.cell_of(hi_lat, hi_lon)
        found = []
        for r in range(max(r_lo, 0), min(r_hi, self.nrows - 1) + 1):
            for c in range(max(c_lo, 0), min(c_hi, self.ncols - 1) + 1):
                ids = self.cells.get((r, c))
                if ids is not None:
                    found.append(ids)
        if not found:
            return np.empty(0, dtype=np.int64)
        ids = np.unique(np.concatenate(found))
        pos = np.searchsorted(self.seg_ids, ids)
        bb = self.bbox[pos]
        keep = (bb[:, 0] <= hi_lat) & (bb[:, 2] >= lo_lat) & (bb[:, 1] <= hi_lon) & (bb[:, 3] >= lo_lon)
        return ids[keep]
