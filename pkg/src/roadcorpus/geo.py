"""Spherical geodesy: distances, bearings, compass sectors, polyline projection."""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegeneratePair

EARTH_RADIUS_M = 6_371_000.0
M_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0

DIRECTIONS = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")
OPPOSITE = {d: DIRECTIONS[(i + 4) % 8] for i, d in enumerate(DIRECTIONS)}


class GeoPoint(NamedTuple):
    lat: float
    lon: float


def haversine_m(p1, p2) -> float:
    """Great-circle distance in meters on a sphere of radius 6,371 km."""
    lat1, lon1 = p1
    lat2, lon2 = p2
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    s_dphi = math.sin(math.radians(lat2 - lat1) / 2.0)
    s_dlam = math.sin(math.radians(lon2 - lon1) / 2.0)
    a = s_dphi * s_dphi + math.cos(phi1) * math.cos(phi2) * s_dlam * s_dlam
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(min(1.0, a)))


def initial_bearing_deg(p1, p2) -> float:
    """Initial great-circle bearing from p1 to p2: 0 = north, clockwise, in [0, 360)."""
    lat1, lon1 = p1
    lat2, lon2 = p2
    if lat1 == lat2 and lon1 == lon2:
        raise DegeneratePair(f"bearing undefined for identical points {tuple(p1)}")
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dlam = math.radians(lon2 - lon1)
    y = math.sin(dlam) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    bearing = math.degrees(math.atan2(y, x)) % 360.0
    # -tiny % 360 rounds to 360.0
    return 0.0 if bearing >= 360.0 else bearing


def compass_of(bearing: float) -> str:
    """45-degree sector containing ``bearing``; lower bound inclusive."""
    # exact comparisons against sector bounds, no division rounding
    b = bearing % 360.0
    if b >= 337.5 or b < 22.5:
        return "N"
    idx = 1
    lower = 22.5
    while b >= lower + 45.0:
        lower += 45.0
        idx += 1
    return DIRECTIONS[idx]


def direction_between(p1, p2) -> str:
    return compass_of(initial_bearing_deg(p1, p2))


def quantize(p, decimals: int = 5) -> GeoPoint:
    return GeoPoint(round(p[0], decimals), round(p[1], decimals))


class ProjectionResult(NamedTuple):
    point: GeoPoint
    distance_m: float
    seg_id: int
    param: float


def project_edges(plat: float, plon: float, lat1, lon1, lat2, lon2):
    """Planar projection of a point onto many edges at once.

    Works in an equirectangular plane centred on the query point. Only
    IEEE-exact arithmetic is vectorised, so results do not depend on how
    the edges were batched. Returns ``(d2, t)``: squared planar distance
    in m^2 and the clamped edge parameter.
    """
    kx = M_PER_DEG * math.cos(math.radians(plat))
    ax = (lon1 - plon) * kx
    ay = (lat1 - plat) * M_PER_DEG
    dx = (lon2 - plon) * kx - ax
    dy = (lat2 - plat) * M_PER_DEG - ay
    len2 = dx * dx + dy * dy
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(len2 > 0.0, -(ax * dx + ay * dy) / len2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    qx = ax + t * dx
    qy = ay + t * dy
    return qx * qx + qy * qy, t


def project_to_polyline(p, lats: np.ndarray, lons: np.ndarray, cumlen: np.ndarray, seg_id: int = -1):
    """Closest point on a polyline (vertex arrays) to ``p``.

    ``cumlen`` holds cumulative haversine length at each vertex. The
    winning edge is the first with minimal planar distance; the reported
    distance is re-measured with haversine.
    """
    plat, plon = p
    d2, t = project_edges(plat, plon, lats[:-1], lons[:-1], lats[1:], lons[1:])
    i = int(np.argmin(d2))
    return _finish(plat, plon, lats, lons, cumlen, i, float(t[i]), seg_id)


def _finish(plat, plon, lats, lons, cumlen, i, t, seg_id):
    a_lat, a_lon = float(lats[i]), float(lons[i])
    b_lat, b_lon = float(lats[i + 1]), float(lons[i + 1])
    q = GeoPoint(a_lat + t * (b_lat - a_lat), a_lon + t * (b_lon - a_lon))
    total = float(cumlen[-1])
    along = float(cumlen[i]) + t * (float(cumlen[i + 1]) - float(cumlen[i]))
    param = min(1.0, max(0.0, along / total)) if total > 0 else 0.0
    return ProjectionResult(q, haversine_m((plat, plon), q), seg_id, param)


def cumulative_lengths(points: Sequence) -> np.ndarray:
    out = np.zeros(len(points))
    acc = 0.0
    for i in range(1, len(points)):
        acc += haversine_m(points[i - 1], points[i])
        out[i] = acc
    return out


def interpolate(points: Sequence, cumlen: np.ndarray, param: float) -> GeoPoint:
    """Point at arc-length fraction ``param`` along a polyline (linear in lat/lon per edge)."""
    if param <= 0.0:
        return GeoPoint(*points[0])
    total = float(cumlen[-1])
    if param >= 1.0:
        return GeoPoint(*points[-1])
    target = param * total
    i = int(np.searchsorted(cumlen, target, side="right")) - 1
    i = min(max(i, 0), len(points) - 2)
    span = float(cumlen[i + 1] - cumlen[i])
    t = (target - float(cumlen[i])) / span if span > 0 else 0.0
    (a_lat, a_lon), (b_lat, b_lon) = points[i], points[i + 1]
    return GeoPoint(a_lat + t * (b_lat - a_lat), a_lon + t * (b_lon - a_lon))


def lon_span_deg(lat: float, radius_m: float, min_cos: float) -> float:
    """Longitude half-width (deg) of a box guaranteed to hold every point within ``radius_m``.

    ``min_cos`` lower-bounds cos(latitude) over the candidate points.
    """
    hav = math.sin(radius_m / EARTH_RADIUS_M / 2.0) ** 2
    denom = math.cos(math.radians(lat)) * min_cos
    if denom <= 0:
        return 180.0
    s = math.sqrt(hav / denom)
    if s >= 1.0:
        return 180.0
    return math.degrees(2.0 * math.asin(s))


def lon_gap_lower_bound_m(lat: float, dlon_deg: float, min_cos: float) -> float:
    """Lower bound on distance from a point at ``lat`` to any point ``dlon_deg`` or more away in longitude."""
    if dlon_deg <= 0:
        return 0.0
    if dlon_deg >= 180.0:
        dlon_deg = 180.0
    s = math.sqrt(max(0.0, math.cos(math.radians(lat)) * min_cos)) * math.sin(math.radians(dlon_deg) / 2.0)
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, s))
