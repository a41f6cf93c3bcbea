"""Streaming OSM XML (0.6) reader restricted to the road network."""

from __future__ import annotations

import bz2
import gzip
import hashlib
import logging
import re
import shutil
import tempfile
import unicodedata
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import BinaryIO, NamedTuple

from .errors import EmptyExtract, IoFailure, MalformedXml

log = logging.getLogger(__name__)

MPH_TO_KMH = 1.609344

HIGHWAY_CLASSES = (
    "motorway",
    "trunk",
    "primary",
    "secondary",
    "tertiary",
    "residential",
    "service",
    "unclassified",
    "living_street",
)

NON_DRIVABLE = frozenset(
    {"footway", "path", "cycleway", "steps", "pedestrian", "corridor", "bridleway"}
)


class OsmNode(NamedTuple):
    id: int
    lat: float
    lon: float


class OsmWay(NamedTuple):
    id: int
    node_refs: tuple[int, ...]
    tags: dict[str, str]


class NormalizedTags(NamedTuple):
    name: str | None = None
    highway_class: str = "other"
    maxspeed_kmh: int | float | None = None
    lanes: int | None = None

    def merge_key(self):
        return (self.name, self.highway_class, self.maxspeed_kmh, self.lanes)

    def as_raw(self) -> dict[str, str]:
        """Render back to an OSM-style tag map (normalize_tags of this is a fixed point)."""
        raw = {"highway": self.highway_class}
        if self.name is not None:
            raw["name"] = self.name
        if self.maxspeed_kmh is not None:
            raw["maxspeed"] = _fmt_number(self.maxspeed_kmh)
        if self.lanes is not None:
            raw["lanes"] = str(self.lanes)
        return raw


@dataclass
class IngestStats:
    nodes_seen: int = 0
    ways_seen: int = 0
    highway_ways: int = 0
    excluded_ways: int = 0
    dropped_ways: int = 0
    dangling_refs: int = 0
    nodes_kept: int = 0
    ways_kept: int = 0
    bounds: tuple[float, float, float, float] | None = None
    sha256: str = ""

    def as_dict(self):
        return {
            "nodes_seen": self.nodes_seen,
            "ways_seen": self.ways_seen,
            "highway_ways": self.highway_ways,
            "excluded_ways": self.excluded_ways,
            "dropped_ways": self.dropped_ways,
            "dangling_refs": self.dangling_refs,
            "nodes_kept": self.nodes_kept,
            "ways_kept": self.ways_kept,
            "bounds": list(self.bounds) if self.bounds else None,
            "sha256": self.sha256,
        }


def _fmt_number(x):
    if isinstance(x, float) and x.is_integer():
        x = int(x)
    return str(x)


_WS = re.compile(r"\s+")
_NUM = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(mph|km/h|kmh|kph)?\s*$", re.IGNORECASE)
_INT = re.compile(r"^\s*(\d+)\s*$")


def normalize_name(name: str | None) -> str | None:
    if name is None:
        return None
    name = _WS.sub(" ", unicodedata.normalize("NFC", name)).strip()
    return name or None


def parse_maxspeed(value: str | None):
    """Speed in km/h from a raw ``maxspeed`` value, or None.

    Symbolic values (``walk``, ``none``, ``NZ:urban``...) are not speeds.
    Composite values (``50;70``) take the first parseable entry.
    """
    if value is None:
        return None
    for part in value.split(";"):
        m = _NUM.match(part)
        if not m:
            continue
        number = float(m.group(1))
        if (m.group(2) or "").lower() == "mph":
            number = float(round(number * MPH_TO_KMH))
        if number <= 0:
            continue
        return int(number) if number.is_integer() else number
    return None


def parse_lanes(value: str | None) -> int | None:
    if value is None:
        return None
    for part in value.split(";"):
        m = _INT.match(part)
        if m and int(m.group(1)) >= 1:
            return int(m.group(1))
    return None


def highway_class(value: str | None) -> str:
    if not value:
        return "other"
    value = value.strip()
    if value.endswith("_link"):
        value = value[: -len("_link")]
    return value if value in HIGHWAY_CLASSES else value or "other"


def normalize_tags(tags: dict[str, str]) -> NormalizedTags:
    return NormalizedTags(
        name=normalize_name(tags.get("name")),
        highway_class=highway_class(tags.get("highway")),
        maxspeed_kmh=parse_maxspeed(tags.get("maxspeed")),
        lanes=parse_lanes(tags.get("lanes")),
    )


_TOP_LEVEL = frozenset({"node", "way", "relation", "bounds"})


def _iterparse(stream):
    """Yield completed elements; top-level ones are detached from the root after use."""
    root = None
    try:
        for event, elem in ET.iterparse(stream, events=("start", "end")):
            if event == "start":
                if root is None:
                    root = elem
                continue
            yield elem
            if elem.tag in _TOP_LEVEL and root is not None:
                root.clear()
    except ET.ParseError as exc:
        line, col = getattr(exc, "position", (None, None))
        reason = re.sub(r":\s*line \d+, column \d+$", "", str(exc))
        raise MalformedXml(f"malformed OSM XML: {reason}", line, col) from None


def _ensure_seekable(source: BinaryIO):
    """Return a seekable binary stream over ``source``, spooling to disk if needed."""
    try:
        if source.seekable():
            source.seek(0)
            return source, False
    except (AttributeError, OSError):
        pass
    tmp = tempfile.TemporaryFile()
    shutil.copyfileobj(source, tmp, 1 << 20)
    tmp.seek(0)
    return tmp, True


def _checksum(stream) -> str:
    h = hashlib.sha256()
    for chunk in iter(lambda: stream.read(1 << 20), b""):
        h.update(chunk)
    stream.seek(0)
    return h.hexdigest()


def parse_extract(source, include_non_drivable: bool = False):
    """Parse an OSM XML extract into road ways and the nodes they reference.

    ``source`` is a path (``.bz2`` / ``.gz`` are decompressed on the fly)
    or a binary stream. Two streaming passes are made:
    the first collects highway ways (only those are retained), the second
    keeps just the nodes those ways reference, so memory follows the size
    of the road network rather than the size of the file.

    Returns ``(nodes, ways, stats)``.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        name = str(source.decode() if isinstance(source, bytes) else source)
        opener = bz2.open if name.endswith(".bz2") else gzip.open if name.endswith(".gz") else open
        try:
            fh = opener(source, "rb")
        except OSError as exc:
            raise IoFailure(f"cannot read extract {source}: {exc}") from None
        with fh:
            return parse_extract(fh, include_non_drivable)

    stream, spooled = _ensure_seekable(source)
    try:
        return _parse_two_pass(stream, include_non_drivable)
    finally:
        if spooled:
            stream.close()


def _parse_two_pass(stream, include_non_drivable):
    stats = IngestStats(sha256=_checksum(stream))

    candidate_ways: list[OsmWay] = []
    wanted: set[int] = set()
    refs: list[int] = []
    tags: dict[str, str] = {}
    for elem in _iterparse(stream):
        tag = elem.tag
        if tag == "nd":
            refs.append(int(elem.get("ref")))
        elif tag == "tag":
            tags[elem.get("k")] = elem.get("v")
        elif tag == "way":
            stats.ways_seen += 1
            hw = tags.get("highway")
            if hw is not None:
                stats.highway_ways += 1
                if hw in NON_DRIVABLE and not include_non_drivable:
                    stats.excluded_ways += 1
                elif len(refs) < 2:
                    stats.dropped_ways += 1
                else:
                    candidate_ways.append(OsmWay(int(elem.get("id")), tuple(refs), dict(tags)))
                    wanted.update(refs)
            refs = []
            tags = {}
            elem.clear()
        elif tag == "node":
            stats.nodes_seen += 1
            refs = []
            tags = {}
            elem.clear()
        elif tag == "bounds":
            stats.bounds = (
                float(elem.get("minlat")),
                float(elem.get("minlon")),
                float(elem.get("maxlat")),
                float(elem.get("maxlon")),
            )
        elif tag == "relation":
            refs = []
            tags = {}
            elem.clear()

    if not candidate_ways:
        raise EmptyExtract("extract contains no road (highway) ways")

    stream.seek(0)
    coords: dict[int, OsmNode] = {}
    for elem in _iterparse(stream):
        if elem.tag == "node":
            nid = int(elem.get("id"))
            if nid in wanted:
                lat, lon = float(elem.get("lat")), float(elem.get("lon"))
                if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                    raise MalformedXml(f"node {nid} has out-of-range coordinates ({lat}, {lon})")
                coords[nid] = OsmNode(nid, lat, lon)
            elem.clear()

    ways = []
    used: set[int] = set()
    for way in candidate_ways:
        missing = sum(1 for r in way.node_refs if r not in coords)
        if missing:
            stats.dangling_refs += missing
            stats.dropped_ways += 1
            continue
        ways.append(way)
        used.update(way.node_refs)
    if stats.dangling_refs:
        log.warning(
            "dropped %d ways with %d dangling node references", stats.dropped_ways, stats.dangling_refs
        )
    if not ways:
        raise EmptyExtract("no road ways survive dangling-reference filtering")

    ways.sort(key=lambda w: w.id)
    nodes = sorted((coords[i] for i in used), key=lambda n: n.id)
    stats.nodes_kept = len(nodes)
    stats.ways_kept = len(ways)
    return nodes, ways, stats
