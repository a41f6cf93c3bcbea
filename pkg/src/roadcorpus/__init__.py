"""Turn OpenStreetMap road extracts into geospatial supervision corpora and evaluation suites."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DegeneratePair,
    EmptyExtract,
    EmptyNetwork,
    MalformedXml,
    RoadCorpusError,
    SchemaError,
    UnknownRoad,
)
from .geo import GeoPoint, compass_of, haversine_m, initial_bearing_deg  # noqa: E402
from .ingest import normalize_tags, parse_extract  # noqa: E402
from .network import RoadNetwork, build_network, connected_roads, load_snapshot, save_snapshot  # noqa: E402
from .spatial import density_sample, directional_nearest, nearest_roads, project_to_segment  # noqa: E402

__all__ = [
    "DegeneratePair",
    "EmptyExtract",
    "EmptyNetwork",
    "GeoPoint",
    "MalformedXml",
    "RoadCorpusError",
    "RoadNetwork",
    "SchemaError",
    "UnknownRoad",
    "build_network",
    "compass_of",
    "connected_roads",
    "density_sample",
    "directional_nearest",
    "haversine_m",
    "initial_bearing_deg",
    "load_snapshot",
    "nearest_roads",
    "normalize_tags",
    "parse_extract",
    "project_to_segment",
    "save_snapshot",
]
