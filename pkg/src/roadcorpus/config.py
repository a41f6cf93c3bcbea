"""Run configuration: defaults, JSON config file, command-line overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .errors import BadInput


def _default_counts():
    # points per segment for P2S; item counts for the sampled formats
    return {"P2S": 1, "PP_DIST": 1000, "PP_DIR": 1000, "P2DR": 1000}


@dataclass
class RunConfig:
    extract_path: str | None = None
    snapshot_path: str | None = None
    seed: int = 0
    r_m: float = 4000.0
    cell_km: float = 1.0
    index_cell_m: float = 500.0
    K: int = 10
    coord_decimals: int = 5
    corpus_counts: dict = field(default_factory=_default_counts)
    n_per_kind: int = 100
    city: str = ""
    include_non_drivable: bool = False

    def __post_init__(self):
        if not isinstance(self.seed, int) or self.seed < 0:
            raise BadInput(f"seed must be an unsigned integer, got {self.seed!r}")
        if self.coord_decimals != 5:
            # rendered coordinates, eval hygiene and round-trip tolerances all assume 5 decimals
            raise BadInput("coord_decimals is fixed at 5")
        for name in ("r_m", "cell_km", "index_cell_m"):
            if not float(getattr(self, name)) > 0:
                raise BadInput(f"{name} must be positive")
        if self.K < 1 or self.n_per_kind < 1:
            raise BadInput("K and n_per_kind must be >= 1")
        counts = _default_counts()
        unknown = set(self.corpus_counts) - set(counts)
        if unknown:
            raise BadInput(f"unknown corpus_counts keys: {sorted(unknown)}")
        counts.update(self.corpus_counts)
        self.corpus_counts = counts

    def to_dict(self):
        return asdict(self)


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise BadInput(f"cannot read config {path}: {exc}") from None
    except ValueError as exc:
        raise BadInput(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise BadInput(f"config {path} must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise BadInput(f"unknown config keys in {path}: {sorted(unknown)}")
    return doc


def resolve(config_path=None, **overrides) -> RunConfig:
    """Defaults, then the config file, then every override that is not None."""
    values = load_config_file(config_path) if config_path else {}
    for k, v in overrides.items():
        if v is None:
            continue
        if k == "corpus_counts":
            values["corpus_counts"] = {**values.get("corpus_counts", {}), **v}
        else:
            values[k] = v
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise BadInput(f"bad config: {exc}") from None
