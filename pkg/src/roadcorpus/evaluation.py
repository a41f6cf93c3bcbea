"""Evaluation suites, prediction parsing, metric scoring and prompt-aid data packs."""

from __future__ import annotations

import json
import math
import re
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .corpus import COORD_DECIMALS, ON_SEGMENT_TOLERANCE_M, sample_pairs
from .errors import BadInput, EmptyNetwork, SchemaError
from .geo import DIRECTIONS, GeoPoint, direction_between, haversine_m, interpolate, quantize
from .network import RoadNetwork
from .spatial import (
    DEFAULT_RADIUS_M,
    density_sample,
    directional_nearest,
    directional_ranked,
    nearest_roads,
    project_to_segment,
    roads_within,
)

KINDS = ("META_SPEED", "META_LANES", "META_LENGTH", "META_NAME", "DIST", "DIR", "RETRIEVAL", "DIR_RETRIEVAL")
META_KINDS = KINDS[:4]
NAME_KINDS = ("META_NAME", "RETRIEVAL", "DIR_RETRIEVAL")
NUMERIC_KINDS = ("META_LENGTH", "DIST")
CATEGORICAL_KINDS = ("META_SPEED", "META_LANES", "DIR")

TASK_SCHEMA = "roadcorpus.tasks/1"
REPORT_SCHEMA = "roadcorpus.report/1"
DEFAULT_K = 10
ACCURACY_RADIUS_M = 1000.0
CONTEXT_RADIUS_M = 4000.0
QSF_SIZE = 1000
MIN_VERTEX_GAP_M = 1.0

_STREAMS = {kind: 100 + i for i, kind in enumerate(KINDS)}
STREAM_QSF = 90


@dataclass
class EvalTask:
    task_id: str
    kind: str
    query: list
    ground_truth: dict
    source: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "schema": TASK_SCHEMA,
            "task_id": self.task_id,
            "kind": self.kind,
            "query": [[p[0], p[1]] for p in self.query],
            "ground_truth": self.ground_truth,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            kind = d["kind"]
            if kind not in KINDS:
                raise SchemaError(f"unknown task kind {kind!r}")
            return cls(
                str(d["task_id"]), kind, [GeoPoint(float(a), float(b)) for a, b in d["query"]], dict(d["ground_truth"]), dict(d.get("source", {}))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed task record: {exc}") from None


# -- suite generation ------------------------------------------------------


def _meta_point(network, seg, rng, node_coords, tries=20):
    lo, hi = 0.1, 0.9
    for _ in range(tries):
        q = quantize(interpolate(seg.geometry, seg.cumlen, float(rng.uniform(lo, hi))), COORD_DECIMALS)
        if q in node_coords:
            continue
        if min(haversine_m(q, v) for v in seg.geometry) < MIN_VERTEX_GAP_M:
            continue
        if project_to_segment(q, seg).distance_m >= ON_SEGMENT_TOLERANCE_M:
            continue
        return q
    return None


def _meta_tasks(network, kind, n, seed):
    segs = [s for s in network.segments if s.meta.name is not None]
    if kind == "META_SPEED":
        segs = [s for s in segs if s.meta.maxspeed_kmh is not None]
    elif kind == "META_LANES":
        segs = [s for s in segs if s.meta.lanes is not None]
    if not segs:
        return []
    node_coords = {quantize(p, COORD_DECIMALS) for p in network.node_coords}
    rng = np.random.default_rng([seed, _STREAMS[kind]])
    tasks = []
    attempts = 0
    while len(tasks) < n and attempts < 50 * n:
        attempts += 1
        seg = segs[int(rng.integers(len(segs)))]
        q = _meta_point(network, seg, rng, node_coords)
        if q is None:
            continue
        m = seg.meta
        truth = {
            "META_SPEED": {"label": m.maxspeed_kmh},
            "META_LANES": {"label": m.lanes},
            "META_LENGTH": {"value": m.length_m},
            "META_NAME": {"label": m.name},
        }[kind]
        tasks.append(EvalTask(f"{kind}-{len(tasks):06d}", kind, [q], truth, {"seg_id": seg.seg_id}))
    return tasks


def _quantized_points(network, n, seed, stream, cell_km, accept):
    """Density-sampled quantized points passing ``accept``, drawn in batches until ``n`` are found."""
    out = []
    batch = 0
    while len(out) < n and batch < 50:
        for p in density_sample(network, n, cell_km, seed, stream * 1000 + batch):
            q = quantize(p, COORD_DECIMALS)
            value = accept(q)
            if value is not None:
                out.append((q, value))
                if len(out) == n:
                    break
        batch += 1
    return out


def _strictly_ascending(ranked):
    return all(a[1] < b[1] for a, b in zip(ranked, ranked[1:]))


def retrieval_truth(q, network, k=DEFAULT_K):
    ranked = nearest_roads(q, network, k)
    return {
        "ranked": [[n, d] for n, d in ranked],
        "within_1km": [n for n, _ in roads_within(q, network, ACCURACY_RADIUS_M)],
    }


def directional_truth(q, network, r, k=DEFAULT_K):
    within = [n for n, _ in roads_within(q, network, ACCURACY_RADIUS_M)]
    return {
        d: {"direction": d, "ranked": [[n, dist] for n, dist in ranked], "within_1km": within}
        for d, ranked in directional_ranked(q, network, r, k).items()
    }


def gen_eval_suite(network: RoadNetwork, n_per_kind: int, seed: int = 0, r: float = DEFAULT_RADIUS_M, k: int = DEFAULT_K, cell_km: float = 1.0, kinds=KINDS):
    """Build evaluation tasks with ground truth; one disjoint random stream per kind.

    Metadata queries are interpolated strictly inside a segment (never on an
    OSM node). Retrieval queries whose top-``k`` list contains tied distances
    are redrawn so every ground-truth list is strictly ascending.
    """
    if n_per_kind < 1:
        raise ValueError("n_per_kind must be >= 1")
    if not network.roads:
        raise EmptyNetwork("network has no named roads")
    tasks = []
    for kind in kinds:
        if kind in META_KINDS:
            tasks += _meta_tasks(network, kind, n_per_kind, seed)
        elif kind in ("DIST", "DIR"):
            for i, (p1, p2) in enumerate(sample_pairs(network, n_per_kind, seed, _STREAMS[kind], cell_km)):
                truth = {"value": haversine_m(p1, p2)} if kind == "DIST" else {"label": direction_between(p1, p2)}
                tasks.append(EvalTask(f"{kind}-{i:06d}", kind, [p1, p2], truth))
        elif kind == "RETRIEVAL":

            def accept(q):
                truth = retrieval_truth(q, network, k)
                return truth if _strictly_ascending(truth["ranked"]) else None

            for i, (q, truth) in enumerate(_quantized_points(network, n_per_kind, seed, _STREAMS[kind], cell_km, accept)):
                tasks.append(EvalTask(f"RETRIEVAL-{i:06d}", kind, [q], truth))
        elif kind == "DIR_RETRIEVAL":
            points = _quantized_points(
                network, n_per_kind, seed, _STREAMS[kind], cell_km, lambda q: directional_truth(q, network, r, k) or None
            )
            for i, (q, per_dir) in enumerate(points):
                for d in DIRECTIONS:
                    if d in per_dir:
                        tasks.append(EvalTask(f"DIR_RETRIEVAL-{i:06d}-{d}", kind, [q], per_dir[d]))
        else:
            raise ValueError(f"unknown kind {kind!r}")
    return tasks


def recompute_truth(task: EvalTask, network: RoadNetwork, r: float = DEFAULT_RADIUS_M, k: int = DEFAULT_K) -> dict:
    """Ground truth for ``task`` recomputed from the network alone."""
    q = task.query[0]
    if task.kind in META_KINDS:
        m = network.segments[task.source["seg_id"]].meta
        return {
            "META_SPEED": {"label": m.maxspeed_kmh},
            "META_LANES": {"label": m.lanes},
            "META_LENGTH": {"value": m.length_m},
            "META_NAME": {"label": m.name},
        }[task.kind]
    if task.kind == "DIST":
        return {"value": haversine_m(task.query[0], task.query[1])}
    if task.kind == "DIR":
        return {"label": direction_between(task.query[0], task.query[1])}
    if task.kind == "RETRIEVAL":
        return retrieval_truth(q, network, k)
    per_dir = directional_truth(q, network, r, k)
    return per_dir.get(task.ground_truth.get("direction"), {})


def write_tasks(tasks, path, config: dict | None = None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in tasks:
            rec = t.to_dict()
            if config:
                rec["config"] = config
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def read_jsonl(path):
    records = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise BadInput(f"cannot read {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            if not isinstance(rec, dict):
                raise SchemaError(f"{path}:{lineno}: expected a JSON object")
            records.append(rec)
    return records


def read_tasks(path):
    return [EvalTask.from_dict(d) for d in read_jsonl(path)]


# -- prediction parsing ----------------------------------------------------


@dataclass
class Prediction:
    task_id: str
    raw_text: str
    parsed: object = None


def read_predictions(path):
    preds = []
    for rec in read_jsonl(path):
        if "task_id" not in rec or not isinstance(rec.get("raw_text"), str):
            raise SchemaError(f"prediction record needs 'task_id' and string 'raw_text': {rec!r}")
        preds.append(Prediction(str(rec["task_id"]), rec["raw_text"]))
    return preds


_NUMBER = re.compile(
    r"(-?\d{1,3}(?:,\d{3})+(?:\.\d+)?|-?\d+(?:\.\d+)?)\s*"
    r"(km/h|kmh|kph|mph|kilomet(?:er|re)s?|km|met(?:er|re)s?|m)?(?![A-Za-z])",
    re.IGNORECASE,
)
_DIR_WORDS = {
    "north-east": "NE", "northeast": "NE", "north east": "NE",
    "north-west": "NW", "northwest": "NW", "north west": "NW",
    "south-east": "SE", "southeast": "SE", "south east": "SE",
    "south-west": "SW", "southwest": "SW", "south west": "SW",
    "north": "N", "south": "S", "east": "E", "west": "W",
}
_DIR_TOKEN = re.compile(r"\b(NE|NW|SE|SW|N|E|S|W)\b")
_DIR_TOKEN_CI = re.compile(r"\b(NE|NW|SE|SW|N|E|S|W)\b", re.IGNORECASE)
_DIR_WORD = re.compile(
    r"\b(" + "|".join(w.replace(" ", r"\s+") for w in sorted(_DIR_WORDS, key=len, reverse=True)) + r")\b", re.IGNORECASE
)
_ABBREVIATIONS = {
    "rd": "Road", "st": "Street", "ave": "Avenue", "av": "Avenue", "dr": "Drive", "pl": "Place",
    "tce": "Terrace", "cres": "Crescent", "ln": "Lane", "hwy": "Highway", "blvd": "Boulevard",
}
_ABBREV = re.compile(r"\b(" + "|".join(_ABBREVIATIONS) + r")\b\.?", re.IGNORECASE)


def name_key(text: str) -> str:
    return re.sub(r"\s+", " ", unicodedata.normalize("NFC", text)).strip().casefold()


def _first_number(text):
    m = _NUMBER.search(text)
    if not m:
        return None
    value = float(m.group(1).replace(",", ""))
    unit = (m.group(2) or "").lower()
    if unit.startswith("kilomet") or unit == "km":
        value *= 1000.0
    elif unit == "mph":
        value = float(round(value * 1.609344))
    return value


def _as_label(value):
    if value is None:
        return None
    return int(value) if float(value).is_integer() else value


class NameMatcher:
    """Matches free text to known road names (normalised, longest substring wins)."""

    def __init__(self, names):
        self.by_key = {}
        for n in sorted(names):
            self.by_key.setdefault(name_key(n), n)
        self._keys = sorted(self.by_key, key=lambda k: (-len(k), k))

    def match(self, text: str):
        variants = [name_key(text)]
        expanded = name_key(_ABBREV.sub(lambda m: _ABBREVIATIONS[m.group(1).lower()], text))
        if expanded != variants[0]:
            variants.append(expanded)
        for v in variants:
            exact = self.by_key.get(v.strip(_PUNCT))
            if exact is not None:
                return exact
        best = None
        for k in self._keys:
            if best is not None and len(k) < len(best[1]):
                break
            for v in variants:
                pos = _boundary_find(v, k)
                if pos >= 0 and (best is None or pos < best[0]):
                    best = (pos, k)
        return self.by_key[best[1]] if best is not None else None


_PUNCT = " .!?,;:\"'"


def _boundary_find(text, key):
    start = 0
    while True:
        pos = text.find(key, start)
        if pos < 0:
            return -1
        end = pos + len(key)
        if (pos == 0 or not text[pos - 1].isalnum()) and (end == len(text) or not text[end].isalnum()):
            return pos
        start = pos + 1


def parse_prediction(raw_text: str, kind: str, names=None):
    """Extract a scoreable value from free text; None when unparsable.

    ``names`` is an iterable of known road names or a NameMatcher.
    """
    if raw_text is None:
        return None
    if kind in NUMERIC_KINDS:
        return _first_number(raw_text)
    if kind == "META_SPEED":
        return _as_label(_first_number(raw_text))
    if kind == "META_LANES":
        m = re.search(r"\d+", raw_text)
        return int(m.group()) if m else None
    if kind == "DIR":
        # upper-case tokens and spelled-out words first; lone lower-case letters are a last resort
        hits = []
        m = _DIR_TOKEN.search(raw_text)
        if m:
            hits.append((m.start(), m.group(1)))
        m = _DIR_WORD.search(raw_text)
        if m:
            hits.append((m.start(), _DIR_WORDS[re.sub(r"\s+", " ", m.group(1).lower())]))
        if not hits:
            m = _DIR_TOKEN_CI.search(raw_text)
            if m:
                hits.append((m.start(), m.group(1).upper()))
        return min(hits)[1] if hits else None
    if kind in NAME_KINDS:
        if names is None:
            return None
        matcher = names if isinstance(names, NameMatcher) else NameMatcher(names)
        return matcher.match(raw_text)
    raise ValueError(f"unknown kind {kind!r}")


def task_names(tasks):
    """Every road name that appears in the tasks' ground truth."""
    names = set()
    for t in tasks:
        gt = t.ground_truth
        if t.kind == "META_NAME":
            names.add(gt["label"])
        for n, _ in gt.get("ranked", []):
            names.add(n)
        names.update(gt.get("within_1km", []))
    return names


# -- scoring ---------------------------------------------------------------


def _mean(xs):
    xs = list(xs)
    return math.fsum(xs) / len(xs) if xs else None


def classification_metrics(truth, pred):
    """Accuracy and macro precision/recall/F1 over classes present in ``truth``.

    ``pred`` entries may be None (unparsable): wrong for accuracy, a false
    negative for the true class, never a false positive.
    """
    n = len(truth)
    correct = sum(1 for t, p in zip(truth, pred) if p is not None and p == t)
    classes = sorted(set(truth), key=str)
    precisions, recalls, f1s = [], [], []
    for c in classes:
        tp = sum(1 for t, p in zip(truth, pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(truth, pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(truth, pred) if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return {
        "accuracy": correct / n if n else None,
        "macro_precision": _mean(precisions),
        "macro_recall": _mean(recalls),
        "macro_f1": _mean(f1s),
        "classes": [str(c) for c in classes],
    }


def regression_metrics(truth, pred):
    """MAPE over parsed predictions; A@30% over all tasks (unparsable counts as a miss)."""
    errors = [abs(p - t) / abs(t) for t, p in zip(truth, pred) if p is not None]
    return {
        "mape": _mean(errors),
        "a_at_30": sum(1 for e in errors if e <= 0.30) / len(truth) if truth else None,
    }


def retrieval_metrics(tasks, pred, ks=(1, 5)):
    out = {}
    ranks = []
    near = []
    for t, p in zip(tasks, pred):
        names = [n for n, _ in t.ground_truth["ranked"]]
        ranks.append(names.index(p) + 1 if p is not None and p in names else None)
        near.append(p is not None and p in set(t.ground_truth.get("within_1km", ())))
    n = len(tasks)
    for k in ks:
        out[f"hit_at_{k}"] = sum(1 for r in ranks if r is not None and r <= k) / n
    out["hit_at_K"] = sum(1 for r in ranks if r is not None) / n
    out["mrr"] = math.fsum(1.0 / r for r in ranks if r is not None) / n
    out["accuracy_at_1km"] = sum(near) / n
    return out


def score(tasks, predictions, names=None) -> dict:
    """Score predictions against tasks; returns the metric report.

    Missing predictions are scored as wrong. Predictions for unknown or
    duplicated task ids are a SchemaError.
    """
    by_id = {}
    for t in tasks:
        if t.task_id in by_id:
            raise SchemaError(f"duplicate task id {t.task_id!r}")
        by_id[t.task_id] = t
    raw = {}
    for p in predictions:
        if p.task_id not in by_id:
            raise SchemaError(f"prediction for unknown task id {p.task_id!r}")
        if p.task_id in raw:
            raise SchemaError(f"duplicate prediction for task id {p.task_id!r}")
        raw[p.task_id] = p.raw_text
    matcher = names if isinstance(names, NameMatcher) else NameMatcher(names if names is not None else task_names(tasks))

    grouped = defaultdict(list)
    for tid in sorted(by_id):
        t = by_id[tid]
        text = raw.get(tid)
        parsed = parse_prediction(text, t.kind, matcher) if text is not None else None
        grouped[t.kind].append((t, parsed, text is None))

    kinds = {}
    for kind in KINDS:
        rows = grouped.get(kind)
        if not rows:
            continue
        ts = [r[0] for r in rows]
        pred = [r[1] for r in rows]
        entry = {"n": len(rows), "missing": sum(r[2] for r in rows), "unparsable": sum(1 for r in rows if r[1] is None and not r[2])}
        if kind in CATEGORICAL_KINDS:
            entry.update(classification_metrics([t.ground_truth["label"] for t in ts], pred))
        elif kind == "META_NAME":
            entry["accuracy"] = sum(1 for t, p in zip(ts, pred) if p is not None and p == t.ground_truth["label"]) / len(ts)
        elif kind in NUMERIC_KINDS:
            entry.update(regression_metrics([t.ground_truth["value"] for t in ts], pred))
        elif kind == "RETRIEVAL":
            entry.update(retrieval_metrics(ts, pred))
        elif kind == "DIR_RETRIEVAL":
            per_dir = {}
            for d in DIRECTIONS:
                sel = [(t, p) for t, p in zip(ts, pred) if t.ground_truth["direction"] == d]
                if sel:
                    per_dir[d] = {"n": len(sel), **retrieval_metrics([s[0] for s in sel], [s[1] for s in sel])}
            for metric in ("hit_at_1", "hit_at_5", "hit_at_K", "mrr", "accuracy_at_1km"):
                entry[metric] = _mean(v[metric] for v in per_dir.values())
            entry["per_direction"] = per_dir
            entry["directions_averaged"] = list(per_dir)
            entry["absent_directions"] = "skipped"
        kinds[kind] = entry

    return {
        "schema": REPORT_SCHEMA,
        "n_tasks": len(by_id),
        "n_predictions": len(raw),
        "missing": len(by_id) - len(raw),
        "kinds": kinds,
        "table": table_row(kinds),
    }


_TABLE = [
    ("Standard H@1", "RETRIEVAL", "hit_at_1"),
    ("Standard H@5", "RETRIEVAL", "hit_at_5"),
    ("Standard A@1km", "RETRIEVAL", "accuracy_at_1km"),
    ("Standard MRR", "RETRIEVAL", "mrr"),
    ("Directional H@1", "DIR_RETRIEVAL", "hit_at_1"),
    ("Directional H@5", "DIR_RETRIEVAL", "hit_at_5"),
    ("Directional A@1km", "DIR_RETRIEVAL", "accuracy_at_1km"),
    ("Directional MRR", "DIR_RETRIEVAL", "mrr"),
    ("Dist MAPE", "DIST", "mape"),
    ("Dir Acc", "DIR", "accuracy"),
    ("Dir F1", "DIR", "macro_f1"),
    ("Road Acc", "META_NAME", "accuracy"),
    ("Length MAPE", "META_LENGTH", "mape"),
    ("Length A@30%", "META_LENGTH", "a_at_30"),
    ("Speed Acc", "META_SPEED", "accuracy"),
    ("Speed F1", "META_SPEED", "macro_f1"),
    ("Lanes Acc", "META_LANES", "accuracy"),
    ("Lanes F1", "META_LANES", "macro_f1"),
]


def table_row(kinds: dict) -> dict:
    """Flat metric mapping in the column order of the usual results table."""
    return {col: kinds.get(kind, {}).get(metric) for col, kind, metric in _TABLE}


def perfect_predictions(tasks):
    """Prediction records reproducing each task's ground truth (handy for self-checks)."""
    out = []
    for t in tasks:
        gt = t.ground_truth
        if t.kind in ("RETRIEVAL", "DIR_RETRIEVAL"):
            text = gt["ranked"][0][0]
        elif "label" in gt:
            text = str(gt["label"])
        else:
            text = f"{gt['value']!r} m"
        out.append(Prediction(t.task_id, text))
    return out


# -- prompt aids -----------------------------------------------------------


def aoi_distributions(network: RoadNetwork) -> dict:
    speeds = Counter(s.meta.maxspeed_kmh for s in network.segments if s.meta.maxspeed_kmh is not None)
    lanes = Counter(s.meta.lanes for s in network.segments if s.meta.lanes is not None)
    lengths = np.array([s.meta.length_m for s in network.segments])
    q1, q2, q3 = np.percentile(lengths, [25, 50, 75]).tolist()
    return {
        "maxspeed_kmh": [[v, c] for v, c in sorted(speeds.items(), key=lambda vc: (-vc[1], vc[0]))],
        "lanes": {str(k): v for k, v in sorted(lanes.items())},
        "segment_length_m": {"min": float(lengths.min()), "q1": q1, "median": q2, "q3": q3, "max": float(lengths.max())},
    }


def build_context_pack(network: RoadNetwork, tasks, radius_m: float = CONTEXT_RADIUS_M):
    """Per-task grounding records: nearby road names, plus AOI distributions for metadata tasks."""
    dists = None
    out = []
    for t in tasks:
        if t.kind in ("DIST", "DIR"):
            continue
        rec = {"task_id": t.task_id, "kind": t.kind, "radius_m": radius_m}
        rec["nearby_roads"] = [n for n, _ in roads_within(t.query[0], network, radius_m)]
        if t.kind in META_KINDS:
            if dists is None:
                dists = aoi_distributions(network)
            rec["distributions"] = dists
        out.append(rec)
    return out


def build_qsf_db(network: RoadNetwork, seed: int = 0, size: int = QSF_SIZE, r: float = DEFAULT_RADIUS_M, cell_km: float = 1.0) -> dict:
    """Density-sampled example points annotated with nearest and directional roads."""
    entries = []
    for i, p in enumerate(density_sample(network, size, cell_km, seed, STREAM_QSF)):
        q = quantize(p, COORD_DECIMALS)
        (name, dist), = nearest_roads(q, network, 1)
        entries.append(
            {
                "id": i,
                "point": [q.lat, q.lon],
                "nearest": [name, dist],
                "directional": {d: [n, x] for d, (n, x) in directional_nearest(q, network, r).items()},
            }
        )
    return {"schema": "roadcorpus.qsf/1", "seed": seed, "size": size, "radius_m": r, "cell_km": cell_km, "points": entries}


def qsf_neighbors(db: dict, p, m: int = 10):
    """The ``m`` database entries closest to ``p`` by haversine: ``[(entry, distance_m)]`` ascending."""
    scored = [(haversine_m(p, e["point"]), e["id"], e) for e in db["points"]]
    scored.sort(key=lambda x: (x[0], x[1]))
    return [(e, d) for d, _, e in scored[:m]]
