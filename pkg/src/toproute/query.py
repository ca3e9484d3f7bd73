"""Queries and per-query sub-index retrieval."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

from .errors import InfeasibleQueryError, InputError
from .gain import AggregationSpec, GainContext, relaxed_poi_cost
from .index import FeatureIndex, HopIndex, _merge
from .model import EPS, PoiMap

INF = math.inf


@dataclass(frozen=True)
class Query:
    x: int
    y: int
    b: float
    weights: Mapping[str, float]
    theta: float = 0.0
    aggregation: AggregationSpec = field(default_factory=AggregationSpec)
    k: int = 1
    count_endpoint_stay: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.b) and self.b > 0):
            raise InputError(f"budget must be positive, got {self.b}")
        if int(self.k) != self.k or self.k < 1:
            raise InputError(f"k must be a positive integer, got {self.k}")
        for h, w in self.weights.items():
            if not 0 <= w <= 1:
                raise InputError(f"weight of {h!r} outside [0, 1]: {w}")
        if abs(math.fsum(self.weights.values()) - 1.0) > 1e-9:
            raise InputError(f"weights must sum to 1, got {math.fsum(self.weights.values())}")

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "b": self.b,
            "weights": dict(self.weights),
            "theta": self.theta,
            "aggregation": self.aggregation.to_dict(),
            "k": self.k,
            "count_endpoint_stay": self.count_endpoint_stay,
        }

    def replace(self, **changes) -> "Query":
        return dataclasses.replace(self, **changes)


def query_from_dict(d: Mapping) -> Query:
    try:
        agg = d.get("aggregation") or {}
        return Query(
            x=int(d["x"]),
            y=int(d["y"]),
            b=float(d["b"]),
            weights={str(h): float(w) for h, w in d["weights"].items()},
            theta=float(d.get("theta", 0.0)),
            aggregation=AggregationSpec(agg.get("type", "power_law"), float(agg.get("alpha", 0.0))),
            k=int(d.get("k", 1)),
            count_endpoint_stay=bool(d.get("count_endpoint_stay", False)),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed query: {exc!r}") from exc


def load_queries(path) -> list[Query]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: {exc}") from exc
    if isinstance(data, dict):
        data = [data]
    return [query_from_dict(q) for q in data]


def save_queries(queries, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([q.to_dict() for q in queries], fh, indent=1)
        fh.write("\n")


@dataclass
class CandidateSet:
    """Everything the route searches need for one query.

    ``stays`` holds effective stay costs (endpoint stays zeroed unless the
    query counts them). ``close_stay`` is what closing a route at y adds:
    the destination's stay, or nothing when y == x since x was already paid.
    """

    map: PoiMap
    query: Query
    pois: list[int]
    features: tuple[str, ...]
    weights: tuple[float, ...]
    filtered_ratings: dict[int, tuple[float, ...]]
    fi_q: dict[str, list[tuple[int, float]]]
    hi_q: dict[int, tuple[dict[int, float], dict[int, float]]]
    stays: dict[int, float]

    @property
    def x(self) -> int:
        return self.query.x

    @property
    def y(self) -> int:
        return self.query.y

    @property
    def b(self) -> float:
        return self.query.b

    @property
    def close_stay(self) -> float:
        return 0.0 if self.x == self.y else self.stays[self.y]

    def dist(self, i: int, j: int) -> float:
        """Least travel cost from the cut label lists; INF when above the budget."""
        if i == j:
            return 0.0
        return _merge(self.hi_q[i][0], self.hi_q[j][1])

    @cached_property
    def nodes(self) -> list[int]:
        """Dense node order: candidates, then x, then y (when distinct)."""
        out = list(self.pois) + [self.x]
        if self.y != self.x:
            out.append(self.y)
        return out

    @cached_property
    def matrix(self) -> list[list[float]]:
        nodes = self.nodes
        return [[self.dist(a, b) for b in nodes] for a in nodes]

    def relaxed_cost(self, i: int) -> float:
        if i == self.y:
            return relaxed_poi_cost(self.map, i, "destination", stay=self.close_stay)
        return relaxed_poi_cost(self.map, i, stay=self.stays[i])

    def context(self) -> GainContext:
        spec = dataclasses.replace(self.query.aggregation, scale=self.map.beta)
        return GainContext(self.filtered_ratings, self.weights, spec)


def _cut(labels: Mapping[int, float], b: float) -> dict[int, float]:
    return {p: d for p, d in labels.items() if d <= b}


def retrieve_subindices(m: PoiMap, fi: FeatureIndex, hi: HopIndex, q: Query) -> CandidateSet:
    x, y, b = q.x, q.y, q.b
    for end in (x, y):
        if end not in m.by_id:
            raise InputError(f"unknown POI id {end}")
    for h in q.weights:
        if h not in m.features:
            raise InputError(f"unknown feature {h!r}")
    features = tuple(sorted(h for h, w in q.weights.items() if w > 0))
    weights = tuple(q.weights[h] for h in features)

    stays = {}
    for end in (x, y):
        stays[end] = m.stay(end) if q.count_endpoint_stay else 0.0
    close_stay = 0.0 if x == y else stays[y]

    t_xy = hi.cost(x, y)
    if stays[x] + t_xy + close_stay > b + EPS:
        raise InfeasibleQueryError(f"direct route {x} -> {y} costs {stays[x] + t_xy + close_stay} > budget {b}")

    fi_q: dict[str, list[tuple[int, float]]] = {}
    pool: set[int] = set()
    for h in features:
        kept = []
        for i, r in fi[h]:
            if r < q.theta:
                break
            kept.append((i, r))
        fi_q[h] = kept
        pool.update(i for i, _ in kept)
    pool.discard(x)
    pool.discard(y)

    out_x = hi.out_labels[x]
    in_y = hi.in_labels[y]
    pois = []
    for i in sorted(pool):
        s_i = m.stay(i)
        t_xi = _merge(out_x, hi.in_labels[i])
        t_iy = _merge(hi.out_labels[i], in_y)
        if stays[x] + t_xi + s_i + t_iy + close_stay <= b + EPS:
            pois.append(i)
            stays[i] = s_i
    keep = set(pois)
    fi_q = {h: [(i, r) for i, r in lst if i in keep] for h, lst in fi_q.items()}

    def row(i: int) -> tuple[float, ...]:
        vals = []
        for h in features:
            r = m.rating(i, h)
            vals.append(r if r >= q.theta and r > 0 else 0.0)
        return tuple(vals)

    filtered = {i: row(i) for i in pois}
    for end in (x, y):
        filtered[end] = row(end) if q.count_endpoint_stay else (0.0,) * len(features)

    hi_q = {i: (_cut(hi.out_labels[i], b), _cut(hi.in_labels[i], b)) for i in (*pois, x, y)}
    return CandidateSet(m, q, pois, features, weights, filtered, fi_q, hi_q, stays)
