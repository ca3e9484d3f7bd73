"""Synthetic maps and queries, check-in ratings, and the benchmark runner."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import CapExceededError, InfeasibleQueryError, InputError
from .gain import AggregationSpec
from .index import build_feature_index, build_hop_index
from .model import Edge, Poi, PoiMap, load_map
from .query import Query, load_queries, retrieve_subindices
from .search import ALGORITHMS, Caps, solve

log = logging.getLogger(__name__)

CSV_COLUMNS = ["algorithm", "b", "theta", "alpha", "k", "mean_gain", "mean_ms", "mean_examined", "completion_ratio"]


@dataclass
class GeneratorConfig:
    poi_count: int = 100
    # probability that any given pair of POIs gets an edge
    edge_density: float = 0.05
    feature_count: int = 8
    stay_mean: float = 90.0
    stay_stddev: float = 15.0
    beta: float = 5.0
    seed: int = 0
    edge_cost: tuple[float, float] = (5.0, 30.0)
    features_per_poi: tuple[int, int] = (1, 3)
    directed: bool = False

    def __post_init__(self):
        if self.poi_count < 1:
            raise InputError("poi_count must be >= 1")
        if not 0 <= self.edge_density <= 1:
            raise InputError("edge_density must lie in [0, 1]")
        if self.feature_count < 1:
            raise InputError("feature_count must be >= 1")
        lo, hi = self.edge_cost
        if not 0 < lo <= hi:
            raise InputError("edge cost range must be positive")


def ratings_from_checkins(table: Iterable[tuple[int, str, int]], beta: float) -> dict[int, dict[str, float]]:
    """Scale each POI's check-in count on a feature against that feature's mean.

    A POI at the mean count gets beta/2; the result is clamped at beta. The
    mean runs over POIs with a positive count on the feature.
    """
    if not beta > 0:
        raise InputError("beta must be positive")
    counts: dict[str, dict[int, int]] = defaultdict(dict)
    for poi, h, nc in table:
        if nc < 0:
            raise InputError(f"negative check-in count for POI {poi} feature {h!r}")
        counts[h][poi] = counts[h].get(poi, 0) + int(nc)
    out: dict[int, dict[str, float]] = defaultdict(dict)
    for h, per_poi in counts.items():
        positive = {i: c for i, c in per_poi.items() if c > 0}
        if not positive:
            log.warning("feature %r has no check-ins; dropped", h)
            continue
        mean = sum(positive.values()) / len(positive)
        for i, c in positive.items():
            out[i][h] = min(c / mean * beta / 2, beta)
    return dict(out)


class _DSU:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, a):
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.p[rb] = ra
        return True


def generate_map(cfg: GeneratorConfig) -> PoiMap:
    """Seeded random connected map.

    Stays are Gaussian clamped at 1. Edges are drawn independently per pair
    with costs uniform in ``cfg.edge_cost``; leftover components are chained
    together. Ratings come from synthetic check-in counts (a skewed feature
    popularity and a heavy-tailed count per POI) pushed through
    :func:`ratings_from_checkins`.
    """
    rng = random.Random(cfg.seed)
    n = cfg.poi_count
    lo, hi = cfg.edge_cost
    features = tuple(f"f{h:02d}" for h in range(cfg.feature_count))

    stays = [round(max(1.0, rng.gauss(cfg.stay_mean, cfg.stay_stddev)), 2) for _ in range(n)]
    locs = [(round(rng.uniform(-90, 90), 6), round(rng.uniform(-180, 180), 6)) for _ in range(n)]

    pairs: list[tuple[int, int]] = []
    dsu = _DSU(n)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < cfg.edge_density:
                pairs.append((i, j))
                dsu.union(i, j)
    roots = sorted({dsu.find(i) for i in range(n)})
    if len(roots) > 1:
        members = defaultdict(list)
        for i in range(n):
            members[dsu.find(i)].append(i)
        for a, b in zip(roots, roots[1:]):
            pairs.append((rng.choice(members[a]), rng.choice(members[b])))

    edges: list[Edge] = []
    for i, j in pairs:
        c = round(rng.uniform(lo, hi), 2)
        if cfg.directed:
            edges.append(Edge(i, j, c))
            edges.append(Edge(j, i, round(rng.uniform(lo, hi), 2)))
        else:
            edges.append(Edge(i, j, c))

    popularity = [1.0 / (h + 1) for h in range(cfg.feature_count)]
    fmin, fmax = cfg.features_per_poi
    table = []
    for i in range(n):
        m = min(rng.randint(fmin, fmax), cfg.feature_count)
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(rng.choices(range(cfg.feature_count), weights=popularity)[0])
        for h in sorted(chosen):
            table.append((i, features[h], 1 + int(rng.paretovariate(1.5) * 10)))
    ratings = ratings_from_checkins(table, cfg.beta)

    pois = tuple(
        Poi(
            id=i,
            stay=stays[i],
            ratings={h: round(r, 4) for h, r in sorted(ratings.get(i, {}).items())},
            lat=locs[i][0],
            lon=locs[i][1],
        )
        for i in range(n)
    )
    return PoiMap(pois, tuple(edges), features, cfg.directed, cfg.beta)


def feature_popularity(m: PoiMap) -> dict[str, float]:
    """Sum of ratings per feature; stands in for check-in totals on synthetic maps."""
    pop = {h: 0.0 for h in m.features}
    for p in m.pois:
        for h, r in p.ratings.items():
            pop[h] = pop.get(h, 0.0) + r
    return pop


def sample_weights(rng: random.Random, pop: dict[str, float], min_features: int = 1, max_features: int = 4) -> dict[str, float]:
    feats = [h for h in sorted(pop) if pop[h] > 0]
    if not feats:
        raise InputError("map has no rated features")
    m = min(rng.randint(min_features, max_features), len(feats))
    chosen: list[str] = []
    pool = list(feats)
    for _ in range(m):
        h = rng.choices(pool, weights=[pop[f] for f in pool])[0]
        chosen.append(h)
        pool.remove(h)
    total = math.fsum(pop[h] for h in chosen)
    w = {h: pop[h] / total for h in sorted(chosen)}
    # absorb rounding so the weights sum to 1 within 1e-12
    last = sorted(w)[-1]
    w[last] = 1.0 - math.fsum(v for h, v in w.items() if h != last)
    return w


def generate_queries(
    m: PoiMap,
    count: int,
    b: float,
    theta: float = 0.0,
    alpha: float = 0.5,
    k: int = 1,
    seed: int = 0,
    x: int | None = None,
    y: int | None = None,
    kind: str = "power_law",
    min_features: int = 1,
    max_features: int = 4,
    count_endpoint_stay: bool = False,
) -> list[Query]:
    """Queries sharing one x, y pair with popularity-weighted feature preferences."""
    rng = random.Random(seed)
    if x is None or y is None:
        ids = m.ids
        if len(ids) < 2:
            raise InputError("need at least two POIs to pick x and y")
        px, py = rng.sample(ids, 2)
        x = px if x is None else x
        y = py if y is None else y
    pop = feature_popularity(m)
    spec = AggregationSpec(kind, alpha)
    out = []
    for _ in range(count):
        w = sample_weights(rng, pop, min_features, max_features)
        out.append(Query(x, y, b, w, theta, spec, k, count_endpoint_stay))
    return out


@dataclass
class BenchRow:
    algorithm: str
    query: int
    b: float
    theta: float
    alpha: float
    k: int
    completed: bool
    gain: float | None = None
    ms: float | None = None
    examined: int | None = None
    error: str | None = None


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def groups(self) -> list[dict]:
        buckets: dict[tuple, list[BenchRow]] = defaultdict(list)
        for r in self.rows:
            buckets[(r.algorithm, r.b, r.theta, r.alpha, r.k)].append(r)
        out = []
        for (algo, b, theta, alpha, k), rows in buckets.items():
            done = [r for r in rows if r.completed]

            def mean(vals):
                vals = list(vals)
                return math.fsum(vals) / len(vals) if vals else None

            out.append(
                {
                    "algorithm": algo,
                    "b": b,
                    "theta": theta,
                    "alpha": alpha,
                    "k": k,
                    "mean_gain": mean(r.gain for r in done),
                    "mean_ms": mean(r.ms for r in done),
                    "mean_examined": mean(r.examined for r in done),
                    "completion_ratio": len(done) / len(rows),
                }
            )
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for g in self.groups():
            w.writerow({c: ("" if g[c] is None else g[c]) for c in CSV_COLUMNS})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"groups": self.groups(), "rows": [r.__dict__ for r in self.rows]}


def run_queries(
    m: PoiMap,
    queries: Sequence[Query],
    algorithms: Sequence[str],
    caps: Caps | None = None,
    fi=None,
    hi=None,
) -> BenchReport:
    for a in algorithms:
        if a not in ALGORITHMS:
            raise InputError(f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
    fi = fi if fi is not None else build_feature_index(m)
    hi = hi if hi is not None else build_hop_index(m)
    report = BenchReport()
    for qi, q in enumerate(queries):
        alpha = q.aggregation.alpha
        try:
            cands = retrieve_subindices(m, fi, hi, q)
        except InfeasibleQueryError as exc:
            for a in algorithms:
                report.rows.append(BenchRow(a, qi, q.b, q.theta, alpha, q.k, False, error=str(exc)))
            continue
        ctx = cands.context()
        for a in algorithms:
            row = BenchRow(a, qi, q.b, q.theta, alpha, q.k, False)
            try:
                results, stats = solve(cands, a, caps=caps, ctx=ctx)
            except (CapExceededError, InputError) as exc:
                row.error = str(exc)
            else:
                row.completed = True
                row.gain = results[0][1] if results else 0.0
                row.ms = stats.wall_time * 1000.0
                row.examined = stats.examined_open_routes
            report.rows.append(row)
    return report


def run_bench(map_file, query_file, algorithms: Sequence[str], caps: Caps | None = None,
              csv_out=None, json_out=None) -> BenchReport:
    """Run every algorithm on every query of a batch file and tabulate the means."""
    m = load_map(map_file)
    queries = load_queries(query_file)
    report = run_queries(m, queries, algorithms, caps)
    if csv_out is not None:
        with open(csv_out, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
    if json_out is not None:
        with open(json_out, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=1)
            fh.write("\n")
    return report
