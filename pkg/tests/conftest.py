import heapq
import itertools
import math
import random

import pytest

from toproute import (
    AggregationSpec,
    InfeasibleQueryError,
    Query,
    build_feature_index,
    build_hop_index,
    retrieve_subindices,
)
from toproute.bench import GeneratorConfig, generate_map, generate_queries
from toproute.model import Edge, Poi, PoiMap


def line_map(costs, stays=None, ratings=None, features=("f",), directed=False, beta=5.0):
    """Path graph 0 - 1 - ... with the given edge costs."""
    n = len(costs) + 1
    stays = stays or [0.0] * n
    ratings = ratings or [{} for _ in range(n)]
    pois = tuple(Poi(i, stays[i], ratings[i]) for i in range(n))
    edges = tuple(Edge(i, i + 1, c) for i, c in enumerate(costs))
    return PoiMap(pois, edges, tuple(features), directed, beta)


def sp_oracle(m, src):
    """Plain Dijkstra written independently of the package."""
    adj = {p.id: [] for p in m.pois}
    for e in m.edges:
        adj[e.src].append((e.dst, e.cost))
        if not m.directed:
            adj[e.dst].append((e.src, e.cost))
    dist = {src: 0.0}
    pq = [(0.0, src)]
    while pq:
        d, u = heapq.heappop(pq)
        if d > dist[u]:
            continue
        for v, c in adj[u]:
            if d + c < dist.get(v, math.inf):
                dist[v] = d + c
                heapq.heappush(pq, (d + c, v))
    return dist


def phi_oracle(kind, alpha, ratings, beta=5.0):
    vals = sorted(ratings, reverse=True)
    if kind == "power_law":
        return sum(v * (r + 1) ** -alpha for r, v in enumerate(vals))
    if kind == "log":
        return math.log(1 + sum(vals))
    out = 1.0
    for v in vals:
        out *= 1 - v / beta
    return 1 - out


def gain_oracle(cands, pois):
    q = cands.query
    total = 0.0
    for h in cands.features:
        rs = [cands.filtered_ratings[i][cands.features.index(h)] for i in set(pois)]
        rs = [r for r in rs if r > 0]
        total += q.weights[h] * phi_oracle(q.aggregation.kind, q.aggregation.alpha, rs, cands.map.beta)
    return total


def topk_oracle(cands, limit=8):
    """Enumerate every ordering of every candidate subset with Dijkstra legs.

    Returns [(frozenset of interior pois, gain, min cost)] best first.
    """
    m, q = cands.map, cands.query
    x, y, b = q.x, q.y, q.b
    pool = list(cands.pois)
    assert len(pool) <= limit
    dist = {i: sp_oracle(m, i) for i in (*pool, x, y)}
    s = dict(cands.stays)
    close = 0.0 if x == y else s[y]
    best = {}
    for r in range(len(pool) + 1):
        for sub in itertools.permutations(pool, r):
            cost = s[x]
            prev = x
            for i in sub:
                cost += dist[prev][i] + s[i]
                prev = i
            cost += dist[prev][y] + close
            if cost > b + 1e-9:
                continue
            key = frozenset(sub)
            if key not in best or cost < best[key]:
                best[key] = cost
    rows = [(k, gain_oracle(cands, k | {x, y}), c) for k, c in best.items()]
    rows.sort(key=lambda t: (-t[1], t[2], tuple(sorted(t[0]))))
    return rows


def random_instance(rng, n_lo=6, n_hi=12, kinds=("power_law", "log", "coverage"), k=None, b=None,
                    theta=None, alpha=None, max_cands=12, endpoint_stay=False, directed=False):
    """A (map, candidate set) pair with at most ``max_cands`` candidates, or None."""
    seed = rng.randrange(2**31)
    n = rng.randint(n_lo, n_hi)
    m = generate_map(GeneratorConfig(poi_count=n, edge_density=rng.uniform(0.2, 0.6), feature_count=4,
                                     seed=seed, directed=directed))
    fi, hi = build_feature_index(m), build_hop_index(m)
    q = generate_queries(
        m, 1,
        b if b is not None else rng.uniform(120, 650),
        theta if theta is not None else rng.choice([0.0, 2.5]),
        alpha if alpha is not None else rng.choice([0.0, 0.5, 1.0, 2.0]),
        k if k is not None else rng.choice([1, 5]),
        seed=seed,
        kind=rng.choice(kinds),
        count_endpoint_stay=endpoint_stay,
    )[0]
    if rng.random() < 0.1:
        q = q.replace(y=q.x)
    try:
        c = retrieve_subindices(m, fi, hi, q)
    except InfeasibleQueryError:
        return None
    if len(c.pois) > max_cands:
        return None
    return m, hi, c


def instances(seed, count, **kw):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        inst = random_instance(rng, **kw)
        if inst is not None:
            out.append(inst)
    return out


@pytest.fixture
def small_map():
    # 0 -4- 1 -6- 2, plus 0 -3- 3 -3- 2
    pois = (
        Poi(0, 0.0, {}),
        Poi(1, 10.0, {"museum": 4.0, "park": 1.0}),
        Poi(2, 0.0, {}),
        Poi(3, 5.0, {"park": 3.0}),
    )
    edges = (Edge(0, 1, 4.0), Edge(1, 2, 6.0), Edge(0, 3, 3.0), Edge(3, 2, 3.0))
    return PoiMap(pois, edges, ("museum", "park"), False, 5.0)


def make_query(x, y, b, weights, kind="power_law", alpha=0.0, k=1, theta=0.0, endpoint=False):
    return Query(x, y, b, weights, theta, AggregationSpec(kind, alpha), k, endpoint)
