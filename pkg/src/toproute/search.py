"""Route search: exact compact-state growth, its heuristics, greedy and brute force.

Compact states are subsets of the candidate list encoded as int bitmasks over
candidate rank (ascending POI id). States are grown prefix-first: the children
of a state are made by prepending each candidate that precedes all of its
members, so every subset of a state is visited before the state itself.
"""

from __future__ import annotations

import bisect
import math
import time
from dataclasses import dataclass, field
from typing import Any

from .errors import CapExceededError, InputError
from .gain import GainContext, fractional_bound
from .model import EPS, Route, closed_route
from .query import CandidateSet, Query

INF = math.inf
BF_LIMIT = 15
ALGORITHMS = ("bf", "pacer1", "pacer2", "pacer-sc", "greedy")


@dataclass
class SearchStats:
    examined_open_routes: int = 0
    states_created: int = 0
    pruned_by_dominance: int = 0
    pruned_by_bound: int = 0
    wall_time: float = 0.0
    # longest route length (excluding x and y) that was examined
    max_level: int = 0
    threshold_history: list[float] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "examined_open_routes": self.examined_open_routes,
            "states_created": self.states_created,
            "pruned_by_dominance": self.pruned_by_dominance,
            "pruned_by_bound": self.pruned_by_bound,
            "wall_time_ms": self.wall_time * 1000.0,
        }


@dataclass
class Caps:
    """Per-query limits; ``None`` disables a limit."""

    seconds: float | None = None
    memory_bytes: int | None = None
    check_every: int = 2048

    def start(self) -> "_Guard":
        return _Guard(self)


class _Guard:
    def __init__(self, caps: Caps | None):
        self.caps = caps
        self.deadline = None
        self.proc = None
        self.ticks = 0
        if caps is not None:
            if caps.seconds is not None:
                self.deadline = time.perf_counter() + caps.seconds
            if caps.memory_bytes is not None:
                import psutil

                self.proc = psutil.Process()
            self.check(force=True)

    def check(self, force: bool = False) -> None:
        if self.caps is None:
            return
        self.ticks += 1
        if not force and self.ticks % self.caps.check_every:
            return
        if self.deadline is not None and time.perf_counter() >= self.deadline:
            raise CapExceededError(f"time cap of {self.caps.seconds}s exceeded")
        if self.proc is not None and self.proc.memory_info().rss >= self.caps.memory_bytes:
            raise CapExceededError(f"memory cap of {self.caps.memory_bytes} bytes exceeded")


@dataclass
class TopKEntry:
    key: tuple[int, ...]
    route: Any
    gain: float
    cost: float

    def rank(self):
        return (-self.gain, self.cost, self.key)


class TopK:
    """At most k closed routes with distinct POI sets, best first.

    Ranked by gain descending, then cost ascending, then the sorted POI-id
    tuple (that last rule is ours; it only matters for exact double ties).
    """

    def __init__(self, k: int):
        if k < 1:
            raise InputError("k must be >= 1")
        self.k = k
        self.entries: list[TopKEntry] = []
        self._ranks: list[tuple] = []
        self._by_key: dict[tuple[int, ...], TopKEntry] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def threshold(self) -> float:
        """Gain of the k-th entry, or -inf while fewer than k are held."""
        return self.entries[-1].gain if len(self.entries) >= self.k else -INF

    def _remove(self, e: TopKEntry) -> None:
        pos = bisect.bisect_left(self._ranks, e.rank())
        del self._ranks[pos]
        del self.entries[pos]
        del self._by_key[e.key]

    def offer(self, poi_set, route, gain: float, cost: float) -> bool:
        key = tuple(sorted(poi_set))
        old = self._by_key.get(key)
        if old is not None:
            if cost >= old.cost:
                return False
            self._remove(old)
        e = TopKEntry(key, route, gain, cost)
        r = e.rank()
        if len(self.entries) >= self.k and r >= self._ranks[-1]:
            return False
        pos = bisect.bisect_left(self._ranks, r)
        self._ranks.insert(pos, r)
        self.entries.insert(pos, e)
        self._by_key[key] = e
        if len(self.entries) > self.k:
            self._remove(self.entries[-1])
        return True

    def as_tuples(self) -> list[tuple[frozenset, float, float]]:
        return [(frozenset(e.key), e.gain, e.cost) for e in self.entries]


def update_topk(topk: TopK, poi_set, closed_route, gain: float, cost: float) -> TopK:
    topk.offer(poi_set, closed_route, gain, cost)
    return topk


def estimate_search_space(n: int, p: int) -> int:
    """Upper bound on open routes examined with cost dominance pruning alone."""
    if p > n:
        raise InputError(f"route length p={p} exceeds candidate count n={n}")
    if p < 1:
        raise InputError("p must be >= 1")
    return n + sum(l * (l - 1) * math.comb(n, l) for l in range(2, p + 1))


class _State:
    __slots__ = ("routes", "gain_open", "gain_closed", "complete", "items", "lb")

    def __init__(self, routes, gain_open, gain_closed, complete):
        self.routes = routes
        self.gain_open = gain_open
        self.gain_closed = gain_closed
        self.complete = complete
        self.items = None
        # lower bound on the cheapest closed route covering the set
        self.lb = 0.0


class _Problem:
    """Dense, rank-indexed view of a candidate set shared by all solvers."""

    def __init__(self, cands: CandidateSet, ctx: GainContext | None):
        self.cands = cands
        self.q = cands.query
        self.ctx = ctx if ctx is not None else cands.context()
        self.nodes = cands.nodes
        self.n = n = len(cands.pois)
        self.xi = n
        self.yi = n if cands.x == cands.y else n + 1
        self.D = cands.matrix
        self.s = [cands.stays[v] for v in self.nodes]
        self.b = cands.b
        self.close = cands.close_stay
        self.to_y = [row[self.yi] + self.close for row in self.D]
        self.x, self.y = cands.x, cands.y

    def ids(self, ranks) -> list[int]:
        nodes = self.nodes
        return [nodes[r] for r in ranks]

    def gains(self, ranks) -> tuple[float, float]:
        ids = self.ids(ranks)
        ids.append(self.x)
        g_open = self.ctx.gain(ids)
        ids.append(self.y)
        return g_open, self.ctx.gain(ids)

    def direct(self) -> tuple[float, float]:
        """Gain and cost of the route x -> y."""
        g = self.ctx.gain([self.x, self.y])
        return g, self.s[self.xi] + self.to_y[self.xi]

    def route(self, ranks, cost: float) -> Route:
        return Route(closed_route(self.x, self.y, self.ids(ranks)), cost, open=False)


def _setup(cands, ctx, q):
    if q is not None and q != cands.query:
        raise InputError("query does not match the candidate set")
    return _Problem(cands, ctx)


def pacer(
    cands: CandidateSet,
    ctx: GainContext | None = None,
    q: Query | None = None,
    pruning2: bool = True,
    caps: Caps | None = None,
) -> tuple[TopK, SearchStats]:
    """Exact top-k routes by compact-state growth with cost dominance pruning.

    With ``pruning2`` an open route is kept only if its state's gain plus the
    marginal-gain upper bound reaches the current k-th best gain.
    """
    return _grow(_setup(cands, ctx, q), "p2" if pruning2 else "p1", caps)


def pacer_sc(
    cands: CandidateSet,
    ctx: GainContext | None = None,
    q: Query | None = None,
    caps: Caps | None = None,
) -> tuple[TopK, SearchStats]:
    """State collapsing: one open route (the cheapest) per compact state."""
    return _grow(_setup(cands, ctx, q), "sc", caps)


def _grow(pr: _Problem, mode: str, caps: Caps | None) -> tuple[TopK, SearchStats]:
    t0 = time.perf_counter()
    guard = _Guard(caps)
    stats = SearchStats()
    k = pr.q.k
    topk = TopK(k)
    n, xi, D, s, b, to_y = pr.n, pr.xi, pr.D, pr.s, pr.b, pr.to_y
    limit = b + EPS
    prune2 = mode == "p2"
    collapse = mode == "sc"

    g, c = pr.direct()
    topk.offer((), (0, None), g, c)
    stats.threshold_history.append(topk.threshold())

    if prune2:
        cands = pr.cands
        ctx = pr.ctx
        rc = [cands.relaxed_cost(v) for v in pr.nodes[:n]]
        half_out = [cands.map.min_out_edge(v) / 2 for v in pr.nodes[: n + 1]]
        c_y = cands.relaxed_cost(pr.y)
        x_base = s[xi] + half_out[xi] + c_y
        x_id = pr.x
        rank_of = {v: r for r, v in enumerate(pr.nodes[:n])}

        def state_items(st: _State, members) -> list[tuple[float, float, int]]:
            if st.items is None:
                ids = pr.ids(members)
                ids.append(x_id)
                cols = ctx.lists(ids)
                mset = set(members)
                outside = (pr.nodes[r] for r in range(n) if r not in mset)
                deltas = ctx.deltas(cols, st.gain_open, outside)
                items = [(d, rc[rank_of[v]], rank_of[v]) for v, d in deltas.items() if d > 0]
                items.sort(key=lambda e: (-e[0] / e[1], e[2]))
                st.items = items
            return st.items

    root_routes = {xi: (s[xi], None)}
    states: dict[int, _State] = {}
    # frames: (parent mask, parent members, next rank, exclusive limit)
    stack: list[list] = [[0, (), 0, n]]
    while stack:
        frame = stack[-1]
        pmask, pmembers, i, lim = frame
        if i >= lim:
            stack.pop()
            continue
        frame[2] = i + 1
        guard.check()
        mask = pmask | (1 << i)
        members = (i, *pmembers)
        stats.states_created += 1

        if len(members) > 1:
            pred_states = [states.get(mask ^ (1 << j)) for j in members]
            # a subset that was never stored is infeasible, or was cut by the
            # bound together with all its supersets; either way so is this state
            if None in pred_states:
                continue
        else:
            pred_states = [None]

        lb = 0.0
        if prune2 and len(members) > 1 and not all(ps.complete for ps in pred_states):
            # dropping a POI from a route saves at least its stay
            lb = max(ps.lb + s[j] for j, ps in zip(members, pred_states))
            if lb > limit:
                continue

        routes: dict[int, tuple[float, int | None]] = {}
        exact = True
        any_feasible = False
        examined = 0
        for j, ps in zip(members, pred_states):
            if len(members) > 1:
                if ps is None:
                    continue
                if not ps.complete:
                    exact = False
                preds = ps.routes
            else:
                preds = root_routes
            if not preds:
                continue
            best = INF
            arg = None
            for e, (ce, _) in preds.items():
                v = ce + D[e][j]
                if v < best:
                    best, arg = v, e
            cnt = len(preds)
            examined += cnt
            stats.pruned_by_dominance += cnt - 1
            best += s[j]
            if best + to_y[j] > limit:
                continue
            any_feasible = True
            routes[j] = (best, arg)
        if exact and routes:
            lb = min(c + to_y[j] for j, (c, _) in routes.items())
        if examined:
            stats.examined_open_routes += examined
            if len(members) > stats.max_level:
                stats.max_level = len(members)

        if collapse and len(routes) > 1:
            j_best = min(routes, key=lambda j: (routes[j][0], j))
            stats.pruned_by_dominance += len(routes) - 1
            routes = {j_best: routes[j_best]}

        st = None
        pruned_here = False
        if routes or (prune2 and not exact):
            g_open, g_closed = pr.gains(members)
            st = _State(routes, g_open, g_closed, True)
            st.lb = lb
            thr = topk.threshold()
            if prune2 and routes and thr > -INF:
                floor = thr - EPS - g_open
                d_y = g_closed - g_open
                for j in list(routes):
                    cost = routes[j][0]
                    delta_b = b - cost
                    if d_y >= floor:
                        continue
                    budget = delta_b - half_out[j] - c_y
                    Dj = D[j]
                    reach = [
                        it for it in state_items(st, members)
                        if Dj[it[2]] + s[it[2]] + to_y[it[2]] <= delta_b + EPS
                    ]
                    up = fractional_bound(d_y, reach, budget)
                    if up < floor:
                        del routes[j]
                        stats.pruned_by_bound += 1
                        pruned_here = True

            if routes:
                j_close = min(routes, key=lambda j: (routes[j][0] + to_y[j], j))
                closed_cost = routes[j_close][0] + to_y[j_close]
                if g_closed >= thr or len(topk) < k:
                    if topk.offer(pr.ids(members), (mask, j_close), g_closed, closed_cost):
                        t = topk.threshold()
                        if t != stats.threshold_history[-1]:
                            stats.threshold_history.append(t)
            st.complete = exact and not pruned_here

        # decide whether the subtree below this state can hold anything
        if routes:
            descend = True
        elif not prune2 or (exact and not any_feasible):
            descend = False
        else:
            # routeless but inexact: supersets may still hold useful routes
            relaxed = x_base + sum(rc[r] for r in members)
            if max(relaxed, st.lb) > limit:
                continue
            thr = topk.threshold()
            if thr > -INF:
                items = state_items(st, members)
                bound = st.gain_open + fractional_bound(st.gain_closed - st.gain_open, items, b - relaxed)
                if bound < thr - EPS:
                    # nothing containing this set can reach the top-k; leaving
                    # it out makes every superset skip as well
                    stats.pruned_by_bound += 1
                    continue
            descend = True
        if st is not None:
            states[mask] = st
        if descend and i > 0:
            stack.append([mask, members, 0, i])

    for e in topk.entries:
        mask, end = e.route
        seq = []
        while mask:
            seq.append(end)
            _, pe = states[mask].routes[end]
            mask ^= 1 << end
            end = pe
        seq.reverse()
        e.route = pr.route(seq, e.cost)
    stats.wall_time = time.perf_counter() - t0
    return topk, stats


def brute_force(
    cands: CandidateSet,
    ctx: GainContext | None = None,
    q: Query | None = None,
    force: bool = False,
    caps: Caps | None = None,
) -> tuple[TopK, SearchStats]:
    """Breadth-first enumeration of every feasible open route."""
    pr = _setup(cands, ctx, q)
    if pr.n > BF_LIMIT and not force:
        raise InputError(f"brute force refuses {pr.n} candidates (limit {BF_LIMIT}); pass force=True")
    t0 = time.perf_counter()
    guard = _Guard(caps)
    stats = SearchStats()
    n, xi, D, s, to_y = pr.n, pr.xi, pr.D, pr.s, pr.to_y
    limit = pr.b + EPS

    best: dict[int, tuple[float, tuple[int, ...]]] = {0: (s[xi] + to_y[xi], ())}
    level = [((), 0, xi, s[xi])]
    depth = 0
    while level:
        depth += 1
        before = stats.examined_open_routes
        nxt = []
        for seq, mask, end, cost in level:
            guard.check()
            De = D[end]
            for j in range(n):
                if mask >> j & 1:
                    continue
                stats.examined_open_routes += 1
                c = cost + De[j] + s[j]
                closed = c + to_y[j]
                if closed > limit:
                    continue
                m2 = mask | (1 << j)
                seq2 = seq + (j,)
                nxt.append((seq2, m2, j, c))
                old = best.get(m2)
                if old is None or closed < old[0]:
                    best[m2] = (closed, seq2)
        if stats.examined_open_routes > before:
            stats.max_level = depth
        level = nxt
    stats.states_created = len(best) - 1

    topk = TopK(pr.q.k)
    for mask, (cost, seq) in best.items():
        ranks = sorted(seq)
        _, g = pr.gains(ranks)
        topk.offer(pr.ids(ranks), (cost, seq), g, cost)
    for e in topk.entries:
        e.route = pr.route(e.route[1], e.cost)
    stats.wall_time = time.perf_counter() - t0
    return topk, stats


def greedy(
    cands: CandidateSet,
    ctx: GainContext | None = None,
    q: Query | None = None,
    caps: Caps | None = None,
) -> tuple[Route, SearchStats]:
    """Insert the best marginal-gain/cost POI at its cheapest position until nothing fits."""
    pr = _setup(cands, ctx, q)
    t0 = time.perf_counter()
    guard = _Guard(caps)
    stats = SearchStats()
    n, xi, yi, D, s = pr.n, pr.xi, pr.yi, pr.D, pr.s
    limit = pr.b + EPS
    ctx = pr.ctx

    seq: list[int] = []
    cost = s[xi] + pr.to_y[xi]
    left = set(range(n))
    while left:
        guard.check()
        ids = pr.ids(seq)
        ids.append(pr.x)
        ids.append(pr.y)
        cols = ctx.lists(ids)
        g0 = ctx.gain_of_lists(cols)
        deltas = ctx.deltas(cols, g0, (pr.nodes[r] for r in sorted(left)))
        path = [xi, *seq, yi]
        pick = None
        for r in sorted(left):
            stats.examined_open_routes += 1
            # cheapest insertion slot; positional ties go to the earliest slot
            best_inc, best_pos = INF, -1
            for pos in range(len(path) - 1):
                a, c = path[pos], path[pos + 1]
                inc = D[a][r] + s[r] + D[r][c] - D[a][c]
                if inc < best_inc:
                    best_inc, best_pos = inc, pos
            if cost + best_inc > limit:
                # infeasible now means infeasible forever: routes only grow
                left.discard(r)
                continue
            d = deltas[pr.nodes[r]]
            if d <= 0:
                continue
            ratio = d / (s[r] + D[xi][r] + D[r][yi])
            if pick is None or ratio > pick[0]:
                pick = (ratio, r, best_pos, best_inc)
        if pick is None:
            break
        _, r, pos, inc = pick
        seq.insert(pos, r)
        cost += inc
        left.discard(r)
        stats.states_created += 1
        stats.max_level = len(seq)
    route = pr.route(seq, cost)
    stats.wall_time = time.perf_counter() - t0
    return route, stats


def route_gain(cands: CandidateSet, route: Route, ctx: GainContext | None = None) -> float:
    ctx = ctx if ctx is not None else cands.context()
    return ctx.gain(route.pois)


def solve(cands: CandidateSet, algo: str, caps: Caps | None = None, ctx: GainContext | None = None):
    """Run one named algorithm; returns ``(list of (Route, gain)), SearchStats)``."""
    ctx = ctx if ctx is not None else cands.context()
    if algo == "bf":
        topk, stats = brute_force(cands, ctx, caps=caps)
    elif algo == "pacer1":
        topk, stats = pacer(cands, ctx, pruning2=False, caps=caps)
    elif algo == "pacer2":
        topk, stats = pacer(cands, ctx, pruning2=True, caps=caps)
    elif algo == "pacer-sc":
        topk, stats = pacer_sc(cands, ctx, caps=caps)
    elif algo == "greedy":
        route, stats = greedy(cands, ctx, caps=caps)
        return [(route, route_gain(cands, route, ctx))], stats
    else:
        raise InputError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    return [(e.route, e.gain) for e in topk], stats


def result_to_dict(algo: str, results, stats: SearchStats) -> dict:
    return {
        "routes": [{"pois": list(r.pois), "cost": r.cost, "gain": g} for r, g in results],
        "stats": stats.to_dict(),
        "algorithm": algo,
    }
