"""Feature aggregation, route gain and the marginal-gain upper bound.

Every aggregation here is nonnegative, monotone and submodular, which is all
the exact search relies on. Gains are always evaluated from ratings sorted in
descending order so the same POI set yields bit-identical floats no matter
which path produced it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import InputError
from .model import PoiMap

KINDS = ("power_law", "log", "coverage")


@dataclass(frozen=True)
class AggregationSpec:
    kind: str = "power_law"
    alpha: float = 0.0
    # coverage divides ratings by this (the map's beta) to land in [0, 1]
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown aggregation {self.kind!r}; expected one of {KINDS}")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise InputError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not self.scale > 0:
            raise InputError("aggregation scale must be positive")

    def to_dict(self) -> dict:
        return {"type": self.kind, "alpha": self.alpha}


def _phi_desc(spec: AggregationSpec, desc: Sequence[float], rank_w: Sequence[float] | None = None) -> float:
    if not desc:
        return 0.0
    if spec.kind == "power_law":
        if spec.alpha == 0:
            return math.fsum(desc)
        if rank_w is None or len(rank_w) < len(desc):
            rank_w = [(r + 1) ** -spec.alpha for r in range(len(desc))]
        return math.fsum(v * w for v, w in zip(desc, rank_w))
    if spec.kind == "log":
        return math.log1p(math.fsum(desc))
    prod = 1.0
    for v in desc:
        prod *= 1.0 - v / spec.scale
    return 1.0 - prod


def phi(spec: AggregationSpec, ratings: Iterable[float]) -> float:
    """Aggregate one feature's ratings; the largest rating ranks first."""
    return _phi_desc(spec, sorted(ratings, reverse=True))


class GainContext:
    """Query-bound gain evaluator over candidate POIs and the two endpoints.

    ``rows`` maps each POI to its filtered ratings, one entry per weighted
    feature (same order as ``weights``).
    """

    def __init__(self, rows: Mapping[int, Sequence[float]], weights: Sequence[float], spec: AggregationSpec):
        self.rows = {i: tuple(r) for i, r in rows.items()}
        self.weights = tuple(weights)
        self.spec = spec
        self._rank_w = [(r + 1) ** -spec.alpha for r in range(64)] if spec.kind == "power_law" else None
        for i, r in self.rows.items():
            if len(r) != len(self.weights):
                raise InputError(f"rating row of POI {i} has wrong width")

    def _rank_weights(self, n: int):
        if self._rank_w is not None and len(self._rank_w) < n:
            a = self.spec.alpha
            self._rank_w = [(r + 1) ** -a for r in range(2 * n)]
        return self._rank_w

    def lists(self, pois: Iterable[int]) -> list[list[float]]:
        """Per-feature rating lists of ``pois``, each sorted descending, zeros dropped."""
        cols: list[list[float]] = [[] for _ in self.weights]
        for i in pois:
            for h, v in enumerate(self.rows[i]):
                if v > 0:
                    cols[h].append(v)
        for c in cols:
            c.sort(reverse=True)
        return cols

    def gain_of_lists(self, cols: Sequence[Sequence[float]]) -> float:
        rw = self._rank_weights(max((len(c) for c in cols), default=0))
        return math.fsum(w * _phi_desc(self.spec, c, rw) for w, c in zip(self.weights, cols))

    def gain(self, pois: Iterable[int]) -> float:
        return self.gain_of_lists(self.lists(dict.fromkeys(pois)))

    def marginal_gain(self, base: Iterable[int], addition: Iterable[int]) -> float:
        base, addition = set(base), set(addition)
        if base & addition:
            raise InputError(f"base and addition overlap: {sorted(base & addition)}")
        if not addition:
            return 0.0
        return self.gain(base | addition) - self.gain(base)

    def deltas(self, cols: Sequence[Sequence[float]], base_gain: float, items: Iterable[int]) -> dict[int, float]:
        """Singleton marginal gains of ``items`` against the set whose lists are ``cols``."""
        out = {}
        rw = self._rank_weights(max((len(c) for c in cols), default=0) + 1)
        spec, weights = self.spec, self.weights
        base_parts = [w * _phi_desc(spec, c, rw) for w, c in zip(weights, cols)]
        for i in items:
            parts = None
            for h, v in enumerate(self.rows[i]):
                if v > 0:
                    if parts is None:
                        parts = list(base_parts)
                    parts[h] = weights[h] * _phi_desc(spec, sorted((*cols[h], v), reverse=True), rw)
            if parts is None:
                out[i] = 0.0
                continue
            d = math.fsum(parts) - base_gain
            out[i] = d if d > 0 else 0.0
        return out


def relaxed_poi_cost(m: PoiMap, i: int, role: str = "visit", stay: float | None = None) -> float:
    """Lower bound on what visiting ``i`` adds to any route.

    Half the cheapest in-edge plus half the cheapest out-edge plus the stay;
    the destination has no outgoing leg so only the in-edge half counts.
    """
    s = m.stay(i) if stay is None else stay
    half_in = m.min_in_edge(i) / 2
    if role == "destination":
        return s + half_in
    return s + half_in + m.min_out_edge(i) / 2


def fractional_bound(forced: float, items: Sequence[tuple[float, float, int]], budget: float) -> float:
    """Greedy fractional knapsack over ``(delta, cost, id)`` items, ``forced`` always included.

    ``items`` must already be in descending ratio order.
    """
    if budget < 0:
        return forced
    total = forced
    left = budget
    for d, c, _ in items:
        if d <= 0:
            continue
        if c <= left:
            total += d
            left -= c
        else:
            total += d * (left / c)
            break
    return total


def ratio_order(deltas: Mapping[int, float], costs: Mapping[int, float]) -> list[tuple[float, float, int]]:
    out = []
    for i, d in deltas.items():
        c = costs[i]
        assert c > 0, f"relaxed cost of POI {i} must be positive"
        out.append((d, c, i))
    out.sort(key=lambda e: (-e[0] / e[1], e[2]))
    return out


def upper_bound_marginal(
    ctx: GainContext,
    state: Iterable[int],
    reachable: Mapping[int, float],
    budget: float,
    y: int,
    y_cost: float,
) -> float:
    """Admissible bound on the marginal gain of any feasible completion to ``y``.

    ``reachable`` maps each extension candidate to its relaxed cost. The
    destination is forced in: its marginal gain is added outright and its
    relaxed cost taken off the budget before the ratio sweep. Per-item gains
    are measured against ``state`` alone, which over-estimates them once y is
    in (submodularity), so the bound stays admissible.
    """
    state = set(state)
    cols = ctx.lists(state)
    g0 = ctx.gain_of_lists(cols)
    d_y = 0.0 if y in state else max(ctx.gain(state | {y}) - g0, 0.0)
    deltas = ctx.deltas(cols, g0, (i for i in reachable if i not in state and i != y))
    return fractional_bound(d_y, ratio_order(deltas, reachable), budget - y_cost)
