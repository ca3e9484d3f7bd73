"""POI maps, routes and route cost.

All costs are plain floats in abstract cost units. Geometry (lat/lon) is
carried as metadata only; every algorithm works from stay and edge costs.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

from .errors import InputError, UnreachableError

EPS = 1e-9


@dataclass(frozen=True)
class Poi:
    id: int
    stay: float = 0.0
    ratings: Mapping[str, float] = field(default_factory=dict)
    lat: float | None = None
    lon: float | None = None


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    cost: float


@dataclass(frozen=True)
class Route:
    pois: tuple[int, ...]
    cost: float
    open: bool = False


@dataclass(frozen=True)
class PoiMap:
    pois: tuple[Poi, ...]
    edges: tuple[Edge, ...]
    features: tuple[str, ...] = ()
    directed: bool = False
    beta: float = 5.0

    @cached_property
    def by_id(self) -> dict[int, Poi]:
        return {p.id: p for p in self.pois}

    @cached_property
    def ids(self) -> list[int]:
        return sorted(self.by_id)

    @cached_property
    def out_adj(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {p.id: [] for p in self.pois}
        for e in self.edges:
            adj.setdefault(e.src, []).append((e.dst, e.cost))
            if not self.directed:
                adj.setdefault(e.dst, []).append((e.src, e.cost))
        return adj

    @cached_property
    def in_adj(self) -> dict[int, list[tuple[int, float]]]:
        if not self.directed:
            return self.out_adj
        adj: dict[int, list[tuple[int, float]]] = {p.id: [] for p in self.pois}
        for e in self.edges:
            adj.setdefault(e.dst, []).append((e.src, e.cost))
        return adj

    def min_out_edge(self, i: int) -> float:
        nbrs = self.out_adj.get(i)
        if not nbrs:
            raise InputError(f"POI {i} has no outgoing edge")
        return min(c for _, c in nbrs)

    def min_in_edge(self, i: int) -> float:
        nbrs = self.in_adj.get(i)
        if not nbrs:
            raise InputError(f"POI {i} has no incoming edge")
        return min(c for _, c in nbrs)

    def stay(self, i: int) -> float:
        try:
            return self.by_id[i].stay
        except KeyError:
            raise InputError(f"unknown POI id {i}") from None

    def rating(self, i: int, h: str) -> float:
        return self.by_id[i].ratings.get(h, 0.0)


def _components(m: PoiMap) -> int:
    # weak connectivity; strong connectivity is checked separately for directed maps
    und: dict[int, set[int]] = {p.id: set() for p in m.pois}
    for e in m.edges:
        if e.src in und and e.dst in und:
            und[e.src].add(e.dst)
            und[e.dst].add(e.src)
    seen: set[int] = set()
    count = 0
    for start in und:
        if start in seen:
            continue
        count += 1
        seen.add(start)
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in und[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
    return count


def _reach(adj: Mapping[int, list[tuple[int, float]]], start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v, _ in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def validate_map(m: PoiMap) -> list[str]:
    """Return a list of invariant violations; empty means the map is usable."""
    problems: list[str] = []
    seen: set[int] = set()
    for p in m.pois:
        if p.id in seen:
            problems.append(f"duplicate id: {p.id}")
        seen.add(p.id)
        if not (math.isfinite(p.stay) and p.stay >= 0):
            problems.append(f"negative or non-finite stay cost at POI {p.id}")
        for h, r in p.ratings.items():
            if h not in m.features:
                problems.append(f"unknown feature {h!r} at POI {p.id}")
            if not (0.0 <= r <= m.beta):
                problems.append(f"rating out of range at POI {p.id} feature {h!r}: {r}")
    for e in m.edges:
        if e.src not in seen or e.dst not in seen:
            problems.append(f"edge references unknown POI: {e.src}->{e.dst}")
        if e.src == e.dst:
            problems.append(f"self-loop at POI {e.src}")
        if not (math.isfinite(e.cost) and e.cost > 0):
            problems.append(f"nonpositive edge cost on {e.src}->{e.dst}: {e.cost}")
    if m.pois and not any("unknown POI" in s for s in problems):
        if _components(m) > 1:
            problems.append("disconnected")
        elif m.directed and len(m.pois) > 1:
            root = m.pois[0].id
            if len(_reach(m.out_adj, root)) < len(m.pois) or len(_reach(m.in_adj, root)) < len(m.pois):
                problems.append("disconnected (not strongly connected)")
    return problems


def route_cost(
    m: PoiMap,
    route: Sequence[int] | Route,
    dist: Callable[[int, int], float],
    stays: Mapping[int, float] | None = None,
) -> float:
    """Stay cost of every distinct POI on the route plus least travel cost of each leg.

    ``stays`` overrides map stay costs (used when endpoint stays are ignored).
    """
    pois = route.pois if isinstance(route, Route) else tuple(route)
    total = 0.0
    for i in dict.fromkeys(pois):
        if i not in m.by_id:
            raise InputError(f"unknown POI id {i}")
        total += stays[i] if stays is not None and i in stays else m.by_id[i].stay
    for a, b in zip(pois, pois[1:]):
        t = dist(a, b)
        if not math.isfinite(t):
            raise UnreachableError(f"no path {a} -> {b}")
        total += t
    return total


def map_from_dict(data: Mapping) -> PoiMap:
    try:
        pois = tuple(
            Poi(
                id=int(p["id"]),
                stay=float(p.get("stay", 0.0)),
                ratings={str(h): float(r) for h, r in p.get("ratings", {}).items()},
                lat=p.get("lat"),
                lon=p.get("lon"),
            )
            for p in data["pois"]
        )
        edges = tuple(Edge(int(e["from"]), int(e["to"]), float(e["cost"])) for e in data.get("edges", []))
        return PoiMap(
            pois=pois,
            edges=edges,
            features=tuple(str(h) for h in data.get("features", [])),
            directed=bool(data.get("directed", False)),
            beta=float(data.get("beta", 5.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed map: {exc}") from exc


def map_to_dict(m: PoiMap) -> dict:
    pois = []
    for p in m.pois:
        d: dict = {"id": p.id}
        if p.lat is not None:
            d["lat"] = p.lat
        if p.lon is not None:
            d["lon"] = p.lon
        d["stay"] = p.stay
        d["ratings"] = dict(p.ratings)
        pois.append(d)
    return {
        "directed": m.directed,
        "beta": m.beta,
        "features": list(m.features),
        "pois": pois,
        "edges": [{"from": e.src, "to": e.dst, "cost": e.cost} for e in m.edges],
    }


def load_map(path) -> PoiMap:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: {exc}") from exc
    return map_from_dict(data)


def save_map(m: PoiMap, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(map_to_dict(m), fh, indent=1, sort_keys=False)
        fh.write("\n")


def closed_route(x: int, y: int, middle: Iterable[int]) -> tuple[int, ...]:
    """POI sequence of a closed route; ``x == y`` with no stops collapses to ``(x,)``."""
    mid = tuple(middle)
    if x == y and not mid:
        return (x,)
    return (x, *mid, y)
