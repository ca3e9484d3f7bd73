"""Offline indices: the inverted feature index and the 2-hop label index.

The label index is built with pruned landmark labeling: one pruned Dijkstra
per vertex, vertices processed in descending degree order (ties by id).
Tie-breaking among equal-cost paths does not matter since only costs are
stored.
"""

from __future__ import annotations

import heapq
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Mapping

from .errors import InputError, UnreachableError
from .model import PoiMap

MAGIC = b"PCRIDX1\n"
INF = math.inf


@dataclass
class FeatureIndex:
    lists: dict[str, list[tuple[int, float]]]

    def __getitem__(self, h: str) -> list[tuple[int, float]]:
        return self.lists.get(h, [])

    def to_dict(self) -> dict:
        return {h: [[i, r] for i, r in lst] for h, lst in self.lists.items()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "FeatureIndex":
        return cls({h: [(int(i), float(r)) for i, r in lst] for h, lst in data.items()})


def build_feature_index(m: PoiMap) -> FeatureIndex:
    lists: dict[str, list[tuple[int, float]]] = {h: [] for h in m.features}
    for p in m.pois:
        for h, r in p.ratings.items():
            if r > 0:
                lists.setdefault(h, []).append((p.id, r))
    for lst in lists.values():
        lst.sort(key=lambda e: (-e[1], e[0]))
    return FeatureIndex(lists)


@dataclass
class HopIndex:
    directed: bool
    order: list[int]
    out_labels: dict[int, dict[int, float]]
    in_labels: dict[int, dict[int, float]]
    label_visits: int = field(default=0, compare=False)

    def labels(self, i: int, side: str = "out") -> list[tuple[int, float]]:
        """Label list of ``i`` sorted ascending by cost (ties by pivot)."""
        src = self.out_labels if side == "out" else self.in_labels
        return sorted(src[i].items(), key=lambda e: (e[1], e[0]))

    def cost(self, i: int, j: int) -> float:
        return least_travel_cost(self, i, j)

    __call__ = cost

    @property
    def size(self) -> int:
        n = sum(len(v) for v in self.out_labels.values())
        if self.directed:
            n += sum(len(v) for v in self.in_labels.values())
        return n


def _merge(a: Mapping[int, float], b: Mapping[int, float], hi: HopIndex | None = None) -> float:
    if len(a) > len(b):
        a, b = b, a
    best = INF
    get = b.get
    for u, d1 in a.items():
        d2 = get(u)
        if d2 is not None and d1 + d2 < best:
            best = d1 + d2
    if hi is not None:
        hi.label_visits += len(a)
    return best


def least_travel_cost(hi: HopIndex, i: int, j: int) -> float:
    if i == j:
        return 0.0
    try:
        a, b = hi.out_labels[i], hi.in_labels[j]
    except KeyError as exc:
        raise InputError(f"POI {exc.args[0]} is not indexed") from None
    best = _merge(a, b, hi)
    if best == INF:
        raise UnreachableError(f"no common pivot for {i} -> {j}")
    return best


def vertex_order(m: PoiMap) -> list[int]:
    deg = {p.id: 0 for p in m.pois}
    for e in m.edges:
        deg[e.src] += 1
        deg[e.dst] += 1
    return sorted(deg, key=lambda v: (-deg[v], v))


def _pruned_dijkstra(root, adj, root_labels, target_labels, store) -> None:
    # root_labels: labels of root on the side facing the search direction;
    # target_labels: the opposite-side labels of reached vertices; store receives new labels.
    tmp = dict(root_labels)
    dist = {root: 0.0}
    heap = [(0.0, root)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        q = INF
        for p, d2 in target_labels[u].items():
            d1 = tmp.get(p)
            if d1 is not None and d1 + d2 < q:
                q = d1 + d2
        if q <= d:
            continue
        store[u][root] = d
        for v, c in adj[u]:
            nd = d + c
            if nd < dist.get(v, INF):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))


def build_hop_index(m: PoiMap, order: list[int] | None = None) -> HopIndex:
    order = vertex_order(m) if order is None else list(order)
    out_labels: dict[int, dict[int, float]] = {v: {} for v in m.by_id}
    if not m.directed:
        for v in order:
            _pruned_dijkstra(v, m.out_adj, out_labels[v], out_labels, out_labels)
        return HopIndex(False, order, out_labels, out_labels)
    in_labels: dict[int, dict[int, float]] = {v: {} for v in m.by_id}
    for v in order:
        # forward: d(v, u) lands in in-labels of u
        _pruned_dijkstra(v, m.out_adj, out_labels[v], in_labels, in_labels)
        # backward: d(u, v) lands in out-labels of u
        _pruned_dijkstra(v, m.in_adj, in_labels[v], out_labels, out_labels)
    return HopIndex(True, order, out_labels, in_labels)


def dijkstra_all(m: PoiMap, source: int, reverse: bool = False) -> dict[int, float]:
    """Least travel cost from ``source`` to every reachable POI (to ``source`` if reverse)."""
    if source not in m.by_id:
        raise InputError(f"unknown POI id {source}")
    adj = m.in_adj if reverse else m.out_adj
    dist = {source: 0.0}
    heap = [(0.0, source)]
    done: set[int] = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, c in adj[u]:
            nd = d + c
            if nd < dist.get(v, INF):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def dijkstra_cost(m: PoiMap, i: int, j: int) -> float:
    if j not in m.by_id:
        raise InputError(f"unknown POI id {j}")
    d = dijkstra_all(m, i).get(j)
    if d is None:
        raise UnreachableError(f"no path {i} -> {j}")
    return d


def save_hop_index(hi: HopIndex, path) -> None:
    ids = sorted(hi.out_labels)
    sides = [hi.out_labels] + ([hi.in_labels] if hi.directed else [])
    header = {
        "poi_count": len(ids),
        "directed": hi.directed,
        "order": hi.order,
        "ids": ids,
        "counts": [[len(side[i]) for i in ids] for side in sides],
    }
    hdr = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(hdr)))
        fh.write(hdr)
        for side in sides:
            for i in ids:
                for pivot, d in sorted(side[i].items(), key=lambda e: (e[1], e[0])):
                    if not 0 <= pivot < 2**32:
                        raise InputError(f"pivot id {pivot} does not fit in uint32")
                    fh.write(struct.pack("<Id", pivot, d))


def load_hop_index(path) -> HopIndex:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise InputError(f"{path}: not a hop index file")
    pos = len(MAGIC)
    (hlen,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    header = json.loads(blob[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    ids = header["ids"]
    sides: list[dict[int, dict[int, float]]] = []
    rec = struct.Struct("<Id")
    for counts in header["counts"]:
        side: dict[int, dict[int, float]] = {}
        for i, cnt in zip(ids, counts):
            labels = {}
            for _ in range(cnt):
                pivot, d = rec.unpack_from(blob, pos)
                pos += rec.size
                labels[pivot] = d
            side[i] = labels
        sides.append(side)
    directed = bool(header["directed"])
    return HopIndex(directed, header["order"], sides[0], sides[1] if directed else sides[0])
