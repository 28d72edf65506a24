"""Directed weighted graph over knowledge items.

Edge weight from x to y is the share of y's files that x also holds,
``|F_x & F_y| / |F_y|``. Only weights at or above the threshold ``t_e``
(and strictly positive) are stored, so the graph stays sparse.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

from .core import InvalidArgument, Item

DEFAULT_T_E = 0.1


def edge_weights(vx: Item, vy: Item) -> tuple[float, float]:
    """Return ``(e_xy, e_yx)`` for two items."""
    if not vx.files or not vy.files:
        raise InvalidArgument("edge weights need nonempty file sets")
    common = len(vx.file_set & vy.file_set)
    return common / vy.k, common / vx.k


class Order(Enum):
    X_ABOVE_Y = "x_above_y"
    Y_ABOVE_X = "y_above_x"
    INCOMPARABLE = "incomparable"


@dataclass
class KnsGraph:
    t_e: float = DEFAULT_T_E
    nodes: set[int] = field(default_factory=set)
    edges: dict[tuple[int, int], float] = field(default_factory=dict)
    _out: dict[int, dict[int, float]] = field(default_factory=lambda: defaultdict(dict), repr=False)
    _in: dict[int, dict[int, float]] = field(default_factory=lambda: defaultdict(dict), repr=False)
    _file_index: dict[int, set[int]] = field(default_factory=lambda: defaultdict(set), repr=False)
    _indexed: dict[int, set[int]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.t_e <= 1.0:
            raise InvalidArgument(f"t_e must lie in [0, 1], got {self.t_e}")

    def keeps(self, w: float) -> bool:
        return w > 0.0 and w >= self.t_e

    def add_node(self, item: Item) -> None:
        self.nodes.add(item.item_id)
        self._index(item)

    def _index(self, item: Item) -> None:
        old = self._indexed.get(item.item_id, set())
        new = item.file_set
        for f in old - new:
            self._file_index[f].discard(item.item_id)
        for f in new - old:
            self._file_index[f].add(item.item_id)
        self._indexed[item.item_id] = set(new)

    def _set(self, x: int, y: int, w: float) -> bool:
        """Store or drop one directed edge; return True if anything changed."""
        if self.keeps(w):
            if self.edges.get((x, y)) == w:
                return False
            self.edges[(x, y)] = w
            self._out[x][y] = w
            self._in[y][x] = w
            return True
        if (x, y) in self.edges:
            del self.edges[(x, y)]
            del self._out[x][y]
            del self._in[y][x]
            return True
        return False

    def out_edges(self, x: int) -> dict[int, float]:
        return dict(self._out.get(x, {}))

    def weight(self, x: int, y: int) -> float:
        return self.edges.get((x, y), 0.0)

    def overlaps(self, item: Item) -> dict[int, int]:
        """Shared-file counts between ``item`` and every other indexed item."""
        counts: dict[int, int] = defaultdict(int)
        for f in item.file_set:
            for other in self._file_index.get(f, ()):
                if other != item.item_id:
                    counts[other] += 1
        return counts

    def _check(self, *ids: int) -> None:
        for i in ids:
            if i not in self.nodes:
                raise InvalidArgument(f"unknown item {i}")


def refresh_edges(graph: KnsGraph, changed_item: int, items: Mapping[int, Item]) -> int:
    """Recompute every edge touching ``changed_item``; return the number of stored-edge changes."""
    graph._check(changed_item)
    vx = items[changed_item]
    graph._index(vx)
    counts = graph.overlaps(vx)
    stale = set(graph._out.get(changed_item, ())) | set(graph._in.get(changed_item, ()))
    updates = 0
    for y, common in counts.items():
        vy = items[y]
        updates += graph._set(changed_item, y, common / vy.k)
        updates += graph._set(y, changed_item, common / vx.k)
        stale.discard(y)
    for y in stale:
        updates += graph._set(changed_item, y, 0.0)
        updates += graph._set(y, changed_item, 0.0)
    return updates


def rebuild(items: Mapping[int, Item], t_e: float = DEFAULT_T_E) -> KnsGraph:
    """From-scratch graph over all item pairs by direct set intersection."""
    g = KnsGraph(t_e=t_e)
    ids = sorted(items)
    for i in ids:
        g.add_node(items[i])
    for a, x in enumerate(ids):
        for y in ids[a + 1:]:
            exy, eyx = edge_weights(items[x], items[y])
            g._set(x, y, exy)
            g._set(y, x, eyx)
    return g


def similarity(graph: KnsGraph, items: Mapping[int, Item], x: int, y: int) -> float:
    """Mean of the two directed weights, from unthresholded file overlap."""
    graph._check(x, y)
    exy, eyx = edge_weights(items[x], items[y])
    return 0.5 * (exy + eyx)


def hierarchy_order(graph: KnsGraph, items: Mapping[int, Item], x: int, y: int) -> Order:
    graph._check(x, y)
    vx, vy = items[x], items[y]
    common = len(vx.file_set & vy.file_set)
    if common == 0:
        return Order.INCOMPARABLE
    # e_xy > e_yx  <=>  common/|F_y| > common/|F_x|  <=>  |F_x| > |F_y|
    if vx.k > vy.k:
        return Order.X_ABOVE_Y
    if vy.k > vx.k:
        return Order.Y_ABOVE_X
    return Order.INCOMPARABLE


@dataclass
class Merge:
    left: frozenset[int]
    right: frozenset[int]
    similarity: float

    @property
    def members(self) -> frozenset[int]:
        return self.left | self.right


@dataclass
class HierarchyReport:
    item_ids: list[int]
    similarity: np.ndarray
    dominance: list[tuple[int, int]]
    merges: list[Merge]

    @property
    def root(self) -> frozenset[int]:
        if self.merges:
            return self.merges[-1].members
        return frozenset(self.item_ids)

    def clusters_at(self, n_clusters: int) -> list[frozenset[int]]:
        """Cut the dendrogram so that ``n_clusters`` groups remain."""
        groups = {frozenset([i]) for i in self.item_ids}
        for mg in self.merges:
            if len(groups) <= n_clusters:
                break
            groups -= {mg.left, mg.right}
            groups.add(mg.members)
        return sorted(groups, key=min)


def similarity_matrix(items: Mapping[int, Item], ids: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(S, E)`` where ``E[i, j] = e_ij`` and ``S = (E + E.T) / 2``."""
    files = sorted({f for i in ids for f in items[i].file_set})
    col = {f: c for c, f in enumerate(files)}
    inc = np.zeros((len(ids), len(files)), dtype=np.int64)
    for r, i in enumerate(ids):
        inc[r, [col[f] for f in items[i].file_set]] = 1
    common = inc @ inc.T
    sizes = inc.sum(axis=1)
    e = common / sizes[np.newaxis, :]
    return 0.5 * (e + e.T), e


def mine_hierarchy(graph: KnsGraph, items: Mapping[int, Item]) -> HierarchyReport:
    """Average-linkage agglomeration over pairwise item similarity.

    The most similar pair of clusters merges first; ties go to the pair whose
    smallest item ids are lexicographically smallest.
    """
    ids = sorted(graph.nodes)
    if not ids:
        return HierarchyReport([], np.zeros((0, 0)), [], [])
    s, e = similarity_matrix(items, ids)
    dominance = [
        (ids[a], ids[b])
        for a, b in zip(*np.nonzero((e > e.T) & (e > 0)))
    ]

    n = len(ids)
    link = s.astype(float).copy()
    np.fill_diagonal(link, -np.inf)
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)
    members = [frozenset([i]) for i in ids]
    merges = []
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    for _ in range(n - 1):
        mask = upper & active[:, None] & active[None, :]
        cand = np.where(mask, link, -np.inf)
        flat = int(np.argmax(cand))
        a, b = divmod(flat, n)
        merges.append(Merge(members[a], members[b], float(link[a, b])))
        # cluster a absorbs b; a keeps the smaller min id since a < b
        new = (sizes[a] * link[a] + sizes[b] * link[b]) / (sizes[a] + sizes[b])
        link[a, :] = new
        link[:, a] = new
        link[a, a] = -np.inf
        sizes[a] += sizes[b]
        active[b] = False
        members[a] = members[a] | members[b]
    return HierarchyReport(ids, s, dominance, merges)


def export_edge_list(graph: KnsGraph) -> str:
    rows = [f"{x}\t{y}\t{w:.6f}" for (x, y), w in sorted(graph.edges.items())]
    return "".join(r + "\n" for r in rows)


def export_dot(graph: KnsGraph, items: Mapping[int, Item]) -> str:
    lines = ["digraph kns {"]
    for i in sorted(graph.nodes):
        v = items[i]
        lines.append(f'  {i} [label="item:{i}(k={v.k},n={v.n})"];')
    for (x, y), w in sorted(graph.edges.items()):
        lines.append(f'  {x} -> {y} [weight={w:.6f}, label="{w:.6f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
