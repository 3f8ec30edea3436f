"""Communication graph, neighbour sets and the link conflict graph."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Optional

import numpy as np

Link = tuple[int, int]


def neighbor_sets(positions: np.ndarray, radius: float) -> tuple[frozenset[int], ...]:
    d = positions[:, None, :] - positions[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    within = dist <= radius
    np.fill_diagonal(within, False)
    return tuple(frozenset(np.nonzero(row)[0].tolist()) for row in within)


@dataclass(frozen=True)
class CommGraph:
    positions: np.ndarray
    nb: tuple[frozenset[int], ...]
    links: Mapping[Link, frozenset[int]] = field(default_factory=dict)

    @property
    def nodes(self) -> range:
        return range(len(self.positions))

    def neighbors(self, node: int) -> frozenset[int]:
        return self.nb[node]


def build_comm_graph(positions, availability: Mapping[int, Iterable[int]] | object,
                     tx_range: float) -> CommGraph:
    """Directed links (u, v) with d(u, v) <= tx_range and C_u & C_v non-empty.

    ``availability`` is either a mapping node -> channel ids or an object with
    a ``usable(node)`` method (e.g. :class:`ecrmac.pu.AvailabilityMap`).
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    nb = neighbor_sets(positions, tx_range)
    if hasattr(availability, "usable"):
        chans = [frozenset(availability.usable(u)) for u in range(len(positions))]
    else:
        chans = [frozenset(availability.get(u, ())) for u in range(len(positions))]
    links = {}
    for u in range(len(positions)):
        for v in sorted(nb[u]):
            common = chans[u] & chans[v]
            if common:
                links[(u, v)] = common
    return CommGraph(positions, nb, links)


def links_conflict(l1: Link, l2: Link, nb) -> bool:
    """Whether two links interfere when placed on the same channel.

    ``nb`` is a :class:`CommGraph` or a sequence/mapping of neighbour sets.
    """
    if l1 == l2:
        raise ValueError("a link does not conflict with itself")
    if isinstance(nb, CommGraph):
        nb = nb.nb
    u, v = l1
    x, y = l2
    if {u, v} & {x, y}:
        return True
    return v in nb[x] or u in nb[y]


def two_hop(node: int, graph) -> frozenset[int]:
    nb = graph.nb if isinstance(graph, CommGraph) else graph
    out = set(nb[node])
    for w in nb[node]:
        out |= nb[w]
    out.discard(node)
    return frozenset(out)


@dataclass(frozen=True)
class ConflictGraph:
    vertices: tuple[Link, ...]
    edges: frozenset[frozenset[Link]]

    def adjacency(self) -> dict[Link, list[Link]]:
        adj: dict[Link, list[Link]] = {v: [] for v in self.vertices}
        for e in self.edges:
            a, b = tuple(e)
            adj[a].append(b)
            adj[b].append(a)
        for v in adj:
            adj[v].sort()
        return adj

    def has_edge(self, a: Link, b: Link) -> bool:
        return frozenset((a, b)) in self.edges


def build_conflict_graph(comm: CommGraph, links: Optional[Iterable[Link]] = None) -> ConflictGraph:
    vertices = tuple(sorted(comm.links if links is None else links))
    edges = set()
    for a, b in combinations(vertices, 2):
        if links_conflict(a, b, comm.nb):
            edges.add(frozenset((a, b)))
    return ConflictGraph(vertices, frozenset(edges))


def dump_conflict_graph(graph: ConflictGraph) -> str:
    """Adjacency list text: one ``u->v: x->y, ...`` line per vertex."""
    lines = []
    for v, nbrs in graph.adjacency().items():
        lines.append(f"{v[0]}->{v[1]}: " + ", ".join(f"{a}->{b}" for a, b in nbrs))
    return "\n".join(lines) + ("\n" if lines else "")
