"""Two-metric graphs, solution ledgers, and the basic cost/path machinery.

Every edge carries a fixed buying cost ``c`` (paid once if the edge is used
by any path) and a per-unit length ``l`` (paid by every path traversing it).
Undirected inputs are eagerly expanded into anti-parallel arc pairs that
share one purchase: buying either arc makes both usable.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

COST_TOL = 1e-9


class GraphError(ValueError):
    """Invalid graph input or a ledger integrity violation."""


class Unreachable(Exception):
    """No path exists between the requested endpoints."""


@dataclass(frozen=True)
class CableType:
    """One installable cable: fixed cost ``sigma`` plus ``delta`` per unit of load."""

    sigma: float
    delta: float

    def __post_init__(self):
        if self.sigma < 0 or self.delta < 0:
            raise GraphError(f"cable type must be nonnegative, got {self}")


@dataclass(frozen=True)
class TerminalPair:
    """An online request: route one unit from ``s`` to ``t``.

    ``penalty`` is only present in prize-collecting mode and allows the
    request to be discarded for that price. Demands other than 1 are
    rejected up front.
    """

    index: int
    s: int
    t: int
    demand: int = 1
    penalty: Optional[float] = None

    def __post_init__(self):
        if self.demand != 1:
            raise GraphError(f"pair {self.index}: only unit demands are supported")
        if self.penalty is not None and self.penalty < 0:
            raise GraphError(f"pair {self.index}: negative penalty {self.penalty}")


class TwoMetricGraph:
    """Directed multigraph with buy cost ``c`` and length ``l`` per arc.

    Arc ids are dense integers assigned in insertion order; all downstream
    state is keyed by arc id so parallel arcs are first-class. Instances are
    immutable once ``freeze`` has been called (construction helpers call it).
    """

    def __init__(self, n: int, directed: bool = True):
        if n < 0:
            raise GraphError("vertex count must be nonnegative")
        self.n = n
        self.directed = directed
        self.tail: List[int] = []
        self.head: List[int] = []
        self.c: List[float] = []
        self.l: List[float] = []
        # twin[e] = anti-parallel partner sharing the purchase, or -1
        self.twin: List[int] = []
        # provenance of each arc (original edge id, cable index, ...) if any
        self.source: List[Optional[tuple]] = []
        self.out_arcs: List[List[int]] = [[] for _ in range(n)]
        self.in_arcs: List[List[int]] = [[] for _ in range(n)]
        self._frozen = False

    @property
    def m(self) -> int:
        return len(self.tail)

    def add_arc(self, tail: int, head: int, c: float, l: float,
                source: Optional[tuple] = None) -> int:
        if self._frozen:
            raise GraphError("graph is frozen")
        if not (0 <= tail < self.n and 0 <= head < self.n):
            raise GraphError(f"arc ({tail},{head}) out of range for n={self.n}")
        if c < 0 or l < 0:
            raise GraphError(f"arc ({tail},{head}) has negative cost or length")
        e = len(self.tail)
        self.tail.append(tail)
        self.head.append(head)
        self.c.append(float(c))
        self.l.append(float(l))
        self.twin.append(-1)
        self.source.append(source)
        self.out_arcs[tail].append(e)
        self.in_arcs[head].append(e)
        return e

    def add_edge(self, u: int, v: int, c: float, l: float,
                 source: Optional[tuple] = None) -> Tuple[int, ...]:
        """Add an edge, expanding to a twin arc pair when the graph is undirected."""
        e = self.add_arc(u, v, c, l, source)
        if self.directed:
            return (e,)
        f = self.add_arc(v, u, c, l, source)
        self.twin[e] = f
        self.twin[f] = e
        return (e, f)

    def freeze(self) -> "TwoMetricGraph":
        self._frozen = True
        return self

    def purchase_key(self, e: int) -> int:
        """Canonical id of the purchase an arc belongs to (twins share one)."""
        t = self.twin[e]
        return e if t < 0 else min(e, t)

    def reversed_view(self) -> "TwoMetricGraph":
        """New graph with every arc flipped; arc ids are preserved."""
        rev = TwoMetricGraph(self.n, directed=True)
        for e in range(self.m):
            rev.add_arc(self.head[e], self.tail[e], self.c[e], self.l[e],
                        self.source[e])
        rev.twin = list(self.twin)
        return rev.freeze()

    def unfrozen_copy(self, extra_vertices: int = 0) -> "TwoMetricGraph":
        """Mutable copy, optionally with extra vertices appended."""
        g = TwoMetricGraph(self.n + extra_vertices, directed=self.directed)
        for e in range(self.m):
            g.add_arc(self.tail[e], self.head[e], self.c[e], self.l[e],
                      self.source[e])
        g.twin = list(self.twin)
        return g

    def describe_arc(self, e: int) -> str:
        return (f"arc {e}: {self.tail[e]}->{self.head[e]} "
                f"c={self.c[e]} l={self.l[e]}")


@dataclass
class SolutionLedger:
    """Bought purchases plus committed per-pair paths with exact accounting.

    ``bought`` stores purchase keys (see ``TwoMetricGraph.purchase_key``), so
    an undirected edge used in both directions is paid for once. Totals are
    maintained incrementally and can always be recomputed via
    ``solution_cost``.
    """

    bought: Set[int] = field(default_factory=set)
    paths: Dict[int, Tuple[int, ...]] = field(default_factory=dict)
    buy_cost: float = 0.0
    length_cost: float = 0.0

    @property
    def total(self) -> float:
        return self.buy_cost + self.length_cost

    def buy(self, graph: TwoMetricGraph, e: int) -> None:
        key = graph.purchase_key(e)
        if key not in self.bought:
            self.bought.add(key)
            self.buy_cost += graph.c[key]

    def add_path(self, graph: TwoMetricGraph, pair_index: int,
                 edges: Sequence[int]) -> None:
        if pair_index in self.paths:
            raise GraphError(f"pair {pair_index} already has a committed path")
        for e in edges:
            self.buy(graph, e)
            self.length_cost += graph.l[e]
        self.paths[pair_index] = tuple(edges)


def expand_cables(n: int, edges: Sequence[Tuple[int, int, Sequence[CableType]]],
                  directed: bool = True) -> TwoMetricGraph:
    """Translate per-edge cable menus into parallel two-metric edges.

    Each cable type ``(sigma, delta)`` on an edge becomes its own parallel
    copy with ``c = sigma`` and ``l = delta``; routing then picks the best
    copy per load, which reproduces the piecewise-affine cost
    ``min_cables(sigma + load * delta)`` exactly. Arc provenance records the
    original edge index and cable index.
    """
    g = TwoMetricGraph(n, directed=directed)
    for idx, (u, v, cables) in enumerate(edges):
        if not cables:
            raise GraphError(f"edge {idx} ({u},{v}) has an empty cable list")
        for j, cab in enumerate(cables):
            g.add_edge(u, v, cab.sigma, cab.delta, source=(idx, j))
    return g.freeze()


def split_node_weights(n: int, node_c: Sequence[float], node_l: Sequence[float],
                       edges: Sequence[Tuple[int, int]],
                       directed: bool = False) -> Tuple[TwoMetricGraph, Dict[str, List[int]]]:
    """Convert a node-weighted graph into an edge-weighted directed one.

    Vertex ``v`` becomes an internal arc ``v_in -> v_out`` carrying the node
    weights; original edges become zero-cost connector arcs between the
    corresponding ``out``/``in`` endpoints (both directions if undirected).
    Returns the split graph plus the terminal mapping: a source terminal
    lives on ``v_out`` and a sink terminal on ``v_in``.
    """
    if len(node_c) != n or len(node_l) != n:
        raise GraphError("node weight arrays must have length n")
    for v in range(n):
        if node_c[v] < 0 or node_l[v] < 0:
            raise GraphError(f"vertex {v} has a negative weight")
    g = TwoMetricGraph(2 * n, directed=True)
    v_in = [2 * v for v in range(n)]
    v_out = [2 * v + 1 for v in range(n)]
    for v in range(n):
        g.add_arc(v_in[v], v_out[v], node_c[v], node_l[v], source=("node", v))
    for idx, (u, v) in enumerate(edges):
        g.add_arc(v_out[u], v_in[v], 0.0, 0.0, source=("edge", idx))
        if not directed:
            g.add_arc(v_out[v], v_in[u], 0.0, 0.0, source=("edge", idx))
    mapping = {"source_vertex": v_out, "sink_vertex": v_in}
    return g.freeze(), mapping


def solution_cost(graph: TwoMetricGraph,
                  ledger: SolutionLedger) -> Tuple[float, float, float]:
    """Recompute (buy, length, total) from scratch and verify ledger integrity.

    An edge bought once but used by many paths contributes ``c`` once and
    ``l`` per traversal. Raises ``GraphError`` if a path references an arc
    whose purchase is missing or if a path is not a contiguous walk.
    """
    buy = 0.0
    for key in ledger.bought:
        if not (0 <= key < graph.m):
            raise GraphError(f"bought purchase key {key} outside graph")
        buy += graph.c[key]
    length = 0.0
    for pair_index, path in ledger.paths.items():
        prev_head = None
        for e in path:
            if not (0 <= e < graph.m):
                raise GraphError(f"pair {pair_index}: path arc {e} outside graph")
            if graph.purchase_key(e) not in ledger.bought:
                raise GraphError(
                    f"pair {pair_index}: path uses un-bought {graph.describe_arc(e)}")
            if prev_head is not None and graph.tail[e] != prev_head:
                raise GraphError(f"pair {pair_index}: path is not a contiguous walk")
            prev_head = graph.head[e]
            length += graph.l[e]
    return buy, length, buy + length


def shortest_path(graph: TwoMetricGraph, weight: Callable[[int], float],
                  start: int, goal: int,
                  allowed: Optional[Callable[[int], bool]] = None) -> Tuple[Tuple[int, ...], float]:
    """Minimum-weight path from ``start`` to ``goal`` under per-arc weights.

    Ties are broken deterministically by the smallest lexicographic arc-id
    sequence (among simple paths). Weights must be nonnegative. ``allowed``
    optionally filters usable arcs. Raises ``Unreachable`` when no path
    exists; ``start == goal`` yields the empty path at weight 0.
    """
    if not (0 <= start < graph.n and 0 <= goal < graph.n):
        raise GraphError("endpoints outside graph")
    if start == goal:
        return (), 0.0
    # heap entries carry the full arc-id tuple so equal-weight paths settle
    # in lexicographic order; graphs here are small enough for this to be cheap
    heap: List[Tuple[float, Tuple[int, ...], int]] = [(0.0, (), start)]
    settled: Set[int] = set()
    while heap:
        dist, path, v = heapq.heappop(heap)
        if v in settled:
            continue
        if v == goal:
            return path, dist
        settled.add(v)
        for e in graph.out_arcs[v]:
            if allowed is not None and not allowed(e):
                continue
            w = weight(e)
            if w < 0:
                raise GraphError(f"negative weight on {graph.describe_arc(e)}")
            u = graph.head[e]
            if u not in settled:
                heapq.heappush(heap, (dist + w, path + (e,), u))
    raise Unreachable(f"no path from {start} to {goal}")


def reachable_from(graph: TwoMetricGraph, start: int,
                   allowed: Optional[Callable[[int], bool]] = None) -> Set[int]:
    """Vertices reachable from ``start`` along allowed arcs (including start)."""
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for e in graph.out_arcs[v]:
            if allowed is not None and not allowed(e):
                continue
            u = graph.head[e]
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen


def reaches(graph: TwoMetricGraph, goal: int,
            allowed: Optional[Callable[[int], bool]] = None) -> Set[int]:
    """Vertices that can reach ``goal`` along allowed arcs (including goal)."""
    seen = {goal}
    stack = [goal]
    while stack:
        v = stack.pop()
        for e in graph.in_arcs[v]:
            if allowed is not None and not allowed(e):
                continue
            u = graph.tail[e]
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen
