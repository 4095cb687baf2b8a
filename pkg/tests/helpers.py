"""Shared builders and small brute-force oracles for the test suite."""

from __future__ import annotations

import random
from typing import Dict, List, Optional, Sequence, Set, Tuple

from bulkflow.graph import TwoMetricGraph


def build_graph(n: int, arcs: Sequence[Tuple[int, int, float, float]],
                directed: bool = True) -> TwoMetricGraph:
    g = TwoMetricGraph(n, directed=directed)
    for u, v, c, l in arcs:
        g.add_edge(u, v, c, l)
    return g.freeze()


def random_two_metric(rng: random.Random, n: int, m: int,
                      directed: bool = True,
                      c_range=(0.1, 3.0), l_range=(0.05, 1.0),
                      ensure_cycle: bool = False) -> TwoMetricGraph:
    g = TwoMetricGraph(n, directed=directed)
    if ensure_cycle:
        order = list(range(n))
        rng.shuffle(order)
        for i in range(n):
            g.add_edge(order[i], order[(i + 1) % n],
                       rng.uniform(*c_range), rng.uniform(*l_range))
    for _ in range(m):
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            g.add_edge(u, v, rng.uniform(*c_range), rng.uniform(*l_range))
    return g.freeze()


def enumerate_simple_paths(adjacency: Dict[int, List[Tuple[int, float]]],
                           start: int, goal: int) -> List[Tuple[List[int], float]]:
    """All simple paths with their weights (vertex-weight style callers
    fold weights into adjacency)."""
    results: List[Tuple[List[int], float]] = []

    def walk(v: int, seen: Set[int], cost: float, trail: List[int]) -> None:
        if v == goal:
            results.append((list(trail), cost))
            return
        for u, w in adjacency.get(v, ()):
            if u not in seen:
                seen.add(u)
                trail.append(u)
                walk(u, seen, cost + w, trail)
                trail.pop()
                seen.remove(u)

    walk(start, {start}, 0.0, [start])
    return results


def brute_min_node_cost_path(n: int, node_c: Sequence[float],
                             edges: Sequence[Tuple[int, int]], start: int,
                             goal: int, directed: bool = False) -> Optional[float]:
    """Cheapest start->goal route paying every intermediate node's cost.

    Endpoint convention matches the node-splitting mapping: the start pays
    nothing (terminal enters at its outgoing side), the goal pays nothing.
    """
    adjacency: Dict[int, List[Tuple[int, float]]] = {}
    for u, v in edges:
        adjacency.setdefault(u, []).append((v, 0.0))
        if not directed:
            adjacency.setdefault(v, []).append((u, 0.0))
    best = None
    for trail, _ in enumerate_simple_paths(adjacency, start, goal):
        cost = sum(node_c[v] for v in trail[1:-1])
        if best is None or cost < best:
            best = cost
    return best
