"""Exact offline baselines for tiny instances.

Three independent routes to ground truth:

* ``offline_opt`` enumerates bought-edge subsets (branch and bound on the
  buy cost) and routes every pair on its shortest length-path inside the
  subset.
* ``ss_offline_opt`` solves single-sink instances exactly with a
  terminal-subset dynamic program over collection points, which scales to
  graphs far beyond the subset-enumeration budget (layered expansions).
* ``lp_lower_bound`` solves the flow LP relaxation with an off-the-shelf LP
  solver.

Budgets guard every exponential loop.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.optimize import linprog

from .errors import BudgetExceeded
from .graph import (GraphError, SolutionLedger, TerminalPair, TwoMetricGraph,
                    Unreachable, shortest_path)

VALUE_TOL = 1e-9


class InfeasibleInstance(Exception):
    """Some pair cannot be connected even with every edge bought."""


@dataclass(frozen=True)
class OracleBudget:
    max_edges: int = 20        # purchase keys for subset enumeration
    max_vertices: int = 8      # junction root enumeration
    max_pairs: int = 5         # junction assignment enumeration
    max_ss_terminals: int = 10  # terminal-subset DP width


DEFAULT_BUDGET = OracleBudget()


def _purchase_keys(graph: TwoMetricGraph) -> List[int]:
    return sorted({graph.purchase_key(e) for e in range(graph.m)})


def _route_in_subset(graph: TwoMetricGraph, chosen: Set[int], s: int,
                     t: int) -> Optional[Tuple[Tuple[int, ...], float]]:
    allowed = lambda e: graph.purchase_key(e) in chosen
    try:
        return shortest_path(graph, lambda e: graph.l[e], s, t, allowed=allowed)
    except Unreachable:
        return None


def offline_opt(graph: TwoMetricGraph, pairs: Sequence[TerminalPair],
                budget: OracleBudget = DEFAULT_BUDGET) -> Tuple[float, SolutionLedger]:
    """Global optimum by exhaustive subset search with buy-cost pruning.

    Inside a candidate subset the buying cost is already sunk, so each pair
    routes along its shortest length-path; the candidate's value uses only
    the purchases those routes actually touch.
    """
    keys = _purchase_keys(graph)
    if len(keys) > budget.max_edges:
        raise BudgetExceeded(
            f"{len(keys)} purchases exceed the subset budget {budget.max_edges}",
            required=len(keys))
    pairs = [p for p in pairs if p.s != p.t]
    if not pairs:
        return 0.0, SolutionLedger()

    full = set(keys)
    for p in pairs:
        if _route_in_subset(graph, full, p.s, p.t) is None:
            raise InfeasibleInstance(f"pair {p.index} ({p.s}->{p.t}) is unreachable")

    def evaluate(chosen: Set[int]) -> Optional[Tuple[float, SolutionLedger]]:
        ledger = SolutionLedger()
        for p in pairs:
            routed = _route_in_subset(graph, chosen, p.s, p.t)
            if routed is None:
                return None
            ledger.add_path(graph, p.index, routed[0])
        return ledger.total, ledger

    best_value, best_ledger = evaluate(full)  # feasible seed bound
    # descending buy cost lets the accumulated-cost prune bite early
    order = sorted(keys, key=lambda key: (-graph.c[key], key))

    def search(i: int, chosen: Set[int], buy_acc: float) -> None:
        nonlocal best_value, best_ledger
        if buy_acc >= best_value - VALUE_TOL:
            return
        if i == len(order):
            result = evaluate(chosen)
            if result is not None and result[0] < best_value - VALUE_TOL:
                best_value, best_ledger = result
            return
        key = order[i]
        search(i + 1, chosen, buy_acc)  # exclude first: cheap subsets early
        chosen.add(key)
        search(i + 1, chosen, buy_acc + graph.c[key])
        chosen.discard(key)

    search(0, set(), 0.0)
    return best_value, best_ledger


def _multi_weight_dijkstra(graph: TwoMetricGraph, seeds: Dict[int, float],
                           load: int) -> List[float]:
    """Closure of tentative labels under per-arc weight ``c + load * l``."""
    dist = [math.inf] * graph.n
    heap = []
    for v, d in seeds.items():
        if d < dist[v]:
            dist[v] = d
            heapq.heappush(heap, (d, v))
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v] + 1e-15:
            continue
        for e in graph.out_arcs[v]:
            nd = d + graph.c[e] + load * graph.l[e]
            u = graph.head[e]
            if nd < dist[u] - 1e-15:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


def ss_offline_opt(graph: TwoMetricGraph, terminals: Sequence[int], root: int,
                   direction: str = "sink",
                   budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """Exact single-sink (or single-source) optimum.

    Terminals form a multiset: two demands on the same vertex each pay
    their path length. Dynamic program over (terminal subset, collection
    vertex): an optimal solution is an in-tree toward the root, so it
    decomposes into merges at a vertex and shared path segments whose
    per-edge price is ``c + |subset| * l``.
    """
    if direction == "source":
        return ss_offline_opt(graph.reversed_view(), terminals, root, "sink",
                              budget)
    if direction != "sink":
        raise GraphError(f"unknown direction {direction!r}")
    terms = sorted(t for t in terminals if t != root)
    if not terms:
        return 0.0
    if len(terms) > budget.max_ss_terminals:
        raise BudgetExceeded(
            f"{len(terms)} terminals exceed the DP budget {budget.max_ss_terminals}",
            required=len(terms))
    k = len(terms)
    full = (1 << k) - 1
    # D[S] = per-vertex best cost of collecting terminal subset S there
    D: List[Optional[List[float]]] = [None] * (full + 1)
    for i, t in enumerate(terms):
        D[1 << i] = _multi_weight_dijkstra(graph, {t: 0.0}, load=1)
    for S in range(1, full + 1):
        if D[S] is not None:
            continue
        load = bin(S).count("1")
        merged = [math.inf] * graph.n
        sub = (S - 1) & S
        while sub:
            comp = S ^ sub
            if sub < comp:  # each split once
                a, b = D[sub], D[comp]
                for v in range(graph.n):
                    cand = a[v] + b[v]
                    if cand < merged[v]:
                        merged[v] = cand
            sub = (sub - 1) & S
        seeds = {v: merged[v] for v in range(graph.n) if math.isfinite(merged[v])}
        D[S] = _multi_weight_dijkstra(graph, seeds, load=load)
    value = D[full][root]
    if not math.isfinite(value):
        raise InfeasibleInstance("some terminal cannot reach the root")
    return value


def junction_opt(graph: TwoMetricGraph, pairs: Sequence[TerminalPair],
                 budget: OracleBudget = DEFAULT_BUDGET,
                 roots: Optional[Sequence[int]] = None) -> float:
    """Best decomposition into per-root single-sink plus single-source solutions.

    Enumerates every pair-to-root assignment; edge copies appearing in
    several rooted solutions are deliberately paid once per solution.
    """
    pairs = [p for p in pairs if p.s != p.t]
    if not pairs:
        return 0.0
    if len(pairs) > budget.max_pairs:
        raise BudgetExceeded(
            f"{len(pairs)} pairs exceed the junction budget {budget.max_pairs}",
            required=len(pairs))
    root_list = list(roots) if roots is not None else list(range(graph.n))
    if roots is None and graph.n > budget.max_vertices:
        raise BudgetExceeded(
            f"{graph.n} vertices exceed the junction budget {budget.max_vertices}",
            required=graph.n)

    cache: Dict[Tuple[int, str, Tuple[int, ...]], float] = {}

    def rooted_cost(r: int, terminals: Tuple[int, ...], direction: str) -> float:
        key = (r, direction, terminals)
        if key not in cache:
            try:
                cache[key] = ss_offline_opt(graph, terminals, r, direction,
                                            budget)
            except InfeasibleInstance:
                cache[key] = math.inf
        return cache[key]

    best = math.inf
    for assignment in itertools.product(root_list, repeat=len(pairs)):
        by_root: Dict[int, Tuple[List[int], List[int]]] = {}
        for p, r in zip(pairs, assignment):
            srcs, snks = by_root.setdefault(r, ([], []))
            srcs.append(p.s)  # multiset: shared terminals pay length per pair
            snks.append(p.t)
        total = 0.0
        for r, (srcs, snks) in by_root.items():
            total += rooted_cost(r, tuple(sorted(srcs)), "sink")
            if total >= best:
                break
            total += rooted_cost(r, tuple(sorted(snks)), "source")
            if total >= best:
                break
        best = min(best, total)
    if not math.isfinite(best):
        raise InfeasibleInstance("no junction assignment connects every pair")
    return best


def offline_opt_prize(graph: TwoMetricGraph, pairs: Sequence[TerminalPair],
                      budget: OracleBudget = DEFAULT_BUDGET) -> float:
    """Prize-collecting optimum: best split into dropped and routed pairs."""
    best = math.inf
    indexed = list(pairs)
    for mask in range(1 << len(indexed)):
        dropped = [p for i, p in enumerate(indexed) if mask >> i & 1]
        if any(p.penalty is None for p in dropped):
            continue
        kept = [p for i, p in enumerate(indexed) if not mask >> i & 1]
        penalty = sum(p.penalty for p in dropped)
        if penalty >= best:
            continue
        try:
            value, _ = offline_opt(graph, kept, budget)
        except InfeasibleInstance:
            continue
        best = min(best, penalty + value)
    if not math.isfinite(best):
        raise InfeasibleInstance("no feasible drop/route split")
    return best


def lp_lower_bound(graph: TwoMetricGraph, pairs: Sequence[TerminalPair]) -> float:
    """Optimum of the flow LP relaxation (a lower bound on the offline optimum).

    One capacity variable per purchase, one flow per (pair, arc); every
    pair ships one unit from its source to its sink under ``flow <= capacity``.
    """
    pairs = [p for p in pairs if p.s != p.t]
    if not pairs:
        return 0.0
    keys = _purchase_keys(graph)
    key_index = {key: i for i, key in enumerate(keys)}
    nk, m, np_ = len(keys), graph.m, len(pairs)
    n_vars = nk + np_ * m  # x block then per-pair flow blocks

    def fvar(pi: int, e: int) -> int:
        return nk + pi * m + e

    cost = np.zeros(n_vars)
    for i, key in enumerate(keys):
        cost[i] = graph.c[key]
    for pi in range(np_):
        for e in range(m):
            cost[fvar(pi, e)] = graph.l[e]

    a_eq = np.zeros((np_ * graph.n, n_vars))
    b_eq = np.zeros(np_ * graph.n)
    for pi, p in enumerate(pairs):
        for e in range(m):
            a_eq[pi * graph.n + graph.tail[e], fvar(pi, e)] += 1.0
            a_eq[pi * graph.n + graph.head[e], fvar(pi, e)] -= 1.0
        b_eq[pi * graph.n + p.s] = 1.0
        b_eq[pi * graph.n + p.t] = -1.0

    a_ub = np.zeros((np_ * m, n_vars))
    for pi in range(np_):
        for e in range(m):
            row = pi * m + e
            a_ub[row, fvar(pi, e)] = 1.0
            a_ub[row, key_index[graph.purchase_key(e)]] = -1.0
    b_ub = np.zeros(np_ * m)

    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=(0, None), method="highs")
    if not res.success:
        raise InfeasibleInstance(f"LP relaxation infeasible: {res.message}")
    return float(res.fun)
