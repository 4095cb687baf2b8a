"""End-to-end online pipeline: LP growth, rounding, dispatch, reporting.

Per arrival: the fractional state absorbs the pair (doubling the optimum
guess and replaying history whenever an epoch overflows its spend cap), the
partial rounding picks a root or declines, and the pair is dispatched to
that root's single-sink/single-source algorithms, to a direct fallback
path, or to the penalty bucket. Purchases are irrevocable in layered (or
forest) space; the report maps everything back to the base graph, where
overlaps can only make the solution cheaper.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import BudgetExceeded, InstanceError
from .fractional import (ArrivalOutcome, CompositeSolver, PairSpec, RootSpec,
                         SolverConfig)
from .graph import (SolutionLedger, TerminalPair, TwoMetricGraph,
                    Unreachable, reachable_from, reaches, shortest_path,
                    solution_cost)
from .instance import Instance, load_instance
from .junction import JunctionForest, build_junction_forest, pull_forest_ledger
from .layering import LayeredGraph, build_layered, default_height, pull_back
from .oracle import (DEFAULT_BUDGET, InfeasibleInstance, OracleBudget,
                     junction_opt, offline_opt, offline_opt_prize)
from .prize import augment, settle
from .rounding import Assignment, choose_root, draw_thresholds
from .single_sink import GreedySingleSink

MODES = ("edge", "node", "directed", "prize")


def default_kappa(n: int) -> float:
    """Epoch spend cap in guess units: 64 * ceil(log2 n)^3."""
    return 64.0 * math.ceil(math.log2(max(2, n))) ** 3


@dataclass
class RunConfig:
    mode: str
    seed: int = 0
    h: Optional[int] = None
    kappa: Optional[float] = None
    dmax: float = 0.05
    ss_alg: str = "greedy"
    oracle: bool = False
    max_epochs: int = 60
    max_steps: int = 10 ** 6
    node_budget: int = 10 ** 6
    oracle_budget: OracleBudget = DEFAULT_BUDGET

    def __post_init__(self):
        if self.mode not in MODES:
            raise InstanceError(f"unknown mode {self.mode!r}")
        if self.ss_alg != "greedy":
            raise InstanceError(f"unknown single-sink algorithm {self.ss_alg!r}")


@dataclass
class ArrivalRecord:
    arrival: int
    pair: int
    outcome: str
    root: Optional[int]
    epoch: int
    lam: float
    steps: int
    z_total: float
    lp_obj: float
    z_value: float = 0.0
    tau: float = 0.0
    cumulative_spend: float = 0.0


@dataclass
class RunReport:
    arrivals: List[ArrivalRecord]
    buy_cost: float
    length_cost: float
    penalty_total: float
    fallback_count: int
    infeasible_count: int
    epochs: int
    ledger: SolutionLedger
    online_total: float
    h: Optional[int] = None
    epsilon: Optional[float] = None  # 1/h, reported for the directed pipeline
    opt: Optional[float] = None
    junction_opt_value: Optional[float] = None
    ratio: Optional[float] = None
    wall_ms: Optional[float] = None

    def to_csv(self) -> str:
        """Deterministic run report (identical bytes for identical seed+config)."""
        lines = ["arrival,pair,outcome,root,epoch,lambda,steps,z_total,lp_obj"]
        for a in self.arrivals:
            root = "" if a.root is None else str(a.root)
            lines.append(f"{a.arrival},{a.pair},{a.outcome},{root},{a.epoch},"
                         f"{a.lam!r},{a.steps},{a.z_total!r},{a.lp_obj!r}")
        lines.append(f"buy,{self.buy_cost!r}")
        lines.append(f"length,{self.length_cost!r}")
        lines.append(f"penalty,{self.penalty_total!r}")
        lines.append(f"fallbacks,{self.fallback_count}")
        lines.append(f"infeasible,{self.infeasible_count}")
        lines.append(f"epochs,{self.epochs}")
        lines.append(f"h,{'' if self.h is None else self.h}")
        lines.append("epsilon," + ("" if self.epsilon is None
                                   else repr(self.epsilon)))
        lines.append(f"online_total,{self.online_total!r}")
        lines.append(f"opt,{'' if self.opt is None else repr(self.opt)}")
        lines.append("junction_opt," + ("" if self.junction_opt_value is None
                                        else repr(self.junction_opt_value)))
        lines.append(f"ratio,{'' if self.ratio is None else repr(self.ratio)}")
        return "\n".join(lines) + "\n"

    def assignment_trace_csv(self) -> str:
        lines = ["pair,outcome,root,z_value,tau"]
        for a in self.arrivals:
            root = "" if a.root is None else str(a.root)
            lines.append(f"{a.pair},{a.outcome},{root},{a.z_value!r},{a.tau!r}")
        return "\n".join(lines) + "\n"

    def lp_trace_csv(self) -> str:
        lines = ["arrival,pair,steps,z_total,lp_obj,epoch,lambda"]
        for a in self.arrivals:
            lines.append(f"{a.arrival},{a.pair},{a.steps},{a.z_total!r},"
                         f"{a.lp_obj!r},{a.epoch},{a.lam!r}")
        return "\n".join(lines) + "\n"


class OnlinePipeline:
    """One online run over a fixed arrival order."""

    def __init__(self, instance: Instance, config: RunConfig):
        self.instance = instance
        self.config = config
        self.base = instance.graph
        self.n_scale = max(2, self.base.n)
        self.kappa = (config.kappa if config.kappa is not None
                      else default_kappa(self.n_scale))
        self.k = max(1, len(instance.pairs))
        self.mode = config.mode
        if self.mode == "directed" and not instance.directed:
            raise InstanceError("directed mode requires a directed instance")
        if self.mode == "prize" and instance.mode != "prize":
            raise InstanceError("prize mode requires a prize instance")

        self.forest: Optional[JunctionForest] = None
        self.up_layer: Optional[LayeredGraph] = None
        self.down_layer: Optional[LayeredGraph] = None
        self._setup_graphs()

        self.pair_specs: Dict[int, PairSpec] = {
            p.index: self._pair_spec(p) for p in instance.pairs}
        if self.mode == "prize":
            aug = augment(self.solver_up, self.solver_down,
                          list(self.pair_specs.values()))
            self.solver_up, self.solver_down = aug.up_graph, aug.down_graph
            self.up_owner, self.down_owner = aug.up_owner, aug.down_owner
            self.roots.append(aug.virtual_root)
        else:
            self.up_owner, self.down_owner = {}, {}

        self.root_ids = [r.root_id for r in self.roots]
        self.epoch = 0
        self.lam: Optional[float] = None
        self.solver: Optional[CompositeSolver] = None
        self.draw = None
        self.assignment = Assignment()
        self.arrived: List[PairSpec] = []
        self.up_ss: Dict[int, GreedySingleSink] = {}
        self.down_ss: Dict[int, GreedySingleSink] = {}
        self.fallback_ledger = SolutionLedger()
        self.forest_extra: Dict[int, Tuple[int, ...]] = {}
        self.trivial_pairs: List[int] = []
        self.penalty_total = 0.0
        self.records: List[ArrivalRecord] = []
        self.h_ledger: Optional[SolutionLedger] = None
        self._arrival_counter = 0

    # ------------------------------------------------------------------
    # setup

    def _setup_graphs(self) -> None:
        base, config = self.base, self.config
        if self.mode == "directed":
            h = config.h if config.h is not None else 2
            sources = [p.s for p in self.instance.pairs]
            sinks = [p.t for p in self.instance.pairs]
            self.forest = build_junction_forest(base, self.k, h, sources, sinks,
                                                node_budget=config.node_budget)
            self.h = h
            self.solver_up = self.forest.graph
            self.solver_down = self.forest.graph
            self.roots = [RootSpec(r, self.forest.up_root[r],
                                   self.forest.down_root[r])
                          for r in range(base.n)]
        else:
            h = config.h if config.h is not None else default_height(self.n_scale)
            self.h = h
            self.up_layer = build_layered(base, self.k, h, "up")
            self.down_layer = build_layered(base, self.k, h, "down")
            self.solver_up = self.up_layer.graph
            self.solver_down = self.down_layer.graph
            self.roots = [RootSpec(r, self.up_layer.vertex(r, 0),
                                   self.down_layer.vertex(r, 0))
                          for r in range(base.n)]

    def _pair_spec(self, pair: TerminalPair) -> PairSpec:
        if self.mode == "directed":
            return PairSpec(index=pair.index,
                            up_source=self.forest.source_vertex[pair.s],
                            down_sink=self.forest.sink_vertex[pair.t],
                            penalty=pair.penalty)
        return PairSpec(index=pair.index,
                        up_source=self.up_layer.vertex(pair.s, self.h),
                        down_sink=self.down_layer.vertex(pair.t, self.h),
                        penalty=pair.penalty)

    def _up_instance(self, root_id: int) -> GreedySingleSink:
        if root_id not in self.up_ss:
            if self.mode == "directed":
                g, root = self.forest.graph, self.forest.up_root[root_id]
            else:
                g, root = self.up_layer.graph, self.up_layer.vertex(root_id, 0)
            self.up_ss[root_id] = GreedySingleSink(g, root, "sink")
        return self.up_ss[root_id]

    def _down_instance(self, root_id: int) -> GreedySingleSink:
        if root_id not in self.down_ss:
            if self.mode == "directed":
                g, root = self.forest.graph, self.forest.down_root[root_id]
            else:
                g, root = self.down_layer.graph, self.down_layer.vertex(root_id, 0)
            self.down_ss[root_id] = GreedySingleSink(g, root, "source")
        return self.down_ss[root_id]

    # ------------------------------------------------------------------
    # epochs

    def _initial_guess(self, spec: PairSpec) -> float:
        best = math.inf
        for root in self.roots:
            try:
                _, up_cost = shortest_path(
                    self.solver_up, lambda e: self.solver_up.c[e] + self.solver_up.l[e],
                    spec.up_source, root.up_vertex,
                    allowed=self._owner_filter(self.up_owner, spec.index))
                _, down_cost = shortest_path(
                    self.solver_down,
                    lambda e: self.solver_down.c[e] + self.solver_down.l[e],
                    root.down_vertex, spec.down_sink,
                    allowed=self._owner_filter(self.down_owner, spec.index))
            except Unreachable:
                continue
            best = min(best, up_cost + down_cost)
        if not math.isfinite(best) or best <= 0:
            return 1.0
        return best

    @staticmethod
    def _owner_filter(owner: Dict[int, int], pair_index: int):
        if not owner:
            return None
        return lambda e: owner.get(e) is None or owner.get(e) == pair_index

    def _fresh_solver(self) -> CompositeSolver:
        cfg = SolverConfig(kappa=self.kappa, dmax=self.config.dmax,
                           max_steps=self.config.max_steps)
        return CompositeSolver(self.solver_up, self.solver_down, self.roots,
                               self.n_scale, self.lam, cfg,
                               up_owner=self.up_owner, down_owner=self.down_owner)

    def _start_epoch(self) -> None:
        self.solver = self._fresh_solver()
        self.draw = draw_thresholds(self.root_ids, self.n_scale,
                                    f"{self.config.seed}:{self.epoch}")

    def _advance_epoch(self) -> None:
        """Double the guess, restart the fractional state, replay history."""
        while True:
            self.epoch += 1
            if self.epoch > self.config.max_epochs:
                raise RuntimeError("guess doubling did not stabilize "
                                   f"within {self.config.max_epochs} epochs")
            self.lam *= 2.0
            self._start_epoch()
            replay_ok = True
            for old in self.arrived:
                outcome = self.solver.on_arrival(old)
                if outcome == ArrivalOutcome.EPOCH_OVERFLOW:
                    replay_ok = False
                    break
                # reachability only improves as the guess grows
                assert outcome == ArrivalOutcome.SATISFIED
            if replay_ok:
                return

    def _structurally_feasible(self, spec: PairSpec) -> bool:
        up_reach = reachable_from(self.solver_up, spec.up_source,
                                  self._owner_filter(self.up_owner, spec.index))
        down_reach = reaches(self.solver_down, spec.down_sink,
                             self._owner_filter(self.down_owner, spec.index))
        return any(r.up_vertex in up_reach and r.down_vertex in down_reach
                   for r in self.roots)

    def _absorb(self, spec: PairSpec) -> Tuple[ArrivalOutcome, int]:
        """Run the LP for one arrival, epoch-doubling as needed."""
        while True:
            outcome = self.solver.on_arrival(spec)
            if outcome == ArrivalOutcome.SATISFIED:
                self.solver.check_pair(spec.index)
                return outcome, self.solver.arrival_log[-1].steps
            if outcome == ArrivalOutcome.LP_INFEASIBLE:
                if self._structurally_feasible(spec):
                    self._advance_epoch()  # pruning artifact of a small guess
                    continue
                return outcome, 0
            self._advance_epoch()

    # ------------------------------------------------------------------
    # dispatch

    def _dispatch_assigned(self, pair: TerminalPair, spec: PairSpec,
                           root_id: int) -> None:
        up_path = self._up_instance(root_id).on_terminal(spec.up_source,
                                                         pair_index=pair.index)
        down_path = self._down_instance(root_id).on_terminal(spec.down_sink,
                                                             pair_index=pair.index)
        if self.mode == "directed":
            link = self.forest.root_link_arc[root_id]
            self.forest_extra[pair.index] = (link,)

    def _dispatch_fallback(self, pair: TerminalPair) -> bool:
        """Direct cheapest combined-metric path on the base graph."""
        try:
            path, _ = shortest_path(self.base,
                                    lambda e: self.base.c[e] + self.base.l[e],
                                    pair.s, pair.t)
        except Unreachable:
            return False
        self.fallback_ledger.add_path(self.base, pair.index, path)
        return True

    def _serving_cost(self, pair: TerminalPair, spec: PairSpec, label: str,
                      root: Optional[int]) -> float:
        """What serving the pair as decided would cost right now."""
        if label == Assignment.ASSIGNED:
            return (self._up_instance(root).marginal_cost(spec.up_source)
                    + self._down_instance(root).marginal_cost(spec.down_sink))
        try:
            _, cost = shortest_path(self.base,
                                    lambda e: self.base.c[e] + self.base.l[e],
                                    pair.s, pair.t)
        except Unreachable:
            return math.inf
        return cost

    def _current_spend(self) -> float:
        spend = self.penalty_total + self.fallback_ledger.total
        for ss in self.up_ss.values():
            spend += ss.ledger.total
        for ss in self.down_ss.values():
            spend += ss.ledger.total
        return spend

    def process(self, pair: TerminalPair) -> ArrivalRecord:
        arrival = self._arrival_counter
        self._arrival_counter += 1
        if pair.s == pair.t:
            self.trivial_pairs.append(pair.index)
            record = ArrivalRecord(arrival, pair.index, "trivial", None,
                                   self.epoch, self.lam or 0.0, 0, 0.0,
                                   0.0, cumulative_spend=self._current_spend())
            self.records.append(record)
            return record
        spec = self.pair_specs[pair.index]
        if self.solver is None:
            self.lam = self._initial_guess(spec)
            self._start_epoch()
        outcome, steps = self._absorb(spec)
        if outcome == ArrivalOutcome.LP_INFEASIBLE:
            served = False
            if pair.penalty is not None:
                self.assignment.record(pair.index, Assignment.DROPPED, None)
                self.penalty_total += pair.penalty
                label = "dropped"
                served = True
            else:
                served = self._dispatch_fallback(pair)
                label = "fallback" if served else "infeasible"
                self.assignment.record(pair.index, Assignment.FALLBACK
                                       if served else "infeasible", None)
            record = ArrivalRecord(arrival, pair.index, label, None, self.epoch,
                                   self.lam, 0, 0.0, self.solver.objective,
                                   cumulative_spend=self._current_spend())
            self.records.append(record)
            return record

        self.arrived.append(spec)
        label, root = choose_root(self.solver, self.draw, pair.index)
        z_value = 0.0
        tau = 0.0
        if root is not None:
            z_value = self.solver.z.get((pair.index, root), 0.0)
            tau = self.draw.tau[root]
        if pair.penalty is not None and label != Assignment.DROPPED:
            # never pay more than the discard price for a discardable pair
            if self._serving_cost(pair, spec, label, root) > pair.penalty + 1e-12:
                label, root = Assignment.DROPPED, None
        self.assignment.record(pair.index, label, root)
        if label == Assignment.ASSIGNED:
            try:
                self._dispatch_assigned(pair, spec, root)
            except Unreachable:
                # LP eligibility should prevent this; fall back defensively
                label = ("fallback" if self._dispatch_fallback(pair)
                         else "infeasible")
                root = None
        elif label == Assignment.DROPPED:
            self.penalty_total += settle(pair.penalty, label)
        else:
            if not self._dispatch_fallback(pair):
                label = "infeasible"  # reachable via LP but not in base: impossible
        stats = self.solver.arrival_log[-1]
        record = ArrivalRecord(arrival, pair.index, label,
                               root if label == Assignment.ASSIGNED else None,
                               self.epoch, self.lam, steps, stats.z_total,
                               stats.objective, z_value=z_value, tau=tau,
                               cumulative_spend=self._current_spend())
        self.records.append(record)
        return record

    # ------------------------------------------------------------------
    # report

    def _merge_side_ledgers(self, instances: Dict[int, GreedySingleSink]) -> SolutionLedger:
        merged = SolutionLedger()
        for ss in instances.values():
            for key in ss.ledger.bought:
                merged.bought.add(key)
            for pair_index, path in ss.ledger.paths.items():
                merged.paths[pair_index] = path
        return merged

    def _final_ledger(self) -> SolutionLedger:
        final = SolutionLedger()
        if self.mode == "directed":
            h_ledger = SolutionLedger()
            merged_up = self._merge_side_ledgers(self.up_ss)
            merged_down = self._merge_side_ledgers(self.down_ss)
            h_ledger.bought = set(merged_up.bought) | set(merged_down.bought)
            for pair_index, up_path in merged_up.paths.items():
                link = self.forest_extra.get(pair_index, ())
                for a in link:
                    h_ledger.bought.add(self.forest.graph.purchase_key(a))
                down_path = merged_down.paths.get(pair_index, ())
                h_ledger.paths[pair_index] = tuple(up_path) + link + tuple(down_path)
            self.h_ledger = h_ledger
            committed_cost = solution_cost(self.forest.graph, h_ledger)[2]
            base_ledger = pull_forest_ledger(self.forest, h_ledger)
        else:
            merged_up = self._merge_side_ledgers(self.up_ss)
            merged_down = self._merge_side_ledgers(self.down_ss)
            committed_cost = (solution_cost(self.up_layer.graph, merged_up)[2]
                              + solution_cost(self.down_layer.graph,
                                              merged_down)[2])
            pulled_up = pull_back(self.up_layer, merged_up)
            pulled_down = pull_back(self.down_layer, merged_down)
            base_ledger = SolutionLedger()
            base_ledger.bought = set(pulled_up.bought) | set(pulled_down.bought)
            for pair_index, up_path in pulled_up.paths.items():
                down_path = pulled_down.paths.get(pair_index, ())
                base_ledger.paths[pair_index] = tuple(up_path) + tuple(down_path)
        pulled_cost = solution_cost(self.base, base_ledger)[2]
        if pulled_cost > committed_cost + 1e-9:
            raise AssertionError(
                f"pull-back increased cost: {pulled_cost} > {committed_cost}")
        final.bought = set(base_ledger.bought) | set(self.fallback_ledger.bought)
        final.paths = dict(base_ledger.paths)
        final.paths.update(self.fallback_ledger.paths)
        for pair_index in self.trivial_pairs:
            final.paths[pair_index] = ()
        buy, length, _total = solution_cost(self.base, final)
        final.buy_cost = buy
        final.length_cost = length
        return final

    def finish(self) -> RunReport:
        ledger = self._final_ledger()
        buy, length, total = solution_cost(self.base, ledger)
        fallback_count = sum(1 for r in self.records if r.outcome == "fallback")
        infeasible_count = sum(1 for r in self.records
                               if r.outcome == "infeasible")
        online_total = total + self.penalty_total
        report = RunReport(arrivals=self.records, buy_cost=buy,
                           length_cost=length, penalty_total=self.penalty_total,
                           fallback_count=fallback_count,
                           infeasible_count=infeasible_count,
                           epochs=self.epoch + 1, ledger=ledger,
                           online_total=online_total, h=self.h,
                           epsilon=(1.0 / self.h if self.mode == "directed"
                                    else None))
        if self.config.oracle:
            self._attach_oracle(report)
        return report

    def _attach_oracle(self, report: RunReport) -> None:
        pairs = self.instance.pairs
        try:
            if self.mode == "prize" and any(p.penalty is not None for p in pairs):
                report.opt = offline_opt_prize(self.base, pairs,
                                               self.config.oracle_budget)
            else:
                report.opt, _ = offline_opt(self.base, pairs,
                                            self.config.oracle_budget)
        except (BudgetExceeded, InfeasibleInstance):
            report.opt = None
        try:
            report.junction_opt_value = junction_opt(self.base, pairs,
                                                     self.config.oracle_budget)
        except (BudgetExceeded, InfeasibleInstance):
            report.junction_opt_value = None
        if report.opt is not None and report.opt > 1e-12:
            report.ratio = report.online_total / report.opt


def run_online(instance: Instance, config: RunConfig) -> RunReport:
    """Run the full online pipeline over the instance's arrival order."""
    started = time.perf_counter()
    pipeline = OnlinePipeline(instance, config)
    for pair in instance.pairs:
        pipeline.process(pair)
    report = pipeline.finish()
    report.wall_ms = (time.perf_counter() - started) * 1000.0
    return report


EXPERIMENT_COLUMNS = ("instance", "n", "k", "mode", "online_total", "opt",
                      "junction_opt", "ratio", "fallback_rate", "epochs",
                      "wall_ms")


def _experiment_row(suite_dir: Path, entry: dict) -> Tuple[str, Optional[float], Optional[str]]:
    """One suite run; returns (csv row, ratio, error message)."""
    inst_path = entry["instance"]
    if not Path(inst_path).is_absolute():
        inst_path = str(suite_dir / inst_path)
    name = Path(inst_path).stem
    try:
        instance = load_instance(inst_path)
        config = RunConfig(
            mode=entry.get("mode", instance.mode),
            seed=int(entry.get("seed", 0)),
            h=entry.get("h"),
            kappa=entry.get("kappa"),
            dmax=float(entry.get("dmax", 0.05)),
            oracle=bool(entry.get("oracle", True)))
        report = run_online(instance, config)
    except Exception as exc:  # noqa: BLE001 - suite must keep going
        return (f"{name},,,{entry.get('mode', '')},,,,,,,", None,
                f"{name}: {exc}")
    k = max(1, instance.k)
    row = ",".join([
        name, str(instance.display_n), str(instance.k),
        config.mode, repr(report.online_total),
        "" if report.opt is None else repr(report.opt),
        "" if report.junction_opt_value is None
        else repr(report.junction_opt_value),
        "" if report.ratio is None else repr(report.ratio),
        repr(report.fallback_count / k), str(report.epochs),
        repr(report.wall_ms)])
    return row, report.ratio, None


def run_experiment(suite_path: str, out_path: str,
                   workers: int = 1) -> Dict[str, float]:
    """Run a suite file and write one CSV row per run plus a summary.

    Runs may fan out across worker threads; rows are written in suite order
    either way, so the output is deterministic up to the wall_ms column.
    """
    suite_file = Path(suite_path)
    try:
        suite = json.loads(suite_file.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InstanceError(f"cannot read suite {suite_path}: {exc}") from exc
    entries = suite.get("runs", [])
    if workers > 1 and len(entries) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda entry: _experiment_row(suite_file.parent, entry),
                entries))
    else:
        results = [_experiment_row(suite_file.parent, entry)
                   for entry in entries]
    rows = [",".join(EXPERIMENT_COLUMNS)]
    ratios: List[float] = []
    failures: List[str] = []
    for row, ratio, error in results:
        rows.append(row)
        if ratio is not None:
            ratios.append(ratio)
        if error is not None:
            failures.append(error)
    Path(out_path).write_text("\n".join(rows) + "\n")
    summary: Dict[str, float] = {"runs": len(entries),
                                 "failures": len(failures)}
    if ratios:
        summary["max_ratio"] = max(ratios)
        summary["geomean_ratio"] = math.exp(
            sum(math.log(r) for r in ratios) / len(ratios))
    return summary
