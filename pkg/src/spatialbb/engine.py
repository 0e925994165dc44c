"""Best-bound branch-and-bound driver.

Nodes live in a min-heap keyed by dual bound; children inherit the parent's
bound as a provisional key and are re-keyed once their own relaxation is
solved.  A branched node is replaced by its two children.  The incumbent
comes from a multi-start heuristic at the root and from local descents
launched every ``ub_frequency``-th processed node.

The reported global lower bound stays a valid bound on the true optimum at
all times: nodes discarded by the incumbent-gap cutoff leave their dual bound
behind as a floor, so tolerance-based pruning can never push the reported
bound past the optimum.
"""

from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from . import lp
from .branching import (
    BranchDecision,
    BranchParams,
    balance_select,
    basic_select,
    esb_select,
)
from .instance import QcqpInstance, VarBox
from .primal import Incumbent, local_improve, root_incumbent
from .relaxation import build_relaxation, child_relaxation

RULES = ("esb", "basic", "balance")

VERDICT_OPTIMAL = "Optimal"
VERDICT_GAP = "GapReached"
VERDICT_NODE_LIMIT = "NodeLimit"
VERDICT_TIME_LIMIT = "TimeLimit"
VERDICT_INFEASIBLE = "Infeasible"
VERDICT_NUMERICAL = "NumericalLimit"  # repeated LP breakdowns stopped the run

PRUNE_TOL = 1e-7


@dataclass
class SolverConfig:
    rule: str = "esb"
    gap_tol: float = 0.001  # relative; 0.001 == 0.1%
    abs_gap_tol: float = 1e-6  # used when the incumbent objective is zero
    time_limit: float = 3600.0
    node_cap: int = 100_000
    iter_max: int = 4
    epsilon: float = 1e-6
    basic_lambda: float = 0.25
    ub_frequency: int = 10
    seed: int = 0
    trace: bool = False
    feas_tol: float = 1e-6
    root_budget: float = 5.0
    branch_all_vars: bool = False
    report_timing: bool = True  # False nulls time_s for byte-reproducible reports

    def validate(self) -> None:
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        for name in ("gap_tol", "abs_gap_tol", "epsilon", "feas_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.iter_max < 1 or self.node_cap < 1 or self.ub_frequency < 1:
            raise ValueError("iter_max, node_cap and ub_frequency must be >= 1")

    def branch_params(self) -> BranchParams:
        return BranchParams(
            iter_max=self.iter_max,
            epsilon=self.epsilon,
            prune_tol=PRUNE_TOL,
            basic_lambda=self.basic_lambda,
            branch_all_vars=self.branch_all_vars,
        )


@dataclass(order=True)
class BnbNode:
    key: float
    seq: int
    id: int = field(compare=False)
    parent: Optional[int] = field(compare=False)
    depth: int = field(compare=False)
    box: VarBox = field(compare=False)
    bound: Optional[float] = field(compare=False, default=None)  # exact once solved
    x: Optional[np.ndarray] = field(compare=False, default=None)
    w: Optional[np.ndarray] = field(compare=False, default=None)
    branch_var: Optional[int] = field(compare=False, default=None)
    branch_point: Optional[float] = field(compare=False, default=None)
    branch_side: Optional[str] = field(compare=False, default=None)
    retried: bool = field(compare=False, default=False)


@dataclass
class SolveReport:
    instance: str
    rule: str
    verdict: str
    z_star: Optional[float]
    z_lb: Optional[float]
    gap_pct: Optional[float]
    gap_is_absolute: bool
    time_s: Optional[float]
    nodes: int
    lp_solves: int
    probe_solves: int
    tightenings: int
    numerical_discards: int
    seed: int
    incumbent: Optional[List[float]]
    trace: Optional[List[Dict[str, Any]]] = None
    tightening_log: Optional[List[Dict[str, Any]]] = None

    def exit_code(self) -> int:
        if self.verdict in (VERDICT_OPTIMAL, VERDICT_GAP):
            return 0
        if self.verdict in (VERDICT_NODE_LIMIT, VERDICT_TIME_LIMIT, VERDICT_NUMERICAL):
            return 2
        return 3

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "instance": self.instance,
            "rule": self.rule,
            "rule_note": (
                "balance is a best-effort reconstruction of the published rule"
                if self.rule == "balance"
                else None
            ),
            "verdict": self.verdict,
            "z_star": self.z_star,
            "z_lb": self.z_lb,
            "gap_pct": self.gap_pct,
            "gap_is_absolute": self.gap_is_absolute,
            "time_s": self.time_s,
            "nodes": self.nodes,
            "lp_solves": self.lp_solves,
            "probe_solves": self.probe_solves,
            "tightenings": self.tightenings,
            "numerical_discards": self.numerical_discards,
            "seed": self.seed,
            "incumbent": self.incumbent,
        }
        if self.trace is not None:
            out["trace"] = self.trace
        if self.tightening_log is not None:
            out["tightening_log"] = self.tightening_log
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def remaining_gap(z_star: float, z_lb: float) -> Tuple[float, bool]:
    """Remaining optimality gap 100*|z*-z_lb|/|z*| in percent.

    When z* is zero the relative form is undefined; the absolute difference
    is returned instead, flagged by the second element.
    """
    if z_star == 0.0:
        return abs(z_star - z_lb), True
    return 100.0 * abs(z_star - z_lb) / abs(z_star), False


class _Run:
    """Mutable state of one solve; pulled out of ``solve`` for readability."""

    def __init__(self, inst: QcqpInstance, config: SolverConfig):
        self.inst = inst
        self.config = config
        self.pool: List[BnbNode] = []
        self.seq = 0
        self.next_id = 0
        self.incumbent: Optional[Incumbent] = None
        self.dual_floor = math.inf  # bounds of subtrees discarded by the cutoff
        self.nodes_processed = 0
        self.lp_solves = 0
        self.probe_solves = 0
        self.tightenings = 0
        self.numerical_discards = 0
        self.trace: List[Dict[str, Any]] = []
        self.tighten_log: List[Dict[str, Any]] = []
        self.start = time.perf_counter()

    # -- helpers -----------------------------------------------------------

    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def obj_ub(self) -> float:
        return self.incumbent.objective if self.incumbent else math.inf

    def push(self, node: BnbNode) -> None:
        self.seq += 1
        node.seq = self.seq
        heapq.heappush(self.pool, node)

    def new_node(self, parent: BnbNode, side: str, var: int, alpha: float) -> BnbNode:
        self.next_id += 1
        return BnbNode(
            key=parent.bound if parent.bound is not None else -math.inf,
            seq=0,
            id=self.next_id,
            parent=parent.id,
            depth=parent.depth + 1,
            box=parent.box.child(var, side, alpha),
            branch_var=var,
            branch_point=alpha,
            branch_side=side,
        )

    def pool_min(self) -> float:
        return self.pool[0].key if self.pool else math.inf

    def z_lb(self, extra: float = math.inf) -> float:
        return min(self.pool_min(), self.dual_floor, extra)

    def cutoff(self) -> float:
        """Objective level at or above which a node cannot improve the final
        answer beyond the gap tolerance."""
        if self.incumbent is None:
            return math.inf
        z = self.incumbent.objective
        margin = self.config.gap_tol * abs(z) if z != 0.0 else self.config.abs_gap_tol
        return z - margin

    def gap_reached(self, z_lb: float) -> bool:
        if self.incumbent is None or not math.isfinite(z_lb):
            return False
        gap, is_abs = remaining_gap(self.incumbent.objective, z_lb)
        tol = self.config.abs_gap_tol if is_abs else 100.0 * self.config.gap_tol
        return gap <= tol

    def offer_incumbent(self, cand: Optional[Incumbent]) -> None:
        # re-validate through evaluate before accepting
        if cand is None:
            return
        if self.inst.max_violation(cand.x) > self.config.feas_tol:
            return
        if self.incumbent is None or cand.objective < self.incumbent.objective:
            self.incumbent = cand

    def solve_node_lp(self, node: BnbNode) -> lp.LpSolution:
        problem, _ = build_relaxation(self.inst, node.box)
        sol = lp.solve_lp(problem)
        self.lp_solves += 1
        return sol

    def child_solver(self):
        offset = self.inst.objective.constant

        def solve_child(var: int, sense: str, alpha: float, box: VarBox) -> float:
            problem, _ = child_relaxation(self.inst, box, var, sense, alpha)
            sol = lp.solve_lp(problem)
            self.lp_solves += 1
            self.probe_solves += 1
            if sol.status == lp.OPTIMAL:
                return sol.objective + offset
            if sol.status == lp.INFEASIBLE:
                return math.inf
            return math.nan

        return solve_child

    def record_trace(
        self,
        node: BnbNode,
        action: str,
        decision: Optional[BranchDecision],
        extra_bound: float = math.inf,
    ) -> None:
        if not self.config.trace:
            return
        entry: Dict[str, Any] = {
            "node": node.id,
            "depth": node.depth,
            "bound": node.bound,
            "action": action,
            "z_lb": _none_if_inf(self.z_lb(extra_bound)),
            "incumbent": self.incumbent.objective if self.incumbent else None,
        }
        if decision is not None:
            entry["branch_var"] = None if decision.var is None else decision.var + 1
            entry["branch_point"] = decision.alpha
            entry["score"] = _none_if_inf(decision.score)
            entry["box_lb"] = [float(v) for v in decision.box.lb]
            entry["box_ub"] = [float(v) for v in decision.box.ub]
        self.trace.append(entry)

    def record_tightenings(self, node: BnbNode, decision: BranchDecision) -> None:
        self.tightenings += len(decision.tighten_events)
        if not self.config.trace:
            return
        for ev in decision.tighten_events:
            self.tighten_log.append(
                {
                    "node": node.id,
                    "var": ev.var + 1,
                    "side": ev.side,
                    "alpha": ev.alpha,
                    "box_lb": [float(v) for v in ev.box_lb],
                    "box_ub": [float(v) for v in ev.box_ub],
                }
            )


def _none_if_inf(v: Optional[float]) -> Optional[float]:
    if v is None or not math.isfinite(v):
        return None
    return float(v)


def solve(inst: QcqpInstance, config: Optional[SolverConfig] = None) -> SolveReport:
    """Run branch and bound on the instance and return the solve report."""
    config = config or SolverConfig()
    config.validate()
    run = _Run(inst, config)
    offset = inst.objective.constant
    params = config.branch_params()

    # root relaxation, then the multi-start incumbent search seeded from it
    root = BnbNode(key=-math.inf, seq=0, id=0, parent=None, depth=0, box=inst.box.copy())
    root_sol = run.solve_node_lp(root)
    root_point = root_sol.x[: inst.n] if root_sol.status == lp.OPTIMAL else None
    run.offer_incumbent(
        root_incumbent(
            inst,
            budget=config.root_budget,
            seed=config.seed,
            lp_point=root_point,
            feas_tol=config.feas_tol,
        )
    )

    if root_sol.status == lp.INFEASIBLE:
        verdict = VERDICT_INFEASIBLE if run.incumbent is None else VERDICT_OPTIMAL
        return _final_report(run, verdict, exhausted=True)
    if root_sol.status != lp.OPTIMAL:
        # numerical trouble straight at the root: retry once, else give up
        root_sol = run.solve_node_lp(root)
        if root_sol.status != lp.OPTIMAL:
            run.numerical_discards += 1
            verdict = VERDICT_INFEASIBLE if run.incumbent is None else VERDICT_NUMERICAL
            return _final_report(run, verdict, exhausted=False)
    root.bound = root_sol.objective + offset
    root.key = root.bound
    root.x = root_sol.x[: inst.n].copy()
    root.w = root_sol.x[inst.n :].copy()
    run.push(root)

    solve_child = run.child_solver()
    verdict = None
    exhausted = False

    while True:
        if not run.pool:
            exhausted = True
            break
        # the root is always processed before any termination check fires, so
        # node counts start at 1 even when the incumbent is optimal up front
        if run.nodes_processed > 0:
            z_lb = run.z_lb()
            if run.gap_reached(z_lb):
                verdict = VERDICT_GAP
                break
            if run.nodes_processed >= config.node_cap:
                verdict = VERDICT_NODE_LIMIT
                break
            if run.elapsed() > config.time_limit:
                verdict = VERDICT_TIME_LIMIT
                break

        node = heapq.heappop(run.pool)

        if node.bound is None:
            sol = run.solve_node_lp(node)
            if sol.status == lp.INFEASIBLE:
                run.nodes_processed += 1
                run.record_trace(node, "prune_infeasible", None)
                continue
            if sol.status == lp.OPTIMAL:
                node.bound = sol.objective + offset
                node.x = sol.x[: inst.n].copy()
                node.w = sol.x[inst.n :].copy()
            else:
                if not node.retried:
                    node.retried = True
                    run.push(node)
                    run.record_trace(node, "requeue_numerical", None)
                else:
                    run.numerical_discards += 1
                    run.nodes_processed += 1
                    run.dual_floor = min(run.dual_floor, node.key - lp.LP_OPT_TOL)
                    run.record_trace(node, "discard_numerical", None)
                continue
            # lazy re-key: put the node back if it is no longer best
            if run.pool and node.bound > run.pool[0].key + 1e-9:
                node.key = node.bound
                run.push(node)
                continue

        run.nodes_processed += 1

        # periodic incumbent search from the node's relaxation point
        if run.nodes_processed % config.ub_frequency == 0 and node.x is not None:
            run.offer_incumbent(
                local_improve(inst, inst.box, node.x, feas_tol=config.feas_tol)
            )

        if node.bound >= run.cutoff() - PRUNE_TOL:
            run.dual_floor = min(run.dual_floor, node.bound)
            run.record_trace(node, "prune_bound", None)
            continue

        # an exact relaxation point that is feasible settles this subtree
        if node.x is not None and inst.max_violation(node.x) <= config.feas_tol:
            obj, _ = inst.evaluate(node.x)
            run.offer_incumbent(
                Incumbent(node.x.copy(), obj, inst.max_violation(node.x), tol=config.feas_tol)
            )
            if obj <= node.bound + PRUNE_TOL:
                run.dual_floor = min(run.dual_floor, node.bound)
                run.record_trace(node, "prune_exact", None)
                continue

        obj_ub = run.obj_ub()
        if config.rule == "esb":
            decision = esb_select(inst, node.box, obj_ub, node.bound, params, solve_child)
        elif config.rule == "basic":
            decision = basic_select(
                inst, node.box, obj_ub, node.bound, node.x, params, solve_child
            )
        else:
            decision = balance_select(inst, node.box, node.x, node.w, params)

        run.record_tightenings(node, decision)
        node.box = decision.box

        if decision.prune:
            # child relaxations on both sides certified the subtree above the
            # incumbent, so the incumbent level is a valid floor for it
            run.dual_floor = min(run.dual_floor, obj_ub)
            run.record_trace(node, "prune_rule", decision)
            continue
        if decision.var is None:
            # nothing left to split: the node bound is all we keep
            run.dual_floor = min(run.dual_floor, node.bound)
            run.record_trace(node, "prune_unbranchable", decision)
            continue

        run.record_trace(node, "branch", decision, extra_bound=node.bound)
        left = run.new_node(node, "<=", decision.var, decision.alpha)
        right = run.new_node(node, ">=", decision.var, decision.alpha)
        run.push(left)
        run.push(right)

    if verdict is None:  # pool exhausted
        if run.incumbent is None:
            verdict = VERDICT_INFEASIBLE
        else:
            z_star = run.incumbent.objective
            z_lb = min(run.dual_floor, z_star)
            if z_lb >= z_star - PRUNE_TOL * (1.0 + abs(z_star)):
                verdict = VERDICT_OPTIMAL
            elif run.gap_reached(z_lb):
                verdict = VERDICT_GAP
            else:
                verdict = VERDICT_NUMERICAL
    return _final_report(run, verdict, exhausted)


def _final_report(run: _Run, verdict: str, exhausted: bool) -> SolveReport:
    inst, config = run.inst, run.config
    z_star = run.incumbent.objective if run.incumbent else None

    if run.incumbent is None:
        z_lb = None
    elif exhausted:
        z_lb = min(run.dual_floor, z_star)
    else:
        z_lb = _none_if_inf(run.z_lb())

    gap_pct: Optional[float] = None
    gap_abs = False
    if z_star is not None and z_lb is not None:
        gap_pct, gap_abs = remaining_gap(z_star, z_lb)

    return SolveReport(
        instance=inst.name,
        rule=config.rule,
        verdict=verdict,
        z_star=z_star,
        z_lb=z_lb,
        gap_pct=gap_pct,
        gap_is_absolute=gap_abs,
        time_s=round(run.elapsed(), 6) if config.report_timing else None,
        nodes=run.nodes_processed,
        lp_solves=run.lp_solves,
        probe_solves=run.probe_solves,
        tightenings=run.tightenings,
        numerical_discards=run.numerical_discards,
        seed=config.seed,
        incumbent=[float(v) for v in run.incumbent.x] if run.incumbent else None,
        trace=run.trace if config.trace else None,
        tightening_log=run.tighten_log if config.trace else None,
    )
