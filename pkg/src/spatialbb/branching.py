"""Branching rules: extreme strong branching, basic strong branching, balance.

The extreme rule runs a per-variable binary search over candidate branching
points on each side of the split.  A probe whose child relaxation is
infeasible or lands above the incumbent both redirects the search and tightens
that variable's bound (left-side failures raise the lower bound, right-side
failures lower the upper bound); successful probes become branching-point
candidates.  After both searches every candidate gets the missing opposite
side solved, and the (variable, point) pair with the best product score wins.

Child solves are abstracted behind a callable so the search logic can be
driven by stub objective curves in tests:

    solve_child(var, sense, alpha, box) -> objective  (math.inf if infeasible,
                                                       math.nan on numerical
                                                       failure)

Objectives passed around here live in true-objective space, i.e. they include
the instance's constant offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .instance import QcqpInstance, VarBox
from .relaxation import envelope_rows

ChildSolver = Callable[[int, str, float, VarBox], float]

LEFT = "L"
RIGHT = "R"

_WIDTH_TOL = 1e-12


@dataclass
class BranchParams:
    iter_max: int = 4
    epsilon: float = 1e-6
    prune_tol: float = 1e-7
    basic_lambda: float = 0.25  # weight on the midpoint in the basic rule
    branch_all_vars: bool = False
    balance_grid: int = 65  # scan resolution of the balance rule


@dataclass
class TightenEvent:
    """One bound update: variable ``var`` moved to ``alpha`` on ``side``."""

    var: int
    side: str  # LEFT raises the lower bound, RIGHT lowers the upper bound
    alpha: float
    box_lb: np.ndarray  # working box snapshot taken before the update
    box_ub: np.ndarray


@dataclass
class SideSearch:
    """Binary-search state for one side of one variable.

    ``p1`` moves on failed probes (toward the surviving region), ``p2`` on
    successful ones; the next probe is always their midpoint.  ``objs`` maps
    every probed point to its child objective, with math.inf marking
    infeasible/above-incumbent children; ``cands`` lists the successful points.
    """

    p1: float
    p2: float
    cands: List[float] = field(default_factory=list)
    objs: Dict[float, float] = field(default_factory=dict)
    probes: List[float] = field(default_factory=list)


@dataclass
class CandidateRecord:
    var: int
    lo: float
    hi: float
    left: SideSearch
    right: SideSearch
    base_box: Optional[VarBox] = None  # box the variable's child solves used

    @classmethod
    def fresh(cls, var: int, lo: float, hi: float,
              base_box: Optional[VarBox] = None) -> "CandidateRecord":
        return cls(
            var=var,
            lo=lo,
            hi=hi,
            left=SideSearch(p1=lo, p2=hi),
            right=SideSearch(p1=hi, p2=lo),
            base_box=base_box,
        )


@dataclass
class BranchDecision:
    var: Optional[int]
    alpha: Optional[float]
    score: float
    box: VarBox  # node box with any tightenings applied
    prune: bool = False
    fallback: bool = False
    child_solves: int = 0
    tighten_events: List[TightenEvent] = field(default_factory=list)
    records: Dict[int, CandidateRecord] = field(default_factory=dict)
    fill_ins: List[Tuple[str, float]] = field(default_factory=list)


def branch_score(obj_l: float, obj_r: float, obj_p: float, epsilon: float) -> float:
    """Product score of the two child improvements, floored at epsilon."""
    return max(obj_l - obj_p, epsilon) * max(obj_r - obj_p, epsilon)


def binary_search_step(
    record: CandidateRecord,
    side: str,
    obj_ub: float,
    solve_child: ChildSolver,
    box: VarBox,
    prune_tol: float,
    events: Optional[List[TightenEvent]] = None,
) -> Optional[bool]:
    """One probe of the binary search on ``side``.

    Returns True if the probe succeeded (candidate recorded), False if it
    failed (pointer reversed, bound tightened), and None if the side is
    exhausted or the LP broke down numerically (nothing recorded, no pointer
    moved).
    """
    search = record.left if side == LEFT else record.right
    alpha = 0.5 * (search.p1 + search.p2)
    if alpha in search.objs:
        return None
    sense = "<=" if side == LEFT else ">="
    obj = solve_child(record.var, sense, alpha, box)
    if math.isnan(obj):
        return None
    search.probes.append(alpha)
    failed = math.isinf(obj) or obj > obj_ub + prune_tol
    if failed:
        search.p1 = alpha
        search.objs[alpha] = math.inf
        if events is not None:
            events.append(
                TightenEvent(record.var, side, alpha, box.lb.copy(), box.ub.copy())
            )
        if side == LEFT:
            record.lo = max(record.lo, alpha)
        else:
            record.hi = min(record.hi, alpha)
    else:
        search.p2 = alpha
        search.objs[alpha] = obj
        search.cands.append(alpha)
    return not failed


def _candidate_vars(inst: QcqpInstance, box: VarBox, params: BranchParams) -> List[int]:
    """Variables eligible for branching: by default only those that occur in a
    quadratic pair (splitting a purely linear variable tightens no envelope)."""
    base = range(inst.n) if params.branch_all_vars else inst.quadratic_vars()
    return [i for i in base if box.ub[i] - box.lb[i] > _WIDTH_TOL]


def _fallback_decision(
    inst: QcqpInstance, box: VarBox, params: BranchParams
) -> Optional[Tuple[int, float]]:
    """Widest quadratic-pair variable at its midpoint; None if nothing is wide
    enough to split."""
    cands = _candidate_vars(inst, box, params)
    if not cands:
        return None
    widths = box.ub - box.lb
    var = max(cands, key=lambda i: (widths[i], -i))
    return var, 0.5 * (box.lb[var] + box.ub[var])


def esb_select(
    inst: QcqpInstance,
    box: VarBox,
    obj_ub: float,
    obj_p: float,
    params: BranchParams,
    solve_child: ChildSolver,
) -> BranchDecision:
    """Extreme strong branching: joint (variable, point) selection by binary
    search with bound tightening as a byproduct.

    Bound updates found while searching one variable steer the remaining
    probes of that variable through the pointers and are applied to the
    working box before the next variable is searched; each variable's child
    relaxations are built against the box as it stood when its search began.
    """
    working = box.copy()
    events: List[TightenEvent] = []
    records: Dict[int, CandidateRecord] = {}
    fill_ins: List[Tuple[str, float]] = []
    solves = 0
    prune = False

    def counted(var: int, sense: str, alpha: float, b: VarBox) -> float:
        nonlocal solves
        solves += 1
        return solve_child(var, sense, alpha, b)

    for var in _candidate_vars(inst, working, params):
        base = working.copy()
        rec = CandidateRecord.fresh(var, base.lb[var], base.ub[var], base_box=base)
        records[var] = rec
        for side in (LEFT, RIGHT):
            for _ in range(params.iter_max):
                step = binary_search_step(
                    rec, side, obj_ub, counted, base, params.prune_tol, events
                )
                if step is None:
                    break

        # make both child objectives available for every candidate point
        for alpha in sorted(set(rec.left.cands) | set(rec.right.cands)):
            for side, search, sense in (
                (LEFT, rec.left, "<="),
                (RIGHT, rec.right, ">="),
            ):
                if alpha in search.objs:
                    continue
                obj = counted(var, sense, alpha, base)
                if math.isnan(obj):
                    continue
                fill_ins.append((side, alpha))
                if math.isinf(obj) or obj > obj_ub + params.prune_tol:
                    search.objs[alpha] = math.inf
                    events.append(
                        TightenEvent(var, side, alpha, base.lb.copy(), base.ub.copy())
                    )
                    if side == LEFT:
                        rec.lo = max(rec.lo, alpha)
                    else:
                        rec.hi = min(rec.hi, alpha)
                else:
                    search.objs[alpha] = obj

        both_failed = any(
            math.isinf(rec.left.objs.get(a, 0.0)) and math.isinf(rec.right.objs.get(a, 0.0))
            for a in rec.left.objs
        )
        working.lb[var] = max(working.lb[var], rec.lo)
        working.ub[var] = min(working.ub[var], rec.hi)
        if both_failed or working.lb[var] > working.ub[var]:
            prune = True
            break

    best: Optional[Tuple[float, int, float]] = None  # (score, var, alpha)
    if not prune:
        for var, rec in records.items():
            for alpha in sorted(set(rec.left.cands) | set(rec.right.cands)):
                obj_l = rec.left.objs.get(alpha, math.inf)
                obj_r = rec.right.objs.get(alpha, math.inf)
                if math.isinf(obj_l) or math.isinf(obj_r):
                    continue
                if not (working.lb[var] < alpha < working.ub[var]):
                    continue
                score = branch_score(obj_l, obj_r, obj_p, params.epsilon)
                key = (-score, var, alpha)
                if best is None or key < (-best[0], best[1], best[2]):
                    best = (score, var, alpha)

    decision = BranchDecision(
        var=None,
        alpha=None,
        score=-math.inf,
        box=working,
        prune=prune,
        child_solves=solves,
        tighten_events=events,
        records=records,
        fill_ins=fill_ins,
    )
    if prune:
        return decision
    if best is not None:
        decision.score, decision.var, decision.alpha = best
        return decision
    fb = _fallback_decision(inst, working, params)
    if fb is None:
        return decision  # nothing left to split; caller resolves the node
    decision.var, decision.alpha = fb
    decision.fallback = True
    return decision


def basic_select(
    inst: QcqpInstance,
    box: VarBox,
    obj_ub: float,
    obj_p: float,
    x_star: np.ndarray,
    params: BranchParams,
    solve_child: ChildSolver,
) -> BranchDecision:
    """Basic spatial strong branching: one preset point per variable.

    The point is a weighted combination of the interval midpoint and the
    node's relaxed solution, and both children are solved and scored.  No
    bound tightening happens here.
    """
    lam = params.basic_lambda
    solves = 0
    best: Optional[Tuple[float, int, float]] = None
    any_usable = False

    for var in _candidate_vars(inst, box, params):
        lo, hi = box.lb[var], box.ub[var]
        mid = 0.5 * (lo + hi)
        alpha = lam * mid + (1.0 - lam) * float(x_star[var])
        margin = 1e-6 * (hi - lo)
        alpha = min(max(alpha, lo + margin), hi - margin)

        vals = {}
        for sense, side in (("<=", LEFT), (">=", RIGHT)):
            obj = solve_child(var, sense, alpha, box)
            solves += 1
            if math.isnan(obj):
                obj = math.inf
            elif not math.isinf(obj) and obj > obj_ub + params.prune_tol:
                obj = math.inf
            vals[side] = obj

        if math.isinf(vals[LEFT]) and math.isinf(vals[RIGHT]):
            continue  # unusable pair
        any_usable = True
        if math.isinf(vals[LEFT]) or math.isinf(vals[RIGHT]):
            # one child is gone: credit the largest useful improvement
            capped = obj_ub if math.isfinite(obj_ub) else obj_p + 1e12 * (1 + abs(obj_p))
            vals = {s: min(v, capped) for s, v in vals.items()}
        score = branch_score(vals[LEFT], vals[RIGHT], obj_p, params.epsilon)
        key = (-score, var, alpha)
        if best is None or key < (-best[0], best[1], best[2]):
            best = (score, var, alpha)

    decision = BranchDecision(
        var=None,
        alpha=None,
        score=-math.inf,
        box=box.copy(),
        child_solves=solves,
    )
    if best is not None:
        decision.score, decision.var, decision.alpha = best
        return decision
    if any_usable is False and solves > 0:
        decision.prune = True
        return decision
    fb = _fallback_decision(inst, box, params)
    if fb is not None:
        decision.var, decision.alpha = fb
        decision.fallback = True
    return decision


def _envelope_violation(
    pairs: List[Tuple[int, int]],
    x: np.ndarray,
    w: np.ndarray,
    box: VarBox,
) -> float:
    """Largest violation of any envelope row by the lifted point (x, w)."""
    worst = 0.0
    for k, (i, j) in enumerate(pairs):
        for xi_c, xj_c, sense, rhs in envelope_rows(
            i, j, box.lb[i], box.ub[i], box.lb[j], box.ub[j]
        ):
            lhs = w[k] + xi_c * x[i] + (xj_c * x[j] if j != i else 0.0)
            viol = rhs - lhs if sense == ">=" else lhs - rhs
            worst = max(worst, viol)
    return worst


def balance_select(
    inst: QcqpInstance,
    box: VarBox,
    x_star: np.ndarray,
    w_star: np.ndarray,
    params: BranchParams,
) -> BranchDecision:
    """Balance rule for bilinear problems: no child solves, no tightening.

    Takes the pair with the largest product violation |w - x_i x_j| and, over
    the two variables of that pair, scans candidate points to equalize the
    envelope violations of the node's relaxed solution against the two child
    boxes.
    """
    pairs = inst.quadratic_pairs()
    decision = BranchDecision(var=None, alpha=None, score=-math.inf, box=box.copy())
    if not pairs:
        fb = _fallback_decision(inst, box, params)
        if fb is not None:
            decision.var, decision.alpha = fb
            decision.fallback = True
        return decision

    gaps = np.array([abs(w_star[k] - x_star[i] * x_star[j]) for k, (i, j) in enumerate(pairs)])
    k_star = int(np.argmax(gaps))
    if gaps[k_star] <= 1e-9:
        fb = _fallback_decision(inst, box, params)
        if fb is not None:
            decision.var, decision.alpha = fb
            decision.fallback = True
        return decision

    i, j = pairs[k_star]
    scan_vars = [i] if i == j else [i, j]
    best: Optional[Tuple[float, int, float]] = None  # (imbalance, var, alpha)
    for var in scan_vars:
        lo, hi = box.lb[var], box.ub[var]
        if hi - lo <= _WIDTH_TOL:
            continue
        grid = np.linspace(lo, hi, params.balance_grid)[1:-1]
        for alpha in grid:
            v_l = _envelope_violation(pairs, x_star, w_star, box.child(var, "<=", alpha))
            v_r = _envelope_violation(pairs, x_star, w_star, box.child(var, ">=", alpha))
            imbalance = abs(v_l - v_r)
            key = (imbalance, var, alpha)
            if best is None or key < best:
                best = key
    if best is None:
        fb = _fallback_decision(inst, box, params)
        if fb is not None:
            decision.var, decision.alpha = fb
            decision.fallback = True
        return decision
    decision.score = -best[0]
    decision.var = best[1]
    decision.alpha = float(best[2])
    return decision
