"""Instance generators and the multi-rule comparison harness.

Generators are pure functions of their parameters and seed.  ``gen_bbp``
emits bilinear bipartite instances (every product couples a left-group and a
right-group variable); ``gen_pooling_toy`` emits a small single-pool blending
model whose only nonlinearity is pool-quality times flow.  Both calibrate
constraint right-hand sides around a sampled interior point so the feasible
set is never empty, and both self-check that point before returning.

The harness runs a set of instances under several branching rules and renders
the results as CSV: one row per run, a solve-time summary bucketed by time
range, and a remaining-gap summary over the instances some rule failed to
close.  Gaps are normalized by the best incumbent found by any rule on that
instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .engine import (
    SolveReport,
    SolverConfig,
    VERDICT_GAP,
    VERDICT_OPTIMAL,
    remaining_gap,
    solve,
)
from .instance import QcqpInstance, QuadConstraint, QuadExpr, VarBox

TIME_BUCKETS: Tuple[Tuple[float, float], ...] = ((0, 10), (10, 100), (100, 1000), (1000, 3600))
GEO_TIME_FLOOR = 0.01  # seconds; floor for zeros in geometric means
GEO_GAP_FLOOR = 0.001  # percent


def gen_bbp(n_left: int, n_right: int, density: float, seed: int) -> QcqpInstance:
    """Random bilinear bipartite instance.

    Quadratic terms only couple the first ``n_left`` variables with the last
    ``n_right``; coefficients are uniform in [-1, 1]; each constraint is
    calibrated to hold with slack at a sampled interior point.
    """
    if n_left < 1 or n_right < 1:
        raise ValueError("group sizes must be >= 1")
    if not (0.0 < density <= 1.0):
        raise ValueError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    n = n_left + n_right

    lb = rng.uniform(-1.0, 0.0, n)
    ub = lb + rng.uniform(0.5, 1.5, n)

    cross = [(i, n_left + j) for i in range(n_left) for j in range(n_right)]

    def pick_pairs() -> Dict[Tuple[int, int], float]:
        mask = rng.random(len(cross)) < density
        if not mask.any():
            mask[int(rng.integers(0, len(cross)))] = True
        return {cross[k]: float(rng.uniform(-1.0, 1.0)) for k in np.nonzero(mask)[0]}

    obj_pairs = pick_pairs()
    obj_linear = rng.uniform(-1.0, 1.0, n)
    obj_const = float(rng.uniform(8.0, 10.0))
    objective = QuadExpr(obj_pairs, obj_linear, obj_const)

    # moderate slacks let constraints bind at some optima (pulling them off
    # the envelope-exact box vertices) while keeping the instances within
    # reach of a multi-start local search
    anchor = lb + (0.25 + 0.5 * rng.random(n)) * (ub - lb)
    constraints: List[QuadConstraint] = []
    for _ in range(int(rng.integers(2, 5))):
        pairs = pick_pairs()
        linear = rng.uniform(-1.0, 1.0, n)
        lhs = QuadExpr(pairs, linear, 0.0).value(anchor)
        rhs = lhs + float(rng.uniform(0.1, 0.6))
        constraints.append(QuadConstraint(pairs, linear, rhs))

    name = f"bbp_{n_left}x{n_right}_d{density:g}_s{seed}"
    inst = QcqpInstance(n, objective, constraints, VarBox(lb, ub), name)
    _, slacks = inst.evaluate(anchor)
    assert inst.box.contains(anchor) and bool(np.all(slacks > 0.0)), (
        "generator calibration point must be strictly feasible"
    )
    return inst


def gen_pooling_toy(kind: str = "haverly-like", seed: int = 0) -> QcqpInstance:
    """Single-pool blending toy with four variables (q, y1, y2, z1).

    Two sources of qualities qa < qb feed one pool at quality q; the pool
    serves two products with quality caps, and a direct stream z1 of quality
    qc serves product 1.  Pool cost per unit of flow is linear in q, which
    makes the objective bilinear in (q, flow).  ``kind="degenerate"`` sets
    qa == qb, so q is fixed and the relaxation is exact at the root.
    """
    if kind not in ("haverly-like", "degenerate"):
        raise ValueError(f"unknown pooling kind {kind!r}")
    rng = np.random.default_rng(seed)

    qa = float(rng.uniform(1.0, 2.0))
    spread = 0.0 if kind == "degenerate" else float(rng.uniform(0.8, 1.8))
    qb = qa + spread
    ca = float(rng.uniform(10.0, 16.0))
    cb = ca - float(rng.uniform(3.0, 8.0))
    qc = float(rng.uniform(qa, qb)) if spread else qa
    cc = float(rng.uniform(min(ca, cb), max(ca, cb)))
    qs1 = qa + spread * float(rng.uniform(0.15, 0.45))
    qs2 = qa + spread * float(rng.uniform(0.40, 0.80))
    p1 = float(rng.uniform(14.0, 20.0))
    p2 = float(rng.uniform(10.0, 16.0))
    d1 = float(rng.uniform(0.5, 1.5))
    d2 = float(rng.uniform(0.5, 1.5))
    cap = float(rng.uniform(0.8, 1.8))
    offset = float(rng.uniform(20.0, 30.0))

    # per-unit pool cost is linear in quality: rate(q) = lam0 + lam1*q
    if spread:
        lam1 = (ca - cb) / (qa - qb)
        lam0 = cb - lam1 * qb
    else:
        lam1, lam0 = 0.0, ca

    # variables: 0=q, 1=y1 (pool->prod1), 2=y2 (pool->prod2), 3=z1 (direct->prod1)
    n = 4
    lb = np.array([qa, 0.0, 0.0, 0.0])
    ub = np.array([qb, d1, d2, d1])

    obj_pairs = {(0, 1): lam1, (0, 2): lam1} if lam1 else {}
    obj_linear = np.array([0.0, lam0 - p1, lam0 - p2, cc - p1])
    objective = QuadExpr(obj_pairs, obj_linear, offset)

    constraints = [
        # product 1 quality:  q*y1 + qc*z1 <= qs1*(y1 + z1)
        QuadConstraint({(0, 1): 1.0}, np.array([0.0, -qs1, 0.0, qc - qs1]), 0.0),
        # product 2 quality:  q*y2 <= qs2*y2
        QuadConstraint({(0, 2): 1.0}, np.array([0.0, 0.0, -qs2, 0.0]), 0.0),
        # product 1 demand and pool capacity
        QuadConstraint({}, np.array([0.0, 1.0, 0.0, 1.0]), d1),
        QuadConstraint({}, np.array([0.0, 1.0, 1.0, 0.0]), cap),
    ]

    name = f"pool_{kind}_s{seed}"
    inst = QcqpInstance(n, objective, constraints, VarBox(lb, ub), name)
    anchor = np.array([0.5 * (qa + qb), 0.0, 0.0, 0.0])
    assert inst.is_feasible(anchor, tol=1e-12), "zero-flow point must be feasible"
    return inst


@dataclass
class RunRecord:
    """One (instance, rule) result row; gap is normalized by the best
    incumbent any rule found on that instance."""

    instance: str
    rule: str
    verdict: str
    gap_pct: Optional[float]
    time_s: float
    nodes: int
    lp_solves: int
    tightenings: int
    seed: int

    @property
    def solved(self) -> bool:
        return self.verdict in (VERDICT_OPTIMAL, VERDICT_GAP)


def run_comparison(
    instances: Sequence[QcqpInstance],
    rules: Sequence[str],
    config: Optional[SolverConfig] = None,
) -> List[RunRecord]:
    """Solve every instance under every rule and normalize gaps per instance."""
    config = config or SolverConfig()
    reports: Dict[str, Dict[str, SolveReport]] = {}
    for inst in instances:
        reports[inst.name] = {}
        for rule in rules:
            reports[inst.name][rule] = solve(inst, replace(config, rule=rule))

    records: List[RunRecord] = []
    for inst in instances:
        by_rule = reports[inst.name]
        best_objs = [r.z_star for r in by_rule.values() if r.z_star is not None]
        z_best = min(best_objs) if best_objs else None
        for rule in rules:
            rep = by_rule[rule]
            if z_best is not None and rep.z_lb is not None:
                gap, _ = remaining_gap(z_best, rep.z_lb)
            else:
                gap = None
            records.append(
                RunRecord(
                    instance=inst.name,
                    rule=rule,
                    verdict=rep.verdict,
                    gap_pct=gap,
                    time_s=rep.time_s if rep.time_s is not None else 0.0,
                    nodes=rep.nodes,
                    lp_solves=rep.lp_solves,
                    tightenings=rep.tightenings,
                    seed=rep.seed,
                )
            )
    return records


def arithmetic_mean(values: Sequence[float]) -> Optional[float]:
    vals = list(values)
    return sum(vals) / len(vals) if vals else None


def geometric_mean(values: Sequence[float], floor: float) -> Optional[float]:
    """Geometric mean with sub-floor values raised to the floor."""
    vals = [max(float(v), floor) for v in values]
    if not vals:
        return None
    return float(math.exp(sum(math.log(v) for v in vals) / len(vals)))


def summarize_times(records: Sequence[RunRecord], rules: Sequence[str]) -> List[dict]:
    """Solved-run counts and mean solve times per rule, bucketed by time range."""
    out: List[dict] = []
    buckets = list(TIME_BUCKETS) + [None]  # None == all
    for bucket in buckets:
        row: dict = {"range": "all" if bucket is None else f"({bucket[0]},{bucket[1]}]"}
        for rule in rules:
            times = [
                r.time_s
                for r in records
                if r.rule == rule
                and r.solved
                and (bucket is None or bucket[0] < r.time_s <= bucket[1])
            ]
            row[f"{rule}_n_opt"] = len(times)
            row[f"{rule}_t_ari"] = arithmetic_mean(times)
            row[f"{rule}_t_geo"] = geometric_mean(times, GEO_TIME_FLOOR)
        out.append(row)
    return out


def summarize_gaps(records: Sequence[RunRecord], rules: Sequence[str]) -> List[dict]:
    """Mean remaining gaps per rule over instances unsolved by at least one rule."""
    by_instance: Dict[str, List[RunRecord]] = {}
    for r in records:
        by_instance.setdefault(r.instance, []).append(r)
    unsolved = sorted(
        name for name, recs in by_instance.items() if any(not r.solved for r in recs)
    )
    row: dict = {"n_unsolved": len(unsolved)}
    for rule in rules:
        gaps = [
            r.gap_pct
            for name in unsolved
            for r in by_instance[name]
            if r.rule == rule and r.gap_pct is not None
        ]
        row[f"{rule}_gap_ari"] = arithmetic_mean(gaps)
        row[f"{rule}_gap_geo"] = geometric_mean(gaps, GEO_GAP_FLOOR)
    return [row]


RUNS_HEADER = [
    "instance",
    "rule",
    "verdict",
    "gap_pct",
    "time_s",
    "nodes",
    "lp_solves",
    "tightenings",
    "seed",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def runs_csv(records: Sequence[RunRecord]) -> str:
    lines = [",".join(RUNS_HEADER)]
    for r in records:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.instance,
                    r.rule,
                    r.verdict,
                    r.gap_pct,
                    r.time_s,
                    r.nodes,
                    r.lp_solves,
                    r.tightenings,
                    r.seed,
                )
            )
        )
    return "\n".join(lines) + "\n"


def summary_csv(rows: Sequence[dict], note: str) -> str:
    if not rows:
        return f"# {note}\n"
    header = list(rows[0].keys())
    lines = [f"# {note}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[k]) for k in header))
    return "\n".join(lines) + "\n"


def compare_to_csv(
    instances: Sequence[QcqpInstance],
    rules: Sequence[str],
    config: Optional[SolverConfig] = None,
) -> Dict[str, str]:
    """Run the comparison and render all three CSV tables."""
    records = run_comparison(instances, rules, config)
    note_t = f"geometric-mean floor: {GEO_TIME_FLOOR} s"
    note_g = f"geometric-mean floor: {GEO_GAP_FLOOR} %"
    return {
        "runs.csv": runs_csv(records),
        "summary_times.csv": summary_csv(summarize_times(records, rules), note_t),
        "summary_gaps.csv": summary_csv(summarize_gaps(records, rules), note_g),
    }
