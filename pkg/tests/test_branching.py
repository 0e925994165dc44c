import math

import numpy as np
import pytest

from spatialbb.branching import (
    BranchParams,
    CandidateRecord,
    balance_select,
    basic_select,
    binary_search_step,
    branch_score,
    esb_select,
)
from spatialbb.bench import gen_bbp
from spatialbb.instance import QcqpInstance, QuadExpr, VarBox
from spatialbb.relaxation import child_relaxation, build_relaxation
from spatialbb import lp


def one_var_instance(lo=0.0, hi=1.0):
    return QcqpInstance(
        1,
        QuadExpr({(0, 0): 1.0}, np.zeros(1)),
        [],
        VarBox(np.array([lo]), np.array([hi])),
        "one",
    )


# Stub objective curves for a single variable on [0, 1] with obj_ub = 6:
# the left search probes 0.5, 0.25 (fails), 0.375, 0.3125 and the right
# search probes 0.5, 0.75 (fails), 0.625 (fails), 0.5625.
STUB_L = {0.5: 2.5, 0.375: 4.0, 0.3125: 5.5, 0.25: 7.8, 0.5625: 2.0, 1.0: 0.0}
STUB_R = {0.5: 3.0, 0.5625: 4.5, 0.625: 6.2, 0.75: 7.5, 0.3125: 1.0, 0.375: 1.5, 0.0: 0.0}


def stub_solver(calls=None):
    def solve_child(var, sense, alpha, box):
        if calls is not None:
            calls.append((sense, alpha))
        return STUB_L[alpha] if sense == "<=" else STUB_R[alpha]

    return solve_child


def test_branch_score_examples():
    assert branch_score(2.0, 3.0, 1.0, 1e-6) == 2.0
    assert branch_score(1.0, 3.0, 1.0, 1e-6) == 1e-6 * 2.0
    assert branch_score(1.0, 1.0, 1.0, 1e-6) == 1e-12


def test_single_variable_search_trace():
    """Hand-worked stub trace: probe order, tightened bounds, candidate set,
    fill-in solves and the selected point are all pinned exactly."""
    inst = one_var_instance()
    d = esb_select(inst, inst.box, obj_ub=6.0, obj_p=0.0,
                   params=BranchParams(iter_max=4), solve_child=stub_solver())
    rec = d.records[0]
    assert rec.left.probes == [0.5, 0.25, 0.375, 0.3125]
    assert rec.right.probes == [0.5, 0.75, 0.625, 0.5625]
    assert (d.box.lb[0], d.box.ub[0]) == (0.25, 0.625)
    assert sorted(set(rec.left.cands) | set(rec.right.cands)) == [0.3125, 0.375, 0.5, 0.5625]
    assert sorted(d.fill_ins) == [("L", 0.5625), ("R", 0.3125), ("R", 0.375)]
    assert d.var == 0 and d.alpha == 0.5625
    assert d.score == pytest.approx(2.0 * 4.5)
    assert not d.prune and not d.fallback


def test_left_failures_walk_lower_bound_up():
    inst = one_var_instance()
    seen = []

    def always_fail_left(var, sense, alpha, box):
        seen.append((sense, alpha))
        return 100.0 if sense == "<=" else 0.0

    d = esb_select(inst, inst.box, obj_ub=6.0, obj_p=0.0,
                   params=BranchParams(iter_max=4), solve_child=always_fail_left)
    rec = d.records[0]
    assert rec.left.probes == [0.5, 0.75, 0.875, 0.9375]
    assert rec.lo == 0.9375  # each failure raised the bound to its probe


def test_prune_when_both_sides_fail_at_same_point():
    inst = one_var_instance()
    d = esb_select(inst, inst.box, obj_ub=6.0, obj_p=0.0,
                   params=BranchParams(iter_max=4),
                   solve_child=lambda *a: 100.0)
    assert d.prune
    # lb walked up past ub: first left failure at .5, first right failure at .5
    assert d.box.lb[0] >= d.box.ub[0] or d.prune


def test_degenerate_interval_single_probe():
    rec = CandidateRecord.fresh(0, 0.5, 0.5)
    box = VarBox(np.array([0.5]), np.array([0.5]))
    calls = []

    def solver(var, sense, alpha, box_):
        calls.append(alpha)
        return 1.0

    first = binary_search_step(rec, "L", 6.0, solver, box, 1e-7)
    again = binary_search_step(rec, "L", 6.0, solver, box, 1e-7)
    assert first is True and again is None
    assert calls == [0.5]
    assert (rec.left.p1, rec.left.p2) == (0.5, 0.5)


def test_pointer_interval_halves_each_step():
    """After k successful probes the unexplored interval has width (ub-lb)/2^k."""
    inst = one_var_instance()
    d = esb_select(inst, inst.box, obj_ub=math.inf, obj_p=0.0,
                   params=BranchParams(iter_max=6),
                   solve_child=lambda var, sense, alpha, box: 1.0)
    rec = d.records[0]
    assert abs(rec.left.p2 - rec.left.p1) == pytest.approx(1.0 / 2**6)
    assert abs(rec.right.p2 - rec.right.p1) == pytest.approx(1.0 / 2**6)


def test_numerical_probe_is_a_conservative_skip():
    inst = one_var_instance()

    def flaky(var, sense, alpha, box):
        return math.nan if sense == "<=" else 2.0

    d = esb_select(inst, inst.box, obj_ub=6.0, obj_p=0.0,
                   params=BranchParams(iter_max=4), solve_child=flaky)
    rec = d.records[0]
    assert rec.left.probes == []  # nothing recorded, no pointer motion
    assert rec.lo == 0.0 and len(rec.right.probes) == 4


def real_child_solver(inst):
    offset = inst.objective.constant

    def solve_child(var, sense, alpha, box):
        problem, _ = child_relaxation(inst, box, var, sense, alpha)
        sol = lp.solve_lp(problem)
        if sol.status == lp.OPTIMAL:
            return sol.objective + offset
        if sol.status == lp.INFEASIBLE:
            return math.inf
        return math.nan

    return solve_child


def node_objective(inst):
    problem, _ = build_relaxation(inst, inst.box)
    sol = lp.solve_lp(problem)
    assert sol.status == lp.OPTIMAL
    return sol.objective + inst.objective.constant, sol


def test_esb_candidates_are_sound_and_curves_monotone():
    for seed in range(4):
        inst = gen_bbp(1, 2, 1.0, seed)
        obj_p, _ = node_objective(inst)
        obj_ub = obj_p + 0.4  # an artificial incumbent level to force failures
        d = esb_select(inst, inst.box, obj_ub, obj_p, BranchParams(),
                       real_child_solver(inst))
        for rec in d.records.values():
            for a in rec.left.cands:
                assert rec.left.objs[a] <= obj_ub + 1e-7
            for a in rec.right.cands:
                assert rec.right.objs[a] <= obj_ub + 1e-7
            left = sorted((a, v) for a, v in rec.left.objs.items() if math.isfinite(v))
            for (a1, v1), (a2, v2) in zip(left, left[1:]):
                assert v2 <= v1 + 1e-7  # obj_L non-increasing in alpha
            right = sorted((a, v) for a, v in rec.right.objs.items() if math.isfinite(v))
            for (a1, v1), (a2, v2) in zip(right, right[1:]):
                assert v2 >= v1 - 1e-7  # obj_R non-decreasing in alpha


def test_esb_argmax_matches_rescored_candidates():
    """Re-score every generated candidate with fresh child solves against the
    box snapshot its variable search used; the chosen pair must be the argmax
    under the same tie-breaking."""
    for seed in (0, 3):
        inst = gen_bbp(2, 1, 1.0, seed)
        obj_p, _ = node_objective(inst)
        params = BranchParams()
        d = esb_select(inst, inst.box, math.inf, obj_p, params, real_child_solver(inst))
        assert d.var is not None and not d.fallback
        solver = real_child_solver(inst)
        best = None
        for var, rec in d.records.items():
            for alpha in sorted(set(rec.left.cands) | set(rec.right.cands)):
                if not (d.box.lb[var] < alpha < d.box.ub[var]):
                    continue
                ol = solver(var, "<=", alpha, rec.base_box)
                orr = solver(var, ">=", alpha, rec.base_box)
                if not (math.isfinite(ol) and math.isfinite(orr)):
                    continue
                score = branch_score(ol, orr, obj_p, params.epsilon)
                key = (-score, var, alpha)
                if best is None or key < best:
                    best = key
        assert best is not None
        assert (d.var, d.alpha) == (best[1], best[2])
        assert d.score == pytest.approx(-best[0], rel=1e-9)


def test_basic_rule_midpoint_and_relaxed_solution_weights():
    inst = one_var_instance()
    calls = []
    params = BranchParams(basic_lambda=1.0)
    d = basic_select(inst, inst.box, 6.0, 0.0, np.array([0.8]), params, stub_solver(calls))
    assert d.alpha == 0.5  # lambda=1 pins the midpoint
    assert d.box.lb[0] == 0.0 and d.box.ub[0] == 1.0  # never tightens

    params = BranchParams(basic_lambda=0.0)
    d = basic_select(inst, inst.box, 6.0, 0.0, np.array([0.3125]), params,
                     stub_solver())
    assert d.alpha == 0.3125  # lambda=0 takes the interior relaxed solution


def test_basic_rule_on_stub_curves():
    inst = one_var_instance()
    params = BranchParams(basic_lambda=0.5)
    d = basic_select(inst, inst.box, 6.0, 0.0, np.array([0.5]), params, stub_solver())
    assert d.alpha == 0.5
    assert d.score == pytest.approx(2.5 * 3.0)
    assert d.child_solves == 2


def test_basic_rule_prunes_when_every_pair_fails():
    inst = one_var_instance()
    d = basic_select(inst, inst.box, 6.0, 0.0, np.array([0.5]), BranchParams(),
                     lambda *a: math.inf)
    assert d.prune


def test_balance_zero_violation_falls_back():
    inst = one_var_instance()
    x = np.array([0.5])
    w = np.array([0.25])  # exact product
    d = balance_select(inst, inst.box, x, w, BranchParams())
    assert d.fallback
    assert d.alpha == 0.5  # widest-variable midpoint
    assert d.box.lb[0] == 0.0 and d.box.ub[0] == 1.0


def test_balance_symmetric_case_picks_center():
    inst = QcqpInstance(
        2,
        QuadExpr({(0, 1): 1.0}, np.zeros(2)),
        [],
        VarBox(np.zeros(2), np.ones(2)),
        "sym",
    )
    x = np.array([0.5, 0.5])
    w = np.array([0.4])  # violated product, symmetric geometry
    d = balance_select(inst, inst.box, x, w, BranchParams())
    assert d.alpha == pytest.approx(0.5)
    assert not d.prune and d.child_solves == 0


def test_balance_scan_is_its_own_oracle():
    """Re-evaluating the scan must reproduce the chosen minimizer."""
    from spatialbb.branching import _envelope_violation

    for seed in (0, 1):
        inst = gen_bbp(2, 2, 1.0, seed)
        problem, rmap = build_relaxation(inst, inst.box)
        sol = lp.solve_lp(problem)
        assert sol.status == lp.OPTIMAL
        x, w = sol.x[: inst.n], sol.x[inst.n :]
        params = BranchParams()
        d = balance_select(inst, inst.box, x, w, params)
        if d.fallback:
            continue
        pairs = inst.quadratic_pairs()
        gaps = [abs(w[k] - x[i] * x[j]) for k, (i, j) in enumerate(pairs)]
        i, j = pairs[int(np.argmax(gaps))]
        best = None
        for var in ([i] if i == j else [i, j]):
            lo, hi = inst.box.lb[var], inst.box.ub[var]
            for alpha in np.linspace(lo, hi, params.balance_grid)[1:-1]:
                v_l = _envelope_violation(pairs, x, w, inst.box.child(var, "<=", alpha))
                v_r = _envelope_violation(pairs, x, w, inst.box.child(var, ">=", alpha))
                key = (abs(v_l - v_r), var, alpha)
                if best is None or key < best:
                    best = key
        assert (d.var, d.alpha) == (best[1], best[2])


def test_branch_all_vars_flag_widens_candidates():
    # a linear variable occurs in no product; only the flag makes it a candidate
    inst = QcqpInstance(
        2,
        QuadExpr({(0, 0): 1.0}, np.array([0.0, 1.0])),
        [],
        VarBox(np.zeros(2), np.ones(2)),
        "mix",
    )
    d = esb_select(inst, inst.box, math.inf, 0.0, BranchParams(),
                   lambda var, sense, alpha, box: 1.0)
    assert set(d.records) == {0}
    d = esb_select(inst, inst.box, math.inf, 0.0, BranchParams(branch_all_vars=True),
                   lambda var, sense, alpha, box: 1.0)
    assert set(d.records) == {0, 1}
