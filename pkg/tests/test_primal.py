import json

import numpy as np
import pytest

import spatialbb.primal as primal
from spatialbb.bench import gen_bbp, gen_pooling_toy
from spatialbb.instance import parse_instance
from spatialbb.primal import Incumbent, local_improve, root_incumbent

from oracles import profile_grid_min


def bilinear_toy():
    doc = {
        "name": "xy",
        "n": 2,
        "objective": {"pairs": [[1, 2, 1.0]], "linear": [0.0, 0.0]},
        "constraints": [],
        "lb": [0.0, 0.0],
        "ub": [1.0, 1.0],
    }
    return parse_instance(json.dumps(doc))


def infeasible_toy():
    doc = {
        "name": "bad",
        "n": 1,
        "objective": {"pairs": [], "linear": [1.0]},
        "constraints": [{"pairs": [[1, 1, 1.0]], "linear": [0.0], "rhs": -1.0, "sense": "<="}],
        "lb": [-1.0],
        "ub": [1.0],
    }
    return parse_instance(json.dumps(doc))


def test_descends_from_box_corner():
    inst = bilinear_toy()
    inc = local_improve(inst, inst.box, np.array([1.0, 1.0]))
    assert inc is not None
    assert inc.objective <= 1.0
    assert inc.objective == pytest.approx(0.0, abs=1e-4)  # box minimum sits on the axes


def test_infeasible_instance_returns_none():
    inst = infeasible_toy()
    assert local_improve(inst, inst.box, np.zeros(1)) is None
    assert root_incumbent(inst, budget=0.2, seed=0) is None


def test_feasible_start_is_never_made_worse():
    rng = np.random.default_rng(31)
    for seed in range(4):
        inst = gen_bbp(1, 2, 1.0, seed)
        for _ in range(5):
            start = rng.uniform(inst.box.lb, inst.box.ub)
            if not inst.is_feasible(start):
                continue
            inc = local_improve(inst, inst.box, start)
            assert inc is not None
            assert inc.objective <= inst.evaluate(start)[0] + 1e-12


def test_start_outside_box_is_clamped():
    inst = bilinear_toy()
    inc = local_improve(inst, inst.box, np.array([5.0, 5.0]))
    assert inc is not None
    assert inst.box.contains(inc.x)


def test_incumbent_rejects_infeasible_residual():
    with pytest.raises(ValueError):
        Incumbent(np.zeros(1), 0.0, residual=1e-3, tol=1e-6)


def test_deterministic_for_fixed_inputs():
    inst = gen_bbp(2, 2, 1.0, 5)
    a = local_improve(inst, inst.box, inst.box.center())
    b = local_improve(inst, inst.box, inst.box.center())
    assert a is not None and b is not None
    assert a.objective == b.objective
    assert np.array_equal(a.x, b.x)


def test_budget_zero_attempts_exactly_one_start(monkeypatch):
    inst = bilinear_toy()
    calls = []
    real = primal.local_improve

    def spy(inst_, box, start, **kw):
        calls.append(np.array(start, dtype=float))
        return real(inst_, box, start, **kw)

    monkeypatch.setattr(primal, "local_improve", spy)
    root_incumbent(inst, budget=0.0, seed=0, lp_point=np.array([0.1, 0.1]))
    assert len(calls) == 1
    assert np.array_equal(calls[0], inst.box.center())


def test_multistart_from_lp_perturbations_matches_grid_oracle():
    """Twenty starts perturbed around the root relaxation solution find the
    global optimum of small bipartite instances to 0.1%."""
    from spatialbb.lp import solve_lp
    from spatialbb.relaxation import build_relaxation

    rng = np.random.default_rng(99)
    for seed in (0, 1, 2):
        inst = gen_bbp(1, 2, 1.0, seed)
        opt, _ = profile_grid_min(inst, [0], step=1e-2)
        problem, _ = build_relaxation(inst, inst.box)
        sol = solve_lp(problem)
        assert sol.status == "Optimal"
        lp_point = sol.x[: inst.n]
        best = None
        for _ in range(20):
            start = lp_point + rng.normal(0.0, 0.2, inst.n) * (inst.box.ub - inst.box.lb)
            inc = local_improve(inst, inst.box, start)
            if inc is not None and (best is None or inc.objective < best):
                best = inc.objective
        assert best is not None
        assert abs(best - opt) <= 1e-3 * abs(opt)


def test_pooling_toy_matches_grid_oracle():
    inst = gen_pooling_toy("haverly-like", 1)
    opt, _ = profile_grid_min(inst, [0], step=1e-3)
    inc = root_incumbent(inst, budget=5.0, seed=0)
    assert inc is not None
    assert abs(inc.objective - opt) <= 1e-3 * abs(opt)
