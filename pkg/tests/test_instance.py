import json

import numpy as np
import pytest

from spatialbb.instance import (
    InstanceError,
    parse_instance,
    serialize_instance,
)


def make_doc(**overrides):
    doc = {
        "name": "toy",
        "n": 2,
        "objective": {"pairs": [[1, 2, 1.0]], "linear": [0.0, 0.0], "constant": 0.0},
        "constraints": [],
        "lb": [0.0, 0.0],
        "ub": [1.0, 1.0],
    }
    doc.update(overrides)
    return json.dumps(doc)


def test_parse_minimal_bilinear():
    inst = parse_instance(make_doc())
    assert inst.n == 2 and inst.m == 0
    assert inst.quadratic_pairs() == [(0, 1)]
    obj, slacks = inst.evaluate(np.array([1.0, 1.0]))
    assert obj == 1.0 and slacks.size == 0


def test_symmetric_halves_are_merged():
    inst = parse_instance(
        make_doc(objective={"pairs": [[1, 2, 0.5], [2, 1, 0.5]], "linear": [0, 0]})
    )
    assert inst.objective.pairs == {(0, 1): 1.0}


def test_split_halves_evaluate_like_merged():
    merged = parse_instance(make_doc())
    split = parse_instance(
        make_doc(objective={"pairs": [[1, 2, 0.5], [2, 1, 0.5]], "linear": [0, 0]})
    )
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.uniform(0, 1, 2)
        assert merged.evaluate(x)[0] == pytest.approx(split.evaluate(x)[0], abs=1e-15)


def test_bound_inversion_reports_variable():
    with pytest.raises(InstanceError, match="bound inversion at variable 1"):
        parse_instance(
            json.dumps(
                {
                    "n": 1,
                    "objective": {"pairs": [], "linear": [1.0]},
                    "lb": [0.0],
                    "ub": [-1.0],
                }
            )
        )


def test_errors_carry_field_paths():
    with pytest.raises(InstanceError, match=r"objective.pairs\[0\]: index out of range"):
        parse_instance(make_doc(objective={"pairs": [[1, 3, 1.0]], "linear": [0, 0]}))
    with pytest.raises(InstanceError, match=r"lb\[1\]: non-finite"):
        parse_instance(make_doc(lb=[0.0, float("nan")]))
    with pytest.raises(InstanceError, match=r"constraints\[0\].rhs: missing"):
        parse_instance(make_doc(constraints=[{"pairs": [], "linear": [0, 0]}]))
    with pytest.raises(InstanceError, match=r"objective.pairs\[1\]"):
        parse_instance(
            make_doc(objective={"pairs": [[1, 2, 1.0], [1, 2, float("inf")]], "linear": [0, 0]})
        )


def test_evaluate_circle_constraint_slack():
    inst = parse_instance(
        make_doc(
            constraints=[
                {"pairs": [[1, 1, 1.0], [2, 2, 1.0]], "linear": [0, 0], "rhs": 1.0, "sense": "<="}
            ]
        )
    )
    _, slacks = inst.evaluate(np.zeros(2))
    assert slacks[0] == 1.0
    obj, _ = inst.evaluate(np.array([0.5, 0.5]))
    assert obj == 0.25


def test_evaluate_dimension_mismatch():
    inst = parse_instance(make_doc())
    with pytest.raises(InstanceError):
        inst.evaluate(np.zeros(3))


def test_quadratic_pairs_collect_objective_and_constraints():
    doc = json.dumps(
        {
            "n": 3,
            "objective": {"pairs": [[1, 1, 1.0], [1, 2, 1.0]], "linear": [0, 0, 0]},
            "constraints": [
                {"pairs": [[2, 3, 1.0]], "linear": [0, 0, 0], "rhs": 1.0, "sense": "<="}
            ],
            "lb": [0, 0, 0],
            "ub": [1, 1, 1],
        }
    )
    inst = parse_instance(doc)
    assert inst.quadratic_pairs() == [(0, 0), (0, 1), (1, 2)]
    assert inst.quadratic_vars() == [0, 1, 2]


def test_pure_linear_instance_has_no_pairs():
    inst = parse_instance(make_doc(objective={"pairs": [], "linear": [1.0, -1.0]}))
    assert inst.quadratic_pairs() == []


def test_ge_and_eq_senses_normalize_to_le():
    inst = parse_instance(
        make_doc(
            constraints=[
                {"pairs": [], "linear": [1.0, 0.0], "rhs": 0.25, "sense": ">="},
                {"pairs": [], "linear": [0.0, 1.0], "rhs": 0.5, "sense": "="},
            ]
        )
    )
    assert inst.m == 3  # >= becomes one row, = two
    assert inst.is_feasible(np.array([0.3, 0.5]))
    assert not inst.is_feasible(np.array([0.2, 0.5]))
    assert not inst.is_feasible(np.array([0.3, 0.6]))


def test_constant_offset_defaults_to_zero_and_is_carried():
    inst = parse_instance(make_doc(objective={"pairs": [], "linear": [1.0, 0.0]}))
    assert inst.objective.constant == 0.0
    inst2 = parse_instance(
        make_doc(objective={"pairs": [], "linear": [1.0, 0.0], "constant": 5.0})
    )
    assert inst2.evaluate(np.zeros(2))[0] == 5.0


def test_serialize_parse_round_trip():
    inst = parse_instance(
        make_doc(
            objective={"pairs": [[1, 2, -0.75], [1, 1, 2.0]], "linear": [0.5, -1.5], "constant": 3.0},
            constraints=[
                {"pairs": [[1, 2, 1.0]], "linear": [0.25, 0.5], "rhs": 1.2, "sense": "<="}
            ],
        )
    )
    text = serialize_instance(inst)
    again = parse_instance(text)
    assert serialize_instance(again) == text
    assert again.objective.pairs == inst.objective.pairs
    assert np.array_equal(again.box.lb, inst.box.lb)
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = rng.uniform(0, 1, 2)
        assert again.evaluate(x)[0] == pytest.approx(inst.evaluate(x)[0], abs=1e-15)


def test_max_violation_includes_box():
    inst = parse_instance(make_doc())
    assert inst.max_violation(np.array([1.5, 0.5])) == pytest.approx(0.5)
    assert inst.max_violation(np.array([0.5, 0.5])) == 0.0
