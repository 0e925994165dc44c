"""Data model for box-constrained QCQP instances.

An instance is

    minimize    sum_{i<=j} q0[i,j] x_i x_j  +  p0.x  +  c0
    subject to  sum_{i<=j} qk[i,j] x_i x_j  +  pk.x  <=  rk     (k = 1..m)
                lb <= x <= ub

with every variable bounded on both sides (finite boxes are required by the
McCormick relaxation downstream).  Quadratic coefficients are stored per
unordered index pair with symmetric halves already summed, so ``q[i, j]`` is
the full coefficient of the monomial ``x_i * x_j``.

Instances are read from / written to a JSON document; indices are 1-based in
files and 0-based in memory.  ``>=`` and ``=`` constraint senses are accepted
by the parser and normalized to ``<=`` rows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

PairDict = Dict[Tuple[int, int], float]


class InstanceError(ValueError):
    """An instance document violates the schema or a model invariant."""


@dataclass
class VarBox:
    """Per-variable lower/upper bounds.

    A box with ``lb[i] > ub[i]`` is a legal *empty* marker (it signals node
    infeasibility to the caller); it is never silently clamped.
    """

    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        if self.lb.shape != self.ub.shape or self.lb.ndim != 1:
            raise InstanceError("box bound vectors must be 1-D and equal length")

    @property
    def n(self) -> int:
        return self.lb.size

    def is_empty(self) -> bool:
        return bool(np.any(self.lb > self.ub))

    def width(self) -> np.ndarray:
        return self.ub - self.lb

    def center(self) -> np.ndarray:
        return 0.5 * (self.lb + self.ub)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lb - tol) and np.all(x <= self.ub + tol))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(np.asarray(x, dtype=float), self.lb), self.ub)

    def copy(self) -> "VarBox":
        return VarBox(self.lb.copy(), self.ub.copy())

    def with_interval(self, i: int, lo: float, hi: float) -> "VarBox":
        out = self.copy()
        out.lb[i] = lo
        out.ub[i] = hi
        return out

    def child(self, i: int, sense: str, alpha: float) -> "VarBox":
        """Sub-box for the branching decision ``x_i <= alpha`` or ``x_i >= alpha``."""
        if not (self.lb[i] <= alpha <= self.ub[i]):
            raise ValueError(
                f"branching point {alpha} outside [{self.lb[i]}, {self.ub[i]}] "
                f"for variable {i + 1}"
            )
        if sense == "<=":
            return self.with_interval(i, self.lb[i], alpha)
        if sense == ">=":
            return self.with_interval(i, alpha, self.ub[i])
        raise ValueError(f"unknown branching sense {sense!r}")


@dataclass
class QuadExpr:
    """A quadratic expression sum_{i<=j} c[i,j] x_i x_j + linear.x + constant."""

    pairs: PairDict
    linear: np.ndarray
    constant: float = 0.0

    _ii: np.ndarray = field(init=False, repr=False)
    _jj: np.ndarray = field(init=False, repr=False)
    _cc: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=float)
        items = sorted(self.pairs.items())
        self._ii = np.array([ij[0] for ij, _ in items], dtype=np.intp)
        self._jj = np.array([ij[1] for ij, _ in items], dtype=np.intp)
        self._cc = np.array([c for _, c in items], dtype=float)

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        quad = float(np.dot(self._cc, x[self._ii] * x[self._jj])) if self._cc.size else 0.0
        return quad + float(np.dot(self.linear, x)) + self.constant

    def grad(self, x: np.ndarray) -> np.ndarray:
        # d/dx_i of c*x_i*x_j contributes c*x_j to i and c*x_i to j; for a
        # diagonal pair both contributions land on i, giving 2*c*x_i.
        g = self.linear.copy()
        if self._cc.size:
            np.add.at(g, self._ii, self._cc * x[self._jj])
            np.add.at(g, self._jj, self._cc * x[self._ii])
        return g


@dataclass
class QuadConstraint:
    """One row ``quad(x) + linear.x <= rhs``."""

    pairs: PairDict
    linear: np.ndarray
    rhs: float

    _expr: QuadExpr = field(init=False, repr=False)

    def __post_init__(self):
        self._expr = QuadExpr(self.pairs, self.linear, 0.0)

    def lhs(self, x: np.ndarray) -> float:
        return self._expr.value(x)

    def slack(self, x: np.ndarray) -> float:
        return self.rhs - self._expr.value(x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self._expr.grad(x)


@dataclass
class QcqpInstance:
    """A validated problem; treat as read-only after construction (the solver
    shares one instance across all nodes and never mutates it)."""

    n: int
    objective: QuadExpr
    constraints: List[QuadConstraint]
    box: VarBox
    name: str = "unnamed"

    @property
    def m(self) -> int:
        return len(self.constraints)

    def quadratic_pairs(self) -> List[Tuple[int, int]]:
        """Unordered index pairs carrying a nonzero coefficient in any quadratic form.

        These are exactly the products that need an auxiliary w column in the
        relaxation; diagonal pairs (i, i) are included.
        """
        pairs = set(self.objective.pairs)
        for con in self.constraints:
            pairs.update(con.pairs)
        return sorted(pairs)

    def quadratic_vars(self) -> List[int]:
        out = set()
        for i, j in self.quadratic_pairs():
            out.add(i)
            out.add(j)
        return sorted(out)

    def evaluate(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        """Exact objective value and constraint slacks ``rk - lhs_k(x)`` at x."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise InstanceError(f"point has length {x.size}, expected {self.n}")
        obj = self.objective.value(x)
        slacks = np.array([con.slack(x) for con in self.constraints], dtype=float)
        return obj, slacks

    def max_violation(self, x: np.ndarray) -> float:
        """Largest constraint/box violation at x (0 means feasible)."""
        _, slacks = self.evaluate(x)
        viol = 0.0
        if slacks.size:
            viol = max(viol, float(np.max(-slacks)))
        viol = max(viol, float(np.max(self.box.lb - x, initial=0.0)))
        viol = max(viol, float(np.max(x - self.box.ub, initial=0.0)))
        return max(viol, 0.0)

    def is_feasible(self, x: np.ndarray, tol: float = 1e-6) -> bool:
        return self.max_violation(x) <= tol


# ---------------------------------------------------------------------------
# JSON schema handling
# ---------------------------------------------------------------------------


def _as_float(value, where: str) -> float:
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise InstanceError(f"{where}: expected a number, got {value!r}") from None
    if not math.isfinite(f):
        raise InstanceError(f"{where}: non-finite value {value!r}")
    return f


def _merge_pairs(raw, n: int, where: str) -> PairDict:
    """Merge 1-based [i, j, coef] triples into 0-based pairs with i <= j.

    (i, j) and (j, i) entries are summed; exact-zero results are dropped.
    """
    if not isinstance(raw, list):
        raise InstanceError(f"{where}: expected a list of [i, j, coef] triples")
    merged: PairDict = {}
    for t, item in enumerate(raw):
        path = f"{where}[{t}]"
        if not isinstance(item, (list, tuple)) or len(item) != 3:
            raise InstanceError(f"{path}: expected [i, j, coef]")
        i, j, coef = item
        if not isinstance(i, int) or not isinstance(j, int):
            raise InstanceError(f"{path}: indices must be integers")
        if not (1 <= i <= n) or not (1 <= j <= n):
            raise InstanceError(f"{path}: index out of range 1..{n}")
        key = (min(i, j) - 1, max(i, j) - 1)
        merged[key] = merged.get(key, 0.0) + _as_float(coef, path)
    return {k: v for k, v in merged.items() if v != 0.0}


def _parse_vector(raw, n: int, where: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != n:
        raise InstanceError(f"{where}: expected a list of {n} numbers")
    return np.array([_as_float(v, f"{where}[{t}]") for t, v in enumerate(raw)])


def parse_instance(text: str) -> QcqpInstance:
    """Parse and validate a JSON instance document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InstanceError("top level: expected a JSON object")

    if "n" not in doc or not isinstance(doc["n"], int) or doc["n"] < 1:
        raise InstanceError("n: expected a positive integer")
    n = doc["n"]
    name = doc.get("name", "unnamed")
    if not isinstance(name, str):
        raise InstanceError("name: expected a string")

    lb = _parse_vector(doc.get("lb"), n, "lb")
    ub = _parse_vector(doc.get("ub"), n, "ub")
    for i in range(n):
        if lb[i] > ub[i]:
            raise InstanceError(
                f"bound inversion at variable {i + 1}: lb={lb[i]} > ub={ub[i]}"
            )

    obj_doc = doc.get("objective")
    if not isinstance(obj_doc, dict):
        raise InstanceError("objective: expected an object")
    obj_pairs = _merge_pairs(obj_doc.get("pairs", []), n, "objective.pairs")
    obj_linear = (
        _parse_vector(obj_doc["linear"], n, "objective.linear")
        if "linear" in obj_doc
        else np.zeros(n)
    )
    obj_const = _as_float(obj_doc.get("constant", 0.0), "objective.constant")
    objective = QuadExpr(obj_pairs, obj_linear, obj_const)

    constraints: List[QuadConstraint] = []
    raw_cons = doc.get("constraints", [])
    if not isinstance(raw_cons, list):
        raise InstanceError("constraints: expected a list")
    for k, con_doc in enumerate(raw_cons):
        where = f"constraints[{k}]"
        if not isinstance(con_doc, dict):
            raise InstanceError(f"{where}: expected an object")
        pairs = _merge_pairs(con_doc.get("pairs", []), n, f"{where}.pairs")
        linear = (
            _parse_vector(con_doc["linear"], n, f"{where}.linear")
            if "linear" in con_doc
            else np.zeros(n)
        )
        if "rhs" not in con_doc:
            raise InstanceError(f"{where}.rhs: missing")
        rhs = _as_float(con_doc["rhs"], f"{where}.rhs")
        sense = con_doc.get("sense", "<=")
        if sense == "<=":
            constraints.append(QuadConstraint(pairs, linear, rhs))
        elif sense == ">=":
            neg_pairs = {k_: -v for k_, v in pairs.items()}
            constraints.append(QuadConstraint(neg_pairs, -linear, -rhs))
        elif sense in ("=", "=="):
            neg_pairs = {k_: -v for k_, v in pairs.items()}
            constraints.append(QuadConstraint(dict(pairs), linear.copy(), rhs))
            constraints.append(QuadConstraint(neg_pairs, -linear, -rhs))
        else:
            raise InstanceError(f"{where}.sense: unknown sense {sense!r}")

    return QcqpInstance(n, objective, constraints, VarBox(lb, ub), name)


def load_instance(path: str) -> QcqpInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_instance(fh.read())


def _pairs_to_doc(pairs: PairDict) -> List[List]:
    return [[i + 1, j + 1, float(c)] for (i, j), c in sorted(pairs.items())]


def instance_to_dict(inst: QcqpInstance) -> dict:
    return {
        "name": inst.name,
        "n": inst.n,
        "objective": {
            "pairs": _pairs_to_doc(inst.objective.pairs),
            "linear": [float(v) for v in inst.objective.linear],
            "constant": float(inst.objective.constant),
        },
        "constraints": [
            {
                "pairs": _pairs_to_doc(con.pairs),
                "linear": [float(v) for v in con.linear],
                "rhs": float(con.rhs),
                "sense": "<=",
            }
            for con in inst.constraints
        ],
        "lb": [float(v) for v in inst.box.lb],
        "ub": [float(v) for v in inst.box.ub],
    }


def serialize_instance(inst: QcqpInstance) -> str:
    """Canonical JSON text; ``parse_instance`` round-trips it."""
    return json.dumps(instance_to_dict(inst), indent=2, sort_keys=True) + "\n"


def save_instance(inst: QcqpInstance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_instance(inst))
