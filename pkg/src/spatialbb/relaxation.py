"""McCormick LP relaxation of a QCQP node.

Each product x_i*x_j that occurs in some quadratic form is replaced by an
auxiliary column w_ij; the four envelope inequalities for the pair are
instantiated from the node's current box

    w - lb_j x_i - lb_i x_j >= -lb_i lb_j
    w - ub_j x_i - lb_i x_j <= -lb_i ub_j
    w - lb_j x_i - ub_i x_j <= -ub_i lb_j
    w - ub_j x_i - ub_i x_j >= -ub_i ub_j

For a square pair (i, i) the two middle rows coincide, leaving the two
tangent underestimators and the secant overestimator.  The w column itself is
bounded by the interval product of the pair's bound intervals.

Relaxations are rebuilt from scratch for every solve; nothing is patched in
place, which keeps node traces reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .instance import QcqpInstance, VarBox
from .lp import LpProblem


class BoxEmptyError(ValueError):
    """Raised when a relaxation is requested over an empty box."""


@dataclass(frozen=True)
class RelaxationMap:
    """Column layout of a relaxation: x_1..x_n first, then one w per pair."""

    n: int
    pairs: Tuple[Tuple[int, int], ...]

    def w_col(self, i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        return self.n + self.pairs.index(key)

    @property
    def ncols(self) -> int:
        return self.n + len(self.pairs)


def _interval_product(li: float, ui: float, lj: float, uj: float) -> Tuple[float, float]:
    prods = (li * lj, li * uj, ui * lj, ui * uj)
    return min(prods), max(prods)


def envelope_rows(i: int, j: int, li: float, ui: float, lj: float, uj: float):
    """Envelope rows for pair (i, j) as (xi_coef, xj_coef, sense, rhs) with
    unit w coefficient: w + xi_coef*x_i + xj_coef*x_j (sense) rhs."""
    if i == j:
        return [
            (-2.0 * li, 0.0, ">=", -li * li),
            (-(li + ui), 0.0, "<=", -li * ui),
            (-2.0 * ui, 0.0, ">=", -ui * ui),
        ]
    return [
        (-lj, -li, ">=", -li * lj),
        (-uj, -li, "<=", -li * uj),
        (-lj, -ui, "<=", -ui * lj),
        (-uj, -ui, ">=", -ui * uj),
    ]


def build_relaxation(inst: QcqpInstance, box: VarBox) -> Tuple[LpProblem, RelaxationMap]:
    """LP relaxation of the instance over the given box.

    The LP objective omits the instance's constant offset; callers add it
    back when interpreting objective values as bounds.
    """
    if box.is_empty():
        raise BoxEmptyError("relaxation requested over an empty box")

    pairs = tuple(inst.quadratic_pairs())
    rmap = RelaxationMap(inst.n, pairs)
    ncols = rmap.ncols
    col_of: Dict[Tuple[int, int], int] = {p: inst.n + k for k, p in enumerate(pairs)}

    lb = np.empty(ncols)
    ub = np.empty(ncols)
    lb[: inst.n] = box.lb
    ub[: inst.n] = box.ub
    for (i, j), col in col_of.items():
        lo, hi = _interval_product(box.lb[i], box.ub[i], box.lb[j], box.ub[j])
        lb[col], ub[col] = lo, hi

    c = np.zeros(ncols)
    c[: inst.n] = inst.objective.linear
    for p, coef in inst.objective.pairs.items():
        c[col_of[p]] += coef

    rows: List[np.ndarray] = []
    senses: List[str] = []
    rhs: List[float] = []

    for con in inst.constraints:
        row = np.zeros(ncols)
        row[: inst.n] = con.linear
        for p, coef in con.pairs.items():
            row[col_of[p]] += coef
        rows.append(row)
        senses.append("<=")
        rhs.append(con.rhs)

    for (i, j), col in col_of.items():
        for xi_coef, xj_coef, sense, r in envelope_rows(
            i, j, box.lb[i], box.ub[i], box.lb[j], box.ub[j]
        ):
            row = np.zeros(ncols)
            row[col] = 1.0
            row[i] += xi_coef
            if j != i:
                row[j] += xj_coef
            rows.append(row)
            senses.append(sense)
            rhs.append(r)

    a = np.vstack(rows) if rows else np.zeros((0, ncols))
    return LpProblem(c, a, senses, np.array(rhs), lb, ub), rmap


def child_relaxation(
    inst: QcqpInstance, box: VarBox, i: int, sense: str, alpha: float
) -> Tuple[LpProblem, RelaxationMap]:
    """Relaxation of the child node x_i <= alpha (or >= alpha).

    All envelope rows touching variable i are rebuilt from the shrunken
    interval, not just the column bound: the tighter envelopes are the whole
    point of splitting.
    """
    return build_relaxation(inst, box.child(i, sense, alpha))


def lift_point(inst: QcqpInstance, x: np.ndarray) -> np.ndarray:
    """Lift x to relaxation coordinates with every w set to its exact product."""
    pairs = inst.quadratic_pairs()
    w = np.array([x[i] * x[j] for i, j in pairs])
    return np.concatenate([np.asarray(x, dtype=float), w])
