"""Dense bounded-variable primal simplex.

Solves  min c.x  s.t.  A x {<=,>=,=} b,  lb <= x <= ub  with finite variable
bounds.  One slack per row turns every row into an equality; a two-phase
scheme with artificial columns finds a starting basis.  Pivoting is Dantzig's
rule with a deterministic tie-break, switching to Bland's rule after a streak
of degenerate pivots.  The basis inverse is kept explicitly and refreshed
periodically.

Every solve builds its state from scratch (no warm starting), so identical
problem data always produces identical pivots, status and objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

LP_FEAS_TOL = 1e-8
LP_OPT_TOL = 1e-7

# internal pivoting constants
_ENTER_TOL = 1e-9
_PIVOT_TOL = 1e-10
_DEGEN_STREAK = 30
_REFRESH_EVERY = 64

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
ITERATION_LIMIT = "IterationLimit"
NUMERICAL = "Numerical"

_AT_LB = 0
_AT_UB = 1
_BASIC = 2


@dataclass
class LpProblem:
    """min c.x s.t. rows A x (sense) b, lb <= x <= ub, all bounds finite."""

    c: np.ndarray
    a: np.ndarray  # (m, n) dense row matrix; may have m == 0
    senses: List[str]  # per row: "<=", ">=" or "="
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.a = np.asarray(self.a, dtype=float).reshape(len(self.senses), self.c.size)
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)

    @property
    def ncols(self) -> int:
        return self.c.size

    @property
    def nrows(self) -> int:
        return len(self.senses)

    def validate(self) -> None:
        if not np.all(np.isfinite(self.lb)) or not np.all(np.isfinite(self.ub)):
            raise ValueError("variable bounds must be finite")
        if np.any(self.lb > self.ub):
            raise ValueError("lb > ub for some variable")
        if not np.all(np.isfinite(self.c)) or not np.all(np.isfinite(self.a)):
            raise ValueError("non-finite coefficient")
        if not np.all(np.isfinite(self.rhs)):
            raise ValueError("non-finite rhs")
        for s in self.senses:
            if s not in ("<=", ">=", "="):
                raise ValueError(f"unknown row sense {s!r}")


@dataclass
class LpSolution:
    status: str
    objective: Optional[float] = None
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    iterations: int = 0
    infeasibility: float = 0.0  # phase-1 optimum when status == Infeasible


class _Tableau:
    """Mutable simplex state over the slack-extended column set."""

    def __init__(self, a_ext: np.ndarray, lb: np.ndarray, ub: np.ndarray,
                 rhs: np.ndarray, basis: np.ndarray, status: np.ndarray):
        self.a = a_ext
        self.lb = lb
        self.ub = ub
        self.rhs = rhs
        self.basis = basis          # basic column per row
        self.status = status        # _AT_LB/_AT_UB/_BASIC per column
        self.m = a_ext.shape[0]
        self.x = np.where(status == _AT_UB, ub, lb)
        self.x[~np.isfinite(self.x)] = 0.0  # columns nonbasic at an infinite bound never occur
        self.binv = np.eye(self.m)
        self.refresh()

    def refresh(self) -> bool:
        cols = self.a[:, self.basis]
        try:
            self.binv = np.linalg.inv(cols)
        except np.linalg.LinAlgError:
            return False
        nonbasic = self.status != _BASIC
        resid = self.rhs - self.a[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.binv @ resid
        return bool(np.all(np.isfinite(self.x)))

    def reduced_costs(self, cost: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        y = cost[self.basis] @ self.binv
        d = cost - y @ self.a
        return y, d


def _run_simplex(t: _Tableau, cost: np.ndarray, max_iter: int) -> Tuple[str, int]:
    """Minimize cost over the tableau in place. Returns (status, iterations)."""
    free = t.lb < t.ub  # fixed columns can never enter
    bland = False
    degen_streak = 0
    iters = 0
    while iters < max_iter:
        iters += 1
        if iters % _REFRESH_EVERY == 0 and not t.refresh():
            return NUMERICAL, iters
        _, d = t.reduced_costs(cost)

        at_lb = (t.status == _AT_LB) & free & (d < -_ENTER_TOL)
        at_ub = (t.status == _AT_UB) & free & (d > _ENTER_TOL)
        candidates = np.nonzero(at_lb | at_ub)[0]
        if candidates.size == 0:
            return OPTIMAL, iters

        if bland:
            q = int(candidates[0])
        else:
            q = int(candidates[np.argmax(np.abs(d[candidates]))])
        direction = 1.0 if t.status[q] == _AT_LB else -1.0

        col = t.binv @ t.a[:, q]

        # Ratio test: entering moves by `step`; basic row i changes at rate
        # -direction*col[i]; the entering column may also flip to its own
        # opposite bound.
        best_step = t.ub[q] - t.lb[q]
        leave = -1
        leave_to = _AT_LB
        leave_rate = 0.0
        for i in range(t.m):
            rate = -direction * col[i]
            bi = t.basis[i]
            if rate > _PIVOT_TOL:
                if not np.isfinite(t.ub[bi]):
                    continue
                cap = (t.ub[bi] - t.x[bi]) / rate
                to = _AT_UB
            elif rate < -_PIVOT_TOL:
                if not np.isfinite(t.lb[bi]):
                    continue
                cap = (t.x[bi] - t.lb[bi]) / (-rate)
                to = _AT_LB
            else:
                continue
            cap = max(cap, 0.0)
            if cap < best_step - 1e-12 or (
                cap < best_step + 1e-12
                and leave >= 0
                and (abs(rate) > abs(leave_rate) + 1e-12
                     or (abs(rate) > abs(leave_rate) - 1e-12 and t.basis[i] < t.basis[leave]))
            ):
                best_step = cap
                leave = i
                leave_to = to
                leave_rate = rate
        if not np.isfinite(best_step):
            # cannot happen with finite structural bounds; treat as breakdown
            return NUMERICAL, iters

        if best_step <= 1e-12:
            degen_streak += 1
            if degen_streak >= _DEGEN_STREAK:
                bland = True
        else:
            degen_streak = 0

        t.x[q] += direction * best_step
        t.x[t.basis] -= direction * best_step * col

        if leave < 0:
            # bound flip, basis unchanged
            t.status[q] = _AT_UB if t.status[q] == _AT_LB else _AT_LB
            t.x[q] = t.ub[q] if t.status[q] == _AT_UB else t.lb[q]
            continue

        pivot = col[leave]
        if abs(pivot) < _PIVOT_TOL:
            return NUMERICAL, iters
        left_var = t.basis[leave]
        t.status[left_var] = leave_to
        t.x[left_var] = t.ub[left_var] if leave_to == _AT_UB else t.lb[left_var]
        t.basis[leave] = q
        t.status[q] = _BASIC
        # product-form update of the explicit inverse
        t.binv[leave, :] /= pivot
        for i in range(t.m):
            if i != leave and col[i] != 0.0:
                t.binv[i, :] -= col[i] * t.binv[leave, :]
    return ITERATION_LIMIT, iters


def solve_lp(problem: LpProblem, max_iter: Optional[int] = None) -> LpSolution:
    """Solve the LP. Statuses: Optimal, Infeasible, IterationLimit, Numerical.

    Callers must treat Numerical as "no usable bound"; it is never reported
    as infeasibility (a false Infeasible would wrongly license bound
    tightening upstream).
    """
    problem.validate()
    n, m = problem.ncols, problem.nrows
    if max_iter is None:
        max_iter = 2000 + 60 * (m + n)

    if m == 0:
        x = np.where(problem.c > 0, problem.lb, np.where(problem.c < 0, problem.ub, problem.lb))
        return LpSolution(
            status=OPTIMAL,
            objective=float(problem.c @ x),
            x=x.astype(float),
            duals=np.zeros(0),
            reduced_costs=problem.c.copy(),
            iterations=0,
        )

    slack_lb = np.zeros(m)
    slack_ub = np.zeros(m)
    for i, s in enumerate(problem.senses):
        if s == "<=":
            slack_lb[i], slack_ub[i] = 0.0, np.inf
        elif s == ">=":
            slack_lb[i], slack_ub[i] = -np.inf, 0.0
        else:
            slack_lb[i], slack_ub[i] = 0.0, 0.0

    a_ext = np.hstack([problem.a, np.eye(m)])
    lb = np.concatenate([problem.lb, slack_lb])
    ub = np.concatenate([problem.ub, slack_ub])
    status = np.full(n + m, _AT_LB, dtype=np.intp)
    basis = np.arange(n, n + m, dtype=np.intp)
    status[basis] = _BASIC

    # Structurals start at their lower bound; slacks are basic with value
    # rhs - A.x.  Rows whose slack lands outside its bounds get an artificial
    # column carrying the residual.
    x_struct = problem.lb.copy()
    slack_val = problem.rhs - problem.a @ x_struct

    art_cols: List[np.ndarray] = []
    art_lb: List[float] = []
    art_ub: List[float] = []
    art_rows: List[int] = []
    for i in range(m):
        v = slack_val[i]
        clamped = min(max(v, slack_lb[i]), slack_ub[i])
        if clamped == v:
            continue
        resid = v - clamped  # what the artificial must absorb
        col = np.zeros(m)
        col[i] = 1.0
        art_cols.append(col)
        if resid >= 0:
            art_lb.append(0.0)
            art_ub.append(np.inf)
        else:
            art_lb.append(-np.inf)
            art_ub.append(0.0)
        art_rows.append(i)

    n_art = len(art_cols)
    if n_art:
        a_ext = np.hstack([a_ext, np.column_stack(art_cols)])
        lb = np.concatenate([lb, np.array(art_lb)])
        ub = np.concatenate([ub, np.array(art_ub)])
        status = np.concatenate([status, np.full(n_art, _AT_LB, dtype=np.intp)])
        for t_idx, i in enumerate(art_rows):
            # artificial becomes basic in its row; the slack moves to the
            # bound it was clamped to
            slack = n + i
            v = slack_val[i]
            clamped = min(max(v, slack_lb[i]), slack_ub[i])
            status[slack] = _AT_UB if clamped == slack_ub[i] else _AT_LB
            basis[i] = n + m + t_idx
            status[n + m + t_idx] = _BASIC

    tab = _Tableau(a_ext, lb, ub, problem.rhs.copy(), basis, status)
    total_iters = 0

    if n_art:
        phase1_cost = np.zeros(n + m + n_art)
        for t_idx in range(n_art):
            phase1_cost[n + m + t_idx] = 1.0 if art_lb[t_idx] == 0.0 else -1.0
        st, it1 = _run_simplex(tab, phase1_cost, max_iter)
        total_iters += it1
        if st in (NUMERICAL, ITERATION_LIMIT):
            return LpSolution(status=st, iterations=total_iters)
        phase1_obj = float(phase1_cost @ tab.x)
        if phase1_obj > LP_FEAS_TOL:
            return LpSolution(status=INFEASIBLE, iterations=total_iters,
                              infeasibility=phase1_obj)
        # artificials are done: freeze them at zero so phase 2 cannot move them
        for t_idx in range(n_art):
            j = n + m + t_idx
            tab.lb[j] = 0.0
            tab.ub[j] = 0.0
            if tab.status[j] != _BASIC:
                tab.x[j] = 0.0

    phase2_cost = np.concatenate([problem.c, np.zeros(tab.a.shape[1] - n)])
    st, it2 = _run_simplex(tab, phase2_cost, max_iter)
    total_iters += it2
    if st != OPTIMAL:
        return LpSolution(status=st, iterations=total_iters)

    if not tab.refresh():
        return LpSolution(status=NUMERICAL, iterations=total_iters)
    y, d = tab.reduced_costs(phase2_cost)
    x = tab.x[:n].copy()
    # snap structural values marginally outside the box back onto it
    x = np.minimum(np.maximum(x, problem.lb), problem.ub)
    obj = float(problem.c @ x)

    # residual checks: a basis too degraded to meet the advertised
    # tolerances is reported as Numerical, never as a bogus Optimal
    row_act = problem.a @ x
    feas = 0.0
    for i, s in enumerate(problem.senses):
        if s == "<=":
            feas = max(feas, row_act[i] - problem.rhs[i])
        elif s == ">=":
            feas = max(feas, problem.rhs[i] - row_act[i])
        else:
            feas = max(feas, abs(row_act[i] - problem.rhs[i]))
    scale = 1.0 + float(np.max(np.abs(problem.rhs), initial=0.0))
    if feas > LP_FEAS_TOL * scale * 10:
        return LpSolution(status=NUMERICAL, iterations=total_iters)

    return LpSolution(
        status=OPTIMAL,
        objective=obj,
        x=x,
        duals=np.asarray(y, dtype=float).copy(),
        reduced_costs=d[:n].copy(),
        iterations=total_iters,
    )
