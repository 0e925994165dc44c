"""Incumbent search: projected gradient descent on an exact-penalty objective.

The penalty function is  f(x) + mu * sum_k max(0, lhs_k(x) - rhs_k)  minimized
by projected (sub)gradient steps with backtracking; the weight mu doubles
whenever descent stalls while constraints are still violated.  Everything is
deterministic for fixed inputs; randomness enters only through the caller's
seeded start points.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .instance import QcqpInstance, VarBox

FEAS_TOL = 1e-6

_MAX_ITERS = 500
_MU0 = 10.0
_MU_CAP = 1e9
_BACKTRACKS = 30


@dataclass
class Incumbent:
    """A feasible point; ``objective`` is the exact evaluation at ``x``."""

    x: np.ndarray
    objective: float
    residual: float
    tol: float = FEAS_TOL

    def __post_init__(self):
        if self.residual > self.tol:
            raise ValueError(
                f"incumbent residual {self.residual:.3e} exceeds {self.tol:.1e}"
            )


def _penalty(inst: QcqpInstance, x: np.ndarray, mu: float) -> float:
    obj, slacks = inst.evaluate(x)
    viol = float(np.sum(np.maximum(-slacks, 0.0))) if slacks.size else 0.0
    return obj + mu * viol


def _penalty_grad(inst: QcqpInstance, x: np.ndarray, mu: float) -> np.ndarray:
    g = inst.objective.grad(x)
    for con in inst.constraints:
        if con.lhs(x) > con.rhs:
            g = g + mu * con.grad(x)
    return g


def _coordinate_restriction(expr_pairs, linear_v, pairs_items, x, v):
    """Coefficients (a, b) of the expression restricted to coordinate v:
    a*x_v^2 + b*x_v + const."""
    a = 0.0
    b = linear_v
    for (i, j), coef in pairs_items:
        if i == v and j == v:
            a += coef
        elif i == v:
            b += coef * x[j]
        elif j == v:
            b += coef * x[i]
    return a, b


def _coordinate_polish(
    inst: QcqpInstance, box: VarBox, x: np.ndarray, feas_tol: float, sweeps: int = 20
) -> np.ndarray:
    """Exact cyclic coordinate minimization from a feasible point.

    Along one coordinate the objective and every constraint are univariate
    quadratics, so the candidate minimizers are the unconstrained stationary
    point, the box ends and the constraint-boundary roots; the best feasible
    candidate is taken.  The point never leaves the feasible set and the
    objective never increases, which pins corner optima that plain gradient
    steps stall in front of.
    """
    x = x.copy()
    obj = inst.objective
    for _ in range(sweeps):
        improved = False
        for v in range(inst.n):
            lo, hi = box.lb[v], box.ub[v]
            if hi - lo <= 0.0:
                continue
            a, b = _coordinate_restriction(obj.pairs, obj.linear[v], obj.pairs.items(), x, v)
            candidates = [lo, hi, x[v]]
            if a > 0.0:
                candidates.append(min(max(-b / (2.0 * a), lo), hi))
            for con in inst.constraints:
                ca, cb = _coordinate_restriction(
                    con.pairs, con.linear[v], con.pairs.items(), x, v
                )
                x_saved = x[v]
                x[v] = 0.0
                cc = con.lhs(x) - con.rhs
                x[v] = x_saved
                if abs(ca) > 1e-14:
                    disc = cb * cb - 4.0 * ca * cc
                    if disc >= 0.0:
                        root = math.sqrt(disc)
                        candidates.append((-cb - root) / (2.0 * ca))
                        candidates.append((-cb + root) / (2.0 * ca))
                elif abs(cb) > 1e-14:
                    candidates.append(-cc / cb)
            best_val = None
            best_c = None
            for cand in candidates:
                if not (lo <= cand <= hi):
                    continue
                x_saved = x[v]
                x[v] = cand
                if inst.max_violation(x) <= feas_tol:
                    val = obj.value(x)
                    if best_val is None or val < best_val - 1e-15:
                        best_val, best_c = val, cand
                x[v] = x_saved
            if best_c is not None and best_c != x[v]:
                before = obj.value(x)
                x[v] = best_c
                if obj.value(x) < before - 1e-12:
                    improved = True
        if not improved:
            break
    return x


def local_improve(
    inst: QcqpInstance,
    box: VarBox,
    start: np.ndarray,
    feas_tol: float = FEAS_TOL,
    max_iters: int = _MAX_ITERS,
) -> Optional[Incumbent]:
    """Descend from ``start`` (clamped into the box); return the best feasible
    point found, or None if none is located within the iteration budget.

    A feasible start is never made worse: the best feasible iterate seen,
    including the start itself, is the one returned.
    """
    x = box.clip(start)
    best_x: Optional[np.ndarray] = None
    best_obj = np.inf

    def consider(pt: np.ndarray) -> None:
        nonlocal best_x, best_obj
        resid = inst.max_violation(pt)
        if resid <= feas_tol:
            obj, _ = inst.evaluate(pt)
            if obj < best_obj:
                best_x, best_obj = pt.copy(), obj

    consider(x)
    mu = _MU0
    g0 = _penalty_grad(inst, x, mu)
    max_width = float(np.max(box.width(), initial=0.0))
    t0 = max(max_width, 1e-3) / (1.0 + float(np.linalg.norm(g0)))
    t = t0

    it = 0
    while it < max_iters:
        it += 1
        p_here = _penalty(inst, x, mu)
        g = _penalty_grad(inst, x, mu)
        moved = False
        for _ in range(_BACKTRACKS):
            xn = box.clip(x - t * g)
            if _penalty(inst, xn, mu) < p_here - 1e-12:
                moved = True
                break
            t *= 0.5
        if moved:
            x = xn
            consider(x)
            t = min(t * 1.3, 100.0 * t0)
            continue
        # descent stalled at this weight: sharpen the penalty and retry with a
        # fresh step so the iterate can slide along the feasible boundary
        # instead of parking outside it
        if mu < _MU_CAP:
            mu *= 2.0
            t = t0
        else:
            break
    if best_x is None:
        return None
    polished = _coordinate_polish(inst, box, best_x, feas_tol)
    if inst.max_violation(polished) <= feas_tol:
        pol_obj, _ = inst.evaluate(polished)
        if pol_obj < best_obj:
            best_x, best_obj = polished, pol_obj
    return Incumbent(best_x, best_obj, inst.max_violation(best_x), tol=feas_tol)


def root_incumbent(
    inst: QcqpInstance,
    budget: float = 5.0,
    seed: int = 0,
    lp_point: Optional[np.ndarray] = None,
    n_random: int = 20,
    feas_tol: float = FEAS_TOL,
) -> Optional[Incumbent]:
    """Multi-start search for an initial incumbent.

    Start points: the box center, the root relaxation solution if supplied,
    then ``n_random`` uniform points.  A budget of 0 attempts exactly one
    start (the box center); otherwise the budget is an early-stop cap on
    wall time, checked before each start.
    """
    box = inst.box
    starts: List[np.ndarray] = [box.center()]
    if budget > 0:
        if lp_point is not None:
            starts.append(np.asarray(lp_point, dtype=float)[: inst.n])
        rng = np.random.default_rng(seed)
        for _ in range(n_random):
            starts.append(rng.uniform(box.lb, box.ub))

    clock = time.perf_counter()
    best: Optional[Incumbent] = None
    for k, start in enumerate(starts):
        if k > 0 and budget > 0 and time.perf_counter() - clock > budget:
            break
        cand = local_improve(inst, box, start, feas_tol=feas_tol)
        if cand is not None and (best is None or cand.objective < best.objective):
            best = cand
    return best
