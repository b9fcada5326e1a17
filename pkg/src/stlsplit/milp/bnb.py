"""Depth-first branch-and-bound over the binaries of a :class:`MilpModel`.

Each node tightens variable bounds, propagates them through the rows and
solves the LP relaxation warm-started from its parent's basis. The branching
variable is the most fractional binary (ties broken by a seeded order) and
the child on the rounding side is explored first. Integer-feasible points are
polished by re-solving the LP with every integer fixed, then handed to an
optional ``verify`` callback before they become the incumbent. The callback
returns the (possibly cleaned) point, or ``None`` to reject it.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import MilpModel
from .simplex import DenseLP, LPNumericalError, LPTimeout

INT_TOL = 1e-6
# pending nodes keep a tableau copy while the stack stays under this size
SNAPSHOT_BYTES = 1 << 29


@dataclass
class MilpSolution:
    status: str  # optimal | feasible | infeasible | budget_exhausted
    x: np.ndarray | None
    objective: float
    nodes: int
    lp_iterations: int
    wall_time: float
    bound: float = -math.inf
    rejected: int = 0
    message: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.x is not None


class BoundPropagator:
    """Activity-based bound tightening on ``A x <= b`` stored as coordinates.

    Each pass computes every row's minimum activity and derives, for each
    entry, the bound that keeps the row satisfiable given the others. Integer
    bounds are rounded inward. Passes repeat until nothing moves.
    """

    def __init__(self, A, b, integer, eq_rows: int = 0):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if eq_rows:
            A = np.vstack([A, -A[-eq_rows:]])
            b = np.concatenate([b, -b[-eq_rows:]])
        self.rows, self.cols = np.nonzero(A)
        self.vals = A[self.rows, self.cols]
        self.b = b
        self.m = A.shape[0]
        self.n = A.shape[1]
        self.integer = np.asarray(integer, dtype=bool)
        self.pos = self.vals > 0

    def __call__(self, lb, ub, max_passes: int = 100):
        lb, ub = np.array(lb, dtype=float), np.array(ub, dtype=float)
        r, j, a, pos = self.rows, self.cols, self.vals, self.pos
        for _ in range(max_passes):
            with np.errstate(invalid="ignore"):
                cmin = np.where(pos, a * lb[j], a * ub[j])
            inf = ~np.isfinite(cmin)
            n_inf = np.bincount(r, weights=inf, minlength=self.m)
            fin = np.bincount(r, weights=np.where(inf, 0.0, cmin), minlength=self.m)
            if np.any((n_inf == 0) & (fin > self.b + 1e-7 * (1 + np.abs(self.b)))):
                return lb, ub, False
            usable = (n_inf[r] - inf) == 0
            if not usable.any():
                break
            room = self.b[r] - (fin[r] - np.where(inf, 0.0, cmin))
            limit = room[usable] / a[usable]
            ju, pu = j[usable], pos[usable]
            new_ub = np.full(self.n, np.inf)
            new_lb = np.full(self.n, -np.inf)
            np.minimum.at(new_ub, ju[pu], limit[pu])
            np.maximum.at(new_lb, ju[~pu], limit[~pu])
            new_ub = np.where(self.integer, np.floor(new_ub + 1e-6), new_ub + 1e-9)
            new_lb = np.where(self.integer, np.ceil(new_lb - 1e-6), new_lb - 1e-9)
            # ignore negligible moves so continuous bounds do not creep forever
            upd_u = new_ub < ub - 1e-6 * (1 + np.abs(ub))
            upd_l = new_lb > lb + 1e-6 * (1 + np.abs(lb))
            if not (upd_u.any() or upd_l.any()):
                break
            ub = np.where(upd_u, new_ub, ub)
            lb = np.where(upd_l, new_lb, lb)
            if np.any(lb > ub + 1e-7):
                return lb, ub, False
        return lb, np.maximum(ub, lb), True


def propagate_bounds(A, b, lb, ub, integer, eq_rows=0, passes: int = 100):
    """One-off bound propagation; see :class:`BoundPropagator`."""
    return BoundPropagator(A, b, integer, eq_rows)(lb, ub, passes)


def branch_and_bound(
    model: MilpModel,
    node_budget: int = 20000,
    time_budget_s: float = 120.0,
    seed: int = 0,
    verify: Callable | None = None,
    mip_gap: float = 1e-4,
    stop_at_first: bool = False,
) -> MilpSolution:
    t0 = time.perf_counter()
    deadline = t0 + time_budget_s
    c, A_ub, b_ub, A_eq, b_eq, lb0, ub0, integer = model.arrays()
    A_all = np.vstack([A_ub, A_eq]).reshape(-1, c.size)
    b_all = np.concatenate([b_ub, b_eq])
    propagate = BoundPropagator(A_all, b_all, integer, A_eq.shape[0])
    lp = DenseLP(c, A_ub, b_ub, A_eq, b_eq, lb0, ub0, seed=seed)
    rng = np.random.default_rng(seed)
    priority = rng.permutation(c.size)  # tie-break order among equally fractional binaries
    rank = np.empty(c.size, dtype=int)
    rank[priority] = np.arange(c.size)
    int_idx = np.flatnonzero(integer)

    incumbent, inc_obj = None, math.inf
    nodes = lp_iters = rejected = 0
    root_bound = None
    exhausted = False
    message = ""
    # stack entries: (lb, ub, warm) where warm is a basis snapshot or None
    stack = [(lb0.copy(), ub0.copy(), None)]
    current_is_parent = False

    def finish(status):
        return MilpSolution(
            status,
            incumbent,
            inc_obj if incumbent is not None else math.inf,
            nodes,
            lp_iters,
            time.perf_counter() - t0,
            root_bound if root_bound is not None else -math.inf,
            rejected,
            message,
            {"n_vars": model.n_vars, "n_binaries": model.n_binaries, "n_constraints": model.n_constraints},
        )

    while stack:
        if nodes >= node_budget or time.perf_counter() > deadline:
            exhausted = True
            message = "node budget reached" if nodes >= node_budget else "time budget reached"
            break
        lb, ub, warm = stack.pop()
        nodes += 1
        lb, ub, ok = propagate(lb, ub)
        if not ok:
            current_is_parent = False
            continue
        try:
            res = lp.solve(lb, ub, warm="current" if (warm is None and current_is_parent) else warm, deadline=deadline)
        except LPTimeout:
            exhausted = True
            message = "time budget reached"
            break
        except LPNumericalError:
            # retry this node from scratch before giving up on it
            res = lp.solve(lb, ub, warm=None, deadline=deadline)
        lp_iters += res.iterations
        current_is_parent = res.status == "optimal"
        if root_bound is None:
            root_bound = res.objective
        if res.status != "optimal":
            current_is_parent = False
            continue
        if res.objective >= inc_obj - max(1e-9, mip_gap * abs(inc_obj)):
            current_is_parent = False
            continue
        x = res.x
        frac = np.abs(x[int_idx] - np.round(x[int_idx]))
        if frac.size == 0 or frac.max() <= INT_TOL:
            cand = _polish(lp, x, lb, ub, int_idx, deadline)
            current_is_parent = False
            if cand is None:
                rejected += 1
                continue
            if verify is not None:
                cand = verify(cand)
                if cand is None:
                    rejected += 1
                    continue
            obj = float(c @ cand)
            if obj < inc_obj:
                incumbent, inc_obj = cand, obj
            if stop_at_first:
                break
            continue
        # most fractional binary, seeded order among ties
        score = -np.abs(x[int_idx] - np.floor(x[int_idx]) - 0.5)
        best = score.max()
        ties = int_idx[score >= best - 1e-12]
        j = int(ties[np.argmin(rank[ties])])
        val = x[j]
        down_ub = ub.copy()
        down_ub[j] = math.floor(val)
        up_lb = lb.copy()
        up_lb[j] = math.ceil(val)
        snap = lp.snapshot(full=len(stack) * lp.tableau_bytes < SNAPSHOT_BYTES)
        down = (lb, down_ub)
        up = (up_lb, ub)
        first, second = (up, down) if val - math.floor(val) >= 0.5 else (down, up)
        stack.append((second[0], second[1], snap))
        stack.append((first[0], first[1], None))
        current_is_parent = True
    if exhausted:
        return finish("feasible" if incumbent is not None else "budget_exhausted")
    if incumbent is None:
        return finish("infeasible")
    return finish("optimal" if not stack else "feasible")


def _polish(lp: DenseLP, x, lb, ub, int_idx, deadline):
    """Fix integers at their rounded values and re-solve the continuous part."""
    fixed = np.round(x[int_idx])
    lb2, ub2 = lb.copy(), ub.copy()
    lb2[int_idx] = fixed
    ub2[int_idx] = fixed
    try:
        res = lp.solve(lb2, ub2, warm="current", deadline=deadline)
    except (LPNumericalError, LPTimeout):
        return None
    if res.status != "optimal":
        return None
    out = res.x.copy()
    out[int_idx] = fixed
    return out
