"""Dense bounded simplex for the LP relaxations of branch-and-bound.

Every row ``i`` gets a logical column ``s_i`` so that the system reads
``A x + s = b`` with ``s_i >= 0`` for ``<=`` rows and ``s_i = 0`` for
equalities. Starting from the all-logical basis with each structural at the
bound that makes its reduced cost dual feasible, the dual simplex restores
primal feasibility; a primal phase cleans up if round-off breaks dual
feasibility. Bound changes keep the basis dual feasible, which is what makes
warm starts after branching cheap.

Structural variables with an infinite bound are boxed at ``+-BOX``; an
optimum resting on such a box is reported as unbounded.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

BOX = 1e7


class LPNumericalError(RuntimeError):
    """The basis became too ill-conditioned to trust the LP solution."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (basis condition number {condition:.3g})")
        self.condition = condition


class LPTimeout(RuntimeError):
    pass


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None
    objective: float
    iterations: int


class DenseLP:
    """Minimise ``c . x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, bounds."""

    def __init__(self, c, A_ub, b_ub, A_eq, b_eq, lb, ub, feas_tol=1e-7, opt_tol=1e-9, seed: int = 0):
        c = np.asarray(c, dtype=float)
        n = c.size
        A_ub = np.asarray(A_ub, dtype=float).reshape(-1, n)
        A_eq = np.asarray(A_eq, dtype=float).reshape(-1, n)
        A = np.vstack([A_ub, A_eq])
        b = np.concatenate([np.asarray(b_ub, dtype=float).reshape(-1), np.asarray(b_eq, dtype=float).reshape(-1)])
        m = A.shape[0]
        # row scaling keeps pivots comparable across big-M and unit rows
        scale = np.max(np.abs(A), axis=1) if n else np.ones(m)
        scale[scale == 0] = 1.0
        self.row_scale = scale
        A = A / scale[:, None]
        b = b / scale
        self.n, self.m = n, m
        self.A_full = np.hstack([A, np.eye(m)])
        self.b = b
        self.c = np.concatenate([c, np.zeros(m)])
        lo = np.concatenate([np.asarray(lb, dtype=float), np.zeros(m)])
        hi = np.concatenate([np.asarray(ub, dtype=float), np.full(A_ub.shape[0], np.inf), np.zeros(A_eq.shape[0])])
        lo[:n] = np.where(np.isneginf(lo[:n]), -BOX, lo[:n])
        hi[:n] = np.where(np.isposinf(hi[:n]), BOX, hi[:n])
        self.lb0, self.ub0 = lo, hi
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.piv_tol = 1e-9
        self.rng = np.random.default_rng(seed)
        self.state = None

    # ------------------------------------------------------------------ state
    def _cold_state(self, lb, ub):
        n, m = self.n, self.m
        basic = np.arange(n, n + m)
        x = np.zeros(n + m)
        x[:n] = np.where(self.c[:n] >= 0, lb[:n], ub[:n])
        x[basic] = self.b - self.A_full[:, :n] @ x[:n]
        return {"T": self.A_full.copy(), "basic": basic, "x": x, "d": self.c.copy(), "lb": lb, "ub": ub}

    def snapshot(self, full: bool = True) -> dict:
        """Copy of the current basis; ``full`` also keeps the tableau."""
        st = self.state
        snap = {"basic": st["basic"].copy(), "x": st["x"].copy()}
        if full:
            snap["T"] = st["T"].copy()
            snap["d"] = st["d"].copy()
        return snap

    @property
    def tableau_bytes(self) -> int:
        return self.m * (self.n + self.m) * 8

    def _rebuild(self, snap, lb, ub):
        basic = snap["basic"].copy()
        x = snap["x"].copy()
        if "T" in snap:
            st = {"T": snap["T"].copy(), "basic": basic, "x": x, "d": snap["d"].copy(), "lb": lb, "ub": ub}
            self._move_nonbasic(st, lb, ub)
            return st
        B = self.A_full[:, basic]
        T = np.linalg.solve(B, self.A_full)
        d = self.c - self.c[basic] @ T
        st = {"T": T, "basic": basic, "x": x, "d": d, "lb": lb, "ub": ub}
        self._place_nonbasic(st, lb, ub)
        self._recompute_basics(st)
        return st

    def _move_nonbasic(self, st, lb, ub):
        # shift nonbasics onto the new bounds and update the basics through the tableau
        old = st["x"].copy()
        self._place_nonbasic(st, lb, ub)
        delta = st["x"] - old
        delta[st["basic"]] = 0.0
        moved = np.flatnonzero(delta)
        if moved.size:
            st["x"][st["basic"]] -= st["T"][:, moved] @ delta[moved]

    def _nonbasic_mask(self, st):
        mask = np.ones(self.n + self.m, dtype=bool)
        mask[st["basic"]] = False
        return mask

    def _place_nonbasic(self, st, lb, ub):
        # keep each nonbasic at the side its reduced cost wants, inside the new bounds
        nb = self._nonbasic_mask(st)
        d = st["d"]
        want_lo = d >= 0
        target = np.where(want_lo, lb, ub)
        bad = ~np.isfinite(target)
        target = np.where(bad, np.where(want_lo, ub, lb), target)
        target = np.where(np.isfinite(target), target, 0.0)
        st["x"] = np.where(nb, target, st["x"])
        st["lb"], st["ub"] = lb, ub

    def _recompute_basics(self, st):
        basic = st["basic"]
        nb = self._nonbasic_mask(st)
        rhs = self.b - self.A_full[:, nb] @ st["x"][nb]
        B = self.A_full[:, basic]
        st["x"][basic] = np.linalg.solve(B, rhs)

    def condition(self) -> float:
        st = self.state
        return float(np.linalg.cond(self.A_full[:, st["basic"]]))

    # ------------------------------------------------------------------ pivots
    def _pivot(self, st, r, j):
        T = st["T"]
        prow = T[r] / T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        rows = np.flatnonzero(col)
        if rows.size:
            T[rows] -= np.outer(col[rows], prow)
        T[r] = prow
        st["d"] = st["d"] - st["d"][j] * prow
        st["d"][j] = 0.0
        st["basic"][r] = j

    def _dual(self, st, deadline, max_iter, bland=False):
        T, lb, ub = st["T"], st["lb"], st["ub"]
        it = 0
        stall = 0
        last_obj = -np.inf
        while True:
            basic = st["basic"]
            xb = st["x"][basic]
            below = lb[basic] - xb
            above = xb - ub[basic]
            viol = np.maximum(below, above)
            if viol.max(initial=0.0) <= self.feas_tol:
                return "optimal", it
            if it >= max_iter:
                raise LPNumericalError("dual simplex iteration limit", self.condition())
            if deadline is not None and it % 50 == 0 and time.perf_counter() > deadline:
                raise LPTimeout()
            if bland:
                cand = np.flatnonzero(viol > self.feas_tol)
                r = int(cand[np.argmin(basic[cand])])
            else:
                r = int(np.argmax(viol))
            increase = below[r] > above[r]
            target = lb[basic[r]] if increase else ub[basic[r]]
            alpha = T[r]
            nb = self._nonbasic_mask(st)
            movable = nb & (ub > lb)
            at_lo = st["x"] <= lb + 1e-12
            if increase:
                ok = movable & ((at_lo & (alpha < -self.piv_tol)) | (~at_lo & (alpha > self.piv_tol)))
            else:
                ok = movable & ((at_lo & (alpha > self.piv_tol)) | (~at_lo & (alpha < -self.piv_tol)))
            cand = np.flatnonzero(ok)
            if cand.size == 0:
                return "infeasible", it
            ratios = np.abs(st["d"][cand]) / np.abs(alpha[cand])
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12]
            if bland:
                j = int(ties.min())
            else:
                j = int(ties[np.argmax(np.abs(alpha[ties]))])
            dxj = (st["x"][basic[r]] - target) / alpha[j]
            st["x"][basic] -= T[:, j] * dxj
            st["x"][j] += dxj
            st["x"][basic[r]] = target
            self._pivot(st, r, j)
            it += 1
            obj = float(self.c @ st["x"])
            if obj <= last_obj + 1e-12:
                stall += 1
                if stall > 50 and not bland:
                    bland = True
            else:
                stall = 0
            last_obj = obj

    def _primal(self, st, deadline, max_iter, bland=False):
        T, lb, ub = st["T"], st["lb"], st["ub"]
        it = 0
        stall = 0
        while True:
            d = st["d"]
            nb = self._nonbasic_mask(st)
            movable = nb & (ub > lb)
            at_lo = st["x"] <= lb + 1e-12
            at_hi = st["x"] >= ub - 1e-12
            gain = np.where(movable & ~at_hi & (d < -self.opt_tol), -d, 0.0)
            gain = np.maximum(gain, np.where(movable & ~at_lo & (d > self.opt_tol), d, 0.0))
            if gain.max(initial=0.0) <= 0:
                return "optimal", it
            if it >= max_iter:
                raise LPNumericalError("primal simplex iteration limit", self.condition())
            if deadline is not None and it % 50 == 0 and time.perf_counter() > deadline:
                raise LPTimeout()
            j = int(np.flatnonzero(gain > 0).min()) if bland else int(np.argmax(gain))
            delta = 1.0 if d[j] < 0 else -1.0
            basic = st["basic"]
            xb = st["x"][basic]
            col = T[:, j] * delta  # x_B moves by -col * theta
            theta = ub[j] - lb[j]
            r = -1
            with np.errstate(divide="ignore", invalid="ignore"):
                dec = col > self.piv_tol
                inc = col < -self.piv_tol
                lim = np.full(self.m, np.inf)
                lim[dec] = (xb[dec] - lb[basic][dec]) / col[dec]
                lim[inc] = (ub[basic][inc] - xb[inc]) / -col[inc]
            lim = np.maximum(lim, 0.0)
            if lim.size and lim.min() < theta:
                best = lim.min()
                ties = np.flatnonzero(lim <= best + 1e-12)
                r = int(ties[np.argmin(basic[ties])]) if bland else int(ties[np.argmax(np.abs(col[ties]))])
                theta = best
            if not np.isfinite(theta):
                return "unbounded", it
            st["x"][basic] -= col * theta
            st["x"][j] += delta * theta
            if r >= 0:
                leaving = basic[r]
                st["x"][leaving] = lb[leaving] if col[r] > 0 else ub[leaving]
                self._pivot(st, r, j)
            it += 1
            stall = stall + 1 if theta <= 1e-12 else 0
            if stall > 50:
                bland = True

    # ------------------------------------------------------------------ driver
    def solve(self, lb=None, ub=None, warm=None, deadline=None, max_iter: int | None = None) -> LPResult:
        """Solve with the given structural bounds.

        ``warm`` is ``"current"`` to continue from the last tableau, a
        :meth:`snapshot` to rebuild from, or ``None`` for a cold start.
        """
        n = self.n
        lo, hi = self.lb0.copy(), self.ub0.copy()
        if lb is not None:
            lo[:n] = np.where(np.isneginf(lb), -BOX, lb)
        if ub is not None:
            hi[:n] = np.where(np.isposinf(ub), BOX, ub)
        if np.any(lo > hi + self.feas_tol):
            return LPResult("infeasible", None, np.inf, 0)
        hi = np.maximum(hi, lo)
        max_iter = max_iter or 50 * (self.n + self.m) + 1000
        if warm == "current" and self.state is not None:
            st = self.state
            self._move_nonbasic(st, lo, hi)
        elif isinstance(warm, dict):
            st = self._rebuild(warm, lo, hi)
        else:
            st = self._cold_state(lo, hi)
        self.state = st
        total = 0
        for attempt in range(3):
            status, it = self._dual(st, deadline, max_iter)
            total += it
            if status == "infeasible":
                self._recompute_basics(st)
                if self._primal_infeasibility(st) > self.feas_tol:
                    return LPResult("infeasible", None, np.inf, total)
                continue
            status, it = self._primal(st, deadline, max_iter)
            total += it
            if status == "unbounded":
                return LPResult("unbounded", None, -np.inf, total)
            if self._primal_infeasibility(st) <= 10 * self.feas_tol:
                break
            self._recompute_basics(st)
            if self._primal_infeasibility(st) <= 10 * self.feas_tol:
                break
            # round-off drift: refactor the tableau and retry
            self.state = st = self._rebuild({"basic": st["basic"], "x": st["x"]}, lo, hi)
        else:
            raise LPNumericalError("could not reach a primal feasible basis", self.condition())
        x = st["x"][:n].copy()
        if np.any(np.abs(x) >= BOX * (1 - 1e-9)):
            return LPResult("unbounded", None, -np.inf, total)
        return LPResult("optimal", x, float(self.c[:n] @ x), total)

    def _primal_infeasibility(self, st) -> float:
        x = st["x"]
        bound = np.maximum(st["lb"] - x, x - st["ub"]).max(initial=0.0)
        resid = np.abs(self.A_full @ x - self.b).max(initial=0.0)
        return float(max(bound, resid))


def solve_lp(c, A_ub, b_ub, A_eq, b_eq, lb, ub) -> LPResult:
    """One-shot LP solve (cold start)."""
    return DenseLP(c, A_ub, b_ub, A_eq, b_eq, lb, ub).solve()
