"""Big-M mixed-integer encoding of STL synthesis for linear systems.

Negations are pushed to the predicates, so a binary ``z`` only ever needs the
implication ``z = 1  =>  (sub)formula holds``:

* positive literal:  ``eta(x_k) >= eps - M (1 - z)``
* negative literal:  ``eta(x_k) <= -eps + M (1 - z)``
* conjunction:       ``z <= z_child`` for every child
* disjunction:       ``z <= sum z_child``

The top-level formula is asserted directly: conjunctions are flattened and
disjunctions become ``sum z_child >= 1`` without a binary of their own.
Binaries are shared between identical (subformula, time, polarity) triples.
"""
from __future__ import annotations

import math
import warnings
from typing import Sequence

import numpy as np

from ..stl import (
    Always,
    And,
    Eventually,
    Formula,
    HorizonError,
    Not,
    Or,
    Pred,
    Top,
    Until,
    formula_length,
)
from .model import LinearSystem, MilpModel, SolverParams


class BigMWarning(UserWarning):
    """The configured big-M may cut off feasible trajectories."""


def reachable_boxes(x0, L: int, sys: LinearSystem) -> tuple:
    """Interval over-approximation of the reachable states ``x_0 .. x_L``."""
    lo = np.array(x0, dtype=float)
    hi = lo.copy()
    los, his = [lo], [hi]
    Ap, An = np.clip(sys.A, 0, None), np.clip(sys.A, None, 0)
    Bp, Bn = np.clip(sys.B, 0, None), np.clip(sys.B, None, 0)
    for _ in range(L):
        nlo = Ap @ lo + An @ hi + Bp @ sys.input_lo + Bn @ sys.input_hi
        nhi = Ap @ hi + An @ lo + Bp @ sys.input_hi + Bn @ sys.input_lo
        lo, hi = nlo, nhi
        los.append(lo)
        his.append(hi)
    return np.array(los), np.array(his)


class _Encoder:
    def __init__(self, model, sys, params, x_lo, x_hi):
        self.m = model
        self.sys = sys
        self.p = params
        self.x_lo, self.x_hi = x_lo, x_hi
        self.memo: dict = {}
        self.node_ids: dict = {}
        self.n_pred_binaries = 0
        self.n_rows_bigm = 0
        self.max_needed_m = 0.0

    def node_id(self, key) -> int:
        if key not in self.node_ids:
            self.node_ids[key] = len(self.node_ids)
        return self.node_ids[key]

    def x(self, k: int, i: int) -> int:
        return self.m.index(f"x_{k}_{i + 1}")

    def new_binary(self, key, k: int) -> int:
        return self.m.add_binary(f"z_{self.node_id(key)}_{k}")

    # literal -------------------------------------------------------------
    def literal(self, pred: Pred, k: int, positive: bool):
        key = (pred, k, positive)
        if key in self.memo:
            return self.memo[key]
        if k >= len(self.x_lo):
            raise HorizonError(f"predicate read at time {k} beyond the horizon")
        z = self.new_binary((pred, positive), k)
        self.n_pred_binaries += 1
        coeffs = np.asarray(pred.coeffs)
        # range of eta over the reachable box gives a valid, tighter big-M
        lo_eta = float(np.sum(np.minimum(coeffs * self.x_lo[k], coeffs * self.x_hi[k]))) + pred.offset
        hi_eta = float(np.sum(np.maximum(coeffs * self.x_lo[k], coeffs * self.x_hi[k]))) + pred.offset
        eps = self.p.epsilon
        need = (eps - lo_eta) if positive else (hi_eta + eps)
        need = max(need, 0.0)
        self.max_needed_m = max(self.max_needed_m, need)
        # rounded up to 1e-4 so the coefficient survives a 12-character MPS field
        big_m = min(self.p.big_m, max(1.0, math.ceil(need * 1e4 + 1) / 1e4))
        row = {self.x(k, i): a for i, a in enumerate(pred.coeffs) if a != 0}
        if positive:
            # eta - M z >= eps - M  (with eta = coeffs.x + offset)
            row[z] = -big_m
            self.m.add_constraint(row, "G", eps - big_m - pred.offset, name=f"p{self.n_rows_bigm}")
        else:
            row[z] = big_m
            self.m.add_constraint(row, "L", -eps + big_m - pred.offset, name=f"p{self.n_rows_bigm}")
        self.n_rows_bigm += 1
        self.memo[key] = z
        return z

    # generic node ----------------------------------------------------------
    def children(self, phi: Formula, k: int, positive: bool):
        """``('and' | 'or', [(formula, time, polarity)])`` for a compound node."""
        if isinstance(phi, And):
            return ("and" if positive else "or"), [(a, k, positive) for a in phi.args]
        if isinstance(phi, Or):
            return ("or" if positive else "and"), [(a, k, positive) for a in phi.args]
        if isinstance(phi, Always):
            return ("and" if positive else "or"), [(phi.arg, k + t, positive) for t in phi.interval]
        if isinstance(phi, Eventually):
            return ("or" if positive else "and"), [(phi.arg, k + t, positive) for t in phi.interval]
        raise TypeError(phi)

    def until_parts(self, phi: Until, k: int, positive: bool):
        a, b = phi.interval.first, phi.interval.last
        parts = []
        for t in range(a, b + 1):
            if positive:
                items = [(phi.right, k + t, True)] + [(phi.left, k + s, True) for s in range(t + 1)]
                parts.append(("and", items, (phi, t, True)))
            else:
                items = [(phi.right, k + t, False)] + [(phi.left, k + s, False) for s in range(t + 1)]
                parts.append(("or", items, (phi, t, False)))
        return ("or" if positive else "and"), parts

    def encode(self, phi: Formula, k: int, positive: bool = True):
        """Binary index, or ``True``/``False`` for constant sub-results."""
        if isinstance(phi, Top):
            return positive
        if isinstance(phi, Not):
            return self.encode(phi.arg, k, not positive)
        if isinstance(phi, Pred):
            return self.literal(phi, k, positive)
        key = (phi, k, positive)
        if key in self.memo:
            return self.memo[key]
        if isinstance(phi, Until):
            kind, parts = self.until_parts(phi, k, positive)
            subs = [self.part(pk, items, pkey, k) for pk, items, pkey in parts]
        else:
            kind, items = self.children(phi, k, positive)
            subs = [self.encode(*it) for it in items]
        out = self.combine(kind, subs, (phi, positive), k)
        self.memo[key] = out
        return out

    def part(self, kind: str, items: list, key, k: int):
        memo_key = ("part", key, k)
        if memo_key not in self.memo:
            self.memo[memo_key] = self.combine(kind, [self.encode(*it) for it in items], key, k)
        return self.memo[memo_key]

    def combine(self, kind: str, subs: list, key, k: int):
        if kind == "and":
            if any(s is False for s in subs):
                return False
            subs = list(dict.fromkeys(s for s in subs if s is not True))
            if not subs:
                return True
            if len(subs) == 1:
                return subs[0]
            z = self.new_binary(key, k)
            for s in subs:
                self.m.add_constraint({z: 1.0, s: -1.0}, "L", 0.0, name=f"a{len(self.m.constraints)}")
            return z
        if any(s is True for s in subs):
            return True
        subs = list(dict.fromkeys(s for s in subs if s is not False))
        if not subs:
            return False
        if len(subs) == 1:
            return subs[0]
        z = self.new_binary(key, k)
        row = {z: 1.0}
        for s in subs:
            row[s] = row.get(s, 0.0) - 1.0
        self.m.add_constraint(row, "L", 0.0, name=f"o{len(self.m.constraints)}")
        return z

    def assert_true(self, phi: Formula, k: int, positive: bool = True):
        """Require ``phi`` at ``k`` without spending a binary on the root."""
        if isinstance(phi, Not):
            return self.assert_true(phi.arg, k, not positive)
        if isinstance(phi, Top):
            if not positive:
                self.m.add_constraint({}, "G", 1.0, name="false")
            return
        if isinstance(phi, (And, Or, Always, Eventually)):
            kind, items = self.children(phi, k, positive)
            if kind == "and":
                for it in items:
                    self.assert_true(*it)
                return
            self.require_any([self.encode(*it) for it in items])
            return
        if isinstance(phi, Until):
            kind, parts = self.until_parts(phi, k, positive)
            if kind == "and":
                for _, items, _ in parts:
                    self.require_any([self.encode(*it) for it in items])
                return
            self.require_any([self.part(pk, items, pkey, k) for pk, items, pkey in parts])
            return
        z = self.encode(phi, k, positive)
        self.require_any([z])

    def require_any(self, subs: list):
        if any(s is True for s in subs):
            return
        subs = list(dict.fromkeys(s for s in subs if s is not False))
        if not subs:
            self.m.add_constraint({}, "G", 1.0, name="false")
        elif len(subs) == 1:
            var = self.m.variables[subs[0]]
            var.lb = 1.0
        else:
            self.m.add_constraint({s: 1.0 for s in subs}, "G", 1.0, name=f"r{len(self.m.constraints)}")


def encode(
    x0,
    L: int,
    phi: Formula,
    sys: LinearSystem,
    params: SolverParams | None = None,
    input_levels: Sequence[float] | None = None,
    name: str = "stl",
) -> MilpModel:
    """MILP whose feasible points are trajectories satisfying ``phi`` with margin ``epsilon``.

    Variables are ``x_k_i`` (states, ``k = 0..L``), ``u_k_i`` (inputs),
    ``t_k_i`` (absolute-value slacks) and binaries ``z_<node>_<k>``. With
    ``input_levels`` every input is further restricted to that finite grid
    through one-hot binaries ``w_k_i_l``. The objective is ``lam * sum |u|``.
    """
    params = params or SolverParams()
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != sys.n:
        raise ValueError(f"initial state has {x0.size} entries, system has {sys.n} states")
    if L < 0:
        raise ValueError("horizon must be non-negative")
    need = formula_length(phi)
    if need > L:
        raise HorizonError(f"formula of length {need} does not fit the horizon {L}")
    x_lo, x_hi = reachable_boxes(x0, L, sys)
    model = MilpModel(name=name)
    n, m = sys.n, sys.m
    for k in range(L + 1):
        for i in range(n):
            lo, hi = (x0[i], x0[i]) if k == 0 else (x_lo[k, i], x_hi[k, i])
            model.add_var(f"x_{k}_{i + 1}", lo, hi)
    for k in range(L):
        for i in range(m):
            model.add_var(f"u_{k}_{i + 1}", sys.input_lo[i], sys.input_hi[i])
    for k in range(L):
        for i in range(m):
            bound = max(abs(sys.input_lo[i]), abs(sys.input_hi[i]))
            j = model.add_var(f"t_{k}_{i + 1}", 0.0, bound)
            model.objective[j] = params.lam
    for k in range(L):
        for i in range(n):
            row = {model.index(f"x_{k + 1}_{i + 1}"): 1.0}
            for j in range(n):
                if sys.A[i, j] != 0:
                    key = model.index(f"x_{k}_{j + 1}")
                    row[key] = row.get(key, 0.0) - sys.A[i, j]
            for j in range(m):
                if sys.B[i, j] != 0:
                    row[model.index(f"u_{k}_{j + 1}")] = -sys.B[i, j]
            model.add_constraint(row, "E", 0.0, name=f"d_{k}_{i + 1}")
        for i in range(m):
            t, u = model.index(f"t_{k}_{i + 1}"), model.index(f"u_{k}_{i + 1}")
            model.add_constraint({t: 1.0, u: -1.0}, "G", 0.0, name=f"tp_{k}_{i + 1}")
            model.add_constraint({t: 1.0, u: 1.0}, "G", 0.0, name=f"tn_{k}_{i + 1}")
    if input_levels is not None:
        levels = [float(v) for v in input_levels]
        for k in range(L):
            for i in range(m):
                ws = [model.add_binary(f"w_{k}_{i + 1}_{l}") for l in range(len(levels))]
                row = {model.index(f"u_{k}_{i + 1}"): 1.0}
                for w, v in zip(ws, levels):
                    row[w] = -v
                model.add_constraint(row, "E", 0.0, name=f"g_{k}_{i + 1}")
                model.add_constraint({w: 1.0 for w in ws}, "E", 1.0, name=f"h_{k}_{i + 1}")
    enc = _Encoder(model, sys, params, x_lo, x_hi)
    enc.assert_true(phi, 0)
    if enc.max_needed_m > params.big_m:
        warnings.warn(
            f"big-M {params.big_m:g} is below the predicate range {enc.max_needed_m:g}; "
            "feasible trajectories may be cut off",
            BigMWarning,
            stacklevel=2,
        )
    model.meta.update(
        formula=phi,
        system=sys,
        x0=x0,
        horizon=L,
        params=params,
        n_state=n,
        n_input=m,
        n_pred_binaries=enc.n_pred_binaries,
        n_node_binaries=model.n_binaries - enc.n_pred_binaries - (0 if input_levels is None else L * m * len(input_levels)),
    )
    return model


def extract_trajectory(model: MilpModel, values) -> tuple:
    """``(states (L+1, n), inputs (L, m))`` from a solution vector."""
    L, n, m = model.meta["horizon"], model.meta["n_state"], model.meta["n_input"]
    values = np.asarray(values, dtype=float)
    states = values[: (L + 1) * n].reshape(L + 1, n)
    inputs = values[(L + 1) * n : (L + 1) * n + L * m].reshape(L, m)
    return states, inputs

