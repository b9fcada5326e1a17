"""Linear systems, solver parameters and a plain MILP container."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """``x_{k+1} = A x_k + B u_k`` with ``input_lo <= u_k <= input_hi``."""

    A: np.ndarray
    B: np.ndarray
    input_lo: np.ndarray
    input_hi: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        B = np.array(self.B, dtype=float)
        if B.ndim < 2:
            B = B.reshape(A.shape[0], -1)
        lo = np.atleast_1d(np.array(self.input_lo, dtype=float))
        hi = np.atleast_1d(np.array(self.input_hi, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows but the state has dimension {A.shape[0]}")
        if lo.shape != (B.shape[1],) or hi.shape != (B.shape[1],):
            raise ValueError(f"input box must have {B.shape[1]} entries")
        if np.any(lo > hi):
            raise ValueError("input_lo must not exceed input_hi")
        for name, arr in (("A", A), ("B", B), ("input_lo", lo), ("input_hi", hi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def step(self, x, u) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) + self.B @ np.asarray(u, dtype=float)

    def simulate(self, x0, inputs) -> np.ndarray:
        xs = [np.asarray(x0, dtype=float)]
        for u in inputs:
            xs.append(self.step(xs[-1], u))
        return np.array(xs)

    def residual(self, states, inputs) -> float:
        """Largest violation of the dynamics along a state/input sequence."""
        states = np.asarray(states, dtype=float)
        inputs = np.asarray(inputs, dtype=float).reshape(-1, self.m)
        if len(inputs) == 0:
            return 0.0
        pred = states[:-1] @ self.A.T + inputs @ self.B.T
        return float(np.max(np.abs(pred - states[1:])))

    def inputs_admissible(self, inputs, tol: float = 1e-7) -> bool:
        inputs = np.asarray(inputs, dtype=float).reshape(-1, self.m)
        return bool(np.all(inputs >= self.input_lo - tol) and np.all(inputs <= self.input_hi + tol))


def single_integrator(n: int = 2, umax: float = 1.0) -> LinearSystem:
    return LinearSystem(np.eye(n), np.eye(n), -umax * np.ones(n), umax * np.ones(n))


@dataclass(frozen=True)
class SolverParams:
    big_m: float = 1e4
    epsilon: float = 1e-3
    lam: float = 1.0
    node_budget: int = 20000
    time_budget_s: float = 120.0
    seed: int = 0
    mip_gap: float = 1e-4


@dataclass
class Variable:
    name: str
    lb: float = -math.inf
    ub: float = math.inf
    integer: bool = False


@dataclass
class Constraint:
    name: str
    coefs: dict
    sense: str  # 'L' (<=), 'G' (>=) or 'E' (=)
    rhs: float


@dataclass
class MilpModel:
    """Minimise ``objective . x`` over linear rows with bounds and binaries.

    ``meta`` carries what the encoder knows about the synthesis problem
    (formula, system, initial state, index maps); it is empty for models read
    back from MPS.
    """

    name: str = "stl"
    variables: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {v.name: i for i, v in enumerate(self.variables)}

    def add_var(self, name: str, lb: float = -math.inf, ub: float = math.inf, integer: bool = False) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name}")
        self._index[name] = len(self.variables)
        self.variables.append(Variable(name, float(lb), float(ub), integer))
        return self._index[name]

    def add_binary(self, name: str) -> int:
        return self.add_var(name, 0.0, 1.0, True)

    def add_constraint(self, coefs: dict, sense: str, rhs: float, name: str | None = None):
        if sense not in ("L", "G", "E"):
            raise ValueError(f"unknown constraint sense {sense!r}")
        row = {j: float(a) for j, a in coefs.items() if a != 0}
        self.constraints.append(Constraint(name or f"c{len(self.constraints)}", row, sense, float(rhs)))

    def index(self, name: str) -> int:
        return self._index[name]

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_binaries(self) -> int:
        return sum(1 for v in self.variables if v.integer)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def arrays(self):
        """Dense ``(c, A_ub, b_ub, A_eq, b_eq, lb, ub, integer)``; ``>=`` rows are negated."""
        n = self.n_vars
        c = np.zeros(n)
        for j, a in self.objective.items():
            c[j] = a
        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
        for con in self.constraints:
            row = np.zeros(n)
            for j, a in con.coefs.items():
                row[j] = a
            if con.sense == "E":
                eq_rows.append(row)
                eq_rhs.append(con.rhs)
            elif con.sense == "L":
                ub_rows.append(row)
                ub_rhs.append(con.rhs)
            else:
                ub_rows.append(-row)
                ub_rhs.append(-con.rhs)
        A_ub = np.array(ub_rows).reshape(-1, n)
        A_eq = np.array(eq_rows).reshape(-1, n)
        lb = np.array([v.lb for v in self.variables])
        ub = np.array([v.ub for v in self.variables])
        integer = np.array([v.integer for v in self.variables], dtype=bool)
        return c, A_ub, np.array(ub_rhs), A_eq, np.array(eq_rhs), lb, ub, integer

    def same_structure(self, other: "MilpModel", rtol: float = 1e-9) -> bool:
        """Equal variables, bounds, rows and objective (names included)."""
        if [(v.name, v.integer) for v in self.variables] != [(v.name, v.integer) for v in other.variables]:
            return False
        for v, w in zip(self.variables, other.variables):
            if not (_close(v.lb, w.lb, rtol) and _close(v.ub, w.ub, rtol)):
                return False
        if not _dict_close(self.objective, other.objective, rtol):
            return False
        if len(self.constraints) != len(other.constraints):
            return False
        for c1, c2 in zip(self.constraints, other.constraints):
            if (c1.name, c1.sense) != (c2.name, c2.sense) or not _close(c1.rhs, c2.rhs, rtol):
                return False
            if not _dict_close(c1.coefs, c2.coefs, rtol):
                return False
        return True


def _close(a: float, b: float, rtol: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return math.isclose(a, b, rel_tol=rtol, abs_tol=rtol)


def _dict_close(d1: dict, d2: dict, rtol: float) -> bool:
    d1 = {k: v for k, v in d1.items() if v != 0}
    d2 = {k: v for k, v in d2.items() if v != 0}
    return d1.keys() == d2.keys() and all(_close(d1[k], d2[k], rtol) for k in d1)
