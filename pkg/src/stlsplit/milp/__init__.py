"""MILP synthesis: encoding, in-repo solver, MPS export and the ``opt`` interface."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..stl import Formula, Trace, evaluate, robustness
from .bnb import MilpSolution, branch_and_bound, propagate_bounds
from .encode import BigMWarning, encode, extract_trajectory, reachable_boxes
from .model import Constraint, LinearSystem, MilpModel, SolverParams, Variable, single_integrator
from .mps import export_mps, read_mps
from .simplex import DenseLP, LPNumericalError, LPResult, solve_lp

RESIDUAL_TOL = 1e-6


@dataclass
class SynthesisResult:
    feasible: bool
    status: str
    states: Trace | None
    inputs: np.ndarray | None
    objective_value: float
    robustness: float
    solve_stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "status": self.status,
            "objective_value": None if not self.feasible else self.objective_value,
            "robustness": None if not self.feasible else self.robustness,
            "solve_stats": self.solve_stats,
        }


def check_solution(model: MilpModel, values, tol: float = RESIDUAL_TOL) -> bool:
    """Monitor, dynamics and input-box checks on a candidate solution."""
    meta = model.meta
    states, inputs = extract_trajectory(model, values)
    sys: LinearSystem = meta["system"]
    if not np.allclose(states[0], meta["x0"], atol=tol):
        return False
    if sys.residual(states, inputs) > tol or not sys.inputs_admissible(inputs, tol):
        return False
    return evaluate(states, 0, meta["formula"])


def clean_solution(model: MilpModel, values, digits: int = 8):
    """Round inputs, re-simulate the states and rebuild the slacks.

    LP vertices sit on region boundaries up to round-off; snapping the inputs
    to ``digits`` decimals and simulating exactly removes that noise. Returns
    the cleaned vector, or ``None`` when it fails :func:`check_solution`.
    """
    meta = model.meta
    sys: LinearSystem = meta["system"]
    L, n, m = meta["horizon"], meta["n_state"], meta["n_input"]
    _, inputs = extract_trajectory(model, values)
    inputs = np.clip(np.round(inputs, digits), sys.input_lo, sys.input_hi)
    states = sys.simulate(meta["x0"], inputs).reshape(L + 1, n)
    out = np.array(values, dtype=float)
    out[: (L + 1) * n] = states.ravel()
    out[(L + 1) * n : (L + 1) * n + L * m] = inputs.ravel()
    for k in range(L):
        for i in range(m):
            out[model.index(f"t_{k}_{i + 1}")] = abs(inputs[k, i])
    if check_solution(model, out):
        return out
    if check_solution(model, values):
        return np.asarray(values, dtype=float)
    return None


def solve(
    model: MilpModel,
    params: SolverParams | None = None,
    node_budget: int | None = None,
    time_budget_s: float | None = None,
    stop_at_first: bool = False,
) -> SynthesisResult:
    """Branch-and-bound on an encoded model; only monitor-verified incumbents count."""
    params = params or model.meta.get("params") or SolverParams()
    nodes = params.node_budget if node_budget is None else node_budget
    budget = params.time_budget_s if time_budget_s is None else time_budget_s
    verify = (lambda v: clean_solution(model, v)) if "formula" in model.meta else None
    sol = branch_and_bound(
        model,
        node_budget=nodes,
        time_budget_s=budget,
        seed=params.seed,
        verify=verify,
        mip_gap=params.mip_gap,
        stop_at_first=stop_at_first,
    )
    stats = {
        "nodes": sol.nodes,
        "lp_iterations": sol.lp_iterations,
        "wall_time": sol.wall_time,
        "rejected_incumbents": sol.rejected,
        "root_bound": sol.bound,
        "message": sol.message,
        **sol.stats,
    }
    if not sol.feasible:
        return SynthesisResult(False, sol.status, None, None, float("inf"), float("nan"), stats)
    if "formula" not in model.meta:
        stats["values"] = sol.x
        return SynthesisResult(True, sol.status, None, None, sol.objective, float("nan"), stats)
    states, inputs = extract_trajectory(model, sol.x)
    phi = model.meta["formula"]
    rho = robustness(states, 0, phi)
    return SynthesisResult(True, sol.status, Trace(states), inputs, sol.objective, rho, stats)


def opt(x0, L: int, phi: Formula, sys: LinearSystem, params: SolverParams | None = None, **kwargs) -> SynthesisResult:
    """Synthesize inputs ``u_0..u_{L-1}`` so that ``phi`` holds from ``x0``."""
    params = params or SolverParams()
    t0 = time.perf_counter()
    model = encode(x0, L, phi, sys, params)
    res = solve(model, params, **kwargs)
    res.solve_stats["encode_time"] = time.perf_counter() - t0 - res.solve_stats["wall_time"]
    return res


__all__ = [
    "BigMWarning",
    "Constraint",
    "DenseLP",
    "LPNumericalError",
    "LPResult",
    "LinearSystem",
    "MilpModel",
    "MilpSolution",
    "SolverParams",
    "SynthesisResult",
    "Variable",
    "branch_and_bound",
    "check_solution",
    "clean_solution",
    "encode",
    "export_mps",
    "extract_trajectory",
    "opt",
    "propagate_bounds",
    "reachable_boxes",
    "read_mps",
    "single_integrator",
    "solve",
    "solve_lp",
]
