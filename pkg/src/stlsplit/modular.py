"""Window-by-window synthesis over a complete split.

Each window ``z`` is solved from the terminal state of window ``z - 1`` on its
own horizon ``kappa_z - kappa_{z-1}``. While no earlier target has been met,
the window first tries its safety/progress formula together with its target
and falls back to the safety/progress formula alone when that is infeasible.
The stitched trajectory is finally checked against the original formula.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .milp import SynthesisResult, opt
from .milp.model import LinearSystem, SolverParams
from .parser import format_formula
from .split import SplitSpec, check_nonoverlap, local_formula
from .stl import Formula, Trace, evaluate, robustness


class WindowInfeasibleError(RuntimeError):
    """A window admits no trajectory even without its target."""

    def __init__(self, window: int, status: str, partial=None):
        super().__init__(f"window {window} is infeasible ({status}) from the state reached so far")
        self.window = window
        self.status = status
        self.partial = partial


@dataclass
class WindowRecord:
    window: int
    lo: int
    hi: int
    formula: Formula
    feasible: bool
    used_fallback: bool
    target_attempted: bool
    wall_time: float
    status: str
    n_binaries: int
    attempts: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "interval": [self.lo, self.hi],
            "formula": format_formula(self.formula),
            "feasible": self.feasible,
            "used_fallback": self.used_fallback,
            "target_attempted": self.target_attempted,
            "wall_time": self.wall_time,
            "status": self.status,
            "n_binaries": self.n_binaries,
            "attempts": self.attempts,
        }


def split_metrics(split: SplitSpec, n_safety: int | None = None, n_progress: int | None = None) -> dict:
    """Subformula counts and lengths of the monolithic and windowed problems.

    ``N = n_s + n_p + 1`` and ``L = kappa_l`` describe the original formula;
    ``N_bar`` is the largest per-window count of safety, truncated progress,
    tail and head terms, and ``L_bar`` the widest window.
    """
    if n_safety is None:
        n_safety = len({t.source for w in split.windows for t in w.safety})
    if n_progress is None:
        n_progress = len({t.source for w in split.windows for t in (*w.progress, *w.tails, *w.heads)})
    per = [len(w.safety) + len(w.progress) + len(w.tails) + len(w.heads) for w in split.windows]
    widths = [w.hi - w.lo for w in split.windows]
    return {
        "N": n_safety + n_progress + 1,
        "L": split.horizon,
        "N_bar": max(per),
        "L_bar": max(widths),
        "per_window_subformulas": per,
        "window_lengths": widths,
        "l": len(split.windows),
    }


@dataclass
class ModularResult:
    states: Trace | None
    inputs: np.ndarray | None
    per_window: list
    target_achieved_window: int | None
    final_verdict: bool
    robustness: float
    metrics: dict
    target_missed: bool = False
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "final_verdict": self.final_verdict,
            "target_achieved_window": self.target_achieved_window,
            "target_missed": self.target_missed,
            "robustness": None if self.states is None else self.robustness,
            "wall_time": self.wall_time,
            "per_window": [w.to_dict() for w in self.per_window],
            "metrics": self.metrics,
        }


def _prefix_target(states: list, split: SplitSpec, upto: int) -> int | None:
    """First window ``w < upto`` whose target holds on the stitched prefix."""
    x = np.asarray(states)
    for z, w in enumerate(split.windows[:upto], 1):
        if w.phi_bar_t is not None and evaluate(x[w.lo : w.hi + 1], 0, local_formula(w.phi_bar_t, w.lo)):
            return z
    return None


def run_modular(
    x0,
    split: SplitSpec,
    sys: LinearSystem,
    params: SolverParams | None = None,
    formula: Formula | None = None,
    time_budget_s: float | None = None,
    stop_at_first: bool = False,
) -> ModularResult:
    """Solve the windows of ``split`` in time order and stitch the trajectories.

    ``formula`` is the original specification used for the final monitor
    check; it defaults to the split formula itself. ``time_budget_s`` is the
    budget of every single window solve.
    """
    if not check_nonoverlap(split):
        raise ValueError("window formulas read outside their windows; the split cannot be solved modularly")
    params = params or SolverParams()
    formula = formula if formula is not None else split.formula()
    t_start = time.perf_counter()
    x = np.asarray(x0, dtype=float)
    states = [x]
    inputs: list = []
    records: list = []
    achieved = None

    for z, w in enumerate(split.windows, 1):
        horizon = w.hi - w.lo
        if z > 1 and achieved is None:
            achieved = _prefix_target(states, split, z - 1)
        base = local_formula(w.phi_bar, w.lo)
        tries = []
        if achieved is None and w.phi_bar_t is not None:
            tries.append((base & local_formula(w.phi_bar_t, w.lo), True))
        tries.append((base, False))
        attempts = []
        res: SynthesisResult | None = None
        t0 = time.perf_counter()
        for phi, with_target in tries:
            res = opt(x, horizon, phi, sys, params, time_budget_s=time_budget_s, stop_at_first=stop_at_first)
            attempts.append(
                {
                    "with_target": with_target,
                    "status": res.status,
                    "wall_time": res.solve_stats.get("wall_time"),
                    "n_binaries": res.solve_stats.get("n_binaries"),
                    "nodes": res.solve_stats.get("nodes"),
                }
            )
            if res.feasible:
                break
        rec = WindowRecord(
            z,
            w.lo,
            w.hi,
            phi,
            res.feasible,
            len(tries) == 2 and len(attempts) == 2,
            tries[0][1],
            time.perf_counter() - t0,
            res.status,
            max(a["n_binaries"] or 0 for a in attempts),
            attempts,
        )
        records.append(rec)
        if not res.feasible:
            partial = ModularResult(
                Trace(np.array(states)), np.array(inputs).reshape(-1, sys.m), records, achieved, False,
                float("nan"), split_metrics(split), achieved is None, time.perf_counter() - t_start,
            )
            raise WindowInfeasibleError(z, res.status, partial)
        seg = res.states.samples
        # stitch on the exact terminal state of the previous window
        states.extend(seg[1:])
        inputs.extend(res.inputs)
        x = seg[-1]

    samples = np.array(states)
    if achieved is None:
        achieved = _prefix_target(states, split, len(split.windows))
    metrics = split_metrics(split)
    metrics["window_binaries"] = [r.n_binaries for r in records]
    metrics["max_window_binaries"] = max(metrics["window_binaries"])
    verdict = achieved is not None and evaluate(samples, 0, formula)
    return ModularResult(
        Trace(samples),
        np.array(inputs).reshape(-1, sys.m),
        records,
        achieved,
        bool(verdict),
        robustness(samples, 0, formula),
        metrics,
        target_missed=achieved is None,
        wall_time=time.perf_counter() - t_start,
    )
