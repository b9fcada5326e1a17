"""Monolithic versus modular synthesis on one scenario."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

from .milp import opt
from .modular import WindowInfeasibleError, run_modular, split_metrics
from .parser import ScenarioFile
from .split import complete_split
from .stl import evaluate


@dataclass
class BenchReport:
    monolithic: dict
    modularized: dict
    speedup: float | None
    verdicts: dict
    metrics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def run_bench(scenario: ScenarioFile, time_budget_s: float | None = None, seed: int | None = None) -> BenchReport:
    """Solve ``scenario`` as one MILP and window by window, then compare.

    ``time_budget_s`` bounds the monolithic solve and every window solve.
    A monolithic timeout is recorded rather than raised; the speedup is then
    a lower bound.
    """
    params = scenario.solver_params
    if time_budget_s is not None:
        params = replace(params, time_budget_s=time_budget_s)
    if seed is not None:
        params = replace(params, seed=seed)
    phi = scenario.formula
    notes = []

    t0 = time.perf_counter()
    mono = opt(scenario.initial_state, scenario.horizon, phi, scenario.system, params)
    mono_time = time.perf_counter() - t0
    mono_ok = mono.feasible and evaluate(mono.states, 0, phi)
    monolithic = {
        "feasible": mono.feasible,
        "status": mono.status,
        "wall_time": mono_time,
        "n_binaries": mono.solve_stats.get("n_binaries"),
        "nodes": mono.solve_stats.get("nodes"),
        "robustness": mono.robustness if mono.feasible else None,
        "timed_out": mono.status == "budget_exhausted" or "budget" in mono.solve_stats.get("message", ""),
    }
    if monolithic["timed_out"]:
        notes.append(f"monolithic solve hit its budget after {mono_time:.1f} s")

    split = complete_split(scenario.fragment, scenario.taus, kappas=scenario.kappas)
    t0 = time.perf_counter()
    try:
        mod = run_modular(scenario.initial_state, split, scenario.system, params, formula=phi)
        mod_ok = mod.final_verdict
        modularized = {
            "feasible": True,
            "per_window_times": [w.wall_time for w in mod.per_window],
            "total_wall_time": time.perf_counter() - t0,
            "max_window_binaries": mod.metrics["max_window_binaries"],
            "window_binaries": mod.metrics["window_binaries"],
            "robustness": mod.robustness,
            "target_achieved_window": mod.target_achieved_window,
            "used_fallback": [w.used_fallback for w in mod.per_window],
        }
    except WindowInfeasibleError as exc:
        mod_ok = False
        modularized = {
            "feasible": False,
            "failed_window": exc.window,
            "status": exc.status,
            "total_wall_time": time.perf_counter() - t0,
        }
        notes.append(str(exc))

    metrics = split_metrics(split, len(scenario.fragment.safety), len(scenario.fragment.progress))
    metrics["N_times_L"] = metrics["N"] * metrics["L"]
    metrics["N_bar_times_L_bar"] = metrics["N_bar"] * metrics["L_bar"]
    speedup = None
    if modularized["feasible"] and (mono.feasible or monolithic["timed_out"]):
        speedup = mono_time / modularized["total_wall_time"]
        if not mono.feasible:
            notes.append("speedup is a lower bound: the monolithic solve did not finish")
    verdicts = {"monolithic": bool(mono_ok), "modularized": bool(mod_ok)}
    return BenchReport(monolithic, modularized, speedup, verdicts, metrics, notes)
