"""Command-line front end.

Exit codes: 0 success, 1 specification violated or infeasible, 2 usage error.
Trajectories are written as CSV with header ``k,x1..xn,u1..um`` (the input
columns of the last row are empty); verdicts and reports as JSON.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import run_bench
from .casestudy import CASESTUDY_TEXT, build_casestudy
from .milp import opt
from .modular import WindowInfeasibleError, run_modular
from .parser import ParseError, ScenarioError, format_formula, parse_formula, parse_scenario, parse_taus
from .separation import FragmentShapeError, KappaError, fragment_from_formula, syntactic_separation
from .split import TauRangeError, WindowTooNarrowError, complete_split, modular_check
from .stl import HorizonError, Trace, evaluate, formula_length, robustness

log = logging.getLogger("stlsplit")

OK, VIOLATED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers
def _json(obj) -> str:
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        return str(o)

    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return None
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    return json.dumps(clean(obj), indent=2, default=default)


def write_trace_csv(path, states, inputs=None):
    states = np.atleast_2d(np.asarray(states, dtype=float))
    n = states.shape[1]
    m = 0 if inputs is None else np.asarray(inputs).reshape(len(states) - 1, -1).shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", *(f"x{i + 1}" for i in range(n)), *(f"u{i + 1}" for i in range(m))])
        for k, x in enumerate(states):
            row = [k, *(repr(float(v)) for v in x)]
            if m:
                row += [repr(float(v)) for v in inputs[k]] if k < len(inputs) else [""] * m
            w.writerow(row)


def read_trace_csv(path) -> Trace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"--trace: {path} is empty")
    header = [h.strip() for h in rows[0]]
    cols = [i for i, h in enumerate(header) if h.startswith("x")]
    if not cols or header[0] != "k":
        raise UsageError(f"--trace: header must be k,x1,...,xn[,u1,...], got {','.join(header)}")
    try:
        data = np.array([[float(r[i]) for i in cols] for r in rows[1:] if r])
    except (ValueError, IndexError) as exc:
        raise UsageError(f"--trace: bad row in {path}: {exc}") from exc
    return Trace(data)


def _kappas(text: str, horizon: int) -> list:
    try:
        ks = [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise UsageError(f"--kappas: expected comma-separated integers, got {text!r}") from exc
    if not ks or ks[0] != 0:
        ks = [0, *ks]
    if ks[-1] != horizon:
        ks.append(horizon)
    return ks


def _load(args):
    """Scenario (if any), formula, kappas and taus from the common flags."""
    sc = None
    if getattr(args, "spec", None):
        try:
            text = Path(args.spec).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"--spec: {exc}") from exc
        sc = parse_scenario(text)
    if getattr(args, "formula", None):
        regions = sc.regions if sc else None
        dim = sc.system.n if sc else None
        phi = parse_formula(args.formula, regions=regions, dim=dim)
    elif sc is not None:
        phi = sc.formula
    else:
        raise UsageError("--formula or --spec is required")
    horizon = formula_length(phi)
    if getattr(args, "kappas", None):
        kappas = _kappas(args.kappas, horizon)
    elif sc is not None and phi is sc.formula:
        kappas = list(sc.kappas)
    else:
        kappas = None
    taus = parse_taus(args.taus) if getattr(args, "taus", None) else (sc.taus if sc else None)
    return sc, phi, kappas, taus


def _params(sc, args):
    params = sc.solver_params
    if getattr(args, "time_budget", None) is not None:
        params = replace(params, time_budget_s=args.time_budget)
    if getattr(args, "seed", None) is not None:
        params = replace(params, seed=args.seed)
    return params


def _out_dir(args):
    if not getattr(args, "out", None):
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(args, name: str, text: str):
    out = _out_dir(args)
    if out is not None:
        (out / name).write_text(text, encoding="utf-8")
    print(text.rstrip("\n"))


def _split_text(split) -> str:
    lines = ["kappas = " + ", ".join(str(k) for k in split.kappas)]
    for z, w in enumerate(split.windows, 1):
        lines.append(f"phi_bar_{z} = {format_formula(w.phi_bar)}")
        lines.append(f"phi_bar_t_{z} = {'false' if w.phi_bar_t is None else format_formula(w.phi_bar_t)}")
    for t in split.carry_terms:
        lines.append(f"carry window {t.window} source {t.source}: tau = {t.tau}, tail F{t.tail}, head F{t.head}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- commands
def cmd_parse(args) -> int:
    _, phi, _, _ = _load(args)
    print(format_formula(phi))
    return OK


def cmd_check(args) -> int:
    if not args.trace:
        raise UsageError("--trace is required")
    sc, phi, kappas, taus = _load(args)
    trace = read_trace_csv(args.trace)
    if kappas is not None:
        split = complete_split(fragment_from_formula(phi), taus, kappas=kappas)
        if trace.L != split.horizon:
            raise UsageError(f"--trace: has length {trace.L}, the split needs {split.horizon}")
        verdict = modular_check(trace, split)
        report = verdict.to_dict()
        ok = verdict.overall
    else:
        try:
            ok = evaluate(trace, 0, phi)
            report = {"satisfied": ok, "robustness": robustness(trace, 0, phi)}
        except HorizonError as exc:
            raise UsageError(f"--trace: {exc}") from exc
    _emit(args, "verdict.json", _json(report))
    return OK if ok else VIOLATED


def cmd_separate(args) -> int:
    _, phi, kappas, _ = _load(args)
    if kappas is None:
        raise UsageError("--kappas is required")
    sep = syntactic_separation(fragment_from_formula(phi), kappas)
    lines = ["kappas = " + ", ".join(str(k) for k in sep.kappas)]
    for z, w in enumerate(sep.windows, 1):
        lines.append(f"phi_{z} = {format_formula(w.phi)}")
        lines.append(f"phi_t_{z} = {'false' if w.phi_t is None else format_formula(w.phi_t)}")
    _emit(args, "separated.txt", "\n".join(lines) + "\n")
    return OK


def cmd_split(args) -> int:
    _, phi, kappas, taus = _load(args)
    if kappas is None:
        raise UsageError("--kappas is required")
    split = complete_split(fragment_from_formula(phi), taus, kappas=kappas)
    _emit(args, "split.txt", _split_text(split))
    return OK


def _need_scenario(sc):
    if sc is None:
        raise UsageError("--spec is required")
    return sc


def cmd_synthesize(args) -> int:
    sc, phi, _, _ = _load(args)
    sc = _need_scenario(sc)
    res = opt(sc.initial_state, formula_length(phi), phi, sc.system, _params(sc, args))
    out = _out_dir(args)
    if res.feasible and out is not None:
        write_trace_csv(out / "trajectory.csv", res.states.samples, res.inputs)
    _emit(args, "result.json", _json(res.to_dict()))
    return OK if res.feasible else VIOLATED


def _modular(sc, phi, kappas, taus, args) -> int:
    split = complete_split(fragment_from_formula(phi), taus, kappas=kappas)
    out = _out_dir(args)
    try:
        res = run_modular(sc.initial_state, split, sc.system, _params(sc, args), formula=phi)
    except WindowInfeasibleError as exc:
        _emit(args, "result.json", _json({"final_verdict": False, "failed_window": exc.window, "status": exc.status}))
        return VIOLATED
    verdict = modular_check(res.states, split).to_dict()
    verdict["final_verdict"] = res.final_verdict
    verdict["robustness"] = res.robustness
    if out is not None:
        write_trace_csv(out / "trajectory.csv", res.states.samples, res.inputs)
        (out / "verdict.json").write_text(_json(verdict), encoding="utf-8")
    _emit(args, "result.json", _json(res.to_dict()))
    return OK if res.final_verdict else VIOLATED


def cmd_modular(args) -> int:
    sc, phi, kappas, taus = _load(args)
    sc = _need_scenario(sc)
    if kappas is None:
        raise UsageError("--kappas is required")
    return _modular(sc, phi, kappas, taus, args)


def cmd_casestudy(args) -> int:
    sc = build_casestudy()
    out = _out_dir(args)
    if out is not None:
        (out / "scenario.spec").write_text(CASESTUDY_TEXT, encoding="utf-8")
    return _modular(sc, sc.formula, list(sc.kappas), sc.taus, args)


def cmd_bench(args) -> int:
    sc, _, _, _ = _load(args) if args.spec else (build_casestudy(), None, None, None)
    report = run_bench(sc, time_budget_s=args.time_budget, seed=args.seed)
    _emit(args, "bench.json", _json(report.to_dict()))
    return OK if report.verdicts["modularized"] else VIOLATED


COMMANDS = {
    "parse": (cmd_parse, "print the canonical form of a formula"),
    "check": (cmd_check, "monitor a CSV trace against a formula (window-wise with --kappas)"),
    "separate": (cmd_separate, "syntactic timing separation"),
    "split": (cmd_split, "complete split"),
    "synthesize": (cmd_synthesize, "monolithic MILP synthesis for a scenario"),
    "modular": (cmd_modular, "window-by-window synthesis for a scenario"),
    "casestudy": (cmd_casestudy, "run the built-in robot scenario"),
    "bench": (cmd_bench, "compare monolithic and modular synthesis"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stlsplit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--spec", metavar="PATH", help="scenario file")
        p.add_argument("--formula", metavar="STR", help="formula text (regions come from --spec)")
        p.add_argument("--trace", metavar="PATH", help="trace CSV with header k,x1..xn[,u1..um]")
        p.add_argument("--kappas", metavar="LIST", help="timing points, e.g. 15,30 (0 and L are added)")
        p.add_argument("--taus", metavar="LIST", help="one tau for all carried terms, or one per term")
        p.add_argument("--out", metavar="DIR", help="directory for output files")
        p.add_argument("--time-budget", type=float, metavar="SECONDS", help="solver time budget per MILP")
        p.add_argument("--seed", type=int, metavar="INT", help="branching seed")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    func = COMMANDS[args.command][0]
    try:
        return func(args)
    except UsageError as exc:
        print(f"stlsplit {args.command}: {exc}", file=sys.stderr)
        return USAGE
    except ParseError as exc:
        print(f"stlsplit {args.command}: --formula/--spec: {exc}", file=sys.stderr)
        return USAGE
    except (ScenarioError, FragmentShapeError, KappaError, TauRangeError, WindowTooNarrowError) as exc:
        flag = "--kappas/--taus" if isinstance(exc, (KappaError, TauRangeError, WindowTooNarrowError)) else "--spec"
        print(f"stlsplit {args.command}: {flag}: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
