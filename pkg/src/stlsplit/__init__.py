"""Timing separation, complete split and modular MILP synthesis for STL."""
from .casestudy import build_casestudy
from .milp import LinearSystem, SolverParams, SynthesisResult, encode, export_mps, opt, single_integrator, solve
from .modular import ModularResult, WindowInfeasibleError, run_modular
from .parser import format_formula, parse_formula, parse_scenario
from .separation import (
    FragmentSpec,
    SeparatedSpec,
    fragment_from_formula,
    separate_until,
    shift_nested,
    split_temporal,
    syntactic_separation,
    verify_separated,
)
from .split import SplitSpec, Verdict, check_nonoverlap, complete_split, enumerate_oracle, modular_check
from .stl import (
    Always,
    And,
    Eventually,
    Formula,
    Interval,
    Not,
    Or,
    Pred,
    Trace,
    Until,
    canonicalize,
    evaluate,
    formula_length,
    robustness,
)

__version__ = "0.1.0"
