"""Shared generators and a reference evaluator for the test suite."""
from __future__ import annotations

import itertools
import random

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from stlsplit.separation import FragmentSpec, ProgressTerm, SafetyTerm, TargetTerm, syntactic_separation
from stlsplit.split import WindowTooNarrowError, complete_split
from stlsplit.stl import (
    TRUE,
    Always,
    And,
    Eventually,
    Interval,
    Not,
    Or,
    Pred,
    Top,
    Until,
    formula_length,
    robustness,
    unit_atoms,
)

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

P, Q = unit_atoms(2, ["p", "q"])
ATOMS = (P, Q)


def ref_eval(x, k, phi) -> bool:
    """Direct transcription of the discrete-time semantics (slow, obviously correct)."""
    if isinstance(phi, Top):
        return True
    if isinstance(phi, Pred):
        return float(np.dot(phi.coeffs, x[k])) + phi.offset >= 0
    if isinstance(phi, Not):
        return not ref_eval(x, k, phi.arg)
    if isinstance(phi, And):
        return all(ref_eval(x, k, a) for a in phi.args)
    if isinstance(phi, Or):
        return any(ref_eval(x, k, a) for a in phi.args)
    if isinstance(phi, Until):
        left, right = phi.left, phi.right
    elif isinstance(phi, Eventually):
        left, right = TRUE, phi.arg
    elif isinstance(phi, Always):
        return not ref_eval(x, k, Eventually(phi.interval, Not(phi.arg)))
    else:
        raise TypeError(phi)
    for kp in range(k + phi.interval.first, k + phi.interval.last + 1):
        if ref_eval(x, kp, right) and all(ref_eval(x, kk, left) for kk in range(k, kp + 1)):
            return True
    return False


# ------------------------------------------------------------ random formulas
def random_gamma(rng: random.Random, depth: int = 2):
    """Boolean formula over the two atoms."""
    if depth == 0 or rng.random() < 0.4:
        return rng.choice([P, Q, Not(P), Not(Q)])
    op = rng.choice(["and", "or", "not"])
    if op == "not":
        return Not(random_gamma(rng, depth - 1))
    args = (random_gamma(rng, depth - 1), random_gamma(rng, depth - 1))
    return And(args) if op == "and" else Or(args)


def random_formula(rng: random.Random, max_len: int, depth: int = 3):
    """Random STL formula over the atoms with length at most ``max_len``."""
    if depth == 0 or rng.random() < 0.25:
        return rng.choice([P, Q, TRUE])
    op = rng.choice(["not", "and", "or", "G", "F", "U"])
    if op == "not":
        return Not(random_formula(rng, max_len, depth - 1))
    if op in ("and", "or"):
        args = (random_formula(rng, max_len, depth - 1), random_formula(rng, max_len, depth - 1))
        return And(args) if op == "and" else Or(args)
    b = rng.randint(0, max_len)
    a = rng.randint(0, b)
    if op == "U":
        left = random_formula(rng, max_len - b, depth - 1)
        right = random_formula(rng, max_len - b, depth - 1)
        return Until(left, Interval(a, b), right)
    cls = Always if op == "G" else Eventually
    return cls(Interval(a, b), random_formula(rng, max_len - b, depth - 1))


def random_fragment(rng: random.Random, max_len: int = 8) -> FragmentSpec:
    """Fragment with up to two safety and progress terms and length ``<= max_len``."""
    def interval(limit):
        b = rng.randint(0, limit)
        return Interval(rng.randint(0, b), b)

    safety = [SafetyTerm(interval(max_len), random_gamma(rng)) for _ in range(rng.randint(1, 2))]
    progress = []
    for _ in range(rng.randint(1, 2)):
        c = rng.randint(0, 3)
        progress.append(ProgressTerm(interval(max_len - c), c, random_gamma(rng)))
    c = rng.randint(0, 3)
    target = TargetTerm(interval(max_len - c), c, random_gamma(rng))
    return FragmentSpec(tuple(safety), tuple(progress), target)


def random_kappas(rng: random.Random, L: int) -> list:
    inner = sorted(rng.sample(range(1, L), rng.randint(0, min(3, L - 1)))) if L > 1 else []
    return [0, *inner, L] if L > 0 else [0]


def random_split_instance(rng: random.Random, max_len: int = 8, tries: int = 200):
    """A fragment together with timing points and taus that admit a complete split."""
    for _ in range(tries):
        frag = random_fragment(rng, max_len)
        L = frag.length
        if L < 1:
            continue
        kappas = random_kappas(rng, L)
        try:
            split = complete_split(frag, None, kappas=kappas)
        except (WindowTooNarrowError, ValueError):
            continue
        # re-draw taus uniformly inside their admissible ranges
        taus = {}
        for t in split.carry_terms:
            lo = max(0, t.kappa - _source_b(frag, split, t))
            taus[(t.window, t.source)] = rng.randint(lo, t.c)
        try:
            split = complete_split(frag, taus, kappas=kappas)
        except (WindowTooNarrowError, ValueError):
            continue
        return frag, kappas, split
    raise RuntimeError("could not draw a splittable fragment")


def _source_b(frag, split, carry):
    # last start time of the separated progress piece that produced ``carry``
    sep = syntactic_separation(frag, split.kappas)
    w = sep.windows[carry.window - 1]
    return next(p.interval.last for p in w.progress if p.source == carry.source)


# ------------------------------------------------------------ hypothesis
@st.composite
def formulas(draw, max_len: int = 4, depth: int = 3):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_formula(random.Random(seed), max_len, depth)


@st.composite
def fragments(draw, max_len: int = 6):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_fragment(random.Random(seed), max_len)


@st.composite
def split_instances(draw, max_len: int = 6):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_split_instance(random.Random(seed), max_len)


@pytest.fixture
def rng():
    return random.Random(12345)


# ------------------------------------------------------------ 1D grid family
GRID = (-1.0, 0.0, 1.0)


def random_1d_formula(rng: random.Random, depth: int = 3):
    """Small formula over threshold predicates on a scalar state."""
    if depth == 0 or rng.random() < 0.3:
        c = rng.choice([-2, -1.5, -1, 0, 0.5, 1, 2, 2.5])
        return Pred((1.0,), -c) if rng.random() < 0.5 else Pred((-1.0,), c)
    op = rng.choice(["not", "and", "or", "G", "F", "U"])
    if op == "not":
        return Not(random_1d_formula(rng, depth - 1))
    if op in ("and", "or"):
        args = (random_1d_formula(rng, depth - 1), random_1d_formula(rng, depth - 1))
        return And(args) if op == "and" else Or(args)
    a = rng.randint(0, 2)
    b = rng.randint(a, a + 2)
    if op == "U":
        return Until(random_1d_formula(rng, depth - 1), Interval(a, b), random_1d_formula(rng, depth - 1))
    cls = Always if op == "G" else Eventually
    return cls(Interval(a, b), random_1d_formula(rng, depth - 1))


def grid_corpus(seed: int, size: int, max_len: int = 6):
    """``size`` triples ``(phi, x0, L)`` with ``formula_length(phi) <= L <= max_len``."""
    rng = random.Random(seed)
    out = []
    while len(out) < size:
        phi = random_1d_formula(rng)
        L = formula_length(phi)
        if L > max_len:
            continue
        out.append((phi, float(rng.choice([-1, 0, 1])), max(L, 1)))
    return out


def grid_oracle(phi, x0: float, L: int, eps: float) -> bool:
    """Exhaustive search over all ``3**L`` grid input sequences for ``x_{k+1} = x_k + u_k``."""
    for us in itertools.product(GRID, repeat=L):
        xs = np.cumsum([x0, *us])
        if robustness(xs, 0, phi) >= eps:
            return True
    return False
