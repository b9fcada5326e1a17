"""Discrete-time STL formulas, semantics and robustness.

Formulas are immutable trees. Time is integer; an :class:`Interval` may carry
open/half-open endpoint flags (useful while rewriting), but every evaluator
works on its canonical closed form ``[first, last]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np


class EmptyIntervalError(ValueError):
    """An interval whose canonical integer form contains no time points."""


class HorizonError(ValueError):
    """The trace is too short to decide the formula at the requested time."""


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int
    lo_open: bool = False
    hi_open: bool = False

    def __post_init__(self):
        if int(self.lo) != self.lo or int(self.hi) != self.hi:
            raise TypeError(f"interval bounds must be integers, got {self.lo}, {self.hi}")
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "hi", int(self.hi))
        if self.first > self.last:
            raise EmptyIntervalError(f"empty interval {self}")
        if self.first < 0:
            raise ValueError(f"interval {self} starts before time 0")

    @classmethod
    def closed(cls, lo: int, hi: int) -> "Interval":
        return cls(lo, hi)

    @classmethod
    def open(cls, lo: int, hi: int) -> "Interval":
        return cls(lo, hi, True, True)

    @classmethod
    def point(cls, k: int) -> "Interval":
        return cls(k, k)

    @property
    def first(self) -> int:
        return self.lo + 1 if self.lo_open else self.lo

    @property
    def last(self) -> int:
        return self.hi - 1 if self.hi_open else self.hi

    @property
    def is_canonical(self) -> bool:
        return not (self.lo_open or self.hi_open)

    def canonical(self) -> "Interval":
        if self.is_canonical:
            return self
        return Interval(self.first, self.last)

    def shift(self, delta: int) -> "Interval":
        return Interval(self.first + delta, self.last + delta)

    def contains(self, other: "Interval") -> bool:
        return self.first <= other.first and other.last <= self.last

    def __contains__(self, k: int) -> bool:
        return self.first <= k <= self.last

    def __iter__(self):
        return iter(range(self.first, self.last + 1))

    def __len__(self) -> int:
        return self.last - self.first + 1

    def __str__(self) -> str:
        return f"{'(' if self.lo_open else '['}{self.lo},{self.hi}{')' if self.hi_open else ']'}"


class Formula:
    """Base class of the STL syntax tree."""

    __slots__ = ()

    def __and__(self, other):
        return conj(self, other)

    def __or__(self, other):
        return disj(self, other)

    def __invert__(self):
        return Not(self)

    def __str__(self) -> str:
        from .parser import format_formula

        return format_formula(self)


@dataclass(frozen=True)
class Top(Formula):
    pass


TRUE = Top()


@dataclass(frozen=True)
class Pred(Formula):
    """Affine predicate ``coeffs . x + offset >= 0``."""

    coeffs: tuple
    offset: float = 0.0
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "offset", float(self.offset))
        if not self.coeffs:
            raise ValueError("predicate needs at least one coefficient")

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    def value(self, x) -> float:
        return float(np.dot(self.coeffs, x) + self.offset)


# Name used in the public API for the predicate leaf.
Predicate = Pred


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    args: tuple
    # Region membership sugar such as ``inbox(TARGET)``; purely cosmetic.
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if not self.args:
            raise ValueError("And needs at least one argument")


@dataclass(frozen=True)
class Or(Formula):
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if not self.args:
            raise ValueError("Or needs at least one argument")


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    interval: Interval
    right: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    interval: Interval
    arg: Formula


@dataclass(frozen=True)
class Always(Formula):
    interval: Interval
    arg: Formula


FALSE = Not(TRUE)

TEMPORAL = (Until, Eventually, Always)


def conj(*items: Formula) -> Formula:
    """Flat conjunction; ``TRUE`` for no items, the item itself for one."""
    flat = []
    for it in items:
        if isinstance(it, And) and it.label is None:
            flat.extend(it.args)
        else:
            flat.append(it)
    if not flat:
        return TRUE
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def disj(*items: Formula) -> Formula:
    flat = []
    for it in items:
        if isinstance(it, Or):
            flat.extend(it.args)
        else:
            flat.append(it)
    if not flat:
        return FALSE
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def children(phi: Formula) -> tuple:
    if isinstance(phi, (And, Or)):
        return phi.args
    if isinstance(phi, Not):
        return (phi.arg,)
    if isinstance(phi, (Eventually, Always)):
        return (phi.arg,)
    if isinstance(phi, Until):
        return (phi.left, phi.right)
    return ()


def walk(phi: Formula):
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def predicates(phi: Formula) -> list:
    """Distinct predicates in order of first appearance."""
    seen = {}
    for node in walk(phi):
        if isinstance(node, Pred) and node not in seen:
            seen[node] = None
    return list(seen)


def is_boolean(phi: Formula) -> bool:
    """True when ``phi`` has no temporal operator."""
    return not any(isinstance(n, TEMPORAL) for n in walk(phi))


def formula_length(phi: Formula) -> int:
    """Horizon needed to decide ``phi``."""
    if isinstance(phi, (Top, Pred)):
        return 0
    if isinstance(phi, Not):
        return formula_length(phi.arg)
    if isinstance(phi, (And, Or)):
        return max(formula_length(a) for a in phi.args)
    if isinstance(phi, Until):
        return phi.interval.last + max(formula_length(phi.left), formula_length(phi.right))
    if isinstance(phi, (Eventually, Always)):
        return phi.interval.last + formula_length(phi.arg)
    raise TypeError(f"not a formula: {phi!r}")


def span(phi: Formula) -> tuple:
    """Earliest and latest time point (relative to 0) that ``phi`` reads."""
    if isinstance(phi, (Top, Pred)):
        return 0, 0
    if isinstance(phi, Not):
        return span(phi.arg)
    if isinstance(phi, (And, Or)):
        spans = [span(a) for a in phi.args]
        return min(s[0] for s in spans), max(s[1] for s in spans)
    if isinstance(phi, (Eventually, Always)):
        lo, hi = span(phi.arg)
        return phi.interval.first + lo, phi.interval.last + hi
    if isinstance(phi, Until):
        l1, h1 = span(phi.left)
        l2, h2 = span(phi.right)
        return min(l1, phi.interval.first + l2), phi.interval.last + max(h1, h2)
    raise TypeError(f"not a formula: {phi!r}")


def canonicalize(phi: Formula) -> Formula:
    """Rewrite every interval into its closed integer form."""
    if isinstance(phi, (Top, Pred)):
        return phi
    if isinstance(phi, Not):
        return Not(canonicalize(phi.arg))
    if isinstance(phi, And):
        return And(tuple(canonicalize(a) for a in phi.args), label=phi.label)
    if isinstance(phi, Or):
        return Or(tuple(canonicalize(a) for a in phi.args))
    if isinstance(phi, Until):
        return Until(canonicalize(phi.left), phi.interval.canonical(), canonicalize(phi.right))
    if isinstance(phi, (Eventually, Always)):
        return replace(phi, interval=phi.interval.canonical(), arg=canonicalize(phi.arg))
    raise TypeError(f"not a formula: {phi!r}")


@dataclass(frozen=True, eq=False)
class Trace:
    """Samples ``x_0 .. x_L`` of an ``n``-dimensional discrete-time signal."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("trace needs shape (L+1, n) with at least one sample")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def L(self) -> int:
        return self.samples.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.samples.shape[0]

    def __getitem__(self, k):
        return self.samples[k]

    def window(self, k1: int, k2: int) -> "Trace":
        """The segment ``x_[k1, k2]`` (both ends included)."""
        if not 0 <= k1 <= k2 <= self.L:
            raise IndexError(f"segment [{k1},{k2}] outside trace of length {self.L}")
        return Trace(self.samples[k1 : k2 + 1])

    def __eq__(self, other):
        return isinstance(other, Trace) and np.array_equal(self.samples, other.samples)

    __hash__ = None


def as_trace(trace) -> Trace:
    return trace if isinstance(trace, Trace) else Trace(trace)


def _signal(phi: Formula, x: np.ndarray, boolean: bool, memo: dict) -> np.ndarray:
    # Values of phi at every k in 0..L-len(phi) along the last axis; +-1 in
    # boolean mode. ``x`` has shape (..., L+1, n) so batches share the work.
    key = id(phi)
    if key in memo:
        return memo[key][1]
    L = x.shape[-2] - 1
    batch = x.shape[:-2]
    n_out = L - formula_length(phi) + 1
    if isinstance(phi, Top):
        out = np.full(batch + (n_out,), 1.0 if boolean else math.inf)
    elif isinstance(phi, Pred):
        if phi.dim != x.shape[-1]:
            raise ValueError(f"predicate of dimension {phi.dim} on a {x.shape[-1]}-dimensional trace")
        vals = x[..., :n_out, :] @ np.asarray(phi.coeffs) + phi.offset
        out = np.where(vals >= 0, 1.0, -1.0) if boolean else vals
    elif isinstance(phi, Not):
        out = -_signal(phi.arg, x, boolean, memo)[..., :n_out]
    elif isinstance(phi, (And, Or)):
        subs = np.stack([_signal(a, x, boolean, memo)[..., :n_out] for a in phi.args])
        out = subs.min(axis=0) if isinstance(phi, And) else subs.max(axis=0)
    elif isinstance(phi, (Always, Eventually)):
        sub = _signal(phi.arg, x, boolean, memo)
        a, b = phi.interval.first, phi.interval.last
        windows = np.lib.stride_tricks.sliding_window_view(sub[..., a : b + n_out], b - a + 1, axis=-1)
        out = windows.min(axis=-1) if isinstance(phi, Always) else windows.max(axis=-1)
    elif isinstance(phi, Until):
        s1 = _signal(phi.left, x, boolean, memo)
        s2 = _signal(phi.right, x, boolean, memo)
        a, b = phi.interval.first, phi.interval.last
        out = np.empty(batch + (n_out,))
        for k in range(n_out):
            # running minimum of the left operand over [k, k']
            held = np.minimum.accumulate(s1[..., k : k + b + 1], axis=-1)
            cand = np.minimum(s2[..., k + a : k + b + 1], held[..., a : b + 1])
            out[..., k] = cand.max(axis=-1)
    else:
        raise TypeError(f"not a formula: {phi!r}")
    memo[key] = (phi, out)
    return out


def _check_horizon(trace: Trace, k: int, phi: Formula):
    need = formula_length(phi)
    if k < 0 or k + need > trace.L:
        raise HorizonError(
            f"formula of length {need} at time {k} needs a trace of length >= {k + need}, got {trace.L}"
        )


def evaluate(trace, k: int, phi: Formula) -> bool:
    """Boolean satisfaction ``(trace, k) |= phi``."""
    trace = as_trace(trace)
    _check_horizon(trace, k, phi)
    return bool(_signal(phi, trace.samples, True, {})[k] > 0)


def robustness(trace, k: int, phi: Formula) -> float:
    """Min/max quantitative semantics; positive values imply satisfaction."""
    trace = as_trace(trace)
    _check_horizon(trace, k, phi)
    return float(_signal(phi, trace.samples, False, {})[k])


def evaluate_batch(samples, k: int, phi: Formula) -> np.ndarray:
    """Satisfaction at time ``k`` for a stack of traces of shape ``(B, L+1, n)``."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 3:
        raise ValueError(f"expected samples of shape (B, L+1, n), got {x.shape}")
    need = formula_length(phi)
    if k < 0 or k + need > x.shape[1] - 1:
        raise HorizonError(
            f"formula of length {need} at time {k} needs traces of length >= {k + need}, got {x.shape[1] - 1}"
        )
    return _signal(phi, x, True, {})[:, k] > 0


def satisfaction_signal(trace, phi: Formula) -> np.ndarray:
    """Boolean satisfaction of ``phi`` at every decidable time step."""
    trace = as_trace(trace)
    _check_horizon(trace, 0, phi)
    return _signal(phi, trace.samples, True, {}) > 0


def box_region(bounds: Sequence[tuple], name: str | None = None) -> Formula:
    """Axis-aligned box membership as a conjunction of ``2n`` affine predicates."""
    n = len(bounds)
    preds = []
    for i, (lo, hi) in enumerate(bounds):
        if lo > hi:
            raise ValueError(f"empty box side {lo} > {hi}")
        e = [0.0] * n
        e[i] = 1.0
        preds.append(Pred(tuple(e), -float(lo)))
        e = [0.0] * n
        e[i] = -1.0
        preds.append(Pred(tuple(e), float(hi)))
    return And(tuple(preds), label=f"inbox({name})" if name else None)


def unit_atoms(n: int, names: Iterable[str] | None = None) -> list:
    """Predicates ``x_i >= 0`` used as boolean atoms over ``n`` coordinates."""
    names = list(names) if names is not None else [None] * n
    atoms = []
    for i in range(n):
        e = [0.0] * n
        e[i] = 1.0
        atoms.append(Pred(tuple(e), 0.0, name=names[i]))
    return atoms
