"""Complete split of a separated fragment and modular model checking.

The complete split strengthens a separated fragment so that the *complete*
interval of every window formula stays inside its window. Progress terms whose
nested eventuality would reach past ``kappa_z`` are truncated and replaced by a
tail obligation ``F[kappa_z - tau, kappa_z] g`` in window ``z`` plus a head
obligation ``F[kappa_z, kappa_z + c - tau] g`` in window ``z + 1``. The result
implies the original formula but not conversely.

Windows and progress sources are numbered from 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .separation import (
    FragmentSpec,
    KappaError,
    ProgressTerm,
    SeparatedSpec,
    TargetTerm,
    shift_nested,
    syntactic_separation,
)
from .stl import (
    Always,
    And,
    Eventually,
    Formula,
    Interval,
    Not,
    Or,
    Pred,
    Top,
    Until,
    as_trace,
    conj,
    disj,
    evaluate_batch,
    span,
)


class WindowTooNarrowError(ValueError):
    """A window is shorter than the eventuality bound of one of its progress terms."""


class TauRangeError(ValueError):
    """A tail/head split point outside its admissible range."""


class BudgetExceededError(RuntimeError):
    """Trace enumeration would exceed the configured size budget."""


@dataclass(frozen=True)
class CarryTerm:
    """An exceeding progress obligation handed from window ``z`` to ``z + 1``."""

    window: int
    source: int
    gamma: Formula
    c: int
    tau: int
    kappa: int

    @property
    def tail(self) -> Interval:
        return Interval(self.kappa - self.tau, self.kappa)

    @property
    def head(self) -> Interval:
        return Interval(self.kappa, self.kappa + self.c - self.tau)

    @property
    def tail_formula(self) -> Formula:
        return Eventually(self.tail, self.gamma)

    @property
    def head_formula(self) -> Formula:
        return Eventually(self.head, self.gamma)


@dataclass(frozen=True)
class SplitWindow:
    lo: int
    hi: int
    safety: tuple = ()
    progress: tuple = ()
    tails: tuple = ()
    heads: tuple = ()
    target: TargetTerm | None = None

    def _conjuncts(self) -> list:
        out = [t.formula for t in self.safety]
        sources = []
        for item in [*self.heads, *self.progress, *self.tails]:
            if item.source not in sources:
                sources.append(item.source)
        for src in sorted(sources):
            out += [h.head_formula for h in self.heads if h.source == src]
            out += [p.formula for p in self.progress if p.source == src]
            out += [t.tail_formula for t in self.tails if t.source == src]
        return out

    @property
    def phi_bar(self) -> Formula:
        """Conjunction of safety, heads, truncated progress and tails."""
        return conj(*self._conjuncts())

    @property
    def phi_bar_t(self) -> Formula | None:
        """Truncated target, or ``None`` for an absent (false) target."""
        return None if self.target is None else self.target.formula

    @property
    def n_subformulas(self) -> int:
        return len(self._conjuncts())


@dataclass(frozen=True)
class SplitSpec:
    kappas: tuple
    windows: tuple

    @property
    def carry_terms(self) -> list:
        return [t for w in self.windows for t in w.tails]

    def formula(self) -> Formula:
        targets = [w.phi_bar_t for w in self.windows if w.phi_bar_t is not None]
        return conj(*(w.phi_bar for w in self.windows), disj(*targets))

    @property
    def horizon(self) -> int:
        return self.kappas[-1]


def tau_range(kappa: int, term: ProgressTerm) -> tuple:
    """Admissible split points ``[max(0, kappa - b), c]`` of an exceeding term."""
    return max(0, kappa - term.interval.last), term.c


def default_tau(kappa: int, term: ProgressTerm) -> int:
    lo, hi = tau_range(kappa, term)
    return min(max(math.ceil(term.c / 2), lo), hi)


def _lookup_tau(taus, z: int, source: int, order: int):
    if taus is None:
        return None
    if isinstance(taus, Mapping):
        return taus.get((z, source))
    if isinstance(taus, (int, np.integer)):
        return int(taus)
    seq = list(taus)
    if order >= len(seq):
        raise TauRangeError(f"{len(seq)} tau values given but more exceeding progress terms need one")
    return int(seq[order])


def complete_split(spec, taus=None, kappas: Sequence[int] | None = None) -> SplitSpec:
    """Build the complete split of a separated fragment.

    ``taus`` is ``None`` (ceil(c/2) clamped into range), one integer used for
    every exceeding term, a mapping ``(window, source) -> tau`` or a sequence
    consumed in window/source order. A :class:`FragmentSpec` is accepted when
    ``kappas`` is given.
    """
    if isinstance(spec, FragmentSpec):
        if kappas is None:
            raise KappaError("timing points are required to split a fragment")
        spec = syntactic_separation(spec, kappas)
    ks = spec.kappas
    n = len(spec.windows)
    tails = [[] for _ in range(n)]
    heads = [[] for _ in range(n)]
    progress = [[] for _ in range(n)]
    order = 0
    for z, w in enumerate(spec.windows, 1):
        width = w.hi - w.lo
        for term in w.progress:
            if term.c > width:
                raise WindowTooNarrowError(
                    f"window {z} = [{w.lo},{w.hi}] is narrower than the progress bound c={term.c}"
                )
            a, b = term.interval.first, term.interval.last
            last = min(b, w.hi - term.c)
            if last >= a:
                progress[z - 1].append(replace(term, interval=Interval(a, last)))
            if b + term.c <= w.hi:
                continue
            if z == n:
                raise WindowTooNarrowError(f"progress term of source {term.source} runs past the horizon")
            tau = _lookup_tau(taus, z, term.source, order)
            order += 1
            if tau is None:
                tau = default_tau(w.hi, term)
            lo, hi = tau_range(w.hi, term)
            if not lo <= tau <= hi:
                raise TauRangeError(
                    f"tau={tau} for window {z}, source {term.source} must lie in [{lo},{hi}]"
                )
            carry = CarryTerm(z, term.source, term.gamma, term.c, tau, w.hi)
            if carry.head.last > ks[z + 1]:
                raise WindowTooNarrowError(
                    f"head {carry.head} of source {term.source} does not fit window {z + 1} = [{ks[z]},{ks[z + 1]}]"
                )
            tails[z - 1].append(carry)
            heads[z].append(carry)
    windows = []
    for z, w in enumerate(spec.windows, 1):
        target = None
        if w.target is not None:
            a, b = w.target.interval.first, w.target.interval.last
            last = min(b, w.hi - w.target.c)
            if last >= a:
                target = replace(w.target, interval=Interval(a, last))
        windows.append(
            SplitWindow(w.lo, w.hi, w.safety, tuple(progress[z - 1]), tuple(tails[z - 1]), tuple(heads[z - 1]), target)
        )
    return SplitSpec(ks, tuple(windows))


def check_nonoverlap(split: SplitSpec) -> bool:
    """Every window formula and target reads only times inside its own window."""
    for w in split.windows:
        for phi in [*w._conjuncts(), *([w.phi_bar_t] if w.phi_bar_t is not None else [])]:
            lo, hi = span(phi)
            if lo < w.lo or hi > w.hi:
                return False
    return True


@dataclass
class Verdict:
    per_window: list
    target_window: int | None

    @property
    def overall(self) -> bool:
        return all(self.per_window) and self.target_window is not None

    def to_dict(self) -> dict:
        return {"per_window": list(self.per_window), "target_window": self.target_window, "overall": self.overall}


def local_formula(phi: Formula, lo: int) -> Formula:
    """``phi`` (absolute time) re-anchored so that time ``lo`` becomes 0."""
    if isinstance(phi, Top):
        return phi
    return shift_nested(-lo, phi)


def modular_check_batch(samples, split: SplitSpec):
    """Window-wise verdicts for a stack of traces of shape ``(B, L+1, n)``.

    Returns ``(per_window, targets)``: boolean arrays of shape ``(B, l)``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 3 or x.shape[1] - 1 != split.horizon:
        raise ValueError(f"traces must have length {split.horizon}, got shape {x.shape}")
    B, n = x.shape[0], len(split.windows)
    per = np.ones((B, n), dtype=bool)
    tgt = np.zeros((B, n), dtype=bool)
    for z, w in enumerate(split.windows):
        sub = x[:, w.lo : w.hi + 1, :]
        per[:, z] = evaluate_batch(sub, 0, local_formula(w.phi_bar, w.lo))
        if w.phi_bar_t is not None:
            tgt[:, z] = evaluate_batch(sub, 0, local_formula(w.phi_bar_t, w.lo))
    return per, tgt


def modular_check(trace, split: SplitSpec) -> Verdict:
    """Check each window on its own segment ``x[kappa_{z-1} .. kappa_z]``."""
    trace = as_trace(trace)
    if trace.L != split.horizon:
        raise ValueError(f"trace has length {trace.L}, split covers {split.horizon}")
    per, tgt = modular_check_batch(trace.samples[None], split)
    hits = np.flatnonzero(tgt[0])
    return Verdict([bool(v) for v in per[0]], int(hits[0]) + 1 if hits.size else None)


# ---------------------------------------------------------------------------
# exhaustive oracle over boolean-abstraction traces


@dataclass(frozen=True, eq=False)
class SatisfactionSet:
    """Traces (as integer indices) satisfying a formula at time 0.

    Bit ``k * n_atoms + j`` of a trace index is the truth value of atom ``j``
    at time ``k``.
    """

    mask: np.ndarray
    atoms: tuple
    L: int

    def __len__(self) -> int:
        return int(np.count_nonzero(self.mask))

    def __iter__(self):
        return iter(int(i) for i in np.flatnonzero(self.mask))

    def __contains__(self, index) -> bool:
        return bool(self.mask[index])

    def _compat(self, other: "SatisfactionSet"):
        if self.mask.shape != other.mask.shape or self.atoms != other.atoms:
            raise ValueError("satisfaction sets over different trace spaces")

    def __le__(self, other: "SatisfactionSet") -> bool:
        self._compat(other)
        return not np.any(self.mask & ~other.mask)

    def __sub__(self, other: "SatisfactionSet") -> "SatisfactionSet":
        self._compat(other)
        return SatisfactionSet(self.mask & ~other.mask, self.atoms, self.L)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SatisfactionSet):
            return NotImplemented
        self._compat(other)
        return bool(np.array_equal(self.mask, other.mask))

    __hash__ = None

    @property
    def total(self) -> int:
        return self.mask.size

    def words(self) -> list:
        """Readable traces: one string per time step listing the true atoms."""
        n = len(self.atoms)
        out = []
        for i in self:
            steps = []
            for k in range(self.L + 1):
                bits = "".join(str((i >> (k * n + j)) & 1) for j in range(n))
                steps.append(bits)
            out.append(" ".join(steps))
        return out


DEFAULT_MAX_BITS = 24


def boolean_traces(n_atoms: int, L: int, max_bits: int = DEFAULT_MAX_BITS) -> np.ndarray:
    """All ``+-1`` traces in oracle index order, shape ``(2^(n(L+1)), L+1, n)``.

    Paired with :func:`stlsplit.stl.unit_atoms` the sign of each coordinate is
    the truth of the matching atom.
    """
    bits = n_atoms * (L + 1)
    if bits > max_bits:
        raise BudgetExceededError(f"{bits} boolean variables exceed the budget of {max_bits}")
    idx = np.arange(1 << bits, dtype=np.int64)
    shifts = np.arange(bits, dtype=np.int64)
    table = ((idx[:, None] >> shifts) & 1).astype(float) * 2 - 1
    return table.reshape(-1, L + 1, n_atoms)


def enumerate_oracle(phi: Formula, atoms: Sequence, L: int, max_bits: int = DEFAULT_MAX_BITS) -> SatisfactionSet:
    """Exact satisfaction set of ``phi`` at time 0 over all boolean traces.

    Every predicate of ``phi`` must be one of ``atoms``; its truth is read from
    the trace bits directly, so this evaluator shares no code with the monitor.
    """
    atoms = tuple(atoms)
    n = len(atoms)
    bits = n * (L + 1)
    if bits > max_bits:
        raise BudgetExceededError(f"{bits} boolean variables exceed the budget of {max_bits}")
    idx = np.arange(1 << bits, dtype=np.int64)
    memo: dict = {}

    def atom_bits(j, k):
        return ((idx >> (k * n + j)) & 1).astype(bool)

    def sat(f, k):
        key = (id(f), k)
        if key in memo:
            return memo[key][1]
        if k > L:
            raise ValueError(f"formula reads time {k} beyond trace length {L}")
        if isinstance(f, Top):
            r = np.ones(idx.size, dtype=bool)
        elif isinstance(f, Pred):
            try:
                j = atoms.index(f)
            except ValueError:
                raise ValueError(f"predicate {f} is not one of the enumeration atoms") from None
            r = atom_bits(j, k)
        elif isinstance(f, Not):
            r = ~sat(f.arg, k)
        elif isinstance(f, And):
            r = np.logical_and.reduce([sat(g, k) for g in f.args])
        elif isinstance(f, Or):
            r = np.logical_or.reduce([sat(g, k) for g in f.args])
        elif isinstance(f, Always):
            r = np.logical_and.reduce([sat(f.arg, k + t) for t in f.interval])
        elif isinstance(f, Eventually):
            r = np.logical_or.reduce([sat(f.arg, k + t) for t in f.interval])
        elif isinstance(f, Until):
            r = np.zeros(idx.size, dtype=bool)
            held = np.ones(idx.size, dtype=bool)
            for t in range(0, f.interval.last + 1):
                held = held & sat(f.left, k + t)
                if t >= f.interval.first:
                    r = r | (held & sat(f.right, k + t))
        else:
            raise TypeError(f"not a formula: {f!r}")
        memo[key] = (f, r)
        return r

    return SatisfactionSet(sat(phi, 0), atoms, L)


__all__ = [
    "WindowTooNarrowError",
    "TauRangeError",
    "BudgetExceededError",
    "CarryTerm",
    "SplitWindow",
    "SplitSpec",
    "Verdict",
    "tau_range",
    "default_tau",
    "complete_split",
    "check_nonoverlap",
    "local_formula",
    "modular_check",
    "modular_check_batch",
    "SatisfactionSet",
    "boolean_traces",
    "enumerate_oracle",
]

