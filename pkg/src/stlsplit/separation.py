"""Safety/progress/target fragments and their exact timing separation.

A fragment is the conjunction

    /\\ G[a,b] g_s   /\\ G[a,b] F[0,c] g_p   /\\ F[a,b] G[0,c] g_t

with boolean ``g`` formulas. Splitting the outer intervals at timing points
``kappa_0 = 0 < ... < kappa_l = L`` yields an equivalent formula whose
syntactic intervals sit inside single windows ``[kappa_{z-1}, kappa_z]``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .stl import (
    TRUE,
    Always,
    And,
    Eventually,
    Formula,
    Interval,
    Not,
    Or,
    Top,
    Until,
    conj,
    disj,
    is_boolean,
)


class FragmentShapeError(ValueError):
    """A formula that is not a safety/progress/target fragment."""


class KappaError(ValueError):
    """Timing points that are unordered or do not span the horizon."""


@dataclass(frozen=True)
class SafetyTerm:
    interval: Interval
    gamma: Formula
    source: int = 0

    @property
    def formula(self) -> Formula:
        return Always(self.interval, self.gamma)

    @property
    def complete(self) -> Interval:
        return self.interval


@dataclass(frozen=True)
class ProgressTerm:
    interval: Interval
    c: int
    gamma: Formula
    source: int = 0

    @property
    def formula(self) -> Formula:
        return Always(self.interval, Eventually(Interval(0, self.c), self.gamma))

    @property
    def complete(self) -> Interval:
        return Interval(self.interval.first, self.interval.last + self.c)


@dataclass(frozen=True)
class TargetTerm:
    interval: Interval
    c: int
    gamma: Formula

    @property
    def formula(self) -> Formula:
        return Eventually(self.interval, Always(Interval(0, self.c), self.gamma))

    @property
    def complete(self) -> Interval:
        return Interval(self.interval.first, self.interval.last + self.c)


def _check_gamma(gamma: Formula, what: str):
    if not is_boolean(gamma):
        raise FragmentShapeError(f"{what} condition must be a boolean formula, got temporal {gamma}")


@dataclass(frozen=True)
class FragmentSpec:
    safety: tuple
    progress: tuple
    target: TargetTerm

    def __post_init__(self):
        safety = tuple(
            replace(t, interval=t.interval.canonical(), source=t.source or i)
            for i, t in enumerate(self.safety, 1)
        )
        progress = tuple(
            replace(t, interval=t.interval.canonical(), source=t.source or j)
            for j, t in enumerate(self.progress, 1)
        )
        if not safety or not progress:
            raise FragmentShapeError("a fragment needs at least one safety and one progress term")
        for t in safety:
            _check_gamma(t.gamma, "safety")
        for t in progress:
            _check_gamma(t.gamma, "progress")
            if t.c < 0:
                raise FragmentShapeError(f"negative progress window {t.c}")
        _check_gamma(self.target.gamma, "target")
        if self.target.c < 0:
            raise FragmentShapeError(f"negative target hold time {self.target.c}")
        object.__setattr__(self, "safety", safety)
        object.__setattr__(self, "progress", progress)
        object.__setattr__(self, "target", replace(self.target, interval=self.target.interval.canonical()))

    def terms(self) -> list:
        return [*self.safety, *self.progress, self.target]

    def formula(self) -> Formula:
        return conj(*(t.formula for t in self.safety), *(t.formula for t in self.progress), self.target.formula)

    @property
    def length(self) -> int:
        return max(t.complete.last for t in self.terms())


def fragment_from_formula(phi: Formula) -> FragmentSpec:
    """Classify the conjuncts of ``phi`` into safety, progress and target terms."""
    conjuncts = phi.args if isinstance(phi, And) and phi.label is None else (phi,)
    safety, progress, targets = [], [], []
    for psi in conjuncts:
        if isinstance(psi, Always) and isinstance(psi.arg, Eventually) and psi.arg.interval.first == 0:
            if not is_boolean(psi.arg.arg):
                raise FragmentShapeError(f"progress condition is not boolean in {psi}")
            progress.append(ProgressTerm(psi.interval, psi.arg.interval.last, psi.arg.arg))
        elif isinstance(psi, Always) and is_boolean(psi.arg):
            safety.append(SafetyTerm(psi.interval, psi.arg))
        elif isinstance(psi, Eventually) and isinstance(psi.arg, Always) and psi.arg.interval.first == 0:
            if not is_boolean(psi.arg.arg):
                raise FragmentShapeError(f"target condition is not boolean in {psi}")
            targets.append(TargetTerm(psi.interval, psi.arg.interval.last, psi.arg.arg))
        else:
            raise FragmentShapeError(
                f"conjunct {psi} is neither G[a,b] g, G[a,b] F[0,c] g nor F[a,b] G[0,c] g"
            )
    if len(targets) != 1:
        raise FragmentShapeError(f"expected exactly one target term, found {len(targets)}")
    return FragmentSpec(tuple(safety), tuple(progress), targets[0])


def check_kappas(kappas: Sequence[int], horizon: int | None = None) -> tuple:
    ks = tuple(int(k) for k in kappas)
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise KappaError(f"timing points must be strictly increasing, got {list(ks)}")
    if horizon is not None and (not ks or ks[0] != 0 or ks[-1] != horizon):
        raise KappaError(f"timing points must run from 0 to {horizon}, got {list(ks)}")
    return ks


def split_pieces(interval: Interval, kappas: Sequence[int]) -> list:
    """Sub-intervals of ``interval`` between the split points strictly inside it."""
    ks = check_kappas(kappas)
    a, b = interval.first, interval.last
    cuts = [a, *(k for k in ks if a < k < b), b]
    if a == b:
        return [Interval(a, b)]
    return [Interval(lo, hi) for lo, hi in zip(cuts, cuts[1:])]


def split_temporal(kind, interval: Interval, kappas: Sequence[int], psi: Formula) -> Formula:
    """Split ``G`` into a conjunction (``F`` into a disjunction) at the given points."""
    if kind in (Always, "G"):
        return conj(*(Always(p, psi) for p in split_pieces(interval, kappas)))
    if kind in (Eventually, "F"):
        return disj(*(Eventually(p, psi) for p in split_pieces(interval, kappas)))
    raise ValueError(f"kind must be Always or Eventually, got {kind!r}")


def shift_nested(kappa: int, phi: Formula) -> Formula:
    """Push the point operator ``F{kappa}`` (equal to ``G{kappa}``) into ``phi``.

    Outer ``G``/``F`` intervals absorb the shift, negation, conjunction and
    disjunction distribute, anything else is wrapped as ``F[kappa,kappa]``.
    Negative ``kappa`` undoes an earlier shift and fails if time would go
    below zero.
    """
    if kappa == 0:
        return phi
    if isinstance(phi, (Always, Eventually)):
        return replace(phi, interval=phi.interval.shift(kappa))
    if isinstance(phi, Not):
        return Not(shift_nested(kappa, phi.arg))
    if isinstance(phi, And) and phi.label is None:
        return And(tuple(shift_nested(kappa, a) for a in phi.args))
    if isinstance(phi, Or):
        return Or(tuple(shift_nested(kappa, a) for a in phi.args))
    if kappa < 0:
        raise ValueError(f"cannot shift {phi} by {kappa}: it reads time 0")
    return Eventually(Interval.point(kappa), phi)


def _drop_true(phi: Formula) -> Formula:
    # local cleanup for separate_until; keeps the overall length
    if isinstance(phi, And) and phi.label is None:
        kept = [_drop_true(a) for a in phi.args]
        kept = [a for a in kept if not isinstance(a, Top)]
        return conj(*kept)
    if isinstance(phi, Or):
        return disj(*(_drop_true(a) for a in phi.args))
    if isinstance(phi, Until) and isinstance(phi.left, Top):
        return Eventually(phi.interval, _drop_true(phi.right))
    if isinstance(phi, Always) and isinstance(phi.arg, Top):
        return TRUE
    if isinstance(phi, Eventually):
        return replace(phi, arg=_drop_true(phi.arg))
    return phi


def separate_until(left: Formula, interval: Interval, right: Formula, kappa: int) -> Formula:
    """Split ``left U(a,b) right`` at ``a < kappa < b`` into shorter pieces.

    The result is

        left U(a,kappa) right  \\/  ( G[0,kappa) left /\\
            F{kappa}( left /\\ right  \\/  left U(0,b-kappa) right ) )

    with closed integer intervals; pieces whose interval is empty are dropped.
    The guard on ``left`` starts at 0 because the until operand must hold
    from the evaluation time onward.
    """
    a, b = interval.lo, interval.hi
    if not a < kappa < b:
        raise ValueError(f"split point {kappa} must lie strictly inside ({a},{b})")
    first, last = interval.first, interval.last
    head = Until(left, Interval(first, kappa - 1), right) if first <= kappa - 1 else None
    inner = [conj(left, right)]
    if last - kappa >= 1:
        inner.append(Until(left, Interval(1, last - kappa), right))
    tail = conj(Always(Interval(0, kappa - 1), left), Eventually(Interval.point(kappa), disj(*inner)))
    out = _drop_true(disj(*([head] if head is not None else []), tail))
    return _push_points(out)


def _push_points(phi: Formula) -> Formula:
    if isinstance(phi, Eventually) and phi.interval.first == phi.interval.last:
        return shift_nested(phi.interval.first, phi.arg)
    if isinstance(phi, And) and phi.label is None:
        return conj(*(_push_points(a) for a in phi.args))
    if isinstance(phi, Or):
        return disj(*(_push_points(a) for a in phi.args))
    return phi


@dataclass(frozen=True)
class SeparatedWindow:
    lo: int
    hi: int
    safety: tuple = ()
    progress: tuple = ()
    target: TargetTerm | None = None

    def terms(self) -> list:
        return [*self.safety, *self.progress]

    @property
    def phi(self) -> Formula:
        return conj(*(t.formula for t in self.terms()))

    @property
    def phi_t(self) -> Formula | None:
        return None if self.target is None else self.target.formula


@dataclass(frozen=True)
class SeparatedSpec:
    kappas: tuple
    windows: tuple

    def __post_init__(self):
        ks = check_kappas(self.kappas)
        if len(self.windows) != max(len(ks) - 1, 0):
            raise KappaError(f"{len(ks)} timing points need {len(ks) - 1} windows, got {len(self.windows)}")
        object.__setattr__(self, "kappas", ks)
        object.__setattr__(self, "windows", tuple(self.windows))

    def formula(self) -> Formula:
        targets = [w.phi_t for w in self.windows if w.phi_t is not None]
        return conj(*(w.phi for w in self.windows), disj(*targets))


def _window_of(piece: Interval, kappas: tuple) -> int:
    # last window containing the piece; a point at an interior kappa goes right
    for z in range(len(kappas) - 1, 0, -1):
        if kappas[z - 1] <= piece.first and piece.last <= kappas[z]:
            return z
    raise KappaError(f"interval {piece} is not inside any window of {list(kappas)}")


def syntactic_separation(frag: FragmentSpec, kappas: Sequence[int]) -> SeparatedSpec:
    """Split every outer interval of ``frag`` at the timing points (equivalence preserving)."""
    if not isinstance(frag, FragmentSpec):
        frag = fragment_from_formula(frag)
    ks = check_kappas(kappas, frag.length)
    n = len(ks) - 1
    safety = [[] for _ in range(n)]
    progress = [[] for _ in range(n)]
    target = [None] * n
    for t in frag.safety:
        for piece in split_pieces(t.interval, ks):
            safety[_window_of(piece, ks) - 1].append(replace(t, interval=piece))
    for t in frag.progress:
        for piece in split_pieces(t.interval, ks):
            progress[_window_of(piece, ks) - 1].append(replace(t, interval=piece))
    for piece in split_pieces(frag.target.interval, ks):
        target[_window_of(piece, ks) - 1] = replace(frag.target, interval=piece)
    windows = tuple(
        SeparatedWindow(ks[z], ks[z + 1], tuple(safety[z]), tuple(progress[z]), target[z]) for z in range(n)
    )
    return SeparatedSpec(ks, windows)


def verify_separated(spec: SeparatedSpec) -> bool:
    """Every syntactic interval of window ``z`` lies in ``[kappa_{z-1}, kappa_z]``."""
    for w in spec.windows:
        bounds = Interval(w.lo, w.hi)
        items = w.terms() + ([w.target] if w.target is not None else [])
        if not all(bounds.contains(t.interval) for t in items):
            return False
    return True


__all__ = [
    "FragmentShapeError",
    "KappaError",
    "SafetyTerm",
    "ProgressTerm",
    "TargetTerm",
    "FragmentSpec",
    "fragment_from_formula",
    "check_kappas",
    "split_pieces",
    "split_temporal",
    "shift_nested",
    "separate_until",
    "SeparatedWindow",
    "SeparatedSpec",
    "syntactic_separation",
    "verify_separated",
]
