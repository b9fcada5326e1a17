import random

import pytest
from conftest import ATOMS, P, Q, fragments, random_formula, random_fragment, random_kappas
from hypothesis import given, strategies as st

from stlsplit.casestudy import build_casestudy
from stlsplit.parser import format_formula
from stlsplit.separation import (
    FragmentShapeError,
    FragmentSpec,
    KappaError,
    ProgressTerm,
    SafetyTerm,
    SeparatedSpec,
    SeparatedWindow,
    TargetTerm,
    fragment_from_formula,
    separate_until,
    shift_nested,
    split_temporal,
    syntactic_separation,
    verify_separated,
)
from stlsplit.split import enumerate_oracle
from stlsplit.stl import (
    TRUE,
    Always,
    And,
    Eventually,
    Interval,
    Not,
    Or,
    Until,
    formula_length,
    walk,
)


def same_set(f, g, L=None):
    L = max(formula_length(f), formula_length(g)) if L is None else L
    return enumerate_oracle(f, ATOMS, L) == enumerate_oracle(g, ATOMS, L)


@pytest.fixture(scope="module")
def case():
    sc = build_casestudy()
    return sc, sc.region_boxes


# ------------------------------------------------------------------ split_temporal
def test_split_safety_at_case_study_points(case):
    sc, _ = case
    gs = sc.fragment.safety[0].gamma
    out = split_temporal(Always, Interval(0, 45), [15, 30], gs)
    assert format_formula(out) == "G[0,15] inbox(SAFETY) & G[15,30] inbox(SAFETY) & G[30,45] inbox(SAFETY)"


def test_split_target_at_30(case):
    sc, _ = case
    inner = Always(Interval(0, 3), sc.fragment.target.gamma)
    out = split_temporal(Eventually, Interval(20, 42), [30], inner)
    assert format_formula(out) == "F[20,30] G[0,3] inbox(CHARGER) | F[30,42] G[0,3] inbox(CHARGER)"


def test_split_without_points_is_identity():
    assert split_temporal(Always, Interval(0, 6), [], P) == Always(Interval(0, 6), P)


def test_split_ignores_outside_points():
    assert split_temporal(Always, Interval(2, 6), [0, 1, 6, 9], P) == Always(Interval(2, 6), P)


def test_split_rejects_unordered_points():
    with pytest.raises(KappaError):
        split_temporal(Always, Interval(0, 6), [4, 2], P)


# ------------------------------------------------------------------ shift_nested
def test_shift_always():
    assert shift_nested(15, Always(Interval(0, 5), P)) == Always(Interval(15, 20), P)


def test_shift_zero_is_identity():
    phi = Eventually(Interval(2, 4), P)
    assert shift_nested(0, phi) == phi


def test_shift_distributes_over_negation():
    assert shift_nested(3, Not(P)) == Not(Eventually(Interval(3, 3), P))


def test_negative_shift_undoes_positive_shift():
    phi = And((Always(Interval(0, 3), P), Eventually(Interval(1, 2), Q)))
    assert shift_nested(-4, shift_nested(4, phi)) == phi
    with pytest.raises(ValueError):
        shift_nested(-1, P)


@given(st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_shift_preserves_semantics(k, seed):
    phi = random_formula(random.Random(seed), 4, 3)
    assert same_set(Eventually(Interval.point(k), phi), shift_nested(k, phi))


# ------------------------------------------------------------------ separate_until
def test_separate_until_requires_inner_point():
    with pytest.raises(ValueError):
        separate_until(P, Interval.open(1, 5), Q, 7)
    with pytest.raises(ValueError):
        separate_until(P, Interval.open(1, 5), Q, 1)


def test_separate_until_full_form_by_enumeration():
    orig = Until(P, Interval.open(1, 5), Q)
    assert same_set(orig, separate_until(P, Interval.open(1, 5), Q, 3))


def test_separate_until_with_true_left_is_an_eventually_split():
    out = separate_until(TRUE, Interval.open(0, 6), Q, 3)
    assert same_set(Eventually(Interval(1, 5), Q), out)
    assert not any(isinstance(n, Until) for n in walk(out))


@given(st.integers(0, 3), st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_separate_until_random(a, width, seed):
    rng = random.Random(seed)
    b = a + width
    kappa = rng.randint(a + 1, b - 1)
    left, right = random_formula(rng, 1, 2), random_formula(rng, 1, 2)
    orig = Until(left, Interval.open(a, b), right)
    out = separate_until(left, Interval.open(a, b), right, kappa)
    assert same_set(orig, out)
    assert formula_length(out) <= formula_length(orig)


# ------------------------------------------------------------------ fragments
def test_fragment_shape(case):
    sc, _ = case
    frag = sc.fragment
    assert [t.interval for t in frag.progress] == [Interval(0, 35), Interval(15, 40)]
    assert frag.target.interval == Interval(20, 42) and frag.target.c == 3
    assert frag.length == 45


def test_fragment_needs_exactly_one_target():
    with pytest.raises(FragmentShapeError):
        fragment_from_formula(And((Always(Interval(0, 2), P), Always(Interval(0, 2), Eventually(Interval(0, 1), Q)))))


def test_fragment_rejects_temporal_gamma():
    with pytest.raises(FragmentShapeError):
        FragmentSpec(
            (SafetyTerm(Interval(0, 2), Eventually(Interval(0, 1), P)),),
            (ProgressTerm(Interval(0, 2), 1, Q),),
            TargetTerm(Interval(0, 1), 1, Q),
        )


# ------------------------------------------------------------------ syntactic separation
def test_case_study_separation_listing(case):
    sc, _ = case
    sep = syntactic_separation(sc.fragment, sc.kappas)
    got = [(format_formula(w.phi), None if w.phi_t is None else format_formula(w.phi_t)) for w in sep.windows]
    assert got == [
        ("G[0,15] inbox(SAFETY) & G[0,15] F[0,5] inbox(TARGET)", None),
        (
            "G[15,30] inbox(SAFETY) & G[15,30] F[0,5] inbox(TARGET) & G[15,30] F[0,5] inbox(HOME)",
            "F[20,30] G[0,3] inbox(CHARGER)",
        ),
        (
            "G[30,45] inbox(SAFETY) & G[30,35] F[0,5] inbox(TARGET) & G[30,40] F[0,5] inbox(HOME)",
            "F[30,42] G[0,3] inbox(CHARGER)",
        ),
    ]
    assert verify_separated(sep)


def test_single_window_is_the_fragment(case):
    sc, _ = case
    sep = syntactic_separation(sc.fragment, [0, 45])
    assert len(sep.windows) == 1
    w = sep.windows[0]
    assert w.safety == sc.fragment.safety and w.progress == sc.fragment.progress
    assert w.target == sc.fragment.target


def test_kappas_must_span_horizon(case):
    sc, _ = case
    with pytest.raises(KappaError):
        syntactic_separation(sc.fragment, [0, 15, 30])


def test_verify_separated_detects_straddling_interval():
    bad = SeparatedSpec((0, 2, 6), (SeparatedWindow(0, 2, (SafetyTerm(Interval(0, 4), P),)), SeparatedWindow(2, 6)))
    assert not verify_separated(bad)


def test_verify_separated_accepts_empty_windows():
    assert verify_separated(SeparatedSpec((0, 3, 6), (SeparatedWindow(0, 3), SeparatedWindow(3, 6))))


def test_syntactic_separation_example_spec():
    # G[0,2] F[0,1] g0 & F[3,5] G[1,1] g1 is already separated by 0, 2, 6
    frag = fragment_from_formula(
        And(
            (
                Always(Interval(0, 2), P),
                Always(Interval(0, 2), Eventually(Interval(0, 1), P)),
                Eventually(Interval(3, 5), Always(Interval(0, 1), Q)),
            )
        )
    )
    sep = syntactic_separation(frag, [0, 2, 6])
    assert verify_separated(sep)
    assert sep.windows[0].target is None


@given(fragments(max_len=6), st.integers(0, 2**32 - 1))
def test_separation_is_equivalent(frag, seed):
    kappas = random_kappas(random.Random(seed), frag.length)
    sep = syntactic_separation(frag, kappas)
    assert verify_separated(sep)
    assert same_set(frag.formula(), sep.formula(), frag.length)
    assert formula_length(sep.formula()) == frag.length


def test_progress_piece_for_window_three(case):
    sc, _ = case
    sep = syntactic_separation(sc.fragment, sc.kappas)
    home = [p for p in sep.windows[2].progress if p.source == 2]
    assert [p.interval for p in home] == [Interval(30, 40)]


def test_terms_are_reported(case):
    sc, _ = case
    assert isinstance(sc.fragment.progress[0], ProgressTerm)
    assert isinstance(sc.fragment.target, TargetTerm)


def test_random_fragment_generator_respects_bounds():
    rng = random.Random(0)
    for _ in range(100):
        assert random_fragment(rng, 8).length <= 8


def test_or_of_targets_is_disjunction(case):
    sc, _ = case
    sep = syntactic_separation(sc.fragment, sc.kappas)
    assert isinstance(sep.formula().args[-1], Or)
