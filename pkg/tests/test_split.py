import random

import numpy as np
import pytest
from conftest import ATOMS, P, Q, random_split_instance, split_instances
from hypothesis import given

from stlsplit.casestudy import build_casestudy
from stlsplit.parser import format_formula
from stlsplit.separation import FragmentSpec, ProgressTerm, SafetyTerm, TargetTerm
from stlsplit.split import (
    BudgetExceededError,
    CarryTerm,
    SplitSpec,
    SplitWindow,
    TauRangeError,
    Verdict,
    WindowTooNarrowError,
    boolean_traces,
    check_nonoverlap,
    complete_split,
    default_tau,
    enumerate_oracle,
    modular_check,
    modular_check_batch,
    tau_range,
)
from stlsplit.stl import (
    TRUE,
    Always,
    Eventually,
    Interval,
    evaluate_batch,
    formula_length,
    unit_atoms,
)


@pytest.fixture(scope="module")
def case_split():
    sc = build_casestudy()
    return sc, complete_split(sc.fragment, 3, kappas=sc.kappas)


def fmt(phi):
    return None if phi is None else format_formula(phi)


# ------------------------------------------------------------------ complete split
def test_window_one(case_split):
    _, split = case_split
    assert fmt(split.windows[0].phi_bar) == (
        "G[0,15] inbox(SAFETY) & G[0,10] F[0,5] inbox(TARGET) & F[12,15] inbox(TARGET)"
    )
    assert split.windows[0].phi_bar_t is None


def test_window_two_carries_head(case_split):
    _, split = case_split
    text = fmt(split.windows[1].phi_bar)
    assert "F[15,17] inbox(TARGET)" in text
    assert text == (
        "G[15,30] inbox(SAFETY) & F[15,17] inbox(TARGET) & G[15,25] F[0,5] inbox(TARGET) & F[27,30] inbox(TARGET)"
        " & G[15,25] F[0,5] inbox(HOME) & F[27,30] inbox(HOME)"
    )
    assert fmt(split.windows[1].phi_bar_t) == "F[20,27] G[0,3] inbox(CHARGER)"


def test_window_three(case_split):
    _, split = case_split
    assert fmt(split.windows[2].phi_bar) == (
        "G[30,45] inbox(SAFETY) & F[30,32] inbox(TARGET) & G[30,35] F[0,5] inbox(TARGET)"
        " & F[30,32] inbox(HOME) & G[30,40] F[0,5] inbox(HOME)"
    )
    assert fmt(split.windows[2].phi_bar_t) == "F[30,42] G[0,3] inbox(CHARGER)"


def test_case_study_carry_terms(case_split):
    _, split = case_split
    carries = [(t.window, t.source, t.tail, t.head) for t in split.carry_terms]
    assert carries == [
        (1, 1, Interval(12, 15), Interval(15, 17)),
        (2, 1, Interval(27, 30), Interval(30, 32)),
        (2, 2, Interval(27, 30), Interval(30, 32)),
    ]


def test_length_is_preserved(case_split):
    sc, split = case_split
    assert formula_length(split.formula()) == sc.horizon == 45


def test_contained_progress_is_copied():
    frag = FragmentSpec(
        (SafetyTerm(Interval(0, 8), P),),
        (ProgressTerm(Interval(0, 2), 2, Q),),
        TargetTerm(Interval(4, 6), 2, P),
    )
    split = complete_split(frag, None, kappas=[0, 4, 8])
    assert split.windows[0].progress[0].interval == Interval(0, 2)
    assert not split.carry_terms


def test_narrow_window_rejected():
    frag = FragmentSpec(
        (SafetyTerm(Interval(0, 8), P),),
        (ProgressTerm(Interval(0, 5), 3, Q),),
        TargetTerm(Interval(0, 6), 2, P),
    )
    with pytest.raises(WindowTooNarrowError):
        complete_split(frag, None, kappas=[0, 2, 8])


def test_tau_out_of_range():
    sc = build_casestudy()
    with pytest.raises(TauRangeError):
        complete_split(sc.fragment, 6, kappas=sc.kappas)


def test_tau_range_uses_lower_bound():
    term = ProgressTerm(Interval(0, 6), 3, P)
    assert tau_range(4, term) == (0, 3)
    term = ProgressTerm(Interval(0, 2), 3, P)
    assert tau_range(4, term) == (2, 3)
    assert default_tau(4, term) == 2


def test_taus_as_mapping_and_sequence(case_split):
    sc, split = case_split
    by_map = complete_split(sc.fragment, {(1, 1): 2, (2, 1): 4, (2, 2): 1}, kappas=sc.kappas)
    by_seq = complete_split(sc.fragment, [2, 4, 1], kappas=sc.kappas)
    assert by_map == by_seq
    assert [t.tau for t in by_seq.carry_terms] == [2, 4, 1]


# ------------------------------------------------------------------ non-overlap
def test_case_study_nonoverlap(case_split):
    assert check_nonoverlap(case_split[1])


def test_overlap_detected():
    term = ProgressTerm(Interval(10, 20), 5, P, source=1)
    split = SplitSpec((0, 15, 30), (SplitWindow(0, 15, progress=(term,)), SplitWindow(15, 30)))
    assert not check_nonoverlap(split)


def test_single_window_nonoverlap():
    frag = FragmentSpec((SafetyTerm(Interval(0, 4), P),), (ProgressTerm(Interval(0, 2), 2, Q),), TargetTerm(Interval(0, 2), 2, P))
    assert check_nonoverlap(complete_split(frag, None, kappas=[0, 4]))


@given(split_instances(max_len=8))
def test_split_invariants(inst):
    frag, kappas, split = inst
    assert check_nonoverlap(split)
    assert formula_length(split.formula()) <= frag.length
    for t in split.carry_terms:
        assert t.tail.last == t.head.first == t.kappa


# ------------------------------------------------------------------ modular check
def test_zero_trace_violates_case_study(case_split):
    _, split = case_split
    verdict = modular_check(np.zeros((46, 2)), split)
    assert not verdict.overall
    assert verdict.per_window[0] is False


def test_verdict_requires_target():
    v = Verdict([True, True], None)
    assert not v.overall
    assert v.to_dict() == {"per_window": [True, True], "target_window": None, "overall": False}


def test_length_mismatch(case_split):
    with pytest.raises(ValueError):
        modular_check(np.zeros((40, 2)), case_split[1])


def test_hand_made_trajectory_passes(case_split):
    # a patrol that reaches the charger in window 3
    _, split = case_split
    x = _patrol()
    verdict = modular_check(x, split)
    assert verdict.overall and verdict.target_window == 3


def _patrol():
    pts = [(0, 5), (1, 5)]
    pts += [(1, 5)] * 13  # up to k=14
    # k=15..30 shuttle between TARGET (x<=3) and HOME (x>=5)
    seq = [2, 3, 4, 5, 4, 3, 4, 5, 4, 3, 4, 5, 4, 3, 4, 5]
    pts += [(v, 5) for v in seq]
    # k=31..45: target and home once more, then four samples at the charger
    pts += [(4, 5), (3, 5), (4, 5), (5, 5), (4, 5), (3, 5), (4, 5), (5, 5), (5, 4),
            (5, 3), (5, 3), (5, 3), (5, 3), (5, 4), (5, 5)]
    assert len(pts) == 46
    return np.array(pts[:46], dtype=float)


@given(split_instances(max_len=6))
def test_modular_check_matches_whole_formula(inst):
    _, _, split = inst
    xs = boolean_traces(2, split.horizon)
    per, tgt = modular_check_batch(xs, split)
    whole = evaluate_batch(xs, 0, split.formula())
    assert np.array_equal(per.all(axis=1) & tgt.any(axis=1), whole)


# ------------------------------------------------------------------ oracle
def test_oracle_always():
    (p,) = unit_atoms(1)
    sat = enumerate_oracle(Always(Interval(0, 1), p), [p], 1)
    assert sat.words() == ["1 1"]


def test_oracle_eventually():
    (p,) = unit_atoms(1)
    sat = enumerate_oracle(Eventually(Interval(0, 1), p), [p], 1)
    assert len(sat) == 3 and sat.total == 4


def test_oracle_budget():
    with pytest.raises(BudgetExceededError):
        enumerate_oracle(Always(Interval(0, 20), P), ATOMS, 20)


def test_oracle_agrees_with_monitor():
    phi = Always(Interval(0, 2), Eventually(Interval(0, 2), P))
    L = formula_length(phi)
    sat = enumerate_oracle(phi, ATOMS, L)
    assert np.array_equal(sat.mask, evaluate_batch(boolean_traces(2, L), 0, phi))


def test_soundness_small_corpus():
    rng = random.Random(5)
    for _ in range(30):
        frag, kappas, split = random_split_instance(rng, 6)
        L = frag.length
        assert enumerate_oracle(split.formula(), ATOMS, L) <= enumerate_oracle(frag.formula(), ATOMS, L)


WITNESS_SIZE = 158  # reference value from the first oracle run


def test_conservativeness_witness():
    (p,) = unit_atoms(1, ["p"])
    # trivially true safety and target leave G[0,6] F[0,3] p as the only obligation
    frag = FragmentSpec(
        (SafetyTerm(Interval(0, 9), TRUE),),
        (ProgressTerm(Interval(0, 6), 3, p),),
        TargetTerm(Interval(0, 0), 0, TRUE),
    )
    split = complete_split(frag, 2, kappas=[0, 4, 9])
    phi = Always(Interval(0, 6), Eventually(Interval(0, 3), p))
    sat_phi = enumerate_oracle(phi, [p], 9)
    sat_bar = enumerate_oracle(split.formula(), [p], 9)
    assert sat_phi == enumerate_oracle(frag.formula(), [p], 9)
    assert sat_bar <= sat_phi
    gap = sat_phi - sat_bar
    assert len(gap) == WITNESS_SIZE
    # p at times 2 and 6 only: the original holds, the head F[4,5] p does not
    assert "0 0 1 0 0 0 1 0 0 0" in gap.words()
