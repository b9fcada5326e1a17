import random
from dataclasses import replace

import numpy as np
import pytest
from conftest import P, Q, random_formula
from hypothesis import given, strategies as st

from stlsplit.casestudy import CASESTUDY_TEXT, build_casestudy
from stlsplit.parser import (
    DimensionError,
    EmptyIntervalSyntaxError,
    HorizonMismatchError,
    LexError,
    ParseError,
    ScenarioError,
    STLSyntaxError,
    UnknownRegionError,
    format_formula,
    format_scenario,
    parse_formula,
    parse_scenario,
)
from stlsplit.stl import (
    FALSE,
    TRUE,
    Always,
    And,
    Eventually,
    Interval,
    Not,
    Or,
    Pred,
    Until,
    box_region,
    evaluate,
)

ATOMS = {"p": P, "q": Q}
REGIONS = {
    "TARGET": box_region([(1, 3), (4, 6)], "TARGET"),
    "SAFETY": box_region([(0, 8), (0, 7)], "SAFETY"),
}


def test_parse_progress_term():
    phi = parse_formula("G[0,35] F[0,5] inbox(TARGET)", regions=REGIONS)
    assert phi == Always(Interval(0, 35), Eventually(Interval(0, 5), REGIONS["TARGET"]))


def test_parse_true():
    assert parse_formula("true") == TRUE


def test_parse_false_is_not_true():
    assert parse_formula("false") == FALSE


def test_empty_interval_is_a_syntax_error_with_position():
    with pytest.raises(EmptyIntervalSyntaxError) as info:
        parse_formula("G[5,2] p", atoms=ATOMS)
    assert (info.value.line, info.value.col) == (1, 2)
    assert isinstance(info.value, STLSyntaxError)


def test_open_and_point_intervals_are_canonicalized():
    assert parse_formula("G(2,6) p", atoms=ATOMS) == Always(Interval(3, 5), P)
    assert parse_formula("F{4} p", atoms=ATOMS) == Eventually(Interval(4, 4), P)
    assert parse_formula("G[2,6) p", atoms=ATOMS) == Always(Interval(2, 5), P)
    with pytest.raises(EmptyIntervalSyntaxError):
        parse_formula("G(2,3) p", atoms=ATOMS)


def test_lex_error_position():
    with pytest.raises(LexError) as info:
        parse_formula("p &\n  q $", atoms=ATOMS)
    assert (info.value.line, info.value.col) == (2, 5)


def test_syntax_error_on_trailing_tokens():
    with pytest.raises(STLSyntaxError):
        parse_formula("p q", atoms=ATOMS)


def test_unknown_region():
    with pytest.raises(ParseError, match="unknown region"):
        parse_formula("inbox(NOWHERE)", regions=REGIONS)


def test_affine_predicates():
    phi = parse_formula("2*x1 - x2 >= 1", dim=2)
    assert phi == Pred((2.0, -1.0), -1.0)
    assert parse_formula("x2 <= 3") == Pred((0.0, -1.0), 3.0)
    assert evaluate(np.array([[1.0, 0.5]]), 0, phi)


def test_predicate_dimension_checked():
    with pytest.raises(STLSyntaxError):
        parse_formula("x3 >= 0", dim=2)


def test_precedence_and_until():
    phi = parse_formula("!p & q | p U[0,2] q", atoms=ATOMS)
    assert phi == Or((And((Not(P), Q)), Until(P, Interval(0, 2), Q)))


def test_format_region_term():
    phi = Always(Interval(0, 45), box_region([(0, 8), (0, 7)], "SAFETY"))
    assert format_formula(phi) == "G[0,45] inbox(SAFETY)"


def test_format_constants():
    assert format_formula(TRUE) == "true"
    assert format_formula(Not(TRUE)) == "!true"


def test_format_affine():
    assert format_formula(Pred((2.0, -1.0), -1.0)) == "2*x1 - x2 >= 1"


def random_affine(rng):
    coeffs = tuple(rng.choice([0.0, 1.0, -1.0, 2.5, -0.125]) for _ in range(2))
    if not any(coeffs):
        coeffs = (1.0, 0.0)
    return Pred(coeffs, rng.choice([0.0, 1.0, -3.0, 0.1]))


def swap_atoms(phi, rng):
    # replace a share of the named atoms by unnamed affine predicates
    if isinstance(phi, Pred):
        return random_affine(rng) if rng.random() < 0.5 else phi
    if isinstance(phi, Not):
        return Not(swap_atoms(phi.arg, rng))
    if isinstance(phi, (And, Or)):
        return type(phi)(tuple(swap_atoms(a, rng) for a in phi.args))
    if isinstance(phi, Until):
        return Until(swap_atoms(phi.left, rng), phi.interval, swap_atoms(phi.right, rng))
    if isinstance(phi, (Always, Eventually)):
        return replace(phi, arg=swap_atoms(phi.arg, rng))
    return phi


def test_round_trip_1000_random_formulas():
    rng = random.Random(2024)
    for _ in range(1000):
        phi = swap_atoms(random_formula(rng, 6, 4), rng)
        text = format_formula(phi)
        assert parse_formula(text, atoms=ATOMS, dim=2) == phi, text


@given(st.integers(0, 2**32 - 1))
def test_round_trip_is_stable(seed):
    rng = random.Random(seed)
    phi = random_formula(rng, 5, 4)
    text = format_formula(phi)
    assert format_formula(parse_formula(text, atoms=ATOMS)) == text


# ------------------------------------------------------------------ scenarios
def test_case_study_scenario():
    sc = build_casestudy()
    assert sc.horizon == 45
    assert sc.kappas == (0, 15, 30, 45)
    assert sc.taus == 3
    assert sc.region_boxes["TARGET"] == [(1.0, 3.0), (4.0, 6.0)]
    assert sc.region_boxes["HOME"] == [(5.0, 7.0), (4.0, 6.0)]
    assert sc.region_boxes["CHARGER"] == [(5.0, 7.0), (1.0, 3.0)]
    assert sc.initial_state.tolist() == [0.0, 5.0]
    assert len(sc.fragment.safety) == 1 and len(sc.fragment.progress) == 2


def test_horizon_mismatch():
    with pytest.raises(HorizonMismatchError):
        parse_scenario(CASESTUDY_TEXT.replace("horizon = 45", "horizon = 44"))


def test_kappas_not_increasing():
    with pytest.raises(ScenarioError):
        parse_scenario(CASESTUDY_TEXT.replace("kappas = 0, 15, 30, 45", "kappas = 0, 30, 15, 45"))


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        parse_scenario(CASESTUDY_TEXT.replace("x0 = 0 5", "x0 = 0 5 1"))
    with pytest.raises(DimensionError):
        parse_scenario(CASESTUDY_TEXT.replace("B = 1 0; 0 1", "B = 1 0 0"))


def test_unknown_region_in_scenario():
    with pytest.raises(UnknownRegionError):
        parse_scenario(CASESTUDY_TEXT.replace("inbox(HOME)", "inbox(GARAGE)"))


def test_non_fragment_rejected_with_shape_message():
    text = CASESTUDY_TEXT.replace("& G[0,45] inbox(SAFETY)", "& G[0,45] F[0,0] G[0,0] inbox(SAFETY)")
    with pytest.raises(ScenarioError, match="shape"):
        parse_scenario(text)


def test_unknown_solver_key():
    with pytest.raises(ScenarioError, match="solver key"):
        parse_scenario(CASESTUDY_TEXT + "bogus = 1\n")


def test_scenario_round_trip():
    sc = build_casestudy()
    again = parse_scenario(format_scenario(sc))
    assert again.formula == sc.formula
    assert again.kappas == sc.kappas and again.taus == sc.taus
    assert again.solver_params == sc.solver_params
    assert np.array_equal(again.system.A, sc.system.A)
