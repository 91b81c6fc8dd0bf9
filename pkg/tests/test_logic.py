from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from ogre.logic import (
    FALSE,
    TRUE,
    EvalError,
    Int,
    LogicError,
    ParseError,
    Sort,
    SortError,
    Statement,
    Verdict,
    add,
    and_,
    check_hoare,
    conj,
    dag_size,
    div,
    eq,
    evaluate,
    evaluate_partial,
    ge,
    gt,
    implies,
    le,
    lit,
    lt,
    mod,
    not_,
    or_,
    parse_formula,
    parse_term,
    substitute,
    to_smtlib,
)
from ogre.logic.terms import euclid_divmod
from strategies import DECLS, B, X, Y, formulas, int_terms, statements

ENVS = st.fixed_dictionaries({"x": st.integers(-6, 6), "y": st.integers(-6, 6), "b": st.booleans()})
slow = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


# -- parsing ------------------------------------------------------------------

def test_parse_simple_comparison():
    assert parse_formula("(> x 0)", {"x": Sort.INT}) is gt(X, 0)


def test_parse_conjunction_law():
    f = parse_formula("(and (<= y x) (> x 1))", {"x": Sort.INT, "y": Sort.INT})
    assert f is and_(le(Y, X), gt(X, 1))


def test_parse_ill_sorted():
    with pytest.raises(SortError):
        parse_formula("(> x true)", {"x": Sort.INT})


@pytest.mark.parametrize("text", ["(> x", "(> x 0))", "(frob x)", ")"])
def test_parse_errors(text):
    with pytest.raises(LogicError):
        parse_formula(text, {"x": Sort.INT})


def test_parse_error_has_position():
    with pytest.raises(ParseError) as e:
        parse_formula("(and (> x 0)", {"x": Sort.INT})
    assert e.value.pos is not None


def test_negative_literals_print_as_unary_minus():
    assert to_smtlib(lit(-3)) == "(- 3)"
    assert parse_term("(- 3)") is lit(-3)


def test_chained_comparison():
    f = parse_formula("(< 0 x y)", DECLS)
    assert f is and_(lt(0, X), lt(X, Y))


def test_distinct_round_trip():
    f = parse_formula("(distinct x 0)", DECLS)
    assert to_smtlib(f) == "(distinct x 0)"


@given(formulas())
@settings(max_examples=300, deadline=None)
def test_print_parse_round_trip(f):
    assert parse_formula(to_smtlib(f), DECLS) is f


@given(formulas())
@settings(max_examples=200, deadline=None)
def test_dag_size_stable_under_reparse(f):
    assert dag_size(parse_formula(to_smtlib(f), DECLS)) == dag_size(f)


# -- substitution ---------------------------------------------------------------

def test_substitute_textbook():
    assert substitute(le(Y, X), {"x": add(X, 1)}) is le(Y, add(X, 1))


def test_substitute_identity():
    assert substitute(gt(X, 0), {}) is gt(X, 0)


def test_substitute_matches_evaluation_on_samples():
    f = and_(gt(X, 2), lt(Y, X))
    g = substitute(f, {"x": add(X, 1)})
    assert g is and_(gt(add(X, 1), 2), lt(Y, add(X, 1)))
    rng = random.Random(5)
    for _ in range(50):
        env = {"x": rng.randint(-10, 10), "y": rng.randint(-10, 10)}
        assert evaluate(g, env) == evaluate(f, {**env, "x": env["x"] + 1})


@given(formulas(), int_terms(5), int_terms(5), ENVS)
@settings(max_examples=300, deadline=None)
def test_substitute_is_homomorphism(f, sx, sy, env):
    try:
        shifted = {**env, "x": evaluate(sx, env), "y": evaluate(sy, env)}
        want = evaluate(f, shifted)
        got = evaluate(substitute(f, {"x": sx, "y": sy}), env)
    except EvalError:
        return
    assert got == want


# -- evaluation -----------------------------------------------------------------

def test_eval_examples():
    assert evaluate(gt(X, 0), {"x": 1}) is True
    assert evaluate(and_(le(Y, X), gt(X, 1)), {"x": 2, "y": 2}) is True
    assert evaluate(div(Int("z"), X), {"z": 7, "x": 2}) == 3


@pytest.mark.parametrize("a,b", [(7, 2), (-7, 2), (7, -2), (-7, -2), (0, 3), (-1, 5)])
def test_euclidean_division(a, b):
    q, r = euclid_divmod(a, b)
    assert a == q * b + r and 0 <= r < abs(b)


def test_div_mod_agree_with_solver(session):
    # frozen against the solver on 20 samples
    rng = random.Random(11)
    for _ in range(20):
        a, b = rng.randint(-20, 20), rng.choice([-5, -3, -2, 2, 3, 7])
        A, Bv = Int("a"), Int("b")
        env = {"a": a, "b": b}
        q, r = evaluate(div(A, Bv), env), evaluate(mod(A, Bv), env)
        res = session.check([eq(A, a), eq(Bv, b), not_(and_(eq(div(A, Bv), q), eq(mod(A, Bv), r)))])
        assert res.unsat, (a, b)


def test_division_by_zero_raises():
    with pytest.raises(EvalError):
        evaluate(div(X, Y), {"x": 1, "y": 0})


def test_partial_evaluation_short_circuits():
    f = and_(gt(X, 0), lt(Y, 0))
    assert evaluate_partial(f, {"x": -1}) is False
    assert evaluate_partial(f, {"x": 1}) is None
    assert evaluate_partial(f, {"x": 1, "y": -1}) is True


@given(formulas(), ENVS, st.sets(st.sampled_from(["x", "y", "b"])))
@settings(max_examples=300, deadline=None)
def test_partial_evaluation_is_sound(f, env, hidden):
    part = {k: v for k, v in env.items() if k not in hidden}
    try:
        full = evaluate(f, env)
    except EvalError:
        return
    p = evaluate_partial(f, part)
    assert p is None or p == full


@given(formulas(6), ENVS)
@slow
def test_evaluation_agrees_with_solver(session, f, env):
    try:
        v = evaluate(f, env)
    except EvalError:
        assume(False)
    pin = and_(eq(X, env["x"]), eq(Y, env["y"]), B if env["b"] else not_(B))
    res = session.check([pin, f if not v else not_(f)], want_model=False)
    assert res.unsat


# -- sizes ----------------------------------------------------------------------

def test_dag_size_examples():
    assert dag_size(TRUE) == 1
    assert dag_size(gt(X, 0)) == 3
    assert dag_size(and_(gt(X, 0), gt(X, 0))) == 4


def test_interning_and_units():
    assert add(X, 1) is add(X, 1)
    assert and_(TRUE, gt(X, 0)) is gt(X, 0)
    assert or_(FALSE, gt(X, 0)) is gt(X, 0)
    assert conj([]) is TRUE
    assert and_(gt(X, 0), FALSE) is FALSE


# -- statements and Hoare triples --------------------------------------------------

def test_wp_examples():
    blocked = Statement.make(gt(X, 0))
    w = blocked.wp(FALSE, DECLS)
    assert w is implies(gt(X, 0), FALSE)
    assert all(evaluate(w, {"x": v}) == (v <= 0) for v in range(-4, 5))
    inc = Statement.make(TRUE, {"x": add(X, 1)})
    assert inc.wp(lt(Y, X), DECLS) is lt(Y, add(X, 1))
    hz = Statement.make(TRUE, havocs=["y"])
    assert hz.wp(gt(X, 0), DECLS) is gt(X, 0)


def test_wp_brute_force():
    inc = Statement.make(TRUE, {"x": add(X, 1)})
    w = inc.wp(lt(Y, X), DECLS)
    for x, y in itertools.product(range(-4, 5), repeat=2):
        assert evaluate(w, {"x": x, "y": y}) == evaluate(lt(Y, X), inc.execute({"x": x, "y": y}))


def test_statement_rejects_double_assignment():
    with pytest.raises(LogicError):
        Statement(TRUE, (("x", X), ("x", Y)))
    with pytest.raises(LogicError):
        Statement.make(TRUE, {"x": Y}, ["x"])


def test_hoare_examples(session):
    assert check_hoare(lt(Y, X), Statement.make(ge(Y, X)), FALSE, session).verdict is Verdict.HOLDS
    r = check_hoare(gt(X, 0), Statement.make(TRUE, {"x": add(X, 1)}), gt(X, 2), session)
    assert r.verdict is Verdict.FAILS and r.pre_state["x"] == 1
    assert check_hoare(FALSE, Statement.make(TRUE, {"x": lit(5)}), FALSE, session).holds


def test_simultaneous_assignment(session):
    swap = Statement.make(TRUE, {"x": Y, "y": X})
    assert swap.execute({"x": 1, "y": 2}) == {"x": 2, "y": 1}
    assert check_hoare(and_(eq(X, 1), eq(Y, 2)), swap, and_(eq(X, 2), eq(Y, 1)), session).holds


def _enumerate_counterexample(pre, stmt, post):
    vals = range(-4, 5)
    for x, y, b in itertools.product(vals, vals, (False, True)):
        env = {"x": x, "y": y, "b": b}
        try:
            if not evaluate(pre, env):
                continue
            for nxt in stmt.successors(env, {"x": vals, "y": vals, "b": (False, True)}):
                if not evaluate(post, nxt):
                    return env
        except EvalError:
            continue
    return None


@given(formulas(5), statements(), formulas(5))
@slow
def test_hoare_agrees_with_enumeration(session, pre, stmt, post):
    cex = _enumerate_counterexample(pre, stmt, post)
    res = check_hoare(pre, stmt, post, session, DECLS)
    if cex is not None:
        assert res.verdict is Verdict.FAILS
    if res.verdict is Verdict.FAILS:
        # the reported pre-state really is a counterexample over the integers
        try:
            ok = evaluate(pre, {**{"b": False}, **res.pre_state})
        except EvalError:
            return
        assert ok


@given(formulas(5), formulas(5))
@slow
def test_blocked_guard_always_holds(session, pre, post):
    stmt = Statement.make(FALSE, {"x": add(X, 1)})
    assert check_hoare(pre, stmt, post, session, DECLS).holds
