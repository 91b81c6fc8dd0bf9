from __future__ import annotations

import json

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from netgen import generate
from ogre.domain import BOTTOM, InvariantDomain, abstract_reach, is_safe
from ogre.empire import (
    Empire,
    EmpireState,
    TerritoryError,
    build_naive_empire,
    build_saturated_empire,
    bystanders,
    check_empire_valid,
    enabled_in_territory,
    extendable,
    extended,
    fires,
    is_territory,
    make_territory,
    replaced,
    saturated_successor,
    treaty,
    treaty_size,
)
from ogre.petri import PetriProgram

T = make_territory
slow = settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])


def test_treaty_enumerates_selections():
    tau = T([["p2", "p3"], ["p5", "p6"]])
    ms = treaty(tau)
    assert len(ms) == treaty_size(tau) == 4
    assert frozenset({"p3", "p5"}) in ms


def test_is_territory():
    assert is_territory(T([["p1"], ["p5", "p6"]]))
    assert not is_territory(T([["p1", "p5"], ["p5", "p6"]]))


def test_enabledness(ex):
    te2 = ex.by_id["te2"]
    assert enabled_in_territory(T([["p4"], ["p7"]]), te2)
    assert not enabled_in_territory(T([["p4", "p7"]]), te2)
    assert not enabled_in_territory(T([["p4"], ["p5"]]), te2)


def test_bystanders_and_replacement(ex):
    tau = T([["p2", "p3"], ["p5", "p6"]])
    t4 = ex.by_id["t4"]
    assert bystanders(t4, tau) == {frozenset({"p5", "p6"})}
    assert replaced(t4, tau) == T([["p4"], ["p5", "p6"]])
    assert fires(tau, t4, T([["p4"], ["p5", "p6"]]))
    with pytest.raises(TerritoryError):
        replaced(ex.by_id["t7"], T([["p1"], ["p7"]]))


def test_extension(ex):
    tau = T([["p1"], ["p5"]])
    t5 = ex.by_id["t5"]
    assert extendable(tau, t5, ex)
    assert extended(t5, tau, ex) == T([["p1"], ["p5", "p6"]])
    # t0 forks, so it is not sequential
    assert not extendable(T([["p0"]]), ex.by_id["t0"], ex)
    with pytest.raises(TerritoryError):
        extended(ex.by_id["t0"], T([["p0"]]), ex)


def test_saturated_successor_keeps_law(ex, ex_domain):
    law = (0, 1)
    got = saturated_successor(law, frozenset(), T([["p1"], ["p5"]]), ex_domain, ex)
    assert got == T([["p1"], ["p5", "p6"]])
    # with p5 a required bystander the loop t5/t6 cannot grow into it
    rb = frozenset({frozenset({"p5"})})
    assert saturated_successor(law, rb, T([["p1"], ["p5"]]), ex_domain, ex) == T([["p1"], ["p5"]])


def test_naive_empire_counts_non_bottom_configurations(ex, ex_domain):
    E = build_naive_empire(ex, ex_domain)
    assert len(E) == 13
    nonbottom = {(c.marking, c.law) for c in abstract_reach(ex, ex_domain) if c.law is not BOTTOM}
    got = {(frozenset().union(*s.territory), s.law) for s in E.states}
    assert got == nonbottom
    assert EmpireState(T([["p1"], ["p5"]]), (0, 1)) in E.states
    assert EmpireState(T([["p1"], ["p6"]]), (0, 1)) in E.states


def test_saturated_empire_shape(ex_empire):
    E = ex_empire
    assert len(E) == 7 and len(E.edges()) == 18
    q1 = E.index[EmpireState(T([["p1"], ["p5", "p6"]]), (0, 1))]
    assert E.delta[(q1, "t5")] == q1
    q4 = E.index[EmpireState(T([["p4"], ["p5", "p6"]]), (2, 2))]
    assert (q4, "te1") not in E.delta
    assert E.diagnostics == []


def test_saturation_is_order_independent_on_ex(ex, ex_domain):
    assert build_saturated_empire(ex, ex_domain, debug=True).diagnostics == []


def test_empires_are_valid(ex, ex_domain, ex_empire, session):
    assert check_empire_valid(ex, ex_empire, session).ok
    assert check_empire_valid(ex, build_naive_empire(ex, ex_domain), session).ok


def _rebuild(E: Empire, d: InvariantDomain, states=None, delta=None) -> Empire:
    states = list(states or E.states)
    return Empire(E.program, states, dict(delta or E.delta), [d.parts(s.law) for s in states], E.kind)


def test_deleted_edge_breaks_inductive_law(ex, ex_domain, ex_empire, session):
    delta = dict(ex_empire.delta)
    del delta[(0, "t0")]
    rep = check_empire_valid(ex, _rebuild(ex_empire, ex_domain, delta=delta), session)
    assert rep.conditions_violated() == {"inductive-law"}


def test_strong_initial_law_is_rejected(ex, ex_domain, ex_empire, session):
    states = list(ex_empire.states)
    states[0] = EmpireState(states[0].territory, (0, 1))
    rep = check_empire_valid(ex, _rebuild(ex_empire, ex_domain, states=states), session)
    assert "initial-law" in rep.conditions_violated()


def test_wrong_territory_is_rejected(ex, ex_domain, ex_empire, session):
    states = list(ex_empire.states)
    states[1] = EmpireState(T([["p1"], ["p5"]]), states[1].law)
    rep = check_empire_valid(ex, _rebuild(ex_empire, ex_domain, states=states), session)
    assert "inductive-territory" in rep.conditions_violated()


def test_empire_json_round_trip(ex, ex_empire):
    again = Empire.from_json(json.dumps(ex_empire.to_json()), ex)
    assert again == ex_empire


def test_unsafe_domain_is_refused(ex, session):
    d = InvariantDomain.from_json({"components": [{"formulas": ["true", "false"], "post": {"mode": "table"}}]}, ex, session)
    with pytest.raises(Exception, match="not safe"):
        build_saturated_empire(ex, d)


# -- properties on generated safe programs -----------------------------------------

def _safe_generated(seed, session):
    g = generate(seed)
    p = PetriProgram.from_json(g.program)
    d = InvariantDomain.from_json(g.domain, p, session)
    ok, _ = is_safe(p, d)
    assume(ok)
    return p, d


@given(st.integers(0, 3000))
@slow
def test_generated_empires_respect_territories(session, seed):
    p, d = _safe_generated(seed, session)
    reach = set(p.reachable)
    for E in (build_naive_empire(p, d), build_saturated_empire(p, d)):
        for q, s in enumerate(E.states):
            assert is_territory(s.territory)
            assert set(treaty(s.territory)) <= reach
            if s.law is not BOTTOM:
                assert not any(r & p.error_places for r in s.territory)
        for (q, tid), r in E.delta.items():
            t = p.by_id[tid]
            assert enabled_in_territory(E.terr(q), t)
            assert fires(E.terr(q), t, E.terr(r))


@given(st.integers(0, 3000))
@slow
def test_saturated_covers_naive(session, seed):
    # every naive configuration sits in the treaty of a saturated state with the same law
    p, d = _safe_generated(seed, session)
    N = build_naive_empire(p, d)
    S = build_saturated_empire(p, d)
    assert len(S) <= len(N)
    cover = {}
    for s in S.states:
        for m in treaty(s.territory):
            cover.setdefault(m, set()).add(s.law)
    for s in N.states:
        m = frozenset().union(*s.territory)
        assert s.law in cover.get(m, set())


@given(st.integers(0, 3000))
@slow
def test_generated_empires_are_valid(session, seed):
    p, d = _safe_generated(seed, session)
    E = build_saturated_empire(p, d)
    assert check_empire_valid(p, E, session).ok
    assert Empire.from_json(E.to_json(), p) == E
