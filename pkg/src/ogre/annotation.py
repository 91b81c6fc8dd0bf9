"""Owicki-Gries annotations: naive (one boolean ghost per place), imperial
(one ghost tracking the empire state) and focused imperial."""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .domain import BOTTOM, InvariantDomain, UnsafeDomainError, abstract_reach, is_safe
from .empire import Empire
from .focus import FocusError, check_focus
from .logic import (
    FALSE,
    TRUE,
    Sort,
    Statement,
    Term,
    and_,
    conj,
    dag_size,
    disj,
    eq,
    ge,
    infer_sorts,
    ite,
    lit,
    lt,
    not_,
    parse_term,
    read_sexpr,
    to_smtlib,
    var,
)
from .petri import PetriProgram


@dataclass(frozen=True)
class GhostVariable:
    name: str
    kind: str = "state"  # "state" (integer in [0, count)) or "bool"
    count: int = 0

    @property
    def sort(self) -> Sort:
        return Sort.BOOL if self.kind == "bool" else Sort.INT

    @property
    def term(self) -> Term:
        return var(self.name, self.sort)

    def domain_constraint(self) -> Term:
        if self.kind == "bool":
            return TRUE
        return and_(ge(self.term, 0), lt(self.term, self.count))

    def values(self) -> list:
        return [False, True] if self.kind == "bool" else list(range(self.count))

    def to_json(self) -> dict:
        dom: dict = {"kind": self.kind}
        if self.kind == "state":
            dom["count"] = self.count
        return {"name": self.name, "domain": dom}


@dataclass
class OGAnnotation:
    ghosts: list[GhostVariable]
    rho: dict[str, Term]
    omega: dict[str, Term]
    gamma: dict[str, dict[str, Term]] = field(default_factory=dict)

    def ghost_decls(self) -> dict[str, Sort]:
        return {g.name: g.sort for g in self.ghosts}

    def update(self, tid: str) -> dict[str, Term]:
        return self.gamma.get(tid, {})

    def ghost_statement(self, tid: str) -> Statement:
        return Statement.make(TRUE, self.update(tid))

    def domain_constraint(self) -> Term:
        return conj(g.domain_constraint() for g in self.ghosts)

    def to_json(self, program: PetriProgram | None = None) -> dict:
        places = list(program.places) if program else list(self.omega)
        tids = [t.id for t in program.transitions] if program else list(self.gamma)
        return {
            "ghosts": [g.to_json() for g in self.ghosts],
            "rho": {n: to_smtlib(v) for n, v in self.rho.items()},
            "gamma": [
                {
                    "transition": t,
                    "updates": [{"var": n, "expr": to_smtlib(e)} for n, e in self.gamma[t].items()],
                }
                for t in tids
                if self.gamma.get(t)
            ],
            "omega": [{"place": p, "formula": to_smtlib(self.omega[p])} for p in places],
        }

    def dumps(self, program: PetriProgram | None = None) -> str:
        return json.dumps(self.to_json(program), indent=2) + "\n"

    @classmethod
    def from_json(cls, data: Mapping | str, program: PetriProgram | None = None) -> OGAnnotation:
        """Read a certificate; without a program, variable sorts are inferred."""
        if isinstance(data, str):
            data = json.loads(data)
        ghosts = []
        for g in data["ghosts"]:
            dom = g.get("domain", {"kind": "state"})
            ghosts.append(GhostVariable(g["name"], dom.get("kind", "state"), int(dom.get("count", 0))))
        decls: dict[str, Sort] = {g.name: g.sort for g in ghosts}
        texts = [o["formula"] for o in data["omega"]]
        texts += [u["expr"] for e in data.get("gamma", []) for u in e["updates"]]
        if program is not None:
            for n, s in program.variables.items():
                if n in decls:
                    raise ValueError(f"ghost {n} clashes with a program variable")
                decls[n] = s
        decls = infer_sorts([read_sexpr(t) for t in texts], decls)
        rho = {n: parse_term(v, decls) for n, v in data.get("rho", {}).items()}
        omega = {o["place"]: parse_term(o["formula"], decls) for o in data["omega"]}
        gamma: dict[str, dict[str, Term]] = {}
        for e in data.get("gamma", []):
            gamma[e["transition"]] = {u["var"]: parse_term(u["expr"], decls) for u in e["updates"]}
        return cls(ghosts, rho, omega, gamma)

    @classmethod
    def load(cls, path: str | Path, program: PetriProgram | None = None) -> OGAnnotation:
        return cls.from_json(Path(path).read_text(), program)


@dataclass(frozen=True)
class Metrics:
    size: int
    ghost_updates: int
    ghost_vars: int

    def to_json(self) -> dict:
        return {"size": self.size, "ghost_updates": self.ghost_updates, "ghost_vars": self.ghost_vars}


def metrics(og: OGAnnotation) -> Metrics:
    size = sum(dag_size(f) for f in og.omega.values())
    size += sum(dag_size(e) for upd in og.gamma.values() for e in upd.values())
    size += sum(dag_size(v) for v in og.rho.values())
    updates = sum(1 for upd in og.gamma.values() if upd)
    return Metrics(size, updates, len(og.ghosts))


_BAD = re.compile(r"[^A-Za-z0-9_.]")


def fresh_name(base: str, taken: Iterable[str]) -> str:
    taken = set(taken)
    name = _BAD.sub("_", base)
    if not re.match(r"[A-Za-z_]", name):
        name = "g_" + name
    while name in taken:
        name += "_"
    return name


# ------------------------------------------------------------------ naive

def naive_og(program: PetriProgram, d: InvariantDomain) -> OGAnnotation:
    configs = abstract_reach(program, d)
    safe, _ = is_safe(program, d, configs)
    if not safe:
        raise UnsafeDomainError("the invariant domain does not exclude every error place")
    taken = set(program.variables)
    names: dict[str, str] = {}
    for p in program.places:
        names[p] = fresh_name(f"g_{p}", taken)
        taken.add(names[p])
    ghosts = [GhostVariable(names[p], "bool") for p in program.places]
    gv = {p: var(names[p], Sort.BOOL) for p in program.places}
    rho = {names[p]: lit(p in program.initial_marking) for p in program.places}

    gamma: dict[str, dict[str, Term]] = {}
    for t in program.transitions:
        upd: dict[str, Term] = {}
        for p in program.places:
            if p in t.succ and p not in t.pre:
                upd[names[p]] = TRUE
            elif p in t.pre and p not in t.succ:
                upd[names[p]] = FALSE
        gamma[t.id] = upd

    laws_at: dict[frozenset, list] = {}
    for c in configs:
        seen = laws_at.setdefault(c.marking, [])
        if c.law not in seen:
            seen.append(c.law)

    def at_mark(m: frozenset) -> Term:
        return conj(gv[p] if p in m else not_(gv[p]) for p in program.places)

    omega: dict[str, Term] = {}
    for p in program.places:
        disjuncts = []
        for m in program.reachable:
            if p not in m:
                continue
            beta = disj(d.formula(law) for law in laws_at.get(m, []) if law is not BOTTOM)
            disjuncts.append(and_(at_mark(m), beta))
        omega[p] = disj(disjuncts)
    return OGAnnotation(ghosts, rho, omega, gamma)


# --------------------------------------------------------------- imperial

def ghost_encoding(E: Empire, share: bool = True) -> list[int]:
    """Ghost value of every empire state.

    Without sharing every state gets its own id. With sharing, states
    joined by an edge are merged greedily when all members of the merged
    group cover disjoint, pairwise non-co-related places: no reachable
    marking can then be described by two of them, so one value suffices.
    Each group is encoded by its smallest state id.
    """
    n = len(E)
    if not share:
        return list(range(n))
    prog = E.program
    places = [E.places_of(q) for q in range(n)]
    co = prog.co_relation
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    members = {q: [q] for q in range(n)}

    def compatible(a: int, b: int) -> bool:
        pa, pb = places[a], places[b]
        if pa & pb:
            return False
        return not any(co[p] & pb for p in pa)

    for q, _, r in E.edges():
        a, b = find(q), find(r)
        if a == b:
            continue
        if all(compatible(x, y) for x in members[a] for y in members[b]):
            lo, hi = min(a, b), max(a, b)
            parent[hi] = lo
            members[lo] = sorted(members[lo] + members.pop(hi))
    return [find(q) for q in range(n)]


def _ghost_name(program: PetriProgram) -> str:
    return fresh_name("g", program.variables)


def imperial_gamma(E: Empire, enc: Sequence[int], g: Term) -> dict[str, dict[str, Term]]:
    prog = E.program
    gamma: dict[str, dict[str, Term]] = {}
    for t in prog.transitions:
        cands = None
        for p in t.pre:
            qs = set(E.states_with_place(p))
            cands = qs if cands is None else cands & qs
        cases: list[tuple[int, int]] = []
        for q in sorted(cands or (), key=lambda q: enc[q]):
            r = E.delta.get((q, t.id))
            if r is not None and enc[r] != enc[q]:
                cases.append((enc[q], enc[r]))
        if not cases:
            gamma[t.id] = {}
            continue
        expr: Term = g
        for v, w in reversed(cases):
            expr = ite(eq(g, v), lit(w), expr)
        gamma[t.id] = {g.name: expr}
    return gamma


def _imperial_frame(E: Empire, share_ghost_values: bool) -> tuple[GhostVariable, list[int], dict]:
    enc = ghost_encoding(E, share_ghost_values)
    ghost = GhostVariable(_ghost_name(E.program), "state", len(E))
    gamma = imperial_gamma(E, enc, ghost.term)
    return ghost, enc, gamma


def _omega(E: Empire, enc: Sequence[int], g: Term, law_at) -> dict[str, Term]:
    omega = {}
    for p in E.program.places:
        qs = sorted(E.states_with_place(p), key=lambda q: (enc[q], q))
        omega[p] = disj(and_(eq(g, enc[q]), law_at(q, p)) for q in qs)
    return omega


def imperial_og(E: Empire, share_ghost_values: bool = True) -> OGAnnotation:
    ghost, enc, gamma = _imperial_frame(E, share_ghost_values)
    g = ghost.term
    omega = _omega(E, enc, g, lambda q, p: E.law_formula(q))
    return OGAnnotation([ghost], {ghost.name: lit(enc[E.initial])}, omega, gamma)


def focused_law(E: Empire, F: Mapping, q: int, places: Iterable[str]) -> Term:
    """Conjunction of the components focused on any region holding one of ``places``."""
    ps = set(places)
    keep: set[int] = set()
    for r in E.terr(q):
        if r & ps:
            keep |= F.get((q, r), frozenset())
    return conj(f for i, f in enumerate(E.parts[q], start=1) if i in keep)


def focused_og(E: Empire, F: Mapping, d: InvariantDomain | None = None, share_ghost_values: bool = True) -> OGAnnotation:
    if d is not None:
        rep = check_focus(E, d, F)
        if not rep.ok:
            raise FocusError(f"focus violates {rep.violations[0]}")
    ghost, enc, gamma = _imperial_frame(E, share_ghost_values)
    g = ghost.term
    omega = _omega(E, enc, g, lambda q, p: focused_law(E, F, q, [p]))
    return OGAnnotation([ghost], {ghost.name: lit(enc[E.initial])}, omega, gamma)


def combined_formula(E: Empire, enc: Sequence[int], g: Term, places: Iterable[str], F: Mapping | None = None) -> Term:
    """Right-hand side of the place-conjunction equivalence for ``places``:
    the ghost/law disjunction over states whose territory covers all of them."""
    ps = frozenset(places)
    qs = [q for q in range(len(E)) if ps <= E.places_of(q)]
    qs.sort(key=lambda q: (enc[q], q))
    if F is None:
        return disj(and_(eq(g, enc[q]), E.law_formula(q)) for q in qs)
    return disj(and_(eq(g, enc[q]), focused_law(E, F, q, ps)) for q in qs)


def place_subsets(program: PetriProgram, max_size: int = 3) -> list[frozenset]:
    """Nonempty subsets (up to ``max_size``) of reachable markings, deduplicated."""
    seen: set[frozenset] = set()
    out = []
    for m in program.reachable:
        ps = program.sorted_places(m)
        for k in range(1, min(max_size, len(ps)) + 1):
            for sub in itertools.combinations(ps, k):
                s = frozenset(sub)
                if s not in seen:
                    seen.add(s)
                    out.append(s)
    return out


def place_conjunction_obligations(
    og: OGAnnotation, E: Empire, enc: Sequence[int], max_size: int = 3, F: Mapping | None = None
) -> list[tuple[frozenset, Term, Term]]:
    g = og.ghosts[0].term
    out = []
    for s in place_subsets(E.program, max_size):
        lhs = conj(og.omega[p] for p in E.program.sorted_places(s))
        out.append((s, lhs, combined_formula(E, enc, g, s, F)))
    return out


__all__ = [
    "GhostVariable",
    "Metrics",
    "OGAnnotation",
    "combined_formula",
    "focused_law",
    "focused_og",
    "ghost_encoding",
    "imperial_og",
    "metrics",
    "naive_og",
    "place_conjunction_obligations",
    "place_subsets",
]
