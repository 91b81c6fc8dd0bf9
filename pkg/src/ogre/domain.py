"""Invariant domains: finite sets of formulas with a sound post operator.

A domain is a product of components. Each component is either an explicit
list of formulas (post by lookup table and/or the strongest listed formula)
or a predicate-abstraction component whose elements are predicate subsets,
created on demand. Laws (domain elements of the product) are tuples of
per-component indices, or ``BOTTOM``.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Optional, Sequence

from .logic import FALSE, TRUE, LogicError, Term, check_hoare, conj, entails, parse_formula, to_smtlib
from .logic.hoare import Verdict
from .petri import PetriProgram, Transition

if TYPE_CHECKING:
    from .solverio import SolverSession

LawVector = Optional[tuple]  # tuple[int, ...] or BOTTOM
BOTTOM: LawVector = None


class DomainError(ValueError):
    """The domain cannot be built or queried (no representative, solver unknown)."""


class UnsafeDomainError(DomainError):
    pass


def _tid(t: Transition | str) -> str:
    return t if isinstance(t, str) else t.id


class Component:
    top: int = 0
    bottom: int = 1

    def formula(self, i: int) -> Term:
        raise NotImplementedError

    def post(self, i: int, t: Transition) -> int:
        raise NotImplementedError

    def size(self) -> int:
        raise NotImplementedError

    def elements(self) -> range:
        return range(self.size())

    def describe(self, i: int) -> str:
        return to_smtlib(self.formula(i))


class FormulaComponent(Component):
    """An explicit formula list.

    ``mode`` is "strongest" (post is the strongest listed formula implied by
    the Hoare triple, overridden by table entries) or "table" (lookup only;
    a missing entry maps to true, and false always maps to false).
    """

    def __init__(
        self,
        formulas: Sequence[Term],
        mode: str = "strongest",
        table: Mapping[tuple[int, str], int] | None = None,
        session: SolverSession | None = None,
    ):
        if mode not in ("strongest", "table"):
            raise DomainError(f"unknown post mode {mode!r}")
        self.formulas = list(formulas)
        self.mode = mode
        self.table = dict(table or {})
        self.session = session
        try:
            self.top = self.formulas.index(TRUE)
            self.bottom = self.formulas.index(FALSE)
        except ValueError:
            raise DomainError("a component must list both true and false") from None
        for (i, _), j in self.table.items():
            if not (0 <= i < len(self.formulas) and 0 <= j < len(self.formulas)):
                raise DomainError(f"table index out of range: {i} -> {j}")
        self._memo: dict[tuple[int, str], int] = {}
        self._entails: dict[tuple[int, int], bool] = {}
        self._lock = threading.Lock()

    def formula(self, i: int) -> Term:
        return self.formulas[i]

    def size(self) -> int:
        return len(self.formulas)

    def post(self, i: int, t: Transition) -> int:
        key = (i, t.id)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        if key in self.table:
            r = self.table[key]
        elif i == self.bottom:
            r = self.bottom
        elif self.mode == "table":
            r = self.top
        else:
            r = self._strongest(i, t)
        with self._lock:
            self._memo[key] = r
        return r

    def _hoare(self, pre: Term, t: Transition, post: Term) -> bool:
        if self.session is None:
            raise DomainError("strongest-post mode needs a solver session")
        res = check_hoare(pre, t.statement, post, self.session)
        if res.verdict is Verdict.UNKNOWN:
            raise DomainError(f"solver unknown while computing post over {t.id}: {res.reason}")
        return res.holds

    def _leq(self, a: int, b: int) -> bool:
        if a == b or a == self.bottom or b == self.top:
            return True
        key = (a, b)
        hit = self._entails.get(key)
        if hit is None:
            e = entails(self.formulas[a], self.formulas[b], self.session)  # type: ignore[arg-type]
            if e is None:
                raise DomainError("solver unknown on an entailment between domain formulas")
            hit = e
            with self._lock:
                self._entails[key] = hit
        return hit

    def _strongest(self, i: int, t: Transition) -> int:
        pre = self.formulas[i]
        if self._hoare(pre, t, FALSE):
            return self.bottom
        implied = [j for j, psi in enumerate(self.formulas) if j != self.bottom and self._hoare(pre, t, psi)]
        for j in implied:
            if all(self._leq(j, k) for k in implied):
                return j
        raise DomainError(
            f"no listed formula is equivalent to the strongest post of "
            f"{to_smtlib(pre)} over {t.id}"
        )

    def to_json(self) -> dict:
        post: dict = {"mode": self.mode}
        if self.table:
            post["table"] = [
                {"from": i, "transition": t, "to": j} for (i, t), j in self.table.items()
            ]
        return {"formulas": [to_smtlib(f) for f in self.formulas], "post": post}


class PredicateComponent(Component):
    """Predicate abstraction over a fixed predicate list.

    Element 0 is the empty subset (true), element 1 is false; other subsets
    get indices the first time post produces them.
    """

    def __init__(self, predicates: Sequence[Term], session: SolverSession | None = None):
        self.predicates = list(predicates)
        self.session = session
        self.subsets: list[frozenset[int] | None] = [frozenset(), None]
        self._index: dict[frozenset[int], int] = {frozenset(): 0}
        self._memo: dict[tuple[int, str], int] = {}
        self._lock = threading.Lock()

    def size(self) -> int:
        return len(self.subsets)

    def intern(self, subset: Iterable[int]) -> int:
        s = frozenset(subset)
        with self._lock:
            i = self._index.get(s)
            if i is None:
                i = len(self.subsets)
                self.subsets.append(s)
                self._index[s] = i
        return i

    def formula(self, i: int) -> Term:
        s = self.subsets[i]
        if s is None:
            return FALSE
        return conj(self.predicates[k] for k in sorted(s))

    def post(self, i: int, t: Transition) -> int:
        key = (i, t.id)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        if i == self.bottom:
            r = self.bottom
        else:
            pre = self.formula(i)
            if self._hoare(pre, t, FALSE):
                r = self.bottom
            else:
                r = self.intern(k for k, psi in enumerate(self.predicates) if self._hoare(pre, t, psi))
        with self._lock:
            self._memo[key] = r
        return r

    def _hoare(self, pre: Term, t: Transition, post: Term) -> bool:
        if self.session is None:
            raise DomainError("predicate abstraction needs a solver session")
        res = check_hoare(pre, t.statement, post, self.session)
        if res.verdict is Verdict.UNKNOWN:
            raise DomainError(f"solver unknown while abstracting {t.id}: {res.reason}")
        return res.holds

    def to_json(self) -> dict:
        return {"post": {"mode": "predicates"}, "predicates": [to_smtlib(p) for p in self.predicates]}


class InvariantDomain:
    """Product of components with bottom absorption."""

    def __init__(self, components: Sequence[Component]):
        if not components:
            raise DomainError("a domain needs at least one component")
        self.components = list(components)

    @property
    def top(self) -> tuple[int, ...]:
        return tuple(c.top for c in self.components)

    def post(self, law: LawVector, t: Transition) -> LawVector:
        if law is BOTTOM:
            return BOTTOM
        out = []
        for c, i in zip(self.components, law):
            j = c.post(i, t)
            if j == c.bottom:
                return BOTTOM
            out.append(j)
        return tuple(out)

    def parts(self, law: LawVector) -> tuple[Term, ...]:
        if law is BOTTOM:
            return (FALSE,)
        return tuple(c.formula(i) for c, i in zip(self.components, law))

    def formula(self, law: LawVector) -> Term:
        return conj(self.parts(law))

    def describe(self, law: LawVector) -> str:
        if law is BOTTOM:
            return "false"
        return "(" + ", ".join(c.describe(i) for c, i in zip(self.components, law)) + ")"

    def to_json(self) -> dict:
        return {"components": [c.to_json() for c in self.components]}

    @classmethod
    def from_json(cls, data: Mapping | str, program: PetriProgram, session: SolverSession | None = None) -> InvariantDomain:
        if isinstance(data, str):
            data = json.loads(data)
        comps: list[Component] = []
        try:
            for cj in data["components"]:
                post = cj.get("post") or {"mode": "strongest"}
                mode = post.get("mode", "strongest")
                if mode == "predicates":
                    preds = cj.get("predicates", post.get("predicates"))
                    if preds is None:
                        raise DomainError("predicates mode needs a predicate list")
                    comps.append(PredicateComponent([parse_formula(p, program.variables) for p in preds], session))
                    continue
                formulas = [parse_formula(f, program.variables) for f in cj["formulas"]]
                table = {}
                for e in post.get("table", []):
                    if e["transition"] not in program.by_id:
                        raise DomainError(f"table entry names unknown transition {e['transition']}")
                    table[(int(e["from"]), e["transition"])] = int(e["to"])
                comps.append(FormulaComponent(formulas, mode, table, session))
        except KeyError as e:
            raise DomainError(f"missing field {e}") from None
        except LogicError as e:
            raise DomainError(str(e)) from None
        return cls(comps)

    @classmethod
    def load(cls, path: str | Path, program: PetriProgram, session: SolverSession | None = None) -> InvariantDomain:
        return cls.from_json(Path(path).read_text(), program, session)


def post(d: InvariantDomain, law: LawVector, t: Transition) -> LawVector:
    return d.post(law, t)


def predicate_abstraction_domain(program: PetriProgram, predicates: Sequence[Term], session: SolverSession) -> PredicateComponent:
    return PredicateComponent(predicates, session)


# ----------------------------------------------------------- certification

@dataclass(frozen=True)
class Obligation:
    component: int
    source: int
    transition: str
    target: int
    witness: dict | None = None

    def describe(self, d: InvariantDomain) -> str:
        c = d.components[self.component]
        return f"component {self.component}: {{{c.describe(self.source)}}} {self.transition} {{{c.describe(self.target)}}}"


@dataclass
class DomainReport:
    checked: int = 0
    violations: list[Obligation] = field(default_factory=list)
    unknowns: list[Obligation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.unknowns


def certify_domain(program: PetriProgram, d: InvariantDomain, session: SolverSession) -> DomainReport:
    """Check every per-component post obligation with a Hoare query."""
    rep = DomainReport()
    for ci, c in enumerate(d.components):
        for i in list(c.elements()):
            if i == c.bottom:
                continue
            for t in program.transitions:
                try:
                    j = c.post(i, t)
                except DomainError:
                    rep.unknowns.append(Obligation(ci, i, t.id, -1))
                    continue
                rep.checked += 1
                res = check_hoare(c.formula(i), t.statement, c.formula(j), session, program.variables)
                if res.verdict is Verdict.FAILS:
                    rep.violations.append(Obligation(ci, i, t.id, j, res.pre_state))
                elif res.verdict is Verdict.UNKNOWN:
                    rep.unknowns.append(Obligation(ci, i, t.id, j))
    return rep


# ------------------------------------------------------- abstract reachability

@dataclass(frozen=True)
class AbstractConfiguration:
    marking: frozenset
    law: LawVector


def abstract_reach(program: PetriProgram, d: InvariantDomain) -> list[AbstractConfiguration]:
    """Reachable abstract configurations in breadth-first discovery order."""
    start = AbstractConfiguration(program.initial_marking, d.top)
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        c = queue.popleft()
        for t in program.transitions:
            if not t.pre <= c.marking:
                continue
            m2 = (c.marking - t.pre) | t.succ
            nxt = AbstractConfiguration(m2, d.post(c.law, t))
            if nxt not in seen:
                seen.add(nxt)
                order.append(nxt)
                queue.append(nxt)
    return order


def is_safe(program: PetriProgram, d: InvariantDomain, configs: Sequence[AbstractConfiguration] | None = None) -> tuple[bool, list[AbstractConfiguration]]:
    if configs is None:
        configs = abstract_reach(program, d)
    bad = [c for c in configs if c.marking & program.error_places and c.law is not BOTTOM]
    return (not bad, bad)

