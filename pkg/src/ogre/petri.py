"""Petri programs: one-safe nets whose transitions carry statements."""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .logic import (
    TRUE,
    LogicError,
    Sort,
    Statement,
    Term,
    free_vars,
    parse_formula,
    parse_term,
    to_smtlib,
)
from .logic.stmt import sequence_relation

Marking = frozenset  # frozenset[str]

_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*\Z")
_VAR_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*\Z")


class ProgramError(ValueError):
    """Structurally malformed program (bad JSON, unknown place, bad sort)."""


class NotEnabledError(ValueError):
    pass


class OneSafetyError(ValueError):
    def __init__(self, marking: frozenset, transition: str, sequence: Sequence[str]):
        self.marking = marking
        self.transition = transition
        self.sequence = tuple(sequence)
        super().__init__(
            f"firing {transition} after [{' '.join(sequence)}] puts a second token on "
            f"a place of {sorted(marking)}"
        )


@dataclass(frozen=True)
class Transition:
    id: str
    pre: frozenset[str]
    succ: frozenset[str]
    statement: Statement = field(default_factory=Statement)

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    subject: str = ""

    def to_json(self) -> dict:
        return {"kind": self.kind, "subject": self.subject, "message": self.message}


@dataclass
class ReachabilityGraph:
    markings: list[frozenset]  # BFS discovery order
    edges: list[tuple[int, str, int]]
    parent: dict[frozenset, tuple[frozenset, str] | None]

    def path_to(self, m: frozenset) -> list[str]:
        seq: list[str] = []
        cur = self.parent.get(m)
        while cur is not None:
            prev, t = cur
            seq.append(t)
            cur = self.parent.get(prev)
        return seq[::-1]


class PetriProgram:
    """A one-safe Petri net labelled with statements over typed variables.

    Places and transitions keep their declaration order, which fixes every
    iteration order downstream.
    """

    def __init__(
        self,
        variables: Mapping[str, Sort],
        places: Sequence[str],
        transitions: Sequence[Transition],
        initial_marking: Iterable[str],
        error_places: Iterable[str] = (),
    ):
        self.variables: dict[str, Sort] = dict(variables)
        self.places: tuple[str, ...] = tuple(places)
        self.transitions: tuple[Transition, ...] = tuple(transitions)
        self.initial_marking: frozenset[str] = frozenset(initial_marking)
        self.error_places: frozenset[str] = frozenset(error_places)
        self.place_index = {p: i for i, p in enumerate(self.places)}
        self.transition_index = {t.id: i for i, t in enumerate(self.transitions)}
        self.by_id = {t.id: t for t in self.transitions}
        self._check_structure()

    def _check_structure(self) -> None:
        if len(self.place_index) != len(self.places):
            raise ProgramError("duplicate place id")
        if len(self.by_id) != len(self.transitions):
            raise ProgramError("duplicate transition id")
        clash = set(self.place_index) & set(self.by_id)
        if clash:
            raise ProgramError(f"ids used both as place and transition: {sorted(clash)}")
        for v in self.variables:
            if not _VAR_RE.match(v):
                raise ProgramError(f"invalid variable name {v!r}")
        known = set(self.places)
        for t in self.transitions:
            for p in t.pre | t.succ:
                if p not in known:
                    raise ProgramError(f"transition {t.id} mentions unknown place {p}")
        for p in self.initial_marking | self.error_places:
            if p not in known:
                raise ProgramError(f"unknown place {p}")

    # -- ordering helpers ---------------------------------------------------

    def sorted_places(self, ps: Iterable[str]) -> list[str]:
        return sorted(ps, key=self.place_index.__getitem__)

    def marking_key(self, m: Iterable[str]) -> tuple[int, ...]:
        return tuple(sorted(self.place_index[p] for p in m))

    def show(self, m: Iterable[str]) -> str:
        return "{" + ",".join(self.sorted_places(m)) + "}"

    # -- semantics ------------------------------------------------------------

    def enabled(self, m: frozenset, t: Transition) -> bool:
        return t.pre <= m

    def enabled_transitions(self, m: frozenset) -> Iterator[Transition]:
        for t in self.transitions:
            if t.pre <= m:
                yield t

    def fire(self, m: frozenset, t: Transition | str) -> frozenset:
        tr = self.by_id[t] if isinstance(t, str) else t
        if not tr.pre <= m:
            raise NotEnabledError(f"{tr.id} is not enabled in {self.show(m)}")
        return (m - tr.pre) | tr.succ

    def explore(self) -> ReachabilityGraph:
        return self.reachability

    @cached_property
    def reachability(self) -> ReachabilityGraph:
        start = self.initial_marking
        order = [start]
        index = {start: 0}
        parent: dict[frozenset, tuple[frozenset, str] | None] = {start: None}
        edges: list[tuple[int, str, int]] = []
        queue = deque([start])
        while queue:
            m = queue.popleft()
            for t in self.transitions:
                if not t.pre <= m:
                    continue
                rest = m - t.pre
                if rest & t.succ:
                    seq = ReachabilityGraph(order, edges, parent).path_to(m)
                    raise OneSafetyError(m, t.id, seq)
                m2 = rest | t.succ
                if m2 not in index:
                    index[m2] = len(order)
                    order.append(m2)
                    parent[m2] = (m, t.id)
                    queue.append(m2)
                edges.append((index[m], t.id, index[m2]))
        return ReachabilityGraph(order, edges, parent)

    @property
    def reachable(self) -> list[frozenset]:
        return self.reachability.markings

    @cached_property
    def co_relation(self) -> dict[str, frozenset[str]]:
        rel: dict[str, set[str]] = {p: set() for p in self.places}
        for m in self.reachable:
            for p in m:
                rel[p].update(m)
        return {p: frozenset(s - {p}) for p, s in rel.items()}

    def co_related(self, p: str, q: str) -> bool:
        return p != q and q in self.co_relation[p]

    @cached_property
    def co_marked_relation(self) -> dict[str, frozenset[str]]:
        """Transition id -> places co-marked with it."""
        out: dict[str, set[str]] = {t.id: set() for t in self.transitions}
        for m in self.reachable:
            for t in self.transitions:
                if t.pre <= m:
                    out[t.id].update(m - t.pre)
        return {t: frozenset(s) for t, s in out.items()}

    def co_marked(self, p: str, t: str) -> bool:
        return p in self.co_marked_relation[t]

    # -- io -------------------------------------------------------------------

    @classmethod
    def from_json(cls, data: Mapping | str) -> PetriProgram:
        if isinstance(data, str):
            data = json.loads(data)
        try:
            variables: dict[str, Sort] = {}
            for v in data.get("variables", []):
                name = v["name"]
                try:
                    sort = Sort(v.get("sort", "Int"))
                except ValueError:
                    raise ProgramError(f"unknown sort {v.get('sort')!r} for {name}") from None
                if name in variables:
                    raise ProgramError(f"variable {name} declared twice")
                if not _VAR_RE.match(name):
                    raise ProgramError(f"invalid variable name {name!r}")
                variables[name] = sort
            transitions = []
            for t in data["transitions"]:
                tid = t["id"]
                guard = parse_formula(t["assume"], variables) if t.get("assume") else TRUE
                assigns = {n: parse_term(e, variables) for n, e in (t.get("assign") or {}).items()}
                st = Statement.make(guard, assigns, t.get("havoc") or [])
                st.check_sorts(variables)
                transitions.append(Transition(tid, frozenset(t["pre"]), frozenset(t["succ"]), st))
            return cls(
                variables,
                data["places"],
                transitions,
                data["initial_marking"],
                data.get("error_places", []),
            )
        except KeyError as e:
            raise ProgramError(f"missing field {e}") from None
        except LogicError as e:
            raise ProgramError(str(e)) from None

    @classmethod
    def load(cls, path: str | Path) -> PetriProgram:
        return cls.from_json(Path(path).read_text())

    def to_json(self) -> dict:
        return {
            "variables": [{"name": n, "sort": s.value} for n, s in self.variables.items()],
            "places": list(self.places),
            "error_places": self.sorted_places(self.error_places),
            "initial_marking": self.sorted_places(self.initial_marking),
            "transitions": [
                {
                    "id": t.id,
                    "pre": self.sorted_places(t.pre),
                    "succ": self.sorted_places(t.succ),
                    **t.statement.to_json(),
                }
                for t in self.transitions
            ],
        }

    def replace_transition(self, tid: str, statement: Statement) -> PetriProgram:
        ts = [Transition(t.id, t.pre, t.succ, statement) if t.id == tid else t for t in self.transitions]
        return PetriProgram(self.variables, self.places, ts, self.initial_marking, self.error_places)


def fire(program: PetriProgram, m: Iterable[str], t: Transition | str) -> frozenset:
    return program.fire(frozenset(m), t)


def reachable_markings(program: PetriProgram) -> list[frozenset]:
    return program.reachable


def co_related(program: PetriProgram) -> dict[str, frozenset[str]]:
    return program.co_relation


def co_marked(program: PetriProgram) -> dict[str, frozenset[str]]:
    return program.co_marked_relation


def validate_program(program: PetriProgram) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    for t in program.transitions:
        if not t.pre:
            diags.append(Diagnostic("empty-preset", f"transition {t.id} has no input places", t.id))
        if not t.succ:
            diags.append(Diagnostic("empty-postset", f"transition {t.id} has no output places", t.id))
        st = t.statement
        used = free_vars(st.guard, *(e for _, e in st.assigns))
        for n, s in used.items():
            if program.variables.get(n) is not s:
                diags.append(Diagnostic("undeclared-variable", f"{t.id} uses undeclared variable {n}", t.id))
        for n in st.written:
            if n not in program.variables:
                diags.append(Diagnostic("undeclared-variable", f"{t.id} writes undeclared variable {n}", t.id))
    try:
        graph = program.reachability
    except OneSafetyError as e:
        diags.append(Diagnostic("one-safety", str(e), e.transition))
        return diags
    fired = {tid for _, tid, _ in graph.edges}
    for t in program.transitions:
        if t.id not in fired:
            diags.append(Diagnostic("never-enabled", f"transition {t.id} is not enabled in any reachable marking", t.id))
    return diags


# ---------------------------------------------------------- bounded oracle

@dataclass(frozen=True)
class FeasibilityResult:
    kind: str  # "none", "feasible", "unknown"
    sequence: tuple[str, ...] = ()
    checked: int = 0
    reason: str = ""

    @property
    def feasible(self) -> bool:
        return self.kind == "feasible"


def _distance_to_error(program: PetriProgram) -> dict[frozenset, int]:
    graph = program.reachability
    inf = len(graph.markings) + 1
    dist = {m: (0 if m & program.error_places else inf) for m in graph.markings}
    preds: dict[int, list[int]] = {}
    for a, _, b in graph.edges:
        preds.setdefault(b, []).append(a)
    queue = deque(i for i, m in enumerate(graph.markings) if dist[m] == 0)
    while queue:
        b = queue.popleft()
        for a in preds.get(b, ()):
            ma = graph.markings[a]
            if dist[ma] > dist[graph.markings[b]] + 1:
                dist[ma] = dist[graph.markings[b]] + 1
                queue.append(a)
    return dist


def bounded_feasibility_oracle(program: PetriProgram, max_len: int, session) -> FeasibilityResult:
    """Look for a firing sequence of length <= max_len into an error marking
    whose statements can all execute from some initial valuation.

    Prefixes are extended only while an error marking stays within reach in
    the remaining steps and the prefix itself is feasible; the first error
    marking on a path ends that path.
    """
    from .solverio import Status

    dist = _distance_to_error(program)
    decls = program.variables
    checked = 0
    unknown_reason = ""

    def feasible(seq: list[Transition]) -> Status:
        nonlocal checked
        checked += 1
        rel = sequence_relation([t.statement for t in seq], decls)
        return session.check([rel], want_model=False).status

    # iterative DFS in declaration order for a deterministic first witness
    stack: list[tuple[frozenset, list[Transition]]] = [(program.initial_marking, [])]
    while stack:
        m, seq = stack.pop()
        if m & program.error_places:
            st = feasible(seq) if seq else Status.SAT
            if st is Status.SAT:
                return FeasibilityResult("feasible", tuple(t.id for t in seq), checked)
            if st is Status.UNKNOWN:
                unknown_reason = "solver unknown on some trace"
            continue
        remaining = max_len - len(seq)
        if dist.get(m, remaining + 1) > remaining:
            continue
        if seq:
            st = feasible(seq)
            if st is Status.UNSAT:
                continue
            if st is Status.UNKNOWN:
                unknown_reason = "solver unknown on some prefix"
        children = []
        for t in program.transitions:
            if t.pre <= m:
                children.append(((m - t.pre) | t.succ, seq + [t]))
        stack.extend(reversed(children))
    if unknown_reason:
        return FeasibilityResult("unknown", (), checked, unknown_reason)
    return FeasibilityResult("none", (), checked)
