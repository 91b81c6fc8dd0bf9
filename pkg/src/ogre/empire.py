"""Empires: finite machines over (territory, law) pairs.

A region is a set of mutually exclusive places, a territory a set of
disjoint regions; a territory stands for every marking that picks one
place per region. The naive construction keeps singleton regions, the
saturated one grows regions along law-preserving sequential transitions
so that loops collapse into self-loops.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .domain import BOTTOM, InvariantDomain, LawVector, UnsafeDomainError
from .logic import FALSE, Term, check_hoare, conj, parse_formula, satisfiable, to_smtlib, valid
from .logic.hoare import Verdict
from .petri import PetriProgram, Transition

if TYPE_CHECKING:
    from .solverio import SolverSession

Region = frozenset  # frozenset[str]
Territory = frozenset  # frozenset[Region]


class TerritoryError(ValueError):
    pass


# ------------------------------------------------------------- territories

def make_territory(regions: Iterable[Iterable[str]]) -> Territory:
    return frozenset(frozenset(r) for r in regions)


def is_territory(tau: Territory) -> bool:
    seen: set[str] = set()
    for r in tau:
        if not r or seen & r:
            return False
        seen |= r
    return True


def treaty(tau: Territory) -> list[frozenset]:
    regions = [sorted(r) for r in sorted(tau, key=sorted)]
    return [frozenset(sel) for sel in itertools.product(*regions)]


def treaty_size(tau: Territory) -> int:
    return math.prod(len(r) for r in tau)


def region_of(tau: Territory, p: str) -> Region | None:
    for r in tau:
        if p in r:
            return r
    return None


def enabled_in_territory(tau: Territory, t: Transition) -> bool:
    """Every input place lies in a region, and no two share one."""
    used: set[Region] = set()
    for p in t.pre:
        r = region_of(tau, p)
        if r is None or r in used:
            return False
        used.add(r)
    return True


def enabled(tau: Territory, program: PetriProgram) -> list[Transition]:
    return [t for t in program.transitions if enabled_in_territory(tau, t)]


def bystanders(t: Transition, tau: Territory) -> frozenset:
    return frozenset(r for r in tau if not (r & t.pre))


def fires(tau: Territory, t: Transition, tau2: Territory) -> bool:
    """The firing relation on territories: t takes tau to tau2."""
    if not enabled_in_territory(tau, t):
        return False
    stay = bystanders(t, tau)
    if not stay <= tau2:
        return False
    image: set[Region] = set()
    for p in t.succ:
        r = region_of(tau2, p)
        if r is None or r in image:
            return False
        image.add(r)
    return frozenset(stay | image) == tau2


def replaced(t: Transition, tau: Territory) -> Territory:
    if not enabled_in_territory(tau, t):
        raise TerritoryError(f"{t.id} is not enabled in the territory")
    return bystanders(t, tau) | frozenset(frozenset([p]) for p in t.succ)


def is_sequential(t: Transition) -> bool:
    return len(t.pre) == 1 and len(t.succ) == 1


def extendable(tau: Territory, t: Transition, program: PetriProgram) -> bool:
    if not is_sequential(t) or not enabled_in_territory(tau, t):
        return False
    (p,) = t.pre
    (q,) = t.succ
    r = region_of(tau, p)
    co = program.co_relation[q]
    return not any(x in co for x in r)  # type: ignore[union-attr]


def extended(t: Transition, tau: Territory, program: PetriProgram) -> Territory:
    if not extendable(tau, t, program):
        raise TerritoryError(f"territory is not extendable with {t.id}")
    (p,) = t.pre
    (q,) = t.succ
    r = region_of(tau, p)
    return bystanders(t, tau) | frozenset([r | {q}])  # type: ignore[operator]


def is_self_loop(tau: Territory, t: Transition) -> bool:
    """tau fires t back into itself (sequential case: successor already in the input region)."""
    if is_sequential(t):
        (p,) = t.pre
        (q,) = t.succ
        r = region_of(tau, p)
        return r is not None and q in r
    return fires(tau, t, tau)


def saturated_successor(
    law: LawVector,
    rb: frozenset,
    tau: Territory,
    d: InvariantDomain,
    program: PetriProgram,
    reverse: bool = False,
) -> Territory:
    """Grow ``tau`` by law-preserving sequential transitions until none applies.

    A transition qualifies when it is extendable, does not already loop in
    ``tau``, leaves ``law`` unchanged and keeps every region of ``rb`` as a
    bystander. The least qualifying transition in declaration order (or the
    greatest, with ``reverse``) is applied first.
    """
    order = program.transitions[::-1] if reverse else program.transitions
    while True:
        for t in order:
            if not extendable(tau, t, program) or is_self_loop(tau, t):
                continue
            if not rb <= bystanders(t, tau):
                continue
            if d.post(law, t) != law:
                continue
            tau = extended(t, tau, program)
            break
        else:
            return tau


# ---------------------------------------------------------------- empires

@dataclass(frozen=True)
class EmpireState:
    territory: Territory
    law: LawVector


@dataclass
class Empire:
    program: PetriProgram
    states: list[EmpireState]
    delta: dict[tuple[int, str], int]
    parts: list[tuple[Term, ...]]  # per-state component formulas of the law
    kind: str = "saturated"
    initial: int = 0
    diagnostics: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.index = {q: i for i, q in enumerate(self.states)}

    def __len__(self) -> int:
        return len(self.states)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Empire):
            return NotImplemented
        return (
            self.states == other.states
            and self.delta == other.delta
            and self.initial == other.initial
            and self.parts == other.parts
        )

    def terr(self, q: int) -> Territory:
        return self.states[q].territory

    def law(self, q: int) -> LawVector:
        return self.states[q].law

    def law_formula(self, q: int) -> Term:
        return conj(self.parts[q])

    def edges(self) -> list[tuple[int, str, int]]:
        ti = self.program.transition_index
        return sorted(((q, t, r) for (q, t), r in self.delta.items()), key=lambda e: (e[0], ti[e[1]]))

    def states_with_place(self, p: str) -> list[int]:
        return [q for q, s in enumerate(self.states) if any(p in r for r in s.territory)]

    def places_of(self, q: int) -> frozenset:
        return frozenset().union(*self.terr(q)) if self.terr(q) else frozenset()

    def regions_sorted(self, q: int) -> list[list[str]]:
        prog = self.program
        regs = [prog.sorted_places(r) for r in self.terr(q)]
        return sorted(regs, key=lambda r: prog.place_index[r[0]])

    def show_state(self, q: int) -> str:
        regs = "{" + ",".join("{" + ",".join(r) + "}" for r in self.regions_sorted(q)) + "}"
        law = ", ".join(to_smtlib(f) for f in self.parts[q])
        return f"q{q} = <{regs}, ({law})>"

    # -- json -----------------------------------------------------------------

    def to_json(self, ghost_values: Sequence[int] | None = None) -> dict:
        states = []
        for q, s in enumerate(self.states):
            entry: dict = {
                "id": q,
                "regions": self.regions_sorted(q),
                "law": {
                    "indices": None if s.law is BOTTOM else list(s.law),
                    "components": [to_smtlib(f) for f in self.parts[q]],
                    "text": to_smtlib(self.law_formula(q)),
                },
            }
            if ghost_values is not None:
                entry["ghost"] = ghost_values[q]
            states.append(entry)
        return {
            "kind": self.kind,
            "states": states,
            "initial": self.initial,
            "edges": [{"from": q, "transition": t, "to": r} for q, t, r in self.edges()],
        }

    @classmethod
    def from_json(cls, data: Mapping | str, program: PetriProgram) -> Empire:
        if isinstance(data, str):
            data = json.loads(data)
        states, parts = [], []
        for i, sj in enumerate(data["states"]):
            if sj["id"] != i:
                raise ValueError("empire states must be listed in id order")
            law_j = sj["law"]
            law = None if law_j["indices"] is None else tuple(law_j["indices"])
            states.append(EmpireState(make_territory(sj["regions"]), law))
            parts.append(tuple(parse_formula(c, program.variables) for c in law_j["components"]))
        delta = {(e["from"], e["transition"]): e["to"] for e in data["edges"]}
        return cls(program, states, delta, parts, data.get("kind", "saturated"), data["initial"])

    @classmethod
    def load(cls, path: str | Path, program: PetriProgram) -> Empire:
        return cls.from_json(Path(path).read_text(), program)


def ghost_values_from_json(data: Mapping) -> list[int] | None:
    vals = [s.get("ghost") for s in data["states"]]
    return None if any(v is None for v in vals) else vals  # type: ignore[return-value]


@dataclass
class _Builder:
    program: PetriProgram
    d: InvariantDomain
    check_treaties: bool = True
    treaty_bound: int = 4096

    def __post_init__(self):
        self.states: list[EmpireState] = []
        self.index: dict[EmpireState, int] = {}
        self.delta: dict[tuple[int, str], int] = {}
        self.diagnostics: list[str] = []
        self.queue: deque[int] = deque()
        self._reachable = set(self.program.reachable)

    def add(self, s: EmpireState) -> int:
        q = self.index.get(s)
        if q is not None:
            return q
        if s.law is not BOTTOM:
            for r in s.territory:
                if r & self.program.error_places:
                    raise UnsafeDomainError(
                        f"error place reachable with law {self.d.describe(s.law)}: "
                        f"the invariant domain is not safe"
                    )
        if self.check_treaties and treaty_size(s.territory) <= self.treaty_bound:
            for m in treaty(s.territory):
                if m not in self._reachable:
                    raise TerritoryError(f"treaty marking {self.program.show(m)} is not reachable")
        q = len(self.states)
        self.states.append(s)
        self.index[s] = q
        self.queue.append(q)
        return q

    def finish(self, kind: str) -> Empire:
        parts = [self.d.parts(s.law) for s in self.states]
        return Empire(self.program, self.states, self.delta, parts, kind, 0, self.diagnostics)


def build_naive_empire(program: PetriProgram, d: InvariantDomain, check_treaties: bool = True) -> Empire:
    b = _Builder(program, d, check_treaties)
    b.add(EmpireState(make_territory([p] for p in program.initial_marking), d.top))
    while b.queue:
        q = b.queue.popleft()
        s = b.states[q]
        for t in program.transitions:
            if not enabled_in_territory(s.territory, t):
                continue
            law2 = d.post(s.law, t)
            if law2 is BOTTOM:
                continue
            b.delta[(q, t.id)] = b.add(EmpireState(replaced(t, s.territory), law2))
    return b.finish("naive")


def build_saturated_empire(
    program: PetriProgram,
    d: InvariantDomain,
    check_treaties: bool = True,
    debug: bool = False,
) -> Empire:
    """Saturated empire; ``debug`` also compares against reverse-order saturation."""
    b = _Builder(program, d, check_treaties)

    def saturate(law, rb, tau):
        out = saturated_successor(law, rb, tau, d, program)
        if debug:
            alt = saturated_successor(law, rb, tau, d, program, reverse=True)
            if alt != out:
                b.diagnostics.append(
                    "saturation order matters: reverse order gives "
                    + " ".join(program.show(r) for r in sorted(alt, key=sorted))
                )
            for r in out:
                if len(r) > 1:
                    for t in program.transitions:
                        if is_sequential(t) and next(iter(t.pre)) in r and next(iter(t.succ)) in r:
                            if not fires(out, t, out):
                                b.diagnostics.append(f"extension by {t.id} does not loop")
        return out

    tau0 = make_territory([p] for p in program.initial_marking)
    b.add(EmpireState(saturate(d.top, frozenset(), tau0), d.top))
    while b.queue:
        q = b.queue.popleft()
        s = b.states[q]
        for t in program.transitions:
            if not enabled_in_territory(s.territory, t):
                continue
            law2 = d.post(s.law, t)
            if law2 is BOTTOM:
                continue
            if law2 == s.law and fires(s.territory, t, s.territory):
                b.delta[(q, t.id)] = q
                continue
            tau2 = saturate(law2, bystanders(t, s.territory), replaced(t, s.territory))
            b.delta[(q, t.id)] = b.add(EmpireState(tau2, law2))
    return b.finish("saturated")


# -------------------------------------------------------------- validity

@dataclass(frozen=True)
class EmpireViolation:
    condition: str  # initial-law, initial-territory, inductive-law, inductive-territory, safe
    state: int
    transition: str = ""
    detail: str = ""


@dataclass
class EmpireReport:
    violations: list[EmpireViolation] = field(default_factory=list)
    unknowns: list[EmpireViolation] = field(default_factory=list)
    checked: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.unknowns

    def conditions_violated(self) -> set[str]:
        return {v.condition for v in self.violations}


def check_empire_valid(program: PetriProgram, empire: Empire, session: SolverSession) -> EmpireReport:
    """Check the five validity conditions of an empire against the program."""
    rep = EmpireReport(checked={k: 0 for k in (
        "initial-law", "initial-territory", "inductive-law", "inductive-territory", "safe")})
    E = empire
    q0 = E.initial

    rep.checked["initial-law"] += 1
    v = valid(E.law_formula(q0), session)
    if v is None:
        rep.unknowns.append(EmpireViolation("initial-law", q0))
    elif not v:
        rep.violations.append(EmpireViolation("initial-law", q0, detail="initial law is not equivalent to true"))

    rep.checked["initial-territory"] += 1
    tau0 = E.terr(q0)
    m0 = program.initial_marking
    covered = all(len(r & m0) == 1 for r in tau0) and m0 <= frozenset().union(*tau0)
    if not (is_territory(tau0) and covered):
        rep.violations.append(EmpireViolation("initial-territory", q0, detail="initial marking is not in the treaty"))

    for q in range(len(E)):
        tau = E.terr(q)
        if not is_territory(tau):
            rep.violations.append(EmpireViolation("inductive-territory", q, detail="regions overlap"))
        law = E.law_formula(q)
        for t in program.transitions:
            if not enabled_in_territory(tau, t):
                continue
            r = E.delta.get((q, t.id))
            post = FALSE if r is None else E.law_formula(r)
            rep.checked["inductive-law"] += 1
            res = check_hoare(law, t.statement, post, session, program.variables)
            if res.verdict is Verdict.FAILS:
                what = "missing edge" if r is None else f"edge to q{r}"
                rep.violations.append(EmpireViolation("inductive-law", q, t.id, f"{what}; witness {res.pre_state}"))
            elif res.verdict is Verdict.UNKNOWN:
                rep.unknowns.append(EmpireViolation("inductive-law", q, t.id, res.reason))
            if r is not None:
                rep.checked["inductive-territory"] += 1
                if not fires(tau, t, E.terr(r)):
                    rep.violations.append(EmpireViolation("inductive-territory", q, t.id, f"does not fire into q{r}"))
        for (q1, tid), r in E.delta.items():
            if q1 == q and not enabled_in_territory(tau, program.by_id[tid]):
                rep.violations.append(EmpireViolation("inductive-territory", q, tid, "edge for a disabled transition"))
        if any(reg & program.error_places for reg in tau):
            rep.checked["safe"] += 1
            sat = satisfiable(law, session)
            if sat is None:
                rep.unknowns.append(EmpireViolation("safe", q))
            elif sat:
                rep.violations.append(EmpireViolation("safe", q, detail="error place with satisfiable law"))
    return rep
