"""Focus functions: which law components each region of an empire state carries.

Indices are 1-based component numbers of the product domain. A focus must
let some input region refute every missing edge (B1), must carry into a
transition whatever its output regions carry (B2), and bystanders may not
gain components across an edge (B3).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .domain import InvariantDomain
from .empire import Empire, Region, bystanders, enabled_in_territory

FocusMap = dict  # dict[tuple[int, Region], frozenset[int]]


class FocusError(ValueError):
    pass


def _component_bottom(d: InvariantDomain, law, i: int, t) -> bool:
    c = d.components[i - 1]
    return c.post(law[i - 1], t) == c.bottom


def trivial_focus(E: Empire, d: InvariantDomain) -> FocusMap:
    full = frozenset(range(1, len(d.components) + 1))
    return {(q, r): full for q in range(len(E)) for r in E.terr(q)}


def empty_focus(E: Empire) -> FocusMap:
    return {(q, r): frozenset() for q in range(len(E)) for r in E.terr(q)}


def compute_focus(E: Empire, d: InvariantDomain) -> FocusMap:
    """Least focus above the refutation seeds, closed under B2 and B3.

    Seeds and backward propagation add an index to every eligible input
    region rather than choosing one.
    """
    prog = E.program
    n = len(d.components)
    F: dict[tuple[int, Region], set[int]] = {(q, r): set() for q in range(len(E)) for r in E.terr(q)}

    for q in range(len(E)):
        tau = E.terr(q)
        law = E.law(q)
        for t in prog.transitions:
            if not enabled_in_territory(tau, t) or (q, t.id) in E.delta:
                continue
            seeded = False
            for r in tau:
                if not r & t.pre:
                    continue
                for i in range(1, n + 1):
                    if _component_bottom(d, law, i, t):
                        F[(q, r)].add(i)
                        seeded = True
            if not seeded:
                raise FocusError(f"no component refutes {t.id} at q{q}; the empire is inconsistent with the domain")

    edges = E.edges()
    changed = True
    while changed:
        changed = False
        for q, tid, q2 in edges:
            t = prog.by_id[tid]
            tau, tau2 = E.terr(q), E.terr(q2)
            inputs = [r for r in tau if r & t.pre]
            for r2 in tau2:
                if r2 & t.succ:
                    for i in F[(q2, r2)]:
                        for r in inputs:
                            if i not in F[(q, r)]:
                                F[(q, r)].add(i)
                                changed = True
            for r in bystanders(t, tau):
                extra = F[(q2, r)] - F[(q, r)]
                if extra:
                    F[(q, r)] |= extra
                    changed = True
    return {k: frozenset(v) for k, v in F.items()}


@dataclass(frozen=True)
class FocusViolation:
    rule: str  # B1, B2, B3, domain
    state: int
    transition: str = ""
    region: tuple[str, ...] = ()
    index: int = 0


@dataclass
class FocusReport:
    violations: list[FocusViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_focus(E: Empire, d: InvariantDomain, F: Mapping[tuple[int, Region], frozenset[int]]) -> FocusReport:
    prog = E.program
    n = len(d.components)
    rep = FocusReport()
    for q in range(len(E)):
        for r in E.terr(q):
            idx = F.get((q, r))
            if idx is None or not idx <= set(range(1, n + 1)):
                rep.violations.append(FocusViolation("domain", q, region=tuple(prog.sorted_places(r))))

    def has(q, r, i):
        return i in F.get((q, r), frozenset())

    for q in range(len(E)):
        tau = E.terr(q)
        law = E.law(q)
        for t in prog.transitions:
            if not enabled_in_territory(tau, t):
                continue
            q2 = E.delta.get((q, t.id))
            inputs = [r for r in tau if r & t.pre]
            if q2 is None:
                ok = any(
                    _component_bottom(d, law, i, t) and has(q, r, i)
                    for r in inputs
                    for i in range(1, n + 1)
                )
                if not ok:
                    rep.violations.append(FocusViolation("B1", q, t.id))
                continue
            for r2 in E.terr(q2):
                if not r2 & t.succ:
                    continue
                for i in sorted(F.get((q2, r2), ())):
                    if not any(has(q, r, i) for r in inputs):
                        rep.violations.append(FocusViolation("B2", q, t.id, tuple(prog.sorted_places(r2)), i))
            for r in bystanders(t, tau):
                for i in sorted(F.get((q2, r), ())):
                    if not has(q, r, i):
                        rep.violations.append(FocusViolation("B3", q, t.id, tuple(prog.sorted_places(r)), i))
    return rep


def focus_to_json(E: Empire, F: Mapping[tuple[int, Region], frozenset[int]]) -> dict:
    entries = []
    for q in range(len(E)):
        for places in E.regions_sorted(q):
            r = frozenset(places)
            entries.append({"state": q, "region": places, "indices": sorted(F.get((q, r), ()))})
    return {"focus": entries}


def focus_from_json(data: Mapping | str) -> FocusMap:
    if isinstance(data, str):
        data = json.loads(data)
    return {(e["state"], frozenset(e["region"])): frozenset(e["indices"]) for e in data["focus"]}


def load_focus(path: str | Path) -> FocusMap:
    return focus_from_json(Path(path).read_text())


__all__ = [
    "FocusError",
    "FocusReport",
    "FocusViolation",
    "check_focus",
    "compute_focus",
    "empty_focus",
    "focus_from_json",
    "focus_to_json",
    "load_focus",
    "trivial_focus",
]
