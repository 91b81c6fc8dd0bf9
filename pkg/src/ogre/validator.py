"""Check an Owicki-Gries certificate against a program.

Every obligation is phrased as a Hoare triple ``{pre} steps {post}`` and
turned into a closed query that is unsatisfiable iff the triple holds.
Queries go to an SMT solver, or to a bounded enumerator that can only
refute.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .annotation import OGAnnotation
from .logic import (
    FALSE,
    EvalError,
    Sort,
    Statement,
    Term,
    Value,
    and_,
    compile_partial,
    compile_term,
    conj,
    eq,
    free_vars,
    hoare_query,
    merge_copies,
    split_valuation,
    var,
)
from .petri import PetriProgram
from .solverio import SessionPool, SolverConfig, SolverSession, Status, script

KINDS = ("Initial", "Inductive", "InterferenceFree", "Safe")


class AnnotationError(ValueError):
    """The certificate is not well-formed for the program."""


@dataclass(frozen=True)
class VC:
    kind: str
    subject: tuple[str, ...]
    pre: Term
    steps: tuple[Statement, ...]
    post: Term
    formula: Term
    description: str

    @property
    def name(self) -> str:
        return "vc_" + self.kind + "_" + "_".join(self.subject)


@dataclass(frozen=True)
class VCResult:
    name: str
    kind: str
    result: str  # unsat | sat | unknown | witness | no-witness
    model: dict | None = None
    reason: str = ""

    def to_json(self) -> dict:
        out: dict = {"name": self.name, "result": self.result}
        if self.model is not None:
            out["model"] = dict(sorted(self.model.items()))
        if self.reason:
            out["reason"] = self.reason
        return out


@dataclass
class ValidationReport:
    verdict: str  # Valid | Invalid | Unknown | BoundedValid
    results: list[VCResult] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)

    @property
    def failed(self) -> list[VCResult]:
        return [r for r in self.results if r.result in ("sat", "witness")]

    @property
    def unknown(self) -> list[VCResult]:
        return [r for r in self.results if r.result == "unknown"]

    def to_json(self, timing: bool = True) -> dict:
        out: dict = {"verdict": self.verdict, "vcs": [r.to_json() for r in self.results]}
        if timing:
            out["timing"] = {k: round(v, 6) for k, v in self.timing.items()}
        return out


def check_well_formed(program: PetriProgram, og: OGAnnotation) -> dict[str, Sort]:
    """Declarations of program and ghost variables; raises on malformed input."""
    decls = dict(program.variables)
    for g in og.ghosts:
        if g.name in decls:
            raise AnnotationError(f"ghost {g.name} clashes with a program variable")
        if g.kind not in ("state", "bool"):
            raise AnnotationError(f"ghost {g.name} has unknown domain {g.kind}")
        if g.kind == "state" and g.count <= 0:
            raise AnnotationError(f"ghost {g.name} has an empty domain")
        decls[g.name] = g.sort
    missing = [p for p in program.places if p not in og.omega]
    if missing:
        raise AnnotationError(f"no annotation for places {missing}")
    extra = [p for p in og.omega if p not in program.place_index]
    if extra:
        raise AnnotationError(f"annotation for unknown places {extra}")
    for p, f in og.omega.items():
        if f.sort is not Sort.BOOL:
            raise AnnotationError(f"annotation of {p} is not a formula")
        for n, s in free_vars(f).items():
            if decls.get(n) is not s:
                raise AnnotationError(f"annotation of {p} uses undeclared symbol {n}")
    ghost_names = {g.name for g in og.ghosts}
    for tid, upd in og.gamma.items():
        if tid not in program.by_id:
            raise AnnotationError(f"ghost update for unknown transition {tid}")
        for n, e in upd.items():
            if n not in ghost_names:
                raise AnnotationError(f"{tid} updates {n}, which is not a ghost variable")
            if e.sort is not decls[n]:
                raise AnnotationError(f"{tid} assigns a term of the wrong sort to {n}")
            for v, s in free_vars(e).items():
                if decls.get(v) is not s:
                    raise AnnotationError(f"ghost update of {tid} uses undeclared symbol {v}")
    for g in og.ghosts:
        v = og.rho.get(g.name)
        if v is None or not v.is_literal:
            raise AnnotationError(f"ghost {g.name} needs a literal initial value")
        if v.value not in g.values():
            raise AnnotationError(f"initial value of {g.name} is outside its domain")
    return decls


def generate_vcs(program: PetriProgram, og: OGAnnotation) -> list[VC]:
    decls = check_well_formed(program, og)
    dom = og.domain_constraint()
    w = og.omega
    vcs: list[VC] = []

    def make(kind, subject, pre, steps, post, text):
        steps = tuple(steps)
        vcs.append(VC(kind, subject, pre, steps, post, hoare_query(pre, steps, post, decls), text))

    rho = conj(_eq(og, g.name) for g in og.ghosts)
    for p in program.sorted_places(program.initial_marking):
        make("Initial", (p,), rho, (), w[p], f"initial ghost values establish the annotation of {p}")
    for t in program.transitions:
        pre = and_(dom, conj(w[p] for p in program.sorted_places(t.pre)))
        post = conj(w[p] for p in program.sorted_places(t.succ))
        make("Inductive", (t.id,), pre, (t.statement, og.ghost_statement(t.id)), post,
             f"{t.id} establishes the annotations of its output places")
    for p in program.places:
        for t in program.transitions:
            if not program.co_marked(p, t.id):
                continue
            pre = and_(dom, w[p], conj(w[q] for q in program.sorted_places(t.pre)))
            make("InterferenceFree", (p, t.id), pre, (t.statement, og.ghost_statement(t.id)), w[p],
                 f"{t.id} preserves the annotation of {p}")
    for p in program.sorted_places(program.error_places):
        make("Safe", (p,), and_(dom, w[p]), (), FALSE, f"the annotation of error place {p} is unsatisfiable")
    return vcs


def _eq(og: OGAnnotation, name: str) -> Term:
    g = next(x for x in og.ghosts if x.name == name)
    return eq(var(name, g.sort), og.rho[name])


# ------------------------------------------------------------- discharge

def _smt_one(session: SolverSession, vc: VC) -> VCResult:
    res = session.check([vc.formula])
    if res.status is Status.UNSAT:
        return VCResult(vc.name, vc.kind, "unsat")
    if res.status is Status.SAT:
        return VCResult(vc.name, vc.kind, "sat", res.model or {})
    return VCResult(vc.name, vc.kind, "unknown", reason=res.reason)


def oracle_witness(vc: VC, decls: Mapping[str, Sort], ghost_domains: Mapping[str, list], bound: int) -> dict | None:
    """Search small valuations for a counterexample to the VC's triple.

    Returns the witness as a valuation over all variable copies, or None.
    """
    ints = list(range(-bound, bound + 1))
    order = [n for n in decls if n in ghost_domains] + [n for n in decls if n not in ghost_domains]
    domains = {
        n: ghost_domains.get(n, [False, True] if decls[n] is Sort.BOOL else ints) for n in decls
    }
    pre = compile_partial(vc.pre)
    post = compile_term(vc.post)
    env: dict[str, Value] = {}

    def run(state: dict, k: int) -> dict | None:
        if k == len(vc.steps):
            try:
                ok = post(state)
            except EvalError:
                return None
            return None if ok else {"trace": [state]}
        try:
            for nxt in vc.steps[k].successors(state, domains):
                found = run(nxt, k + 1)
                if found is not None:
                    found["trace"].insert(0, state)
                    return found
        except EvalError:
            return None
        return None

    def search(i: int) -> dict | None:
        if i == len(order):
            if pre(env) is not True:
                return None
            found = run(dict(env), 0)
            if found is None:
                return None
            return merge_copies(found["trace"])
        n = order[i]
        for v in domains[n]:
            env[n] = v
            if pre(env) is not False:
                found = search(i + 1)
                if found is not None:
                    return found
        del env[n]
        return None

    return search(0)


def _oracle_one(vc: VC, decls, ghost_domains, bound) -> VCResult:
    w = oracle_witness(vc, decls, ghost_domains, bound)
    if w is None:
        return VCResult(vc.name, vc.kind, "no-witness")
    return VCResult(vc.name, vc.kind, "witness", w)


def validate(
    program: PetriProgram,
    og: OGAnnotation,
    session: SolverSession | None = None,
    mode: str = "smt",
    bound: int = 4,
    jobs: int = 1,
    config: SolverConfig | None = None,
    dump_dir: str | Path | None = None,
    vcs: Sequence[VC] | None = None,
) -> ValidationReport:
    t0 = time.monotonic()
    if vcs is None:
        vcs = generate_vcs(program, og)
    t1 = time.monotonic()
    if dump_dir is not None:
        dump_vcs(vcs, dump_dir)
    if mode == "oracle":
        decls = check_well_formed(program, og)
        gd = {g.name: g.values() for g in og.ghosts}
        results = [_oracle_one(vc, decls, gd, bound) for vc in vcs]
        verdict = "Invalid" if any(r.result == "witness" for r in results) else "BoundedValid"
    elif mode == "smt":
        if jobs > 1 or session is None:
            with SessionPool(config or SolverConfig.from_env(), max(1, jobs)) as pool:
                results = pool.map(_smt_one, list(vcs))
        else:
            results = [_smt_one(session, vc) for vc in vcs]
        if any(r.result == "sat" for r in results):
            verdict = "Invalid"
        elif any(r.result == "unknown" for r in results):
            verdict = "Unknown"
        else:
            verdict = "Valid"
    else:
        raise ValueError(f"unknown validation mode {mode!r}")
    t2 = time.monotonic()
    return ValidationReport(verdict, results, {"generate": t1 - t0, "discharge": t2 - t1, "total": t2 - t0})


def dump_vcs(vcs: Sequence[VC], directory: str | Path) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for vc in vcs:
        p = out / f"{vc.name}.smt2"
        text = f"; {vc.description}\n" + script([vc.formula], get_model=False)
        p.write_text(text)
        paths.append(p)
    return paths


def witness_satisfies(vc: VC, model: Mapping[str, Value]) -> bool:
    """Does a (complete) valuation over the copies satisfy the VC query?"""
    try:
        return bool(compile_term(vc.formula)(model))
    except EvalError:
        return False


def complete_model(vc: VC, model: Mapping[str, Value], decls: Mapping[str, Sort]) -> dict[str, Value]:
    return merge_copies(split_valuation(model, decls, len(vc.steps)))


__all__ = [
    "AnnotationError",
    "KINDS",
    "VC",
    "VCResult",
    "ValidationReport",
    "check_well_formed",
    "complete_model",
    "dump_vcs",
    "generate_vcs",
    "oracle_witness",
    "validate",
    "witness_satisfies",
]
