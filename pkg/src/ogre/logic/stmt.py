"""Guarded parallel-assignment statements and their relational encoding."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .evaluate import EvalError, compile_term
from .smtlib import to_smtlib
from .terms import (
    TRUE,
    LogicError,
    Sort,
    SortError,
    Term,
    Value,
    and_,
    conj,
    eq,
    free_vars,
    implies,
    not_,
    rename,
    substitute,
    var,
)


@dataclass(frozen=True)
class Statement:
    """``assume guard; (x1,..,xk) := (e1,..,ek); havoc h1..hm``.

    Assignments are simultaneous: every right-hand side is evaluated in
    the pre-state.
    """

    guard: Term = TRUE
    assigns: tuple[tuple[str, Term], ...] = ()
    havocs: tuple[str, ...] = ()
    _assign_map: dict = field(default=None, init=False, repr=False, compare=False, hash=False)  # type: ignore[assignment]

    def __post_init__(self):
        if self.guard.sort is not Sort.BOOL:
            raise SortError(f"guard must be a formula: {self.guard}")
        names = [n for n, _ in self.assigns]
        if len(set(names)) != len(names):
            raise LogicError(f"variable assigned twice in {names}")
        if len(set(self.havocs)) != len(self.havocs):
            raise LogicError("variable havocked twice")
        both = set(names) & set(self.havocs)
        if both:
            raise LogicError(f"variables both assigned and havocked: {sorted(both)}")
        object.__setattr__(self, "_assign_map", dict(self.assigns))

    @classmethod
    def make(
        cls,
        guard: Term = TRUE,
        assigns: Mapping[str, Term] | Iterable[tuple[str, Term]] = (),
        havocs: Iterable[str] = (),
    ) -> Statement:
        items = tuple(assigns.items()) if isinstance(assigns, Mapping) else tuple(assigns)
        return cls(guard, items, tuple(havocs))

    @property
    def assign_map(self) -> dict[str, Term]:
        return self._assign_map

    @property
    def written(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.assigns) + self.havocs

    def check_sorts(self, decls: Mapping[str, Sort]) -> None:
        for n, e in self.assigns:
            if n not in decls:
                raise SortError(f"assignment to undeclared variable {n}")
            if decls[n] is not e.sort:
                raise SortError(f"assigning {e.sort.value} term to {decls[n].value} variable {n}")
        for h in self.havocs:
            if h not in decls:
                raise SortError(f"havoc of undeclared variable {h}")
        for n, s in free_vars(self.guard, *(e for _, e in self.assigns)).items():
            if decls.get(n) is not s:
                raise SortError(f"undeclared variable {n}")

    @property
    def is_skip(self) -> bool:
        return self.guard is TRUE and not self.assigns and not self.havocs

    def __str__(self) -> str:
        parts = []
        if self.guard is not TRUE:
            parts.append(f"assume {to_smtlib(self.guard)}")
        if self.assigns:
            lhs = ", ".join(n for n, _ in self.assigns)
            rhs = ", ".join(to_smtlib(e) for _, e in self.assigns)
            parts.append(f"{lhs} := {rhs}")
        if self.havocs:
            parts.append("havoc " + ", ".join(self.havocs))
        return "; ".join(parts) if parts else "skip"

    def to_json(self) -> dict:
        return {
            "assume": to_smtlib(self.guard),
            "assign": {n: to_smtlib(e) for n, e in self.assigns},
            "havoc": list(self.havocs),
        }

    # -- semantics ---------------------------------------------------------

    def wp(self, post: Term, decls: Mapping[str, Sort]) -> Term:
        """Weakest liberal precondition; havocked variables become fresh symbols."""
        sub: dict[str, Term] = dict(self.assigns)
        fresh = {h: var(f"h@{h}", decls[h]) for h in self.havocs}
        sub.update(fresh)
        # h@* stand for universally quantified values; callers treat them as free
        return implies(self.guard, substitute(post, sub))

    def execute(self, env: Mapping[str, Value], havoc_values: Sequence[Value] | None = None) -> dict[str, Value] | None:
        """Successor valuation, or None if the guard is false.

        Raises EvalError on division by zero.
        """
        if not compile_term(self.guard)(env):
            return None
        out = dict(env)
        for n, e in self.assigns:
            out[n] = compile_term(e)(env)
        if self.havocs:
            if havoc_values is None or len(havoc_values) != len(self.havocs):
                raise LogicError("havoc values missing")
            for h, v in zip(self.havocs, havoc_values):
                out[h] = v
        return out

    def successors(self, env: Mapping[str, Value], domains: Mapping[str, Sequence[Value]]) -> Iterator[dict[str, Value]]:
        """All successors with havocked variables ranging over ``domains``."""
        if not self.havocs:
            nxt = self.execute(env)
            if nxt is not None:
                yield nxt
            return
        choices = [domains[h] for h in self.havocs]
        for vals in itertools.product(*choices):
            nxt = self.execute(env, vals)
            if nxt is None:
                return
            yield nxt


def copy_name(name: str, k: int) -> str:
    """Name of the k-th intermediate copy of a variable (0 is the variable itself)."""
    return name if k == 0 else f"{name}@{k}"


def copy_names(variables: Iterable[str], k: int) -> dict[str, str]:
    return {v: copy_name(v, k) for v in variables}


def step_relation(st: Statement, decls: Mapping[str, Sort], k: int) -> Term:
    """Transition relation of ``st`` from copy k to copy k+1 of every variable."""
    before = copy_names(decls, k)
    parts = [rename(st.guard, before)]
    amap = st.assign_map
    havoc = set(st.havocs)
    for v, s in decls.items():
        nxt = var(copy_name(v, k + 1), s)
        if v in amap:
            parts.append(eq(nxt, rename(amap[v], before)))
        elif v not in havoc:
            parts.append(eq(nxt, var(before[v], s)))
    return conj(parts)


def sequence_relation(steps: Sequence[Statement], decls: Mapping[str, Sort]) -> Term:
    return conj(step_relation(st, decls, k) for k, st in enumerate(steps))


def hoare_query(pre: Term, steps: Sequence[Statement], post: Term, decls: Mapping[str, Sort]) -> Term:
    """Formula satisfiable iff the triple ``{pre} steps {post}`` fails."""
    final = copy_names(decls, len(steps))
    return and_(pre, sequence_relation(steps, decls), not_(rename(post, final)))


def split_valuation(model: Mapping[str, Value], decls: Mapping[str, Sort], nsteps: int) -> list[dict[str, Value]]:
    """Per-copy valuations from a model over the copies; unmentioned copies default."""
    out = []
    for k in range(nsteps + 1):
        env: dict[str, Value] = {}
        for v, s in decls.items():
            n = copy_name(v, k)
            env[v] = model.get(n, False if s is Sort.BOOL else 0)
        out.append(env)
    return out


def merge_copies(envs: Sequence[Mapping[str, Value]]) -> dict[str, Value]:
    out: dict[str, Value] = {}
    for k, env in enumerate(envs):
        for v, x in env.items():
            out[copy_name(v, k)] = x
    return out


__all__ = [
    "Statement",
    "EvalError",
    "copy_name",
    "copy_names",
    "step_relation",
    "sequence_relation",
    "hoare_query",
    "split_valuation",
    "merge_copies",
]
