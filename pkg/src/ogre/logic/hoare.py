"""Hoare triples and entailment decided by an SMT backend."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

from .stmt import Statement, hoare_query, split_valuation
from .terms import Sort, Term, Value, and_, free_vars, not_

if TYPE_CHECKING:
    from ..solverio import SolverSession


class Verdict(enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class HoareResult:
    verdict: Verdict
    pre_state: dict[str, Value] | None = None
    post_state: dict[str, Value] | None = None
    reason: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS

    @property
    def fails(self) -> bool:
        return self.verdict is Verdict.FAILS


def _decls_for(decls: Mapping[str, Sort] | None, *ts: Term, steps: Sequence[Statement] = ()) -> dict[str, Sort]:
    out = dict(decls or {})
    parts = list(ts)
    for st in steps:
        parts.append(st.guard)
        parts.extend(e for _, e in st.assigns)
    for n, s in free_vars(*parts).items():
        out.setdefault(n, s)
    return out


def check_hoare(
    pre: Term,
    steps: Statement | Sequence[Statement],
    post: Term,
    session: SolverSession,
    decls: Mapping[str, Sort] | None = None,
) -> HoareResult:
    """Decide ``{pre} steps {post}`` by the relational encoding over variable copies.

    ``decls`` lists every variable that must be framed; variables that only
    occur in ``pre``/``post`` are picked up automatically.
    """
    seq = [steps] if isinstance(steps, Statement) else list(steps)
    d = _decls_for(decls, pre, post, steps=seq)
    for st in seq:
        for h in st.havocs:
            # occurs nowhere else, so its sort cannot matter
            d.setdefault(h, Sort.INT)
    q = hoare_query(pre, seq, post, d)
    res = session.check([q])
    if res.unsat:
        return HoareResult(Verdict.HOLDS)
    if res.sat:
        envs = split_valuation(res.model or {}, d, len(seq))
        return HoareResult(Verdict.FAILS, envs[0], envs[-1])
    return HoareResult(Verdict.UNKNOWN, reason=res.reason)


def entails(a: Term, b: Term, session: SolverSession) -> bool | None:
    """a |= b; None when the solver cannot tell."""
    res = session.check([and_(a, not_(b))], want_model=False)
    if res.unknown:
        return None
    return res.unsat


def equivalent(a: Term, b: Term, session: SolverSession) -> bool | None:
    if a is b:
        return True
    x = entails(a, b, session)
    if x is not True:
        return x
    return entails(b, a, session)


def satisfiable(a: Term, session: SolverSession) -> bool | None:
    res = session.check([a], want_model=False)
    if res.unknown:
        return None
    return res.sat


def valid(a: Term, session: SolverSession) -> bool | None:
    s = satisfiable(not_(a), session)
    return None if s is None else not s
