"""Concrete evaluation of terms under a valuation.

Terms compile to nested closures, cached per interned term. A partial
valuation may leave variables unassigned; the three-valued evaluator then
answers ``None`` when the result depends on them (Kleene logic for the
connectives), which lets enumerators prune early.
"""

from __future__ import annotations

import operator
from typing import Callable, Mapping

from .terms import LogicError, Term, Value, euclid_divmod, postorder


class EvalError(LogicError):
    """Evaluation got stuck: unbound variable or division by zero."""


Env = Mapping[str, Value]
Fn = Callable[[Env], object]

_full_cache: dict[Term, Fn] = {}
_partial_cache: dict[Term, Fn] = {}

_ARITH2 = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge,
           "=": operator.eq, "distinct": operator.ne}


def _div(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("division by zero")
    return euclid_divmod(a, b)[0]


def _mod(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("division by zero")
    return euclid_divmod(a, b)[1]


def _compile_full(n: Term, sub: list[Fn]) -> Fn:
    op = n.op
    if op == "lit":
        v = n.value
        return lambda env: v
    if op == "var":
        name = n.value

        def get(env, name=name):
            try:
                return env[name]
            except KeyError:
                raise EvalError(f"unbound variable {name}") from None

        return get
    if op == "+":
        return lambda env: sum(f(env) for f in sub)
    if op == "-":
        if len(sub) == 1:
            f0 = sub[0]
            return lambda env: -f0(env)
        f0, rest = sub[0], sub[1:]
        return lambda env: f0(env) - sum(f(env) for f in rest)
    if op == "*":
        def prod(env):
            v = 1
            for f in sub:
                v *= f(env)
            return v
        return prod
    if op == "div":
        a, b = sub
        return lambda env: _div(a(env), b(env))
    if op == "mod":
        a, b = sub
        return lambda env: _mod(a(env), b(env))
    if op in _ARITH2:
        rel = _ARITH2[op]
        a, b = sub
        return lambda env: rel(a(env), b(env))
    if op == "and":
        return lambda env: all(f(env) for f in sub)
    if op == "or":
        return lambda env: any(f(env) for f in sub)
    if op == "not":
        f0 = sub[0]
        return lambda env: not f0(env)
    if op == "=>":
        a, b = sub
        return lambda env: (not a(env)) or b(env)
    if op == "ite":
        c, a, b = sub
        return lambda env: a(env) if c(env) else b(env)
    raise LogicError(f"cannot evaluate operator {op}")


def _compile_partial(n: Term, sub: list[Fn]) -> Fn:
    op = n.op
    if op == "lit":
        v = n.value
        return lambda env: v
    if op == "var":
        name = n.value
        return lambda env: env.get(name)
    if op == "and":
        def f_and(env):
            unknown = False
            for f in sub:
                v = f(env)
                if v is False:
                    return False
                if v is None:
                    unknown = True
            return None if unknown else True
        return f_and
    if op == "or":
        def f_or(env):
            unknown = False
            for f in sub:
                v = f(env)
                if v is True:
                    return True
                if v is None:
                    unknown = True
            return None if unknown else False
        return f_or
    if op == "not":
        f0 = sub[0]

        def f_not(env):
            v = f0(env)
            return None if v is None else not v
        return f_not
    if op == "=>":
        a, b = sub

        def f_imp(env):
            x = a(env)
            if x is False:
                return True
            y = b(env)
            if y is True:
                return True
            if x is None or y is None:
                return None
            return False
        return f_imp
    if op == "ite":
        c, a, b = sub

        def f_ite(env):
            v = c(env)
            if v is None:
                x, y = a(env), b(env)
                return x if x is not None and x == y and type(x) is type(y) else None
            return a(env) if v else b(env)
        return f_ite
    apply_vals = _value_op(op)

    # strict operators: unknown if any argument is unknown
    def f_strict(env):
        vals = [f(env) for f in sub]
        if None in vals:
            return None
        try:
            return apply_vals(vals)
        except EvalError:
            return None
    return f_strict


def _value_op(op: str) -> Callable[[list], object]:
    if op == "+":
        return sum
    if op == "-":
        return lambda v: -v[0] if len(v) == 1 else v[0] - sum(v[1:])
    if op == "*":
        def prod(v):
            r = 1
            for x in v:
                r *= x
            return r
        return prod
    if op == "div":
        return lambda v: _div(v[0], v[1])
    if op == "mod":
        return lambda v: _mod(v[0], v[1])
    if op in _ARITH2:
        rel = _ARITH2[op]
        return lambda v: rel(v[0], v[1])
    raise LogicError(f"cannot evaluate operator {op}")


def _compile(t: Term, cache: dict[Term, Fn], build) -> Fn:
    fn = cache.get(t)
    if fn is not None:
        return fn
    for n in postorder(t):
        if n not in cache:
            cache[n] = build(n, [cache[a] for a in n.args])
    return cache[t]


def compile_term(t: Term) -> Fn:
    return _compile(t, _full_cache, _compile_full)


def compile_partial(t: Term) -> Fn:
    return _compile(t, _partial_cache, _compile_partial)


def evaluate(t: Term, env: Env) -> Value:
    """Value of ``t``; raises EvalError if stuck."""
    return compile_term(t)(env)  # type: ignore[return-value]


def evaluate_partial(t: Term, env: Env) -> Value | None:
    return compile_partial(t)(env)  # type: ignore[return-value]


def holds(t: Term, env: Env) -> bool:
    return bool(evaluate(t, env))
