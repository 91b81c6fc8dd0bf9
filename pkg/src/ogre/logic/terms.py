"""Hash-consed first-order terms over integers and booleans.

Every term is interned: structurally equal terms are the same Python
object, so ``==`` is identity and DAG size can be computed by counting
distinct nodes. The smart constructors only fold literal-only subterms
and collapse ``and``/``or`` around boolean literals; no other rewriting
happens, so sizes reflect what the caller wrote.
"""

from __future__ import annotations

import enum
import re
import threading
from typing import Callable, Iterable, Iterator, Mapping, Union


class Sort(enum.Enum):
    INT = "Int"
    BOOL = "Bool"


class LogicError(ValueError):
    """Base class for malformed terms and parse failures."""


class SortError(LogicError):
    pass


Value = Union[int, bool]

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.@]*\Z")

INT_OPS = frozenset({"+", "-", "*", "div", "mod"})
CMP_OPS = frozenset({"<", "<=", ">", ">="})
BOOL_OPS = frozenset({"and", "or", "not", "=>"})
EQ_OPS = frozenset({"=", "distinct"})


class Term:
    """A node of the shared term DAG. Build terms with the module functions."""

    __slots__ = ("op", "args", "value", "sort", "__weakref__")

    op: str
    args: tuple[Term, ...]
    value: object
    sort: Sort

    def __setattr__(self, key, val):
        raise AttributeError("terms are immutable")

    def __reduce__(self):
        return (_rebuild, (self.op, self.args, self.value, self.sort))

    def __repr__(self) -> str:
        from .smtlib import to_smtlib

        return f"Term({to_smtlib(self)})"

    def __str__(self) -> str:
        from .smtlib import to_smtlib

        return to_smtlib(self)

    # Ordering is only used to make output deterministic.
    def sort_key(self) -> str:
        return str(self)

    @property
    def is_var(self) -> bool:
        return self.op == "var"

    @property
    def is_literal(self) -> bool:
        return self.op == "lit"

    @property
    def name(self) -> str:
        if self.op != "var":
            raise LogicError(f"{self} is not a variable")
        return self.value  # type: ignore[return-value]


_table: dict[tuple, Term] = {}
_lock = threading.Lock()


def _intern(op: str, args: tuple[Term, ...], value: object, sort: Sort) -> Term:
    # bool and int literals must not collide (True == 1 in Python)
    key = (op, args, type(value), value, sort)
    t = _table.get(key)
    if t is not None:
        return t
    with _lock:
        t = _table.get(key)
        if t is None:
            t = object.__new__(Term)
            object.__setattr__(t, "op", op)
            object.__setattr__(t, "args", args)
            object.__setattr__(t, "value", value)
            object.__setattr__(t, "sort", sort)
            _table[key] = t
    return t


def _rebuild(op, args, value, sort):
    return _intern(op, args, value, sort)


def interned_count() -> int:
    return len(_table)


# ---------------------------------------------------------------- leaves

def var(name: str, sort: Sort = Sort.INT) -> Term:
    if not _NAME_RE.match(name):
        raise LogicError(f"invalid variable name {name!r}")
    return _intern("var", (), str(name), sort)


def Int(name: str) -> Term:
    return var(name, Sort.INT)


def Bool(name: str) -> Term:
    return var(name, Sort.BOOL)


def lit(v: Value) -> Term:
    if isinstance(v, bool):
        return _intern("lit", (), v, Sort.BOOL)
    if isinstance(v, int):
        return _intern("lit", (), int(v), Sort.INT)
    raise LogicError(f"unsupported literal {v!r}")


TRUE = lit(True)
FALSE = lit(False)


def _coerce(x: Term | Value) -> Term:
    return x if isinstance(x, Term) else lit(x)


def _expect(t: Term, sort: Sort, op: str) -> None:
    if t.sort is not sort:
        raise SortError(f"{op}: expected {sort.value} argument, got {t.sort.value} ({t})")


def _all_lit(args: Iterable[Term]) -> bool:
    return all(a.op == "lit" for a in args)


# ------------------------------------------------------------ arithmetic

def euclid_divmod(a: int, b: int) -> tuple[int, int]:
    """SMT-LIB integer division: remainder is always non-negative."""
    if b == 0:
        raise ZeroDivisionError("division by zero")
    r = a % abs(b)
    return (a - r) // b, r


def add(*xs: Term | Value) -> Term:
    args = tuple(_coerce(x) for x in xs)
    if len(args) < 2:
        raise LogicError("+ needs at least two arguments")
    for a in args:
        _expect(a, Sort.INT, "+")
    if _all_lit(args):
        return lit(sum(a.value for a in args))  # type: ignore[misc]
    return _intern("+", args, None, Sort.INT)


def sub(*xs: Term | Value) -> Term:
    args = tuple(_coerce(x) for x in xs)
    if not args:
        raise LogicError("- needs arguments")
    for a in args:
        _expect(a, Sort.INT, "-")
    if _all_lit(args):
        if len(args) == 1:
            return lit(-args[0].value)  # type: ignore[operator]
        v = args[0].value
        for a in args[1:]:
            v -= a.value  # type: ignore[operator]
        return lit(v)  # type: ignore[arg-type]
    return _intern("-", args, None, Sort.INT)


def neg(x: Term | Value) -> Term:
    return sub(x)


def mul(*xs: Term | Value) -> Term:
    args = tuple(_coerce(x) for x in xs)
    if len(args) < 2:
        raise LogicError("* needs at least two arguments")
    for a in args:
        _expect(a, Sort.INT, "*")
    if _all_lit(args):
        v = 1
        for a in args:
            v *= a.value  # type: ignore[operator]
        return lit(v)
    return _intern("*", args, None, Sort.INT)


def _divlike(op: str, a: Term | Value, b: Term | Value) -> Term:
    x, y = _coerce(a), _coerce(b)
    _expect(x, Sort.INT, op)
    _expect(y, Sort.INT, op)
    if x.op == "lit" and y.op == "lit" and y.value != 0:
        q, r = euclid_divmod(x.value, y.value)  # type: ignore[arg-type]
        return lit(q if op == "div" else r)
    return _intern(op, (x, y), None, Sort.INT)


def div(a: Term | Value, b: Term | Value) -> Term:
    return _divlike("div", a, b)


def mod(a: Term | Value, b: Term | Value) -> Term:
    return _divlike("mod", a, b)


_CMP = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _cmp(op: str, a: Term | Value, b: Term | Value) -> Term:
    x, y = _coerce(a), _coerce(b)
    _expect(x, Sort.INT, op)
    _expect(y, Sort.INT, op)
    if x.op == "lit" and y.op == "lit":
        return lit(_CMP[op](x.value, y.value))
    return _intern(op, (x, y), None, Sort.BOOL)


def lt(a, b) -> Term:
    return _cmp("<", a, b)


def le(a, b) -> Term:
    return _cmp("<=", a, b)


def gt(a, b) -> Term:
    return _cmp(">", a, b)


def ge(a, b) -> Term:
    return _cmp(">=", a, b)


def eq(a: Term | Value, b: Term | Value) -> Term:
    x, y = _coerce(a), _coerce(b)
    if x.sort is not y.sort:
        raise SortError(f"=: mismatched sorts {x.sort.value} and {y.sort.value}")
    if x.op == "lit" and y.op == "lit":
        return lit(x.value == y.value)
    return _intern("=", (x, y), None, Sort.BOOL)


def ne(a: Term | Value, b: Term | Value) -> Term:
    x, y = _coerce(a), _coerce(b)
    if x.sort is not y.sort:
        raise SortError(f"distinct: mismatched sorts {x.sort.value} and {y.sort.value}")
    if x.op == "lit" and y.op == "lit":
        return lit(x.value != y.value)
    return _intern("distinct", (x, y), None, Sort.BOOL)


# --------------------------------------------------------------- boolean

def _junction(op: str, xs: Iterable[Term | Value]) -> Term:
    unit, zero = (TRUE, FALSE) if op == "and" else (FALSE, TRUE)
    out: list[Term] = []
    for x in xs:
        t = _coerce(x)
        _expect(t, Sort.BOOL, op)
        if t is zero:
            return zero
        if t is unit:
            continue
        if t.op == op:
            out.extend(t.args)
        else:
            out.append(t)
    if not out:
        return unit
    if len(out) == 1:
        return out[0]
    return _intern(op, tuple(out), None, Sort.BOOL)


def and_(*xs: Term | Value) -> Term:
    return _junction("and", xs)


def or_(*xs: Term | Value) -> Term:
    return _junction("or", xs)


def conj(xs: Iterable[Term]) -> Term:
    return _junction("and", xs)


def disj(xs: Iterable[Term]) -> Term:
    return _junction("or", xs)


def not_(x: Term | Value) -> Term:
    t = _coerce(x)
    _expect(t, Sort.BOOL, "not")
    if t.op == "lit":
        return lit(not t.value)
    return _intern("not", (t,), None, Sort.BOOL)


def implies(a: Term | Value, b: Term | Value) -> Term:
    x, y = _coerce(a), _coerce(b)
    _expect(x, Sort.BOOL, "=>")
    _expect(y, Sort.BOOL, "=>")
    if x.op == "lit":
        return y if x.value else TRUE
    if y is TRUE:
        return TRUE
    return _intern("=>", (x, y), None, Sort.BOOL)


def ite(c: Term | Value, a: Term | Value, b: Term | Value) -> Term:
    cond, x, y = _coerce(c), _coerce(a), _coerce(b)
    _expect(cond, Sort.BOOL, "ite")
    if x.sort is not y.sort:
        raise SortError("ite: branches have different sorts")
    if _all_lit((cond, x, y)):
        return x if cond.value else y
    return _intern("ite", (cond, x, y), None, x.sort)


# -------------------------------------------------------------- generic

_BUILDERS: dict[str, Callable[..., Term]] = {
    "+": add,
    "-": sub,
    "*": mul,
    "div": div,
    "mod": mod,
    "<": lt,
    "<=": le,
    ">": gt,
    ">=": ge,
    "=": eq,
    "distinct": ne,
    "and": and_,
    "or": or_,
    "not": not_,
    "=>": implies,
    "ite": ite,
}

OPERATORS = frozenset(_BUILDERS)


def apply(op: str, args: Iterable[Term]) -> Term:
    """Build ``op(args)`` through the smart constructor for ``op``."""
    try:
        build = _BUILDERS[op]
    except KeyError:
        raise LogicError(f"unknown operator {op!r}") from None
    return build(*args)


def postorder(root: Term) -> Iterator[Term]:
    """Each distinct node once, children before parents."""
    seen: set[int] = set()
    stack: list[tuple[Term, bool]] = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            yield t
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        for a in reversed(t.args):
            if id(a) not in seen:
                stack.append((a, False))


def dag_size(t: Term) -> int:
    return sum(1 for _ in postorder(t))


def free_vars(*ts: Term) -> dict[str, Sort]:
    """Variables in order of first occurrence."""
    out: dict[str, Sort] = {}
    for t in ts:
        for n in postorder(t):
            if n.op == "var":
                prev = out.get(n.value)  # type: ignore[arg-type]
                if prev is not None and prev is not n.sort:
                    raise SortError(f"variable {n.value} used with two sorts")
                out[n.value] = n.sort  # type: ignore[index]
    return out


def rebuild(root: Term, leaf: Callable[[Term], Term | None]) -> Term:
    """Rebuild ``root`` bottom-up, replacing leaves for which ``leaf`` returns a term."""
    done: dict[int, Term] = {}
    for n in postorder(root):
        if not n.args:
            r = leaf(n)
            done[id(n)] = n if r is None else r
        else:
            new_args = tuple(done[id(a)] for a in n.args)
            if all(x is y for x, y in zip(new_args, n.args)):
                done[id(n)] = n
            else:
                done[id(n)] = apply(n.op, new_args)
    return done[id(root)]


def substitute(t: Term, mapping: Mapping[str, Term]) -> Term:
    """Simultaneous substitution of variables by name."""
    if not mapping:
        return t

    def leaf(n: Term) -> Term | None:
        if n.op == "var" and n.value in mapping:
            r = mapping[n.value]  # type: ignore[index]
            if r.sort is not n.sort:
                raise SortError(f"substituting {r} of sort {r.sort.value} for {n.value}")
            return r
        return None

    return rebuild(t, leaf)


def rename(t: Term, names: Mapping[str, str]) -> Term:
    def leaf(n: Term) -> Term | None:
        if n.op == "var" and n.value in names:
            return var(names[n.value], n.sort)  # type: ignore[index]
        return None

    return rebuild(t, leaf)


def conjuncts(t: Term) -> tuple[Term, ...]:
    if t is TRUE:
        return ()
    return t.args if t.op == "and" else (t,)


def disjuncts(t: Term) -> tuple[Term, ...]:
    if t is FALSE:
        return ()
    return t.args if t.op == "or" else (t,)


def uses_nonlinear(t: Term) -> bool:
    """True if a product or div/mod has a non-literal operand pair."""
    for n in postorder(t):
        if n.op == "*":
            if sum(1 for a in n.args if a.op != "lit") > 1:
                return True
        elif n.op in ("div", "mod"):
            if n.args[1].op != "lit":
                return True
    return False
