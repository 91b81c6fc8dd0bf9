"""SMT-LIB2 text for terms: s-expression reader, term parser and printer."""

from __future__ import annotations

from typing import Mapping, Union

from .terms import (
    OPERATORS,
    LogicError,
    Sort,
    SortError,
    Term,
    apply,
    lit,
    postorder,
    var,
)


class ParseError(LogicError):
    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        super().__init__(message if pos is None else f"{message} at offset {pos}")


class Sym(str):
    """A symbol token, distinguished from numerals and string literals."""


SExpr = Union[Sym, int, str, list]

_LP = object()
_RP = object()


def _tokens(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c == "(":
            yield _LP, i
            i += 1
        elif c == ")":
            yield _RP, i
            i += 1
        elif c == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise ParseError("unterminated quoted symbol", i)
            yield Sym(text[i + 1 : j]), i
            i = j + 1
        elif c == '"':
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise ParseError("unterminated string", i)
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        buf.append('"')
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            yield "".join(buf), i
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '();|"':
                j += 1
            tok = text[i:j]
            if tok.isdigit():
                yield int(tok), i
            else:
                yield Sym(tok), i
            i = j


def read_sexprs(text: str) -> list[SExpr]:
    """All top-level s-expressions in ``text``."""
    out: list[SExpr] = []
    stack: list[list] = []
    for tok, pos in _tokens(text):
        if tok is _LP:
            stack.append([])
        elif tok is _RP:
            if not stack:
                raise ParseError("unbalanced ')'", pos)
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            (stack[-1] if stack else out).append(tok)
    if stack:
        raise ParseError("unbalanced '('", len(text))
    return out


def read_sexpr(text: str) -> SExpr:
    items = read_sexprs(text)
    if len(items) != 1:
        raise ParseError(f"expected one expression, found {len(items)}")
    return items[0]


_CMP_OR_ARITH = frozenset({"+", "-", "*", "div", "mod", "<", "<=", ">", ">="})
_BOOL_ARGS = frozenset({"and", "or", "not", "=>"})


def infer_sorts(text_or_sexprs, known: Mapping[str, Sort] | None = None) -> dict[str, Sort]:
    """Guess sorts for free symbols from how they are used.

    Symbols in arithmetic positions are Int, in connective positions Bool,
    and ``=``/``ite`` propagate sorts between their operands. Anything still
    undetermined defaults to Int.
    """
    exprs = read_sexprs(text_or_sexprs) if isinstance(text_or_sexprs, str) else list(text_or_sexprs)
    sorts: dict[str, Sort] = dict(known or {})
    symbols: set[str] = set()

    def sort_of(e) -> Sort | None:
        if isinstance(e, Sym):
            if e in ("true", "false"):
                return Sort.BOOL
            return sorts.get(e)
        if isinstance(e, int):
            return Sort.INT
        if isinstance(e, list) and e and isinstance(e[0], Sym):
            op = e[0]
            if op in ("+", "-", "*", "div", "mod"):
                return Sort.INT
            if op == "ite" and len(e) == 4:
                return sort_of(e[2]) or sort_of(e[3])
            return Sort.BOOL
        return None

    def want(e, s: Sort | None) -> bool:
        if s is None or not isinstance(e, Sym) or e in ("true", "false"):
            return False
        if e not in sorts:
            sorts[e] = s
            return True
        return False

    def walk(e) -> bool:
        changed = False
        if isinstance(e, Sym):
            symbols.add(e)
        if not isinstance(e, list) or not e:
            return False
        op, args = e[0], e[1:]
        if op in _CMP_OR_ARITH:
            for a in args:
                changed |= want(a, Sort.INT)
        elif op in _BOOL_ARGS:
            for a in args:
                changed |= want(a, Sort.BOOL)
        elif op in ("=", "distinct"):
            s = next((sort_of(a) for a in args if sort_of(a) is not None), None)
            for a in args:
                changed |= want(a, s)
        elif op == "ite" and len(args) == 3:
            changed |= want(args[0], Sort.BOOL)
            s = sort_of(args[1]) or sort_of(args[2])
            changed |= want(args[1], s)
            changed |= want(args[2], s)
        for a in args:
            changed |= walk(a)
        return changed

    while True:
        changed = False
        for e in exprs:
            changed |= walk(e)
        if not changed:
            break
    for s in symbols:
        if s not in ("true", "false") and s not in sorts:
            sorts[s] = Sort.INT
    return sorts


def term_from_sexpr(e: SExpr, decls: Mapping[str, Sort]) -> Term:
    """Build a term, checking every symbol against ``decls``."""
    if isinstance(e, bool):
        return lit(e)
    if isinstance(e, int):
        return lit(e)
    if isinstance(e, Sym):
        if e == "true":
            return lit(True)
        if e == "false":
            return lit(False)
        s = decls.get(e)
        if s is None:
            raise SortError(f"undeclared symbol {e!r}")
        return var(e, s)
    if isinstance(e, list):
        if not e:
            raise ParseError("empty application")
        op = e[0]
        if not isinstance(op, Sym) or op not in OPERATORS:
            raise ParseError(f"unknown operator {op!r}")
        args = [term_from_sexpr(a, decls) for a in e[1:]]
        if op in ("<", "<=", ">", ">=", "=", "distinct") and len(args) != 2:
            # chained comparisons are legal SMT-LIB; expand pairwise
            if len(args) < 2:
                raise ParseError(f"{op} needs two arguments")
            if op == "distinct":
                pairs = [(a, b) for i, a in enumerate(args) for b in args[i + 1 :]]
            else:
                pairs = list(zip(args, args[1:]))
            return apply("and", [apply(op, p) for p in pairs])
        if op == "=>" and len(args) > 2:
            t = args[-1]
            for a in reversed(args[:-1]):
                t = apply("=>", [a, t])
            return t
        if op in ("div", "mod") and len(args) != 2:
            raise ParseError(f"{op} needs two arguments")
        if op == "not" and len(args) != 1:
            raise ParseError("not needs one argument")
        if op == "ite" and len(args) != 3:
            raise ParseError("ite needs three arguments")
        if op == "=>" and len(args) != 2:
            raise ParseError("=> needs two arguments")
        if op in ("and", "or") and not args:
            return lit(op == "and")
        if op in ("and", "or") and len(args) == 1:
            if args[0].sort is not Sort.BOOL:
                raise SortError(f"{op}: expected Bool argument")
            return args[0]
        return apply(op, args)
    raise ParseError(f"unexpected token {e!r}")


def parse_term(text: str, decls: Mapping[str, Sort] | None = None) -> Term:
    e = read_sexpr(text)
    if decls is None:
        decls = infer_sorts([e])
    return term_from_sexpr(e, decls)


def parse_formula(text: str, decls: Mapping[str, Sort] | None = None) -> Term:
    t = parse_term(text, decls)
    if t.sort is not Sort.BOOL:
        raise SortError(f"expected a formula, got an Int term: {text}")
    return t


def _leaf(t: Term) -> str:
    if t.op == "lit":
        v = t.value
        if isinstance(v, bool):
            return "true" if v else "false"
        return str(v) if v >= 0 else f"(- {-v})"  # type: ignore[operator]
    return t.value  # type: ignore[return-value]


def to_smtlib(t: Term) -> str:
    text: dict[int, str] = {}
    for n in postorder(t):
        if not n.args:
            text[id(n)] = _leaf(n)
        else:
            text[id(n)] = "(" + " ".join([n.op] + [text[id(a)] for a in n.args]) + ")"
    return text[id(t)]


def sort_name(s: Sort) -> str:
    return s.value
