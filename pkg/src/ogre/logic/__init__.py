"""Terms, statements and Hoare reasoning over integers and booleans."""

from .evaluate import EvalError, compile_partial, compile_term, evaluate, evaluate_partial, holds
from .hoare import HoareResult, Verdict, check_hoare, entails, equivalent, satisfiable, valid
from .smtlib import ParseError, infer_sorts, parse_formula, parse_term, read_sexpr, read_sexprs, to_smtlib
from .stmt import Statement, copy_name, hoare_query, merge_copies, sequence_relation, split_valuation
from .terms import (
    FALSE,
    TRUE,
    Bool,
    Int,
    LogicError,
    Sort,
    SortError,
    Term,
    Value,
    add,
    and_,
    apply,
    conj,
    conjuncts,
    dag_size,
    disj,
    disjuncts,
    div,
    eq,
    free_vars,
    ge,
    gt,
    implies,
    ite,
    le,
    lit,
    lt,
    mod,
    mul,
    ne,
    neg,
    not_,
    or_,
    rename,
    sub,
    substitute,
    var,
)

__all__ = [name for name in dir() if not name.startswith("_")]
