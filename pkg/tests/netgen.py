"""Random one-safe Petri programs with predicate-abstraction domains.

Shape: an init transition, a fork into 2-3 threads, sequential thread
bodies (with occasional branches, back edges and havoc), a join, and
assertion transitions into error places.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

VARS = ("x", "y")


@dataclass
class Generated:
    seed: int
    program: dict
    domain: dict


def _num(c: int) -> str:
    return str(c) if c >= 0 else f"(- {-c})"


def _atom(rng: random.Random, v: str | None = None) -> str:
    v = v or rng.choice(VARS)
    c = _num(rng.randint(-1, 3))
    kind = rng.random()
    if kind < 0.4:
        return f"(>= {v} {c})"
    if kind < 0.6:
        return f"(<= {v} {c})"
    if kind < 0.8:
        return "(<= x y)" if rng.random() < 0.5 else "(<= y x)"
    return f"(> {v} {c})"


def _rhs(rng: random.Random, v: str) -> str:
    # mostly monotone, so that lower bounds tend to be invariant
    w = rng.choice(VARS)
    r = rng.random()
    if r < 0.7:
        return f"(+ {v} {rng.randint(0, 2)})"
    if r < 0.8:
        return f"(- {v} 1)"
    if r < 0.92:
        return f"(+ {w} {rng.randint(0, 2)})"
    return _num(rng.randint(-1, 3))


def _statement(rng: random.Random) -> dict:
    st: dict = {}
    if rng.random() < 0.3:
        st["assume"] = _atom(rng)
    r = rng.random()
    if r < 0.07:
        st["havoc"] = [rng.choice(VARS)]
    elif r < 0.85:
        v = rng.choice(VARS)
        st["assign"] = {v: _rhs(rng, v)}
    elif r < 0.93:
        st["assign"] = {"x": _rhs(rng, "x"), "y": _rhs(rng, "y")}
    return st


def _negate(a: str) -> str:
    return f"(not {a})"


def generate(seed: int) -> Generated:
    rng = random.Random(seed)
    n_threads = rng.choice((2, 2, 3))
    budget = 20 - 4 - n_threads  # init/fork/join places and error places aside
    places = ["m0", "m1"]
    transitions: list[dict] = []
    counter = 0

    def tr(pre, succ, st=None):
        nonlocal counter
        counter += 1
        d = {"id": f"t{counter}", "pre": list(pre), "succ": list(succ)}
        d.update(st or {})
        transitions.append(d)
        return d

    init = {"assign": {"x": str(rng.randint(0, 2)), "y": str(rng.randint(0, 2))}}
    if rng.random() < 0.2:
        init = {"assign": {"x": str(rng.randint(0, 2))}}
    tr(["m0"], ["m1"], init)

    thread_ends = []
    thread_places: list[list[str]] = []
    starts = []
    for k in range(n_threads):
        length = rng.randint(1, max(1, min(4, budget // (n_threads - k) - 1)))
        budget -= length + 1
        ps = [f"{chr(ord('a') + k)}{i}" for i in range(length + 1)]
        places.extend(ps)
        thread_places.append(ps)
        starts.append(ps[0])
        thread_ends.append(ps[-1])
    tr(["m1"], starts)
    for ps in thread_places:
        for i in range(len(ps) - 1):
            r = rng.random()
            if r < 0.2:
                g = _atom(rng)
                a = _statement(rng)
                a["assume"] = g
                b = _statement(rng)
                b["assume"] = _negate(g)
                tr([ps[i]], [ps[i + 1]], a)
                tr([ps[i]], [ps[i + 1]], b)
            else:
                tr([ps[i]], [ps[i + 1]], _statement(rng))
        if len(ps) > 2 and rng.random() < 0.25:
            j = rng.randrange(0, len(ps) - 2)
            tr([ps[-2]], [ps[j]], {"assume": _atom(rng)})
    places.append("m2")
    tr(thread_ends, ["m2"])

    x0 = int(init["assign"]["x"])
    y0 = int(init["assign"].get("y", "0"))
    invariants = [
        f"(>= x {x0})" if rng.random() < 0.7 else _atom(rng, "x"),
        f"(>= y {y0})" if rng.random() < 0.7 else _atom(rng, "y"),
    ]
    errors = ["e1"]
    places.append("e1")
    tr(["m2"], ["e1"], {"assume": _negate(invariants[0])})
    if rng.random() < 0.5:
        errors.append("e2")
        places.append("e2")
        ps = rng.choice(thread_places)
        tr([rng.choice(ps[1:])], ["e2"], {"assume": _negate(invariants[1])})

    program = {
        "variables": [{"name": v, "sort": "Int"} for v in VARS],
        "places": places,
        "initial_marking": ["m0"],
        "error_places": errors,
        "transitions": transitions,
    }

    preds_x = {invariants[0] if "x" in invariants[0] else _atom(rng, "x")}
    preds_y = {invariants[1] if "y" in invariants[1] else _atom(rng, "y")}
    for _ in range(rng.randint(1, 3)):
        a = _atom(rng)
        (preds_x if "x" in a else preds_y).add(a)
    domain = {
        "components": [
            {"post": {"mode": "predicates"}, "predicates": sorted(preds_x)},
            {"post": {"mode": "predicates"}, "predicates": sorted(preds_y)},
        ]
    }
    return Generated(seed, program, domain)
