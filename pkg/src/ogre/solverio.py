"""Talk SMT-LIB2 to an external solver process over pipes.

One ``SolverSession`` owns one long-lived solver process. Each query is
isolated: by default inside a ``(push 1)``/``(pop 1)`` scope (declarations
included), or with a full ``(reset)`` when ``isolation="reset"``. A query
that exceeds its time budget kills the process; the next query respawns it.
"""

from __future__ import annotations

import contextlib
import enum
import logging
import os
import select
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence, TypeVar

from .logic.smtlib import ParseError, Sym, read_sexprs, to_smtlib
from .logic.terms import Sort, Term, Value, conj, free_vars, uses_nonlinear

log = logging.getLogger(__name__)

ENV_SOLVER = "OGRE_SOLVER"
DEFAULT_COMMAND = "z3 -in"


class Status(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class CheckResult:
    status: Status
    model: dict[str, Value] | None = None
    reason: str = ""

    @property
    def sat(self) -> bool:
        return self.status is Status.SAT

    @property
    def unsat(self) -> bool:
        return self.status is Status.UNSAT

    @property
    def unknown(self) -> bool:
        return self.status is Status.UNKNOWN


@dataclass(frozen=True)
class SolverConfig:
    command: str = DEFAULT_COMMAND
    timeout_ms: int = 10_000
    logic: str | None = None  # None picks QF_LIA or QF_NIA per query
    isolation: str = "scope"  # "scope" or "reset"
    cache: bool = True

    @classmethod
    def from_env(cls, command: str | None = None, **kw) -> SolverConfig:
        """``command`` beats $OGRE_SOLVER, which beats the default."""
        cmd = command or os.environ.get(ENV_SOLVER) or DEFAULT_COMMAND
        return cls(command=cmd, **kw)


class SolverError(RuntimeError):
    pass


def pick_logic(assertions: Sequence[Term]) -> str:
    return "QF_NIA" if any(uses_nonlinear(a) for a in assertions) else "QF_LIA"


def declarations(assertions: Sequence[Term]) -> list[str]:
    decls = free_vars(*assertions)
    return [f"(declare-fun {n} () {s.value})" for n, s in sorted(decls.items())]


def script(assertions: Sequence[Term], logic: str | None = None, get_model: bool = True) -> str:
    """A standalone SMT-LIB2 script for the conjunction of ``assertions``."""
    lines = [f"(set-logic {logic or pick_logic(assertions)})"]
    lines += declarations(assertions)
    lines += [f"(assert {to_smtlib(a)})" for a in assertions]
    lines.append("(check-sat)")
    if get_model:
        lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def _model_value(e) -> Value | None:
    if isinstance(e, int) and not isinstance(e, bool):
        return e
    if isinstance(e, Sym):
        if e == "true":
            return True
        if e == "false":
            return False
        return None
    if isinstance(e, list) and len(e) == 2 and e[0] == "-":
        inner = _model_value(e[1])
        return -inner if isinstance(inner, int) and not isinstance(inner, bool) else None
    return None


def parse_model(text: str) -> dict[str, Value]:
    """Read a ``(get-model)`` response into name -> value."""
    items = read_sexprs(text)
    if len(items) == 1 and isinstance(items[0], list):
        body = items[0]
    else:
        body = items
    if body and body[0] == "model":
        body = body[1:]
    out: dict[str, Value] = {}
    for d in body:
        if not (isinstance(d, list) and len(d) == 5 and d[0] == "define-fun" and d[2] == []):
            continue
        v = _model_value(d[4])
        if v is None:
            if d[3] in ("Int", "Bool"):
                raise ParseError(f"unreadable value for {d[1]}")
            continue
        out[str(d[1])] = v
    return out


def _complete_datum(buf: str) -> int | None:
    """End offset of the first complete s-expression in ``buf``, if any."""
    depth = 0
    started = False
    i, n = 0, len(buf)
    in_str = in_quote = False
    while i < n:
        c = buf[i]
        if in_str:
            if c == '"':
                if i + 1 < n and buf[i + 1] == '"':
                    i += 1
                else:
                    in_str = False
        elif in_quote:
            if c == "|":
                in_quote = False
        elif c == '"':
            in_str = True
            started = True
        elif c == "|":
            in_quote = True
            started = True
        elif c == "(":
            depth += 1
            started = True
        elif c == ")":
            depth -= 1
            if depth == 0:
                return i + 1
        elif c.isspace():
            if started and depth == 0:
                return i
        else:
            started = True
        i += 1
    return None


class SolverSession:
    """A persistent solver process answering one isolated query at a time."""

    def __init__(self, config: SolverConfig | None = None):
        self.config = config or SolverConfig()
        self._proc: subprocess.Popen | None = None
        self._buf = ""
        self._lock = threading.Lock()
        self._cache: dict[str, CheckResult] = {}
        self.queries = 0
        self.cache_hits = 0
        self.solver_time = 0.0

    # -- process management -----------------------------------------------

    def _spawn(self) -> subprocess.Popen:
        argv = shlex.split(self.config.command)
        try:
            proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                bufsize=0,
            )
        except OSError as e:
            raise SolverError(f"cannot start solver {self.config.command!r}: {e}") from e
        self._buf = ""
        self._proc = proc
        self._write("(set-option :print-success false)\n(set-option :produce-models true)\n")
        return proc

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._spawn()
        return self._proc  # type: ignore[return-value]

    def _kill(self) -> None:
        proc, self._proc = self._proc, None
        self._buf = ""
        if proc is None:
            return
        with contextlib.suppress(Exception):
            proc.kill()
        with contextlib.suppress(Exception):
            proc.wait(timeout=2)
        for f in (proc.stdin, proc.stdout):
            with contextlib.suppress(Exception):
                f.close()  # type: ignore[union-attr]

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            with contextlib.suppress(Exception):
                self._write("(exit)\n")
                self._proc.wait(timeout=1)
        self._kill()

    def __enter__(self) -> SolverSession:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):
        with contextlib.suppress(Exception):
            self._kill()

    # -- io -----------------------------------------------------------------

    def _write(self, text: str) -> None:
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(text.encode())
        except (BrokenPipeError, OSError) as e:
            raise SolverError(f"solver pipe closed: {e}") from e

    def _read_datum(self, deadline: float) -> str:
        assert self._proc is not None and self._proc.stdout is not None
        fd = self._proc.stdout.fileno()
        while True:
            end = _complete_datum(self._buf)
            if end is not None:
                datum, self._buf = self._buf[:end], self._buf[end:]
                return datum.strip()
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise TimeoutError
            chunk = os.read(fd, 65536)
            if not chunk:
                rest = self._buf.strip()
                if rest:
                    self._buf = ""
                    return rest
                raise SolverError("solver exited unexpectedly")
            self._buf += chunk.decode(errors="replace")

    # -- queries --------------------------------------------------------------

    def check(self, assertions: Sequence[Term], want_model: bool = True) -> CheckResult:
        """Satisfiability of the conjunction of ``assertions``."""
        assertions = [a for a in assertions]
        body = "\n".join(f"(assert {to_smtlib(a)})" for a in assertions)
        decls = "\n".join(declarations(assertions))
        key = decls + "\n" + body
        with self._lock:
            if self.config.cache:
                hit = self._cache.get(key)
                if hit is not None and (hit.model is not None or not want_model or not hit.sat):
                    self.cache_hits += 1
                    return hit
            res = self._run(assertions, decls, body, want_model)
            if self.config.cache and not res.unknown:
                self._cache[key] = res
            return res

    def _run(self, assertions, decls: str, body: str, want_model: bool) -> CheckResult:
        self.queries += 1
        t0 = time.monotonic()
        try:
            self._ensure()
            if self.config.isolation == "reset":
                logic = self.config.logic or pick_logic(assertions)
                prologue = f"(reset)\n(set-option :print-success false)\n(set-option :produce-models true)\n(set-logic {logic})\n"
                epilogue = ""
            else:
                prologue = "(push 1)\n"
                epilogue = "(pop 1)\n"
            self._write(f"{prologue}{decls}\n{body}\n(check-sat)\n")
            deadline = t0 + self.config.timeout_ms / 1000.0
            answer = self._read_datum(deadline)
            if answer.startswith("(error"):
                # the session state is now suspect; start over next time
                self._kill()
                return CheckResult(Status.UNKNOWN, reason=answer)
            model = None
            if answer == "sat" and want_model:
                self._write("(get-model)\n")
                text = self._read_datum(deadline)
                if text.startswith("(error"):
                    self._kill()
                    return CheckResult(Status.UNKNOWN, reason=text)
                try:
                    model = parse_model(text)
                except ParseError as e:
                    self._kill()
                    return CheckResult(Status.UNKNOWN, reason=f"unreadable model: {e}")
            if epilogue:
                self._write(epilogue)
            if answer == "sat":
                return CheckResult(Status.SAT, model)
            if answer == "unsat":
                return CheckResult(Status.UNSAT)
            if answer == "unknown":
                return CheckResult(Status.UNKNOWN, reason="solver returned unknown")
            self._kill()
            return CheckResult(Status.UNKNOWN, reason=f"unexpected solver output {answer!r}")
        except TimeoutError:
            self._kill()
            return CheckResult(Status.UNKNOWN, reason="timeout")
        except SolverError as e:
            self._kill()
            if "cannot start" in str(e):
                raise
            return CheckResult(Status.UNKNOWN, reason=str(e))
        finally:
            self.solver_time += time.monotonic() - t0


def check_sat(session: SolverSession, assertions: Sequence[Term]) -> CheckResult:
    return session.check(assertions)


@contextlib.contextmanager
def open_session(config: SolverConfig | None = None) -> Iterator[SolverSession]:
    s = SolverSession(config)
    try:
        yield s
    finally:
        s.close()


T = TypeVar("T")


def with_session(config: SolverConfig | None, body: Callable[[SolverSession], T]) -> T:
    with open_session(config) as s:
        return body(s)


class SessionPool:
    """A fixed set of sessions for running independent queries in parallel."""

    def __init__(self, config: SolverConfig | None = None, size: int = 1):
        if size < 1:
            raise ValueError("pool size must be positive")
        self.sessions = [SolverSession(config) for _ in range(size)]

    def map(self, fn: Callable[[SolverSession, T], object], items: Sequence[T]) -> list:
        if len(self.sessions) == 1 or len(items) <= 1:
            return [fn(self.sessions[0], x) for x in items]
        from concurrent.futures import ThreadPoolExecutor

        chunks = [list(range(i, len(items), len(self.sessions))) for i in range(len(self.sessions))]
        out: list = [None] * len(items)

        def work(k: int) -> None:
            s = self.sessions[k]
            for i in chunks[k]:
                out[i] = fn(s, items[i])

        with ThreadPoolExecutor(len(self.sessions)) as ex:
            for f in [ex.submit(work, k) for k in range(len(self.sessions))]:
                f.result()
        return out

    def close(self) -> None:
        for s in self.sessions:
            s.close()

    def __enter__(self) -> SessionPool:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def formula_of(assertions: Sequence[Term]) -> Term:
    return conj(assertions)


def model_env(model: Mapping[str, Value] | None, decls: Mapping[str, Sort]) -> dict[str, Value]:
    """Complete a (possibly partial) model over ``decls`` with default values."""
    model = model or {}
    return {n: model.get(n, False if s is Sort.BOOL else 0) for n, s in decls.items()}
