"""Command-line interface.

Exit codes: 0 success/Valid, 1 Invalid or unsafe, 2 usage or I/O error,
3 solver Unknown.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path
from typing import Callable

from . import __version__
from .annotation import OGAnnotation, focused_og, ghost_encoding, imperial_og, metrics, naive_og
from .domain import DomainError, InvariantDomain, UnsafeDomainError, certify_domain, is_safe
from .empire import TerritoryError, build_naive_empire, build_saturated_empire, check_empire_valid
from .focus import FocusError, compute_focus, focus_to_json
from .logic import LogicError
from .petri import OneSafetyError, PetriProgram, ProgramError, validate_program
from .solverio import SolverConfig, SolverError, SolverSession
from .validator import AnnotationError, validate

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNKNOWN = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Collects inputs, outputs and stage timings for the run manifest."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.args = args
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self.timing: dict[str, float] = {}
        self.modes: dict[str, object] = {}

    def read(self, path: str) -> str:
        p = Path(path)
        try:
            data = p.read_bytes()
        except OSError as e:
            raise UsageError(f"cannot read {path}: {e.strerror}") from None
        self.inputs[path] = hashlib.sha256(data).hexdigest()
        return data.decode()

    def write(self, path: Path, text: str) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
        except OSError as e:
            raise UsageError(f"cannot write {path}: {e.strerror}") from None
        self.outputs[str(path)] = _sha256(path)

    def stage(self, name: str, fn: Callable):
        t0 = time.monotonic()
        try:
            return fn()
        finally:
            self.timing[name] = round(time.monotonic() - t0, 6)

    def manifest(self) -> dict:
        return {
            "tool": "ogre",
            "version": __version__,
            "command": self.command,
            "modes": self.modes,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timing": self.timing,
        }


def _solver_config(args) -> SolverConfig:
    return SolverConfig.from_env(getattr(args, "solver", None), timeout_ms=getattr(args, "timeout", 10_000))


def _load_program(run: Run, path: str) -> PetriProgram:
    text = run.read(path)
    try:
        return PetriProgram.from_json(json.loads(text))
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: invalid JSON: {e}") from None
    except ProgramError as e:
        raise UsageError(f"{path}: {e}") from None


def _load_domain(run: Run, path: str, program: PetriProgram, session: SolverSession) -> InvariantDomain:
    text = run.read(path)
    try:
        return InvariantDomain.from_json(json.loads(text), program, session)
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: invalid JSON: {e}") from None
    except DomainError as e:
        raise UsageError(f"{path}: {e}") from None


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        sys.stdout.write(_dumps(payload))
    elif text:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _finish(run: Run, args, payload: dict, text: str, code: int) -> int:
    payload["manifest"] = run.manifest()
    if getattr(args, "manifest", None):
        Path(args.manifest).write_text(_dumps(run.manifest()))
    _emit(args, payload, text)
    return code


# ------------------------------------------------------------- commands

def cmd_check(args) -> int:
    run = Run("check", args)
    text = run.read(args.program)
    try:
        program = PetriProgram.from_json(json.loads(text))
    except json.JSONDecodeError as e:
        raise UsageError(f"{args.program}: invalid JSON: {e}") from None
    except ProgramError as e:
        diag = {"kind": "malformed", "subject": "", "message": str(e)}
        return _finish(run, args, {"ok": False, "diagnostics": [diag]}, f"malformed: {e}", EXIT_FAIL)
    diags = run.stage("check", lambda: validate_program(program))
    lines = [f"{d.kind}: {d.message}" for d in diags] or ["ok"]
    return _finish(run, args, {"ok": not diags, "diagnostics": [d.to_json() for d in diags]},
                   "\n".join(lines), EXIT_FAIL if diags else EXIT_OK)


def cmd_reach(args) -> int:
    run = Run("reach", args)
    program = _load_program(run, args.program)
    try:
        markings = run.stage("reach", lambda: program.reachable)
    except OneSafetyError as e:
        return _finish(run, args, {"error": str(e)}, f"one-safety: {e}", EXIT_FAIL)
    ms = [program.sorted_places(m) for m in markings]
    payload: dict = {"count": len(ms), "markings": ms}
    lines = [f"{len(ms)} reachable markings"] + ["  {" + ",".join(m) + "}" for m in ms]
    if args.co:
        pairs = sorted(
            {tuple(program.sorted_places([p, q])) for p in program.places for q in program.co_relation[p]},
            key=lambda pq: (program.place_index[pq[0]], program.place_index[pq[1]]),
        )
        marked = [[p, t.id] for t in program.transitions for p in program.sorted_places(program.co_marked_relation[t.id])]
        payload["co_related"] = [list(pq) for pq in pairs]
        payload["co_marked"] = marked
        lines.append("co-related: " + " ".join(f"{a}~{b}" for a, b in pairs))
        lines.append("co-marked: " + " ".join(f"{p}/{t}" for p, t in marked))
    return _finish(run, args, payload, "\n".join(lines), EXIT_OK)


def cmd_domain_check(args) -> int:
    run = Run("domain-check", args)
    program = _load_program(run, args.program)
    with SolverSession(_solver_config(args)) as s:
        d = _load_domain(run, args.domain, program, s)
        rep = run.stage("certify", lambda: certify_domain(program, d, s))
        safe, bad = run.stage("safety", lambda: is_safe(program, d))
    payload = {
        "certified": not rep.violations,
        "obligations": rep.checked,
        "violations": [{"description": v.describe(d), "witness": v.witness} for v in rep.violations],
        "unknown": [v.describe(d) for v in rep.unknowns],
        "safe": safe,
        "unsafe_configurations": [
            {"marking": program.sorted_places(c.marking), "law": d.describe(c.law)} for c in bad
        ],
    }
    lines = [f"{rep.checked} post obligations, {len(rep.violations)} violated, {len(rep.unknowns)} unknown"]
    lines += [f"  violated: {v.describe(d)} witness {v.witness}" for v in rep.violations]
    lines.append("safe" if safe else f"unsafe: {len(bad)} error configurations with satisfiable law")
    if rep.violations or not safe:
        code = EXIT_FAIL
    elif rep.unknowns:
        code = EXIT_UNKNOWN
    else:
        code = EXIT_OK
    return _finish(run, args, payload, "\n".join(lines), code)


def _build_empire(run: Run, program: PetriProgram, d: InvariantDomain, mode: str):
    if mode == "naive":
        return run.stage("empire", lambda: build_naive_empire(program, d))
    return run.stage("empire", lambda: build_saturated_empire(program, d))


def cmd_empire(args) -> int:
    run = Run("empire", args)
    run.modes = {"mode": args.mode}
    program = _load_program(run, args.program)
    with SolverSession(_solver_config(args)) as s:
        d = _load_domain(run, args.domain, program, s)
        try:
            E = _build_empire(run, program, d, args.mode)
        except UnsafeDomainError as e:
            return _finish(run, args, {"error": str(e)}, f"unsafe: {e}", EXIT_FAIL)
        rep = run.stage("check", lambda: check_empire_valid(program, E, s))
    data = E.to_json()
    if args.output:
        out = Path(args.output)
        run.write(out, _dumps(data))
        out.with_name(out.stem + ".manifest.json").write_text(_dumps(run.manifest()))
    lines = [f"{len(E)} states, {len(E.delta)} edges"] + ["  " + E.show_state(q) for q in range(len(E))]
    for v in rep.violations:
        lines.append(f"  violated {v.condition} at q{v.state} {v.transition} {v.detail}")
    lines.append("valid" if rep.ok else ("invalid" if rep.violations else "unknown"))
    payload = {
        "states": len(E),
        "edges": len(E.delta),
        "valid": rep.ok,
        "violations": [vars(v) for v in rep.violations],
        "diagnostics": E.diagnostics,
    }
    if not args.output:
        payload["empire"] = data
    code = EXIT_FAIL if rep.violations else (EXIT_UNKNOWN if rep.unknowns else EXIT_OK)
    return _finish(run, args, payload, "\n".join(lines), code)


def cmd_annotate(args) -> int:
    run = Run("annotate", args)
    share = not args.no_share_ghosts
    run.modes = {"style": args.style, "share_ghost_values": share}
    program = _load_program(run, args.program)
    extra: dict[str, dict] = {}
    with SolverSession(_solver_config(args)) as s:
        d = _load_domain(run, args.domain, program, s)
        try:
            if args.style == "naive":
                og = run.stage("annotate", lambda: naive_og(program, d))
            else:
                E = run.stage("empire", lambda: build_saturated_empire(program, d))
                enc = ghost_encoding(E, share)
                extra["empire.json"] = E.to_json(enc)
                if args.style == "imperial":
                    og = run.stage("annotate", lambda: imperial_og(E, share))
                else:
                    F = run.stage("focus", lambda: compute_focus(E, d))
                    extra["focus.json"] = focus_to_json(E, F)
                    og = run.stage("annotate", lambda: focused_og(E, F, d, share))
        except UnsafeDomainError as e:
            return _finish(run, args, {"error": str(e)}, f"unsafe: {e}", EXIT_FAIL)
    m = metrics(og)
    cert = og.to_json(program)
    payload: dict = {"style": args.style, "metrics": m.to_json()}
    if args.output:
        out = Path(args.output)
        run.write(out, _dumps(cert))
        for name, data in extra.items():
            run.write(out.parent / name, _dumps(data))
        out.with_name(out.stem + ".manifest.json").write_text(_dumps(run.manifest()))
        text = f"wrote {', '.join(run.outputs)}; size {m.size}, ghost updates {m.ghost_updates}"
    else:
        payload["og"] = cert
        text = _dumps(cert).rstrip("\n")
    return _finish(run, args, payload, text, EXIT_OK)


def cmd_validate(args) -> int:
    run = Run("validate", args)
    program = _load_program(run, args.program)
    text = run.read(args.og)
    try:
        og = OGAnnotation.from_json(json.loads(text), program)
    except (json.JSONDecodeError, KeyError, ValueError, LogicError) as e:
        raise UsageError(f"{args.og}: {e}") from None
    mode = "oracle" if args.oracle_bound is not None else "smt"
    run.modes = {"mode": mode, "oracle_bound": args.oracle_bound, "jobs": args.jobs}
    cfg = _solver_config(args)
    try:
        rep = run.stage("validate", lambda: validate(
            program, og, mode=mode, bound=args.oracle_bound or 4, jobs=args.jobs,
            config=cfg, dump_dir=args.dump_vcs))
    except AnnotationError as e:
        raise UsageError(f"{args.og}: {e}") from None
    payload = rep.to_json()
    lines = [f"{rep.verdict}: {len(rep.results)} verification conditions"]
    for r in rep.failed:
        lines.append(f"  failed {r.name}: " + " ".join(f"{k}={v}" for k, v in sorted((r.model or {}).items())))
    for r in rep.unknown:
        lines.append(f"  unknown {r.name}: {r.reason}")
    code = {"Valid": EXIT_OK, "BoundedValid": EXIT_OK, "Invalid": EXIT_FAIL}.get(rep.verdict, EXIT_UNKNOWN)
    return _finish(run, args, payload, "\n".join(lines), code)


def cmd_stats(args) -> int:
    run = Run("stats", args)
    text = run.read(args.og)
    try:
        og = OGAnnotation.from_json(json.loads(text))
    except (json.JSONDecodeError, KeyError, ValueError, LogicError) as e:
        raise UsageError(f"{args.og}: {e}") from None
    m = metrics(og)
    return _finish(run, args, m.to_json(),
                   f"size {m.size}, ghost updates {m.ghost_updates}, ghost variables {m.ghost_vars}", EXIT_OK)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    common.add_argument("--manifest", metavar="PATH", help="also write the run manifest here")
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--solver", metavar="CMD", help="solver command (default: $OGRE_SOLVER or 'z3 -in')")
    solver.add_argument("--timeout", type=int, default=10_000, metavar="MS", help="per-query timeout")

    p = argparse.ArgumentParser(prog="ogre", description="Owicki-Gries certificates for Petri programs.")
    p.add_argument("--version", action="version", version=f"ogre {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="structural and one-safety checks")
    c.add_argument("program")
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("reach", parents=[common], help="list reachable markings")
    c.add_argument("program")
    c.add_argument("--co", action="store_true", help="also list co-related places and co-marked pairs")
    c.set_defaults(func=cmd_reach)

    c = sub.add_parser("domain-check", parents=[common, solver], help="certify an invariant domain and check safety")
    c.add_argument("program")
    c.add_argument("domain")
    c.set_defaults(func=cmd_domain_check)

    c = sub.add_parser("empire", parents=[common, solver], help="build and check an empire")
    c.add_argument("program")
    c.add_argument("domain")
    c.add_argument("--mode", choices=["naive", "saturated"], default="saturated")
    c.add_argument("-o", "--output", metavar="FILE")
    c.set_defaults(func=cmd_empire)

    c = sub.add_parser("annotate", parents=[common, solver], help="generate an Owicki-Gries certificate")
    c.add_argument("program")
    c.add_argument("domain")
    c.add_argument("--style", choices=["naive", "imperial", "imperial-focused"], default="imperial-focused")
    c.add_argument("--no-share-ghosts", action="store_true",
                   help="give every empire state its own ghost value")
    c.add_argument("-o", "--output", metavar="FILE")
    c.set_defaults(func=cmd_annotate)

    c = sub.add_parser("validate", parents=[common, solver], help="check a certificate")
    c.add_argument("program")
    c.add_argument("og")
    c.add_argument("--dump-vcs", metavar="DIR")
    c.add_argument("--oracle-bound", type=int, metavar="N",
                   help="refute by enumerating values in [-N, N] instead of calling the solver")
    c.add_argument("--jobs", type=int, default=1)
    c.set_defaults(func=cmd_validate)

    c = sub.add_parser("stats", parents=[common], help="size metrics of a certificate")
    c.add_argument("og")
    c.set_defaults(func=cmd_stats)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"ogre: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as e:
        print(f"ogre: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, FocusError, TerritoryError) as e:
        # solver trouble while building the domain, or an internal inconsistency
        print(f"ogre: {e}", file=sys.stderr)
        return EXIT_UNKNOWN if "unknown" in str(e) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
