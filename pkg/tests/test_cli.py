from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from conftest import DOMAIN, PROGRAM
from netgen import generate
from ogre.cli import EXIT_FAIL, EXIT_OK, EXIT_UNKNOWN, EXIT_USAGE, main
from ogre.domain import InvariantDomain, is_safe
from ogre.petri import PetriProgram

FAKE = f"{sys.executable} {Path(__file__).parent / 'fake_solver.py'}"
TRIVIAL = {"components": [{"formulas": ["true", "false"], "post": {"mode": "table"}}]}


def run(capsys, *argv):
    capsys.readouterr()
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    data = json.loads(out.out) if "--json" in argv and out.out.strip() else None
    return code, data, out


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return p


@pytest.fixture
def og_file(tmp_path, capsys):
    path = tmp_path / "og.json"
    code, _, _ = run(capsys, "annotate", PROGRAM, DOMAIN, "-o", path)
    assert code == EXIT_OK
    return path


def test_check(capsys):
    code, data, _ = run(capsys, "check", PROGRAM, "--json")
    assert code == EXIT_OK and data["ok"] and data["diagnostics"] == []


def test_check_malformed(tmp_path, capsys):
    bad = write(tmp_path, "p.json", {"places": ["a"], "initial_marking": ["a"], "transitions": [{"id": "t", "pre": ["a"], "succ": ["z"]}]})
    code, data, _ = run(capsys, "check", bad, "--json")
    assert code == EXIT_FAIL and not data["ok"]


def test_check_unsafe_net(tmp_path, capsys):
    p = write(tmp_path, "p.json", {"places": ["a", "b"], "initial_marking": ["a", "b"], "transitions": [{"id": "t", "pre": ["a"], "succ": ["b"]}]})
    code, data, _ = run(capsys, "check", p, "--json")
    assert code == EXIT_FAIL
    assert "one-safety" in [d["kind"] for d in data["diagnostics"]]


def test_missing_file_is_usage_error(tmp_path, capsys):
    code, _, out = run(capsys, "check", tmp_path / "nope.json")
    assert code == EXIT_USAGE and "nope.json" in out.err


def test_reach(capsys):
    code, data, _ = run(capsys, "reach", PROGRAM, "--json", "--co")
    assert code == EXIT_OK and data["count"] == 17
    assert ["p1", "p5"] in data["co_related"]
    assert ["p5", "t4"] in data["co_marked"]
    assert ["p2", "te2"] not in data["co_marked"]


def test_reach_text(capsys):
    code, _, out = run(capsys, "reach", PROGRAM)
    assert code == EXIT_OK and out.out.startswith("17 reachable markings")


def test_domain_check(capsys):
    code, data, _ = run(capsys, "domain-check", PROGRAM, DOMAIN, "--json")
    assert code == EXIT_OK


def test_domain_check_unsafe(tmp_path, capsys):
    code, _, _ = run(capsys, "domain-check", PROGRAM, write(tmp_path, "d.json", TRIVIAL), "--json")
    assert code == EXIT_FAIL


def test_domain_check_unknown_solver(capsys):
    code, _, _ = run(capsys, "domain-check", PROGRAM, DOMAIN, "--solver", f"{FAKE} unknown")
    assert code == EXIT_UNKNOWN


@pytest.mark.parametrize("mode,states", [("naive", 13), ("saturated", 7)])
def test_empire(tmp_path, capsys, mode, states):
    out = tmp_path / "emp.json"
    code, data, _ = run(capsys, "empire", PROGRAM, DOMAIN, "--mode", mode, "-o", out, "--json")
    assert code == EXIT_OK and data["valid"] and data["states"] == states
    assert len(json.loads(out.read_text())["states"]) == states
    man = json.loads((tmp_path / "emp.manifest.json").read_text())
    assert str(out) in man["outputs"] and man["modes"]["mode"] == mode


def test_empire_unsafe_domain(tmp_path, capsys):
    code, _, _ = run(capsys, "empire", PROGRAM, write(tmp_path, "d.json", TRIVIAL))
    assert code == EXIT_FAIL


def test_annotate_writes_artifacts(og_file):
    d = og_file.parent
    for name in ("og.json", "empire.json", "focus.json", "og.manifest.json"):
        assert (d / name).exists()


def test_annotate_to_stdout(capsys):
    code, _, out = run(capsys, "annotate", PROGRAM, DOMAIN, "--style", "naive")
    assert code == EXIT_OK
    assert len(json.loads(out.out)["ghosts"]) == 10


def test_validate_and_stats(og_file, capsys, tmp_path):
    code, data, _ = run(capsys, "validate", PROGRAM, og_file, "--json", "--dump-vcs", tmp_path / "vcs")
    assert code == EXIT_OK and data["verdict"] == "Valid"
    assert len(list((tmp_path / "vcs").glob("*.smt2"))) == len(data["vcs"])
    code, data, _ = run(capsys, "stats", og_file, "--json")
    assert code == EXIT_OK and data["size"] == 140 and data["ghost_updates"] == 3


def test_validate_oracle(og_file, capsys):
    code, data, _ = run(capsys, "validate", PROGRAM, og_file, "--oracle-bound", "2", "--json")
    assert code == EXIT_OK and data["verdict"] == "BoundedValid"


def test_validate_invalid(og_file, capsys):
    data = json.loads(og_file.read_text())
    for o in data["omega"]:
        if o["place"] in ("p4", "p7"):
            o["formula"] = o["formula"].replace("(> x 2)", "(> x 1)")
    og_file.write_text(json.dumps(data))
    code, _, out = run(capsys, "validate", PROGRAM, og_file)
    assert code == EXIT_FAIL
    assert "vc_Inductive_te2" in out.out and "x=2" in out.out


def test_validate_unknown_and_env_override(og_file, capsys, monkeypatch):
    code, _, _ = run(capsys, "validate", PROGRAM, og_file, "--solver", f"{FAKE} unknown")
    assert code == EXIT_UNKNOWN
    monkeypatch.setenv("OGRE_SOLVER", f"{FAKE} unknown")
    code, data, _ = run(capsys, "validate", PROGRAM, og_file, "--json")
    assert code == EXIT_UNKNOWN and data["verdict"] == "Unknown"


def test_dead_solver(og_file, capsys):
    code, _, _ = run(capsys, "validate", PROGRAM, og_file, "--solver", "no-such-solver-binary")
    assert code == EXIT_USAGE


@pytest.mark.parametrize("text", ['{"ghosts": [', '{"ghosts": [], "omega": []}'])
def test_bad_certificate(tmp_path, capsys, text):
    code, _, _ = run(capsys, "validate", PROGRAM, write(tmp_path, "og.json", text))
    assert code == EXIT_USAGE


@pytest.mark.parametrize(
    "argv",
    [
        ["check", PROGRAM],
        ["reach", PROGRAM],
        ["domain-check", PROGRAM, DOMAIN],
        ["empire", PROGRAM, DOMAIN],
        ["annotate", PROGRAM, DOMAIN],
    ],
)
def test_json_and_manifest_everywhere(tmp_path, capsys, argv):
    man = tmp_path / "m.json"
    code, data, _ = run(capsys, *argv, "--json", "--manifest", man)
    assert code == EXIT_OK
    assert data["manifest"]["command"] == argv[0]
    written = json.loads(man.read_text())
    assert written["inputs"] == data["manifest"]["inputs"]
    assert all(len(h) == 64 for h in written["inputs"].values())


def test_no_share_ghosts(tmp_path, capsys):
    out = tmp_path / "og.json"
    assert run(capsys, "annotate", PROGRAM, DOMAIN, "--style", "imperial", "--no-share-ghosts", "-o", out)[0] == EXIT_OK
    emp = json.loads((tmp_path / "empire.json").read_text())
    assert [s["ghost"] for s in emp["states"]] == list(range(7))
    assert run(capsys, "validate", PROGRAM, out)[0] == EXIT_OK


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "ogre.cli", "reach", str(PROGRAM), "--json"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["count"] == 17


def test_pipeline_on_generated_programs(tmp_path, capsys, session):
    done = 0
    for seed in range(40):
        g = generate(seed)
        p = PetriProgram.from_json(g.program)
        if not is_safe(p, InvariantDomain.from_json(g.domain, p, session))[0]:
            continue
        prog = write(tmp_path, f"p{seed}.json", g.program)
        dom = write(tmp_path, f"d{seed}.json", g.domain)
        for style in ("naive", "imperial", "imperial-focused"):
            og = tmp_path / f"og{seed}-{style}.json"
            assert run(capsys, "annotate", prog, dom, "--style", style, "-o", og)[0] == EXIT_OK
            assert run(capsys, "validate", prog, og)[0] == EXIT_OK, (seed, style)
        done += 1
        if done == 4:
            break
    assert done == 4
