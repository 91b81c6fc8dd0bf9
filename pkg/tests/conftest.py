from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ogre import fixture_path  # noqa: E402
from ogre.annotation import focused_og, imperial_og, naive_og  # noqa: E402
from ogre.domain import InvariantDomain  # noqa: E402
from ogre.empire import build_saturated_empire  # noqa: E402
from ogre.focus import compute_focus  # noqa: E402
from ogre.petri import PetriProgram  # noqa: E402
from ogre.solverio import SolverSession  # noqa: E402

PROGRAM = fixture_path("example_program.json")
DOMAIN = fixture_path("example_domain.json")

# (criterion, passed, detail) lines collected by the acceptance tests
ACCEPTANCE: list[tuple[int, bool, str]] = []


@pytest.fixture(scope="session")
def session():
    with SolverSession() as s:
        yield s


@pytest.fixture(scope="session")
def ex():
    return PetriProgram.load(PROGRAM)


@pytest.fixture(scope="session")
def ex_domain(ex, session):
    return InvariantDomain.load(DOMAIN, ex, session)


@pytest.fixture(scope="session")
def ex_empire(ex, ex_domain):
    return build_saturated_empire(ex, ex_domain)


@pytest.fixture(scope="session")
def ex_focus(ex_empire, ex_domain):
    return compute_focus(ex_empire, ex_domain)


@pytest.fixture(scope="session")
def ex_ogs(ex, ex_domain, ex_empire, ex_focus):
    return {
        "naive": naive_og(ex, ex_domain),
        "imperial": imperial_og(ex_empire),
        "focused": focused_og(ex_empire, ex_focus, ex_domain),
        "literal": imperial_og(ex_empire, share_ghost_values=False),
    }


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
