"""Owicki-Gries proof generation for Petri programs via empires."""

from __future__ import annotations

from pathlib import Path

__version__ = "0.1.0"

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture, e.g. ``fixture_path("example_program.json")``."""
    return FIXTURES / name
