"""Shared fixtures: reference loops and solver discovery."""

import os
import random
import shutil

import pytest

from loopbound.expr import Polynomial, cmp_lt, cmp_ne, f_and, parse_poly
from loopbound.loops import Loop


def _poly(text: str) -> Polynomial:
    return parse_poly(text)


@pytest.fixture(scope="session")
def flagship_loop() -> Loop:
    """Rotating pair, sign-flipping doubler, and a coupled growth variable."""
    guard = f_and([
        cmp_lt(_poly("x4^2 - x3^5"), _poly("x5")),
        cmp_ne(_poly("x4"), Polynomial.zero()),
    ])
    update = {
        "x1": _poly("3*x1 + 2*x2"),
        "x2": _poly("-5*x1 - 3*x2"),
        "x3": _poly("x3"),
        "x4": _poly("-2*x4"),
        "x5": _poly("3*x5 + x3^2"),
    }
    return Loop.make(guard, update)


@pytest.fixture(scope="session")
def defective_loop() -> Loop:
    """The flagship loop with its growth variable split into a defective pair."""
    guard = f_and([
        cmp_lt(_poly("x4^2 - x3^5"), _poly("2*y1 - y2")),
        cmp_ne(_poly("x4"), Polynomial.zero()),
    ])
    update = {
        "x1": _poly("3*x1 + 2*x2"),
        "x2": _poly("-5*x1 - 3*x2"),
        "x3": _poly("x3"),
        "x4": _poly("-2*x4"),
        "y1": _poly("3*y1 + y1^2 + x3^2"),
        "y2": _poly("3*y2 + 2*y1^2 + x3^2"),
    }
    return Loop.make(guard, update)


@pytest.fixture(scope="session")
def restricted_tnn_loop(flagship_loop) -> Loop:
    """The chained flagship loop restricted to its guard-relevant variables."""
    chained = flagship_loop.chained(2)
    return chained.restricted(chained.relevant_variables())


def find_smt_solver():
    """Path of an SMT solver command, or None."""
    env = os.environ.get("LOOPBOUND_SMT")
    if env:
        return env
    found = shutil.which("z3")
    if found:
        return found
    local = os.path.join(os.path.dirname(__file__), "..", "tools", "z3cli", "z3")
    local = os.path.abspath(local)
    if os.access(local, os.X_OK):
        return local
    return None


@pytest.fixture(scope="session")
def smt_solver():
    return find_smt_solver()


@pytest.fixture()
def rng():
    return random.Random(20240817)
