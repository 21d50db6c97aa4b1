"""Shared strategies and fixtures."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import settings, strategies as st

from decotrees import DegreeParams, noise, plant, poly, tree_product, unit
from decotrees.trees import NONE, XI0, XI1

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

INDICES = [(0, 0), (0, 1), (0, 2), (1, 0)]


def _leaf():
    return st.sampled_from([unit(1), noise(XI0), noise(XI1), poly((0, 1)), poly((1, 0)), poly((0, 2))])


def _product(a, b):
    if a.noise != NONE and b.noise != NONE:
        return a
    return tree_product(a, b)


def _extend(children):
    planted = st.builds(plant, st.sampled_from(INDICES), children)
    return st.one_of(planted, st.builds(_product, children, children))


#: Small decorated trees over d = 1, with at most one noise per node.
trees = st.recursive(_leaf(), _extend, max_leaves=6)


def _no_xi1(t) -> bool:
    return all(n.noise != XI1 for n in t.nodes())


#: Trees without Xi1, the domain of the Malliavin derivative.
trees0 = trees.filter(_no_xi1)


@pytest.fixture(scope="session")
def params() -> DegreeParams:
    return DegreeParams()


@pytest.fixture(scope="session")
def params_half() -> DegreeParams:
    """alpha = -3/2, used by the hand-worked examples."""
    return DegreeParams(alpha=Fraction(-3, 2))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
