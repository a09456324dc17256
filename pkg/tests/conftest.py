"""Shared fixtures.

Period computations are the slow part of the suite, so the period data of
the standard fixtures is computed once per session.
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from drsurf.critical_maps import square_torus, tri_hex_torus
from drsurf.fixtures import genus_two, noncritical_torus, tri_hex_params
from drsurf.harmonic_period import compute_periods
from drsurf.homology import canonical_dissection, canonical_dissection_of


def periods_of_map(m):
    return compute_periods(canonical_dissection(list(m.basis), m.dc))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def square_pi4():
    return square_torus(1, 1, math.pi / 4)


@pytest.fixture(scope="session")
def square_23():
    return square_torus(2, 3, math.pi / 3)


@pytest.fixture(scope="session")
def square_23_periods(square_23):
    return periods_of_map(square_23)


@pytest.fixture(scope="session")
def tri_hex():
    return tri_hex_torus(tri_hex_params((1.0, 0.9)), m=3, n=2)


@pytest.fixture(scope="session")
def tri_hex_periods(tri_hex):
    return periods_of_map(tri_hex)


@pytest.fixture(scope="session")
def genus2():
    return genus_two(seed=3)


@pytest.fixture(scope="session")
def genus2_periods(genus2):
    return compute_periods(canonical_dissection_of(genus2))


@pytest.fixture(scope="session")
def noncritical():
    return noncritical_torus(seed=5)


@pytest.fixture(scope="session")
def noncritical_periods(noncritical):
    return compute_periods(canonical_dissection_of(noncritical))


@pytest.fixture(scope="session")
def all_period_data(square_23_periods, tri_hex_periods, genus2_periods, noncritical_periods):
    return {
        "square_2_3": square_23_periods,
        "tri_hex_3x2": tri_hex_periods,
        "genus_two": genus2_periods,
        "noncritical_torus": noncritical_periods,
    }


# ------------------------------------------------------- acceptance summary

_CRITERIA = {
    "test_c01_square_torus_gram": "square-torus Gram matrix",
    "test_c02_square_torus_period_matrix": "square-torus period matrix",
    "test_c03_tri_hex_modulus": "triangular/hexagonal torus modulus",
    "test_c04_structural_identities": "structural identities on every fixture",
    "test_c05_bilinear_relations": "bilinear relations",
    "test_c06_exponential": "discrete exponential",
    "test_c07_powers": "discrete powers",
    "test_c08_young_machinery": "Young machinery",
    "test_c09_electrical_moves": "electrical moves",
    "test_c10_ramification": "ramification numbers",
    "test_c11_convergence_sweep": "convergence sweep",
}
_acceptance = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if name not in _CRITERIA:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        props = dict(report.user_properties)
        _acceptance[name] = ("PASS" if report.passed else "FAIL", props.get("measured", ""))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for i, (name, title) in enumerate(_CRITERIA.items(), start=1):
        if name in _acceptance:
            status, measured = _acceptance[name]
            terminalreporter.write_line(f"{status}  C{i:<2} {title}: {measured}")
