import os

import numpy as np
import pytest

from pwlandscape import lattice, potential
from pwlandscape.basis import build_basis

SQRT5M1 = np.sqrt(5.0) - 1.0
A_HEX = np.array([[1.0, 1.0], [-np.sqrt(3.0), np.sqrt(3.0)]])


def pytest_collection_modifyitems(config, items):
    if os.environ.get("PWLANDSCAPE_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="slow; set PWLANDSCAPE_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


_CRITERIA = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = dict(item.user_properties).get("detail", "")
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        _CRITERIA.append((str(mark.args[0]), status, mark.args[1], detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid, status, text, detail in _CRITERIA:
        line = f"criterion {cid:<3} {status}  {text}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))


def ex1_lattices():
    l1, l2 = lattice.make_lattice(1, 2.0), lattice.make_lattice(1, SQRT5M1)
    return l1, l2, lattice.reciprocal(l1), lattice.reciprocal(l2)


def ex2_lattices(twist=5.0):
    l1 = lattice.make_lattice(2, A_HEX)
    l2 = lattice.rotate(lattice.make_lattice(2, A_HEX), twist)
    return l1, l2, lattice.reciprocal(l1), lattice.reciprocal(l2)


def ex1_setup(W, L, s1=3.0, s2=2.0, gamma=0.05):
    _, _, r1, r2 = ex1_lattices()
    b = build_basis(r1, r2, W, L)
    return b, potential.gaussian_potential(r1, s1, gamma), potential.gaussian_potential(r2, s2, gamma)


def constant_pair(r1, r2, c1=3.0, c2=2.0):
    z = [0] * r1.dim
    z = z[0] if r1.dim == 1 else z
    return (potential.potential_from_modes(r1, [(z, c1, 0.0)]),
            potential.potential_from_modes(r2, [(z, c2, 0.0)]))


@pytest.fixture(scope="session")
def ex1_small():
    return ex1_setup(20.0, 50.0)
