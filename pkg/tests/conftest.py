import sys

import numpy as np
import pytest

from gsiga.assembly import QuadratureGrid, l2_project
from gsiga.geometry import sphere_patch
from gsiga.space import SplineSpace


def naive_cox_de_boor(knots, p, i, x):
    """Textbook recursion with 0/0 = 0; half-open spans, x = 1 joins the last
    non-empty span."""
    t = np.asarray(knots, dtype=float)
    if p == 0:
        if t[i] <= x < t[i + 1]:
            return 1.0
        last = np.flatnonzero(t < t[-1]).max()
        return 1.0 if (x == t[-1] and i == last) else 0.0
    out = 0.0
    d1 = t[i + p] - t[i]
    if d1 > 0:
        out += (x - t[i]) / d1 * naive_cox_de_boor(t, p - 1, i, x)
    d2 = t[i + p + 1] - t[i + 1]
    if d2 > 0:
        out += (t[i + p + 1] - x) / d2 * naive_cox_de_boor(t, p - 1, i + 1, x)
    return out


_SPHERES = {}


def projected_sphere(n, p, R=40.0):
    """(space, quad, control points) of the projected cube sphere."""
    key = (n, p, R)
    if key not in _SPHERES:
        space = SplineSpace.uniform(n, p)
        quad = QuadratureGrid(space)
        e = l2_project(lambda f, x, y: sphere_patch(f, x, y, R), quad)
        _SPHERES[key] = (space, quad, e)
    return _SPHERES[key]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
