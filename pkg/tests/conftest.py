import numpy as np
import pytest

from gldual.grid import DIRICHLET, GridSpec, ScalarField
from gldual.primal import GLParams, manufactured_source, solve_critical

CRITERIA_LINES = []


def record_criterion(number, ok, detail):
    """Print and remember one pass/fail line for an acceptance criterion."""
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES):
            terminalreporter.write_line(line)


def neumann_instance(nodes=17, gamma=0.05, eps=1e-3, seed_shape=None, dim=1):
    grid = GridSpec.line(nodes) if dim == 1 else GridSpec.square(nodes)
    p = GLParams(grid, gamma, 1.0, 1.0, eps)
    if seed_shape is None:
        u_init = ScalarField.zeros(grid)
    else:
        u_init = ScalarField.from_function(grid, seed_shape)
    return p, solve_critical(p, u_init)


def manufactured_instance(nodes=17, eps=1e-3, extent=1.0, gamma=1.0, alpha=1.0, beta=1.0):
    grid = GridSpec.line(nodes, extent, DIRICHLET)
    u_star = ScalarField.from_function(grid, lambda x: np.sin(np.pi * x / extent))
    f = manufactured_source(grid, gamma, alpha, beta, u_star)
    p = GLParams(grid, gamma, alpha, beta, eps, f)
    return p, u_star


def cosine(k, amp=0.3):
    return lambda x: amp * np.cos(k * np.pi * x)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
