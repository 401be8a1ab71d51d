import functools

import numpy as np
import pytest

from dgxfem.geometry import CartesianMesh, partition_mesh
from dgxfem.problems import circle_case, linear_jump_case
from dgxfem.space import build_space, kappa_weights


@functools.lru_cache(maxsize=None)
def discretization(n, p, alpha=(10.0, 1.0), case="circle"):
    """Mesh, partition, space and kappa weights, cached across tests."""
    ls, problem = circle_case(*alpha) if case == "circle" else linear_jump_case(*alpha)
    mesh = CartesianMesh(n)
    part = partition_mesh(mesh, ls, 2 * p + 4)
    space = build_space(mesh, part, p)
    return dict(ls=ls, problem=problem, mesh=mesh, part=part, space=space,
                kappa=kappa_weights(part))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail):
    line = f"CRITERION {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
