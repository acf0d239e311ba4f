import math

import numpy as np
import pytest

from npspectra import geometry, layerpot


@pytest.fixture(scope="session")
def disk():
    return geometry.rescale_to_normal(geometry.disk(1.0))


@pytest.fixture(scope="session")
def ellipse():
    return geometry.rescale_to_normal(geometry.ellipse(2.0, 1.0))


@pytest.fixture(scope="session")
def square():
    return geometry.rescale_to_normal(geometry.square(1.0))


@pytest.fixture(scope="session")
def ellipse_ops(ellipse):
    mesh = geometry.build_boundary_mesh(ellipse, n_nodes=256)
    return mesh, layerpot.assemble_operators(mesh)


@pytest.fixture(scope="session")
def square_ops(square):
    mesh = geometry.build_boundary_mesh(square, panels_per_edge=4, grading_levels=6)
    return mesh, layerpot.assemble_operators(mesh)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ellipse_levels(n=3):
    """(a - b)/(a + b) powers for the 2:1 ellipse."""
    return [(1.0 / 3.0) ** k for k in range(1, n + 1)]


PI = math.pi


# one summary line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = {}


def record_criterion(number: int, ok: bool, detail: str, seconds: float) -> None:
    status = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {status}  {detail}  [{seconds:.1f} s]"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
