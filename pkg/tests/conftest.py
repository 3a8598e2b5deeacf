import os
import tempfile

import pytest

# hermetic operator/result cache unless the caller points at a warm one
if "HYLDOT_CACHE_DIR" not in os.environ:
    os.environ["HYLDOT_CACHE_DIR"] = tempfile.mkdtemp(prefix="hyldot-test-cache-")

from hyldot.basis import BasisSet  # noqa: E402
from hyldot.eigensolvers import solve_state  # noqa: E402
from hyldot.matrix_elements import ModelParams  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def helium10():
    return solve_state(BasisSet(10, "even", 3.0), ModelParams.free_space(-2.0))


@pytest.fixture(scope="session")
def helium14():
    return solve_state(BasisSet(14, "even", 3.0), ModelParams.free_space(-2.0))


@pytest.fixture(scope="session")
def dot_singlet():
    """Moderately correlated trapped singlet."""
    return solve_state(BasisSet(8, "even", 1.4), ModelParams.scaled_dot(-0.4, 2.0))


@pytest.fixture(scope="session")
def dot_triplet():
    return solve_state(BasisSet(8, "odd", 1.4), ModelParams.scaled_dot(-0.4, 2.0))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
