"""Session fixtures: small solver runs reused across test modules."""

import pytest

from bilevelbnb.global_solver import run

from helpers import make_setup


@pytest.fixture(scope="session")
def f3_m8_run():
    """A real branch-and-bound trajectory on the hard objective.

    Small element budget: enough subproblems for sampling-based checks
    without dominating the suite's runtime.
    """
    setup = make_setup(objective="F3", solver={"element_limit": 600})
    result = run(setup.problem, setup.lower, setup.config.solver)
    return setup, result


@pytest.fixture(scope="session")
def f2_m8_run():
    """A run that closes its gap, for incumbent/termination checks."""
    setup = make_setup(objective="F2", solver={"gap_tol": 1e-8})
    result = run(setup.problem, setup.lower, setup.config.solver)
    return setup, result
