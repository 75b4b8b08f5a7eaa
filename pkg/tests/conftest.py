import pytest

from twinmesh.metrics import compute_metrics
from twinmesh.scenario import builtin_scenario
from twinmesh.sim import run
from twinmesh.strategies import StrategyKind


@pytest.fixture(scope="session")
def builtin():
    return builtin_scenario()


@pytest.fixture(scope="session")
def builtin_runs(builtin):
    return {s: run(builtin, s) for s in StrategyKind}


@pytest.fixture(scope="session")
def builtin_metrics(builtin_runs):
    return {s: compute_metrics(r) for s, r in builtin_runs.items()}


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
