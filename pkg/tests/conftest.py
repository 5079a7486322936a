"""Shared long simulations, computed once per session."""

import pytest

from optosync.classical import IntegratorConfig, integrate
from optosync.model import ClassicalState, SystemParams


@pytest.fixture(scope="session")
def baseline_params():
    return SystemParams.baseline(eta=3600.0)


@pytest.fixture(scope="session")
def baseline_run(baseline_params):
    """Reference synchronised trajectory, eta = 3600, t_end = 3e4."""
    return integrate(ClassicalState.seed(), baseline_params,
                     IntegratorConfig(t_end=3e4))


@pytest.fixture(scope="session")
def criterion(request):
    """Record one pass/fail line per acceptance criterion."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        return passed
    return record


_LINES = pytest.StashKey()


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
