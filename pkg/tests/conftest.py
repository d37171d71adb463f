import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ferrosim.flow import FlowConfig, run  # noqa: E402
from ferrosim.potential import ModelParams  # noqa: E402

_RUNS = {}


def flow_run(eps, k=1, beta=1.0, n=50, tau=1e-3, t_end=1.0):
    """The reference gradient-flow runs, computed once per session.

    Returns ``(FlowResult, wall seconds)``.
    """
    key = (eps, k, beta, n, tau, t_end)
    if key not in _RUNS:
        cfg = FlowConfig(ModelParams(beta, eps), grid_n=n, tau=tau, t_end=t_end, k=k,
                         stop_when_steady=False)
        t0 = time.perf_counter()
        res = run(cfg)
        _RUNS[key] = (res, time.perf_counter() - t0)
    return _RUNS[key]


@pytest.fixture(scope="session")
def flows():
    return flow_run


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[num])
