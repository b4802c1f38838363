import numpy as np
import pytest

from posterior_ts.rng import RngStream

THETA0_TOY = np.array([0.2, 0.4])
GAMMA_TOY = 0.25


@pytest.fixture
def rng():
    return RngStream(12345, 1)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
