import numpy as np
import pytest

from resolventlab.kernels import BACKEND


def pytest_report_header(config):
    return f"resolventlab kernel backend: {BACKEND}"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = []


@pytest.fixture
def acceptance_log():
    """Collects one verdict line per acceptance criterion for the run summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
