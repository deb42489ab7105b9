"""Shared fixtures: the two reference processes used throughout the suite."""
import pytest

from psrlevy import ProcessSpec

BM = ProcessSpec.brownian(mu=0.0, sigma=1.0)
CL = ProcessSpec.cramer_lundberg(c=2.0, eta=1.0, jump_mean_inv=1.0)


@pytest.fixture
def bm():
    return BM


@pytest.fixture
def cl():
    return CL


@pytest.fixture(params=["bm", "cl"])
def spec(request):
    return BM if request.param == "bm" else CL


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts at the end of the run."""
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
