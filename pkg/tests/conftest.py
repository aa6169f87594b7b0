import numpy as np
import pytest

from fenelab._alloc import tune_allocator
from fenelab.config_space import build_config_grid

tune_allocator()


@pytest.fixture(scope="session")
def grid8():
    return build_config_grid(8, 8, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criterion (slow)")


@pytest.fixture
def criterion(request):
    """Recorder ``criterion(number, ok, detail)`` feeding the summary table."""
    results = request.config.stash[_RESULTS]

    def record(number, ok, detail):
        results[number] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
