import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from seqpool import evalharness

settings.register_profile("repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def drift4_dir(tmp_path_factory):
    """The default synthetic benchmark written to disk once per session."""
    out = tmp_path_factory.mktemp("drift4")
    evalharness.generate_synthetic(evalharness.drift4(), out)
    return out


# -- acceptance summary: one line per criterion --------------------------------

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_makereport(item, call):
    m = item.get_closest_marker("criterion")
    if m is None or call.when not in ("setup", "call"):
        return
    n, title = m.args
    failed = call.excinfo is not None
    prev = _criteria.get(n, (title, "PASS"))[1]
    if call.when == "call" or failed:
        _criteria[n] = (title, "FAIL" if failed or prev == "FAIL" else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, status = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}")
