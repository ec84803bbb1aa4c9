import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# derandomized so the suite is reproducible run to run
settings.register_profile("default", max_examples=40, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("fast", max_examples=8, deadline=None, derandomize=True)
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

np.seterr(all="warn", under="ignore")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# --- acceptance summary: one line per criterion ------------------------------------

_CRITERIA: dict[int, bool] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "call" or rep.failed:
        k = mark.args[0]
        _CRITERIA[k] = _CRITERIA.get(k, True) and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {k}: {'PASS' if _CRITERIA[k] else 'FAIL'}")
