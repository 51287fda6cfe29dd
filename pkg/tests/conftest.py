import numpy as np
import pytest

from radmap.dataset_io import Odometry


def identity_quat(n=1):
    q = np.zeros((n, 4))
    q[:, 0] = 1.0
    return q


def stationary_odometry(t_end=1.0, position=(0.0, 0.0, 0.0)):
    return Odometry([0.0, t_end], [position, position], identity_quat(2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance reporting ------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA[marker.args[0]] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}")
