import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fexkit.fexdata import AU_NAMES, EMOTION_NAMES, FexTable
from fexkit.geometry import neutral_template

settings.register_profile(
    "fexkit", derandomize=True, deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("fexkit")

_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        number, title = marker.args
        _ACCEPTANCE.append((number, title, rep.passed, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, duration in sorted(_ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}  ({duration:.2f} s)")


@pytest.fixture
def template():
    return neutral_template()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_table(rng, n, sessions=("a", "b"), extras=False, nan_frac=0.1):
    """Finite-or-NaN random table obeying the schema invariants."""
    cols = {}
    for name in AU_NAMES + EMOTION_NAMES:
        v = rng.random(n)
        v[rng.random(n) < nan_frac] = np.nan
        cols[name] = v
    lm = rng.normal(100, 20, (n, 136))
    lm[rng.random(n) < nan_frac] = np.nan
    for j in range(68):
        cols[f"x_{j}"] = lm[:, j]
        cols[f"y_{j}"] = lm[:, 68 + j]
    cols["FaceRectX"] = rng.normal(50, 5, n)
    cols["FaceRectY"] = rng.normal(50, 5, n)
    cols["FaceRectWidth"] = rng.uniform(10, 100, n)
    cols["FaceRectHeight"] = rng.uniform(10, 100, n)
    cols["FaceScore"] = rng.random(n)
    sess = [sessions[i % len(sessions)] for i in range(n)] if sessions else None
    frame = np.arange(n) * 2
    cols["time_s"] = frame / 30.0
    ex = {"note": [f"r{i}" for i in range(n)]} if extras else None
    return FexTable.from_columns(n, cols, frame=frame, sessions=sess, extras=ex)
