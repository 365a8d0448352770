import numpy as np
import pytest
from hypothesis import settings
from scipy.ndimage import gaussian_filter

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def smooth_texture(size: int, seed: int = 0, sigma: float = 2.0) -> np.ndarray:
    """Band-limited random texture in [0, 1]."""
    rng = np.random.default_rng(seed)
    t = gaussian_filter(rng.random((size, size)), sigma, mode="wrap")
    return (t - t.min()) / (t.max() - t.min())


@pytest.fixture
def texture():
    return smooth_texture


_CRITERIA: dict[int, tuple[str, bool, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _CRITERIA[number] = (title, rep.passed, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, duration = _CRITERIA[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}  {verdict}  {duration:6.2f}s  {title}")
