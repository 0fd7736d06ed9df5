import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sysalias.kernels import _jit, _ref  # noqa: E402

BACKENDS = [pytest.param(_ref, id="numpy")]
if _jit is not None:
    BACKENDS.append(pytest.param(_jit, id="numba"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Kernel module, run once per available backend."""
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stable(rng, n, shift=0.5):
    A = rng.standard_normal((n, n))
    lam = np.linalg.eigvals(A)
    return A - (np.max(lam.real) + shift) * np.eye(n)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not rep.failed:
        return
    label = marker.args[0]
    if rep.when != "call":
        RESULTS[label] = f"FAIL (error in {rep.when})"
    elif hasattr(rep, "wasxfail"):
        RESULTS[label] = "FAIL (expected failure)" if rep.skipped else "PASS (unexpectedly)"
    else:
        RESULTS[label] = f"{'PASS' if rep.passed else 'FAIL'} ({rep.duration:.1f} s)"


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(RESULTS):
        terminalreporter.write_line(f"criterion {label}: {RESULTS[label]}")
