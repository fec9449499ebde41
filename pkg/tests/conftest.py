import numpy as np
import pytest

from oqwalk.linalg import DensityMatrix
from oqwalk.walkspec import load_rule

_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one of the ten release criteria")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for key, value in report.user_properties:
        if key == "acceptance":
            _ACCEPTANCE[value] = (report.passed, report.duration)


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            item.user_properties.append(("acceptance", mark.args))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), (passed, duration) in sorted(_ACCEPTANCE.items()):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}  ({duration:.2f} s)")


def random_density(rng, n: int, rank: int | None = None) -> DensityMatrix:
    rank = n if rank is None else rank
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    m = g @ g.conj().T
    m = m / np.trace(m).real
    return DensityMatrix((m + m.conj().T) / 2)


def random_kraus_pair(rng, n: int = 2):
    """Random ``(L, R)`` with ``L^*L + R^*R = I`` from a random isometry."""
    g = rng.normal(size=(2 * n, n)) + 1j * rng.normal(size=(2 * n, n))
    q, _ = np.linalg.qr(g)
    return q[:n], q[n:]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def hadamard_rule():
    return load_rule("hadamard")


@pytest.fixture(scope="session")
def nonnormal_rule():
    return load_rule("nonnormal_drift")
