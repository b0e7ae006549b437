import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hermitian(d, rng):
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return M + M.conj().T


# one summary line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record ``(number, detail)`` for the terminal summary; outcome comes from the test result."""
    number = request.node.get_closest_marker("criterion").args[0]
    ACCEPTANCE[number] = {"detail": "did not finish", "ok": False}

    def note(detail):
        ACCEPTANCE[number]["detail"] = detail

    yield note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and rep.when == "call":
        entry = ACCEPTANCE.setdefault(marker.args[0], {"detail": "", "ok": False})
        entry["ok"] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        entry = ACCEPTANCE[number]
        status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['detail']}")
