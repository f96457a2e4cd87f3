import time

import pytest
from hypothesis import settings

from sarpsim import dynamics as dyn
from sarpsim.sweeps import DynSetup

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return dyn.QdParams()


@pytest.fixture(scope="session")
def cal(params):
    # shares the sweep runners' cache, so the pi power is solved once per session
    return DynSetup(params).calibration()


@pytest.fixture(scope="session")
def recipe0():
    return dyn.default_recipe(gdd=0.0)


@pytest.fixture(scope="session")
def recipe45():
    return dyn.default_recipe(gdd=45.0)


@pytest.fixture
def report(request):
    """Record one acceptance line; printed again in the terminal summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def _report(tag, ok, detail):
        line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return _report


def pytest_sessionstart(session):
    session.config._started = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for ln in lines:
        terminalreporter.write_line(ln)
    elapsed = time.perf_counter() - config._started
    terminalreporter.write_line(f"suite wall time {elapsed:.0f} s (limit 600 s): "
                                f"{'PASS' if elapsed < 600 else 'FAIL'}")
