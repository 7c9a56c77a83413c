import contextlib
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from morphopt.morphology import nominal_morphology
from morphopt.planar import SimConfig

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA: list[tuple[str, bool, str, float]] = []


@pytest.fixture(scope="session")
def nominal():
    return nominal_morphology()


@pytest.fixture(scope="session")
def sim():
    return SimConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """``with criterion(name) as info:`` records one pass/fail line; set ``info["detail"]``."""

    @contextlib.contextmanager
    def run(name: str):
        info = {"detail": ""}
        start = time.perf_counter()
        ok = False
        try:
            yield info
            ok = True
        finally:
            elapsed = time.perf_counter() - start
            _CRITERIA.append((name, ok, info["detail"], elapsed))
            print(_line(name, ok, info["detail"], elapsed))

    return run


def _line(name, ok, detail, elapsed):
    return f"{'PASS' if ok else 'FAIL'}  {name}: {detail} [{elapsed:.1f} s]"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for row in _CRITERIA:
        terminalreporter.write_line(_line(*row))
    passed = sum(ok for _, ok, _, _ in _CRITERIA)
    terminalreporter.write_line(f"{passed}/{len(_CRITERIA)} criteria passed")
