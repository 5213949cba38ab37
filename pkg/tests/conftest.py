"""Shared fixtures: the two reference scenarios run once per session."""

import time

import pytest

from driveobs.scenarios import (ImScenario, WrsmScenario, run_im_scenario,
                                run_wrsm_scenario)


@pytest.fixture(scope="session")
def wrsm_run():
    """Full default WRSM scenario trace plus its wall-clock time."""
    t0 = time.perf_counter()
    trace = run_wrsm_scenario(WrsmScenario())
    return trace, time.perf_counter() - t0


@pytest.fixture(scope="session")
def im_run():
    """Full default IM scenario trace plus its wall-clock time."""
    t0 = time.perf_counter()
    trace = run_im_scenario(ImScenario())
    return trace, time.perf_counter() - t0
