import numpy as np
import pytest
from hypothesis import settings

from spectral_levy.distortions import ExpDistortionParams, exp_distortion_pair
from spectral_levy.levy import BGParams, make_jump_grid

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")

SPY = BGParams(0.0075, 1.5592, 0.0181, 0.6308)
GMM_DIST = ExpDistortionParams(0.01, 0.25, 100.0, 1.0)

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def spy():
    return SPY


@pytest.fixture(scope="session")
def gmm_pair():
    return exp_distortion_pair(GMM_DIST)


@pytest.fixture(scope="session")
def spy_grid():
    return make_jump_grid(SPY, n_per_side=400)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key:>4} {'PASS' if ok else 'FAIL'}  {detail}")
