import numpy as np
import pytest

from adaptsde.oracles import AnalyticScore, random_gaussian_model
from adaptsde.processes import VEProcess, VPProcess

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def vp():
    return VPProcess()


@pytest.fixture
def ve():
    return VEProcess()


@pytest.fixture
def gauss_vp():
    p = VPProcess()
    return p, AnalyticScore(random_gaussian_model(3, np.random.default_rng(0)), p)


@pytest.fixture
def gauss_ve():
    p = VEProcess()
    return p, AnalyticScore(random_gaussian_model(3, np.random.default_rng(1)), p)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        tr.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
