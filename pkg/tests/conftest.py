import numpy as np
import pytest
from hypothesis import settings

from perfectsim.kernels import (AlternatingRenewalKernel, ChangepointBinaryKernel,
                                GeneralizedWalkKernel, MarkovKernel)

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def renewal_03_06():
    """p_1(i,i) = 0.3, p_h(i,i) = 0.6 for h >= 2: an order-2 chain."""
    return AlternatingRenewalKernel.symmetric([0.3], 0.6)


def renewal_hard():
    return AlternatingRenewalKernel.sqrt_rule()


def changepoint():
    return ChangepointBinaryKernel()


def walk3():
    """Three letters, every arc w -> g with g != w, rotation-modulated by three past steps."""
    arcs = [(w, g) for w in range(3) for g in range(3) if g != w]
    return GeneralizedWalkKernel(3, arcs, (0.15, 0.1, 0.05))


def iid_kernel(q=0.3):
    return MarkovKernel([[1 - q, q], [1 - q, q]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


BUNDLED = {
    "renewal": renewal_03_06,
    "renewal_hard": renewal_hard,
    "changepoint": changepoint,
    "walk": walk3,
}


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
