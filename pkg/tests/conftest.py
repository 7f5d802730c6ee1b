import math

import numpy as np
import pytest

from tfwater import heat
from tfwater.weyl import gaussian_symbol, spectrum, symbol_to_kernel

# criterion lines collected by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def gauss():
    return gaussian_symbol(1.0)


@pytest.fixture(scope="session")
def discrete_spectra(gauss):
    """Discretized operator and its spectrum for the unit Gaussian symbol, by r."""
    cache = {}

    def get(r, vectors=False):
        key = (r, vectors)
        if key not in cache:
            op = symbol_to_kernel(gauss, r)
            cache[key] = (op, spectrum(op, vectors=vectors))
        return cache[key]

    return get


def analytic_lambdas(r, floor=1e-30):
    return heat.model(1.0, r).eigenvalues(floor)


def mehler_kernel(r, gamma, t, s):
    """Closed-form kernel of P_r for the Gaussian symbol from Mehler's formula.

    sum_k rho^k H_k(x) H_k(y) = exp(-((1+rho^2)(x^2+y^2) - 4 rho x y) / (2 (1-rho^2))) / sqrt(pi (1-rho^2))
    """
    m = heat.model(gamma, r)
    x = np.asarray(t)[:, None] / gamma
    y = np.asarray(s)[None, :] / gamma
    rho = m.rho
    q = 1.0 - rho * rho
    core = np.exp(-((1 + rho * rho) * (x * x + y * y) - 4 * rho * x * y) / (2 * q)) / math.sqrt(math.pi * q)
    return m.c * math.sqrt(rho) * core / gamma
