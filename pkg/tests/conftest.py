import math

import numpy as np
import pytest

from uclab import zoo

ACCEPTANCE_LINES: list[str] = []  # filled by test_acceptance, echoed in the summary


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def planar_abs_grad(u, z):
    """|grad u| for a planar spherical-harmonic sum via u = Re f, |grad u| = |f'(z)|.

    Independent of the polynomial machinery: it reads the serialised terms
    and evaluates the complex derivative directly.
    """
    coef = {}
    for t in u.to_dict()["terms"]:
        d, m, a = t["degree"], t["order"], float(t["amplitude"])
        coef[d] = coef.get(d, 0) + (a if m >= 0 else -1j * a) / math.sqrt(math.pi * (2 if d == 0 else 1))
    return np.abs(sum(d * c * z ** (d - 1) for d, c in coef.items() if d > 0))


def dense_circle_sup(absgrad, center: complex, radius: float, samples: int = 10**6) -> float:
    """Brute-force sup of |grad u| over a disk (attained on the boundary circle)."""
    th = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    return float(absgrad(center + radius * np.exp(1j * th)).max())


@pytest.fixture(scope="session")
def saddle():
    return zoo.saddle(2)


@pytest.fixture(scope="session")
def linear2():
    return zoo.linear(2)
