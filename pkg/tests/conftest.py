import numpy as np
import pytest

from harmonic_asymptotics import PolynomialSpec, combine, make_harmonic_polynomial


def poly(d, k, *coeffs):
    return make_harmonic_polynomial(PolynomialSpec(d, k, list(coeffs)))


def P(k, d=2):
    """Normalized cos-type degree-k harmonic: r^k cos k theta in 2D."""
    from harmonic_asymptotics import _poly
    c = np.zeros(_poly.basis_length(d, k))
    c[0] = 1.0
    return make_harmonic_polynomial(PolynomialSpec(d, k, list(c)))


def mix(*pairs):
    fields, weights = zip(*pairs)
    return combine(list(fields), list(weights))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def polar(r, t):
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
