import math

import numpy as np
import pytest
from scipy import integrate as sci

from bufferloop.errors import NumericalFailure
from bufferloop.quadrature import gk15, integrate


@pytest.mark.parametrize("deg", range(0, 24))
def test_single_panel_exact_to_degree_23(deg):
    v, _ = gk15(lambda x: x ** deg, 0.0, 1.0)
    assert v == pytest.approx(1.0 / (deg + 1), rel=1e-13)


@pytest.mark.parametrize("f,a,b,exact", [
    (np.exp, 0.0, 1.0, math.e - 1.0),
    (np.sin, 0.0, math.pi, 2.0),
    (lambda x: 1.0 / (1.0 + x * x), 0.0, 1e3, math.atan(1e3)),
    (lambda x: np.log(x), 0.0, 1.0, -1.0),
])
def test_against_closed_forms(f, a, b, exact):
    res = integrate(f, a, b, abs_tol=1e-10, rel_tol=1e-10)
    assert res.value == pytest.approx(exact, abs=1e-8)


def test_matches_scipy_on_peaked_integrand():
    f = lambda x: 1.0 / ((x - 0.3) ** 2 + 1e-4)  # noqa: E731
    ref, _ = sci.quad(f, 0.0, 1.0, points=[0.3], limit=200)
    res = integrate(f, 0.0, 1.0, breakpoints=[0.3], abs_tol=1e-9, rel_tol=1e-11)
    assert res.value == pytest.approx(ref, rel=1e-9)


def test_breakpoints_outside_ignored():
    res = integrate(np.cos, 0.0, 1.0, breakpoints=[-1.0, 0.5, 2.0])
    assert res.value == pytest.approx(math.sin(1.0), abs=1e-12)


def test_interval_cap():
    with pytest.raises(NumericalFailure):
        integrate(lambda x: np.sign(np.sin(1e4 * x)), 0.0, 1.0, abs_tol=1e-14, rel_tol=1e-14, max_intervals=20)


def test_reversed_interval():
    with pytest.raises(ValueError):
        integrate(np.exp, 1.0, 0.0)
