import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bufferloop.errors import DegenerateInputError, PoleProximityError, UnboundedLimitError
from bufferloop.ratcalc import (
    Polynomial,
    RationalTF,
    laurent_at_infinity,
    limit_sL,
    minreal_report,
    poly_roots,
    tf_arith,
    tf_eval,
    tf_minreal,
)

SQRT5 = math.sqrt(5.0)


def test_quadratic_roots():
    rs = poly_roots(Polynomial([-1.0, 4.0, 1.0]))
    got = sorted(r.real for r in rs)
    assert got[0] == pytest.approx(-2 - SQRT5, abs=1e-12)
    assert got[1] == pytest.approx(-2 + SQRT5, abs=1e-12)
    assert [r.real for r in rs.rhp] == pytest.approx([SQRT5 - 2])


def test_linear_root():
    assert poly_roots(Polynomial([1.0, 1.0])).expanded() == [-1.0]


def test_imaginary_pair_is_on_axis():
    rs = poly_roots(Polynomial([1.0, 0.0, 1.0]))
    assert len(rs.on_axis) == 2
    assert sorted(r.imag for r in rs) == pytest.approx([-1.0, 1.0], abs=1e-14)
    assert len(rs.rhp) == 0 and len(rs.lhp) == 0


def test_constant_polynomial_rejected():
    with pytest.raises(DegenerateInputError):
        poly_roots(Polynomial([3.0]))


def test_zero_roots_split_off():
    rs = poly_roots(Polynomial([0.0, 0.0, 2.0, 1.0]))
    assert sorted(rs.expanded(), key=lambda r: r.real) == [-2.0, 0.0, 0.0]


@pytest.mark.parametrize("roots,mult", [
    ([-1, -1], {-1: 2}),
    ([-1, -1, -1, 2, 2], {-1: 3, 2: 2}),
    ([-0.5] * 4 + [3], {-0.5: 4, 3: 1}),
])
def test_multiple_roots_merge(roots, mult):
    rs = poly_roots(Polynomial.from_roots(roots))
    got = {round(r.real, 9): m for r, m in zip(rs.roots, rs.multiplicities)}
    assert got == mult


def test_close_distinct_roots_stay_apart():
    rs = poly_roots(Polynomial.from_roots([-1.0, -1.0001]))
    assert rs.multiplicities == (1, 1)


def test_conjugates_exactly_symmetric():
    rs = poly_roots(Polynomial.from_roots([0.3 + 1j, 0.3 - 1j, -2.0, 1 + 5j, 1 - 5j]))
    cplx = [r for r in rs if r.imag != 0]
    for r in cplx:
        assert r.conjugate() in cplx


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=8))
def test_roots_round_trip(roots):
    # distinct-enough roots so the problem stays well conditioned
    rs = sorted(roots)
    if any(b - a < 1e-2 for a, b in zip(rs, rs[1:])):
        return
    got = sorted(r.real for r in poly_roots(Polynomial.from_roots(rs)).expanded())
    np.testing.assert_allclose(got, rs, atol=1e-6 * (1 + max(abs(r) for r in rs)) ** 2)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=7))
def test_backward_error_small(coeffs):
    if abs(coeffs[-1]) < 1e-3:
        return
    # normwise backward error: clustered roots may sit a rounding-size step off
    p = Polynomial(coeffs)
    norm = float(np.sum(np.abs(p.coeffs)))
    for r in poly_roots(p).expanded():
        assert abs(p(r)) <= 1e-8 * norm * max(1.0, abs(r)) ** p.degree


def test_common_denominator_sum():
    g = RationalTF([0.0, 1.0], [1.0, 1.0]) + RationalTF([1.0], [1.0, 1.0])
    assert list(g.num.coeffs) == [1.0, 1.0]
    assert list(g.den.coeffs) == [1.0, 1.0]


def test_product_convolves():
    g = RationalTF([1.0], [1.0, 1.0]) * RationalTF([1.0], [2.0, 1.0])
    assert list(g.den.coeffs) == [2.0, 3.0, 1.0]
    assert list(g.num.coeffs) == [1.0]


def test_self_division_not_reduced():
    a = RationalTF([0.0, 1.0], [1.0, 1.0])
    g = tf_arith(a, a, "div")
    assert g.num.degree == 2 and g.den.degree == 2
    assert tf_minreal(g) == RationalTF.constant(1.0)


def test_division_by_zero_tf():
    with pytest.raises(ZeroDivisionError):
        RationalTF([1.0], [1.0, 1.0]) / RationalTF([0.0])


def test_monic_denominator():
    g = RationalTF([2.0], [4.0, 2.0])
    assert g.den.leading == 1.0
    assert list(g.num.coeffs) == [1.0]


def test_minreal_exact_cancellation():
    g = RationalTF(Polynomial.from_roots([-1, -2]), Polynomial.from_roots([-1, -3]))
    r = tf_minreal(g)
    np.testing.assert_allclose(r.num.coeffs, [2.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(r.den.coeffs, [3.0, 1.0], atol=1e-12)


def test_minreal_gap_above_tolerance():
    g = RationalTF([-0.236068, 1.0], [-0.236067, 1.0])
    assert tf_minreal(g, cancel_tol=1e-9) == g


def test_minreal_full_cancellation():
    assert tf_minreal(RationalTF([0.0, 1.0], [0.0, 1.0])) == RationalTF.constant(1.0)


def test_minreal_never_crosses_axis():
    g = RationalTF([-5e-9, 1.0], [5e-9, 1.0])
    out, gone = minreal_report(g, cancel_tol=1e-6)
    assert gone == [] and out == g


def test_minreal_reports_cancelled_roots():
    g = RationalTF(Polynomial.from_roots([-1, 4]), Polynomial.from_roots([-1, -1, -2]))
    out, gone = minreal_report(g)
    assert [round(r.real, 12) for r in gone] == [-1.0]
    assert out.den.degree == 2


def test_eval_examples():
    g = RationalTF([0.0, 1.0], [1.0, 1.0])
    assert complex(tf_eval(g, 1j)) == pytest.approx((1 + 1j) / 2)
    assert abs(tf_eval(g, 1j)) == pytest.approx(1 / math.sqrt(2))
    assert tf_eval(g, 0.0) == 0


def test_eval_vectorized():
    g = RationalTF([1.0], [1.0, 1.0])
    w = np.array([0.0, 1.0, 10.0])
    np.testing.assert_allclose(tf_eval(g, 1j * w), 1 / (1 + 1j * w))


def test_eval_at_pole():
    with pytest.raises(PoleProximityError):
        tf_eval(RationalTF([1.0], [1.0, 1.0]), -1.0)


def test_limit_sL():
    assert limit_sL(RationalTF([3.0], [1.0, 1.0])) == pytest.approx(3.0)
    assert limit_sL(RationalTF([1.0], [1.0, 0.0, 1.0])) == 0.0
    with pytest.raises(UnboundedLimitError):
        limit_sL(RationalTF([1.0, 1.0], [2.0, 1.0]))


def test_laurent_expansion():
    # 1/(s+1) = 1/s - 1/s^2 + 1/s^3 ...
    np.testing.assert_allclose(laurent_at_infinity(RationalTF([1.0], [1.0, 1.0]), 4), [0, 1, -1, 1])
    # (s+2)/(s+1) = 1 + 1/s - 1/s^2
    np.testing.assert_allclose(laurent_at_infinity(RationalTF([2.0, 1.0], [1.0, 1.0]), 3), [1, 1, -1])


def test_polynomial_algebra():
    p = Polynomial([1.0, 2.0])
    q = Polynomial([0.0, 1.0])
    assert (p * q).coeffs.tolist() == [0.0, 1.0, 2.0]
    assert (p - p).is_zero
    assert (p + 1).coeffs.tolist() == [2.0, 2.0]
    assert p.derivative().coeffs.tolist() == [2.0]
    assert Polynomial([1.0, 0.0, 0.0]).degree == 0
