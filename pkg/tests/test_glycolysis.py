import math

import numpy as np
import pytest

from bufferloop import glycolysis as gly
from bufferloop.errors import ModelError
from bufferloop.looptf import assemble, build_open_loop
from bufferloop.ratcalc import tf_eval, tf_minreal

FIG3 = gly.GlycolysisParams()
SQRT5 = math.sqrt(5.0)


def test_fig3_linearization_table():
    p = gly.build_plant(FIG3)
    assert (p.A_yy, p.A_yz[0], p.A_zy[0], p.A_zz[0, 0], p.B_yh, p.B_zh[0]) == (-3.0, 2.0, 2.0, -1.0, -3.5, 3.5)
    assert p.phat == 1.0 and p.dhat.dy == -1.0 and p.a_xx == 0.0


def test_q_zero_limit():
    p = gly.build_plant(FIG3.replace(q=0.0))
    assert p.A_yy == FIG3.alpha_w * FIG3.zbar
    assert p.B_yh == 0.0


def test_steady_state_identity_enforced():
    with pytest.raises(ModelError):
        gly.GlycolysisParams(V_y=2.0)
    with pytest.raises(ModelError):
        gly.GlycolysisParams.from_dict({"q": 1.0, "bogus": 2.0})


def test_closed_forms_fig3():
    cf = gly.closed_form_tfs(FIG3.replace(h=1.0))
    assert cf.Gy.den.coeffs.tolist() == [-1.0, 4.0, 1.0]
    assert [r.real for r in cf.Gy.zeros()] == [-1.0]
    assert [r.real for r in cf.Lh.zeros().rhp] == [1.0]
    assert FIG3.z_rhp == 1.0
    poles = sorted(r.real for r in cf.Gy.poles())
    np.testing.assert_allclose(poles, [-2 - SQRT5, -2 + SQRT5], atol=1e-12)


def test_lb_closed_form_values():
    assert gly.lb_at_rhp_zero(FIG3.replace(sigma_y=1.0)) == 0.25
    assert gly.lb_at_rhp_zero(FIG3) == 0.0


def _draw(rng):
    wbar, zbar = rng.uniform(0.3, 3.0, size=2)
    return gly.GlycolysisParams(
        q=rng.uniform(0.2, 3.0), V_y=wbar * zbar, wbar=wbar, zbar=zbar, ybar=rng.uniform(0.5, 2.0),
        alpha_f=rng.uniform(-2.0, 2.0), alpha_w=rng.uniform(-2.0, 0.5), beta_f=rng.uniform(0.5, 5.0),
        sigma_y=rng.uniform(0.0, 4.0), sigma_x=rng.uniform(0.1, 3.0), h=rng.uniform(0.0, 2.0),
    )


def _same(a, b, tol=1e-10):
    a, b = tf_minreal(a, 1e-7), tf_minreal(b, 1e-7)
    return (a.num.degree == b.num.degree and a.den.degree == b.den.degree
            and np.allclose(a.num.coeffs, b.num.coeffs, atol=tol * (1 + np.max(np.abs(b.num.coeffs))))
            and np.allclose(a.den.coeffs, b.den.coeffs, atol=tol * (1 + np.max(np.abs(b.den.coeffs)))))


def test_closed_forms_match_generic_assembly():
    rng = np.random.default_rng(7)
    for _ in range(100):
        gp = _draw(rng)
        cf = gly.closed_form_tfs(gp)
        p = gly.build_plant(gp)
        ol = build_open_loop(p)
        ls = assemble(p, gp.h)
        assert _same(cf.Gy, ls.Gy)
        assert _same(cf.Gh, ls.Gh)
        assert _same(cf.Gz_hat, ol.Gz_vec[0])
        assert _same(cf.Lb, ls.Lb, 1e-8)
        assert _same(cf.Lh, ls.Lh, 1e-8)
        assert gly.lb_at_rhp_zero(gp) == pytest.approx(complex(tf_eval(ls.Lb, gp.z_rhp)).real, abs=1e-10)


def test_lb_linear_in_sigma_y_decreasing_in_sigma_x():
    base = FIG3.replace(sigma_y=1.0)
    assert gly.lb_at_rhp_zero(base.replace(sigma_y=3.0)) == pytest.approx(3 * gly.lb_at_rhp_zero(base))
    vals = [gly.lb_at_rhp_zero(base.replace(sigma_x=s)) for s in (0.5, 1.0, 2.0, 4.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_regimes():
    fast = gly.asymptotic_regimes(FIG3.replace(sigma_x=100.0, sigma_y=50.0))
    assert fast.regime == "fast" and fast.approximation == pytest.approx(0.5)
    assert fast.exact == pytest.approx(50 / 101)
    assert abs(fast.approximation - fast.exact) / fast.exact < 0.011
    slow = gly.asymptotic_regimes(FIG3.replace(sigma_x=0.01, sigma_y=2.0))
    assert slow.regime == "slow" and slow.approximation == 2.0
    assert slow.exact == pytest.approx(2 / 1.01)
    mid = gly.asymptotic_regimes(FIG3.replace(sigma_y=1.0))
    assert mid.regime == "intermediate" and mid.approximation is None


def test_single_rhp_pole_at_fig3():
    rhp = gly.closed_form_tfs(FIG3).Gy.poles().rhp.expanded()
    assert len(rhp) == 1 and rhp[0].real == pytest.approx(SQRT5 - 2, abs=1e-12)
