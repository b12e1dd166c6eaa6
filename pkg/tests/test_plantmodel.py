import math

import numpy as np
import pytest

from bufferloop import glycolysis as gly
from bufferloop.errors import ModelError
from bufferloop.plantmodel import (
    DisturbanceScales,
    LinearPlant,
    MassActionParams,
    is_internally_stable,
    linearize,
    mass_action_model,
    realize_closed_loop,
    solve_steady_state,
)
from bufferloop.ratcalc import RationalTF

SQRT5 = math.sqrt(5.0)


def test_lossless_buffer_steady_state():
    m = mass_action_model(MassActionParams(k1=2.0, k2=1.0, k3=0.0))
    ss = solve_steady_state(m, [0.7, 1.4, 1.0])
    assert ss.ybar == pytest.approx(1.0, abs=1e-9)
    assert ss.xbar == pytest.approx(2.0, abs=1e-9)
    assert ss.ub_bar == pytest.approx(0.0, abs=1e-9)
    assert ss.residual <= 1e-10


def test_dissipative_buffer_steady_state():
    m = mass_action_model(MassActionParams(k1=2.0, k2=1.0, k3=0.5))
    ss = solve_steady_state(m, [1.0, 1.0, 1.0], fix_y=1.0)
    assert ss.xbar == pytest.approx(4.0 / 3.0, abs=1e-9)
    assert ss.ub_bar == pytest.approx(-2.0 / 3.0, abs=1e-9)


def test_glycolysis_nonlinear_residual():
    gp = gly.GlycolysisParams()
    m = gly.nonlinear_model(gp)
    r = m.rhs(1.0, np.array([1.0]), 0.0, 0.0)
    assert np.max(np.abs(r)) <= 1e-10


def test_glycolysis_nonlinear_linearizes_to_table():
    gp = gly.GlycolysisParams(sigma_y=1.0)
    m = gly.nonlinear_model(gp)
    ss = solve_steady_state(m, [1.0, 1.0, 1.0])
    lp = linearize(m, ss)
    ref = gly.build_plant(gp)
    for name in ("A_yy", "A_yz", "A_zy", "A_zz", "B_yh", "B_zh", "sigma_y", "sigma_x", "a_xx"):
        np.testing.assert_allclose(getattr(lp, name), getattr(ref, name), atol=1e-6)


def test_linear_buffer_rates():
    m = mass_action_model(MassActionParams(k1=2.0, k2=1.0, k3=0.5))
    ss = solve_steady_state(m, [1.0, 1.0, 1.0], fix_y=1.0)
    lp = linearize(m, ss)
    assert lp.sigma_y == pytest.approx(2.0, abs=1e-6)
    assert lp.sigma_x == pytest.approx(1.0, abs=1e-6)
    assert lp.a_xx == pytest.approx(0.5, abs=1e-6)


def test_finite_difference_matches_analytic():
    k = MassActionParams(k1=1.3, k2=0.7, k3=0.2, k4=1.1, k5=0.9, k6=1.4, k7=0.6)
    ss = solve_steady_state(mass_action_model(k), [1.0, 1.0, 1.0])
    fd = linearize(mass_action_model(k), ss)
    an = linearize(mass_action_model(k, analytic=True), ss)
    for name in ("A_yy", "A_yz", "A_zy", "A_zz", "B_yh", "B_zh", "sigma_y", "sigma_x", "a_xx"):
        np.testing.assert_allclose(getattr(fd, name), getattr(an, name), rtol=1e-6, atol=1e-9)


def test_bad_guess_rejected():
    with pytest.raises(ModelError):
        solve_steady_state(mass_action_model(MassActionParams()), [1.0, 1.0])
    with pytest.raises(ModelError):
        solve_steady_state(mass_action_model(MassActionParams()), [-1.0, 1.0, 1.0])


def test_plant_validation():
    with pytest.raises(ModelError):
        LinearPlant(A_yy=-1, A_yz=[], A_zy=[], A_zz=[], B_yh=1, B_zh=[], sigma_x=0.0)
    with pytest.raises(ModelError):
        LinearPlant(A_yy=-1, A_yz=[1.0], A_zy=[], A_zz=[[0.0]], B_yh=1, B_zh=[1.0])
    with pytest.raises(ModelError):
        LinearPlant(A_yy=-1, A_yz=[], A_zy=[], A_zz=[], B_yh=1, B_zh=[], phat=0.0)


def test_descriptor_round_trip():
    p = gly.build_plant(gly.GlycolysisParams(sigma_y=2.0))
    q = LinearPlant.from_dict(p.to_dict())
    assert q.to_dict() == p.to_dict()
    with pytest.raises(ModelError):
        LinearPlant.from_dict({"n": 2, "A_yy": 1.0, "B_yh": 1.0})
    with pytest.raises(ModelError):
        LinearPlant.from_dict({"A_yy": 1.0})


def test_open_loop_block_eigenvalues():
    p = gly.build_plant(gly.GlycolysisParams())
    ss = realize_closed_loop(p, 0.0)
    np.testing.assert_array_equal(ss.A[:2, :2], [[-3.0, 2.0], [2.0, -1.0]])
    ev = sorted(np.linalg.eigvals(ss.A[:2, :2]).real)
    np.testing.assert_allclose(ev, [-2 - SQRT5, -2 + SQRT5], atol=1e-12)


@pytest.mark.parametrize("h,sy", [(0.5, 0.0), (1.0, 2.0)])
def test_proportional_feedback_row(h, sy):
    p = gly.build_plant(gly.GlycolysisParams(sigma_y=sy))
    ss = realize_closed_loop(p, h)
    assert ss.A[0, 0] == pytest.approx(-3.0 - sy + 3.5 * h)


def test_buffer_state_decouples():
    p = gly.build_plant(gly.GlycolysisParams(sigma_x=1.0))
    ss = realize_closed_loop(p.replace(a_xx=0.5), 0.0)
    assert -1.5 in np.round(np.linalg.eigvals(ss.A).real, 12)


def test_dynamic_controller_states():
    p = gly.build_plant(gly.GlycolysisParams())
    ss = realize_closed_loop(p, RationalTF([1.0], [1.0, 1.0]))
    assert ss.A.shape == (4, 4)
    assert ss.state_labels == ("y", "z1", "x", "c1")


def test_channel_scaling():
    p = LinearPlant(A_yy=-1, A_yz=[], A_zy=[], A_zz=[], B_yh=1, B_zh=[],
                    dhat=DisturbanceScales(dy=2.0, dz=1.0, dx=3.0, db=5.0))
    ss = realize_closed_loop(p, 0.0)
    assert ss.B[0, ss.channel_index("dy")] == 2.0
    assert ss.B[1, ss.channel_index("dx")] == 3.0
    assert tuple(ss.B[:2, ss.channel_index("db")]) == (-5.0, 5.0)
    with pytest.raises(ModelError):
        ss.channel_index("dq")


def test_stability_examples():
    p = gly.build_plant(gly.GlycolysisParams())
    rep = is_internally_stable(realize_closed_loop(p, 0.0))
    assert not rep.stable
    assert rep.abscissa == pytest.approx(SQRT5 - 2, abs=1e-12)
    assert is_internally_stable(np.diag([-1.0, -2.0])).stable
    assert not is_internally_stable(np.diag([0.0, -2.0]), axis_tol=1e-9).stable
