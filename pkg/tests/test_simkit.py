import math

import numpy as np
import pytest

from bufferloop import glycolysis as gly
from bufferloop.errors import SimulationError, StabilityError
from bufferloop.looptf import assemble
from bufferloop.plantmodel import LinearPlant, StateSpaceCL, realize_closed_loop
from bufferloop.ratcalc import tf_eval
from bufferloop.simkit import (
    default_timing,
    discretize,
    first_order_step,
    sinusoid_amplitude,
    stability_boundary_gain,
    step_response,
)

FIG3 = gly.GlycolysisParams()


def ss_of(A, B=None):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.ones((n, 1)) if B is None else np.asarray(B, dtype=float).reshape(n, 1)
    C = np.zeros((1, n))
    C[0, 0] = 1.0
    return StateSpaceCL(A, B, C, np.zeros((1, 1)), ("u",), (1.0,), tuple(f"x{i}" for i in range(n)))


def test_first_order_step_exact():
    tr = first_order_step(-1.0, 1.0, 1.0, 1.0, 0.01, 2.0)
    assert tr.outputs[100] == pytest.approx(1 - math.exp(-1.0), abs=1e-9)
    assert tr.outputs[100] == pytest.approx(0.6321206, abs=1e-7)


def test_zero_step_is_zero():
    tr = step_response(realize_closed_loop(gly.build_plant(FIG3), 1.0), "dy", 0.0, 0.01, 5.0)
    assert np.all(tr.outputs == 0.0)


def test_times_uniform():
    tr = first_order_step(-2.0, 1.0, 1.0, 1.0, 0.05, 3.0)
    assert np.allclose(np.diff(tr.times), 0.05)
    assert tr.dt == pytest.approx(0.05)


@pytest.mark.parametrize("sy,h", [(0.0, 0.5), (1.0, 1.0), (4.0, 1.5)])
def test_final_value_theorem(sy, h):
    p = gly.build_plant(FIG3.replace(sigma_y=sy))
    ss = realize_closed_loop(p, h)
    ls = assemble(p, h)
    for ch in ss.channels:
        tr = step_response(ss, ch, 2.0)
        assert tr.outputs[-1] == pytest.approx(2.0 * complex(tf_eval(ls.closed_loop(ch), 0.0)).real, abs=1e-6)


def test_discretization_step_independent():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(1, 7))
        M = rng.normal(size=(n, n))
        A = M - (np.max(np.linalg.eigvals(M).real) + 0.5) * np.eye(n)
        ss = ss_of(A, rng.normal(size=n))
        fine = step_response(ss, "u", 1.0, 0.01, 2.0)
        coarse = step_response(ss, "u", 1.0, 0.02, 2.0)
        np.testing.assert_allclose(fine.outputs[::2], coarse.outputs, atol=1e-9)


def test_buffer_exchange_conserves_total():
    sy, sx = 2.0, 1.5
    A = np.array([[-sy, sx], [sy, -sx]])
    Phi, _ = discretize(A, np.zeros((2, 1)), 0.1)
    x = np.array([1.0, 0.25])
    for _ in range(200):
        x = Phi @ x
        assert x.sum() == pytest.approx(1.25, abs=1e-12)


def test_sinusoid_amplitude_matches_frequency_response():
    p = gly.build_plant(FIG3.replace(sigma_y=1.0))
    ss = realize_closed_loop(p, 1.0)
    t = assemble(p, 1.0).closed_loop("dy")
    for w in (0.1, 1.0, 10.0):
        ref = abs(complex(tf_eval(t, 1j * w)))
        assert sinusoid_amplitude(ss, "dy", w) == pytest.approx(ref, rel=1e-3)


def test_sinusoid_requires_stable():
    with pytest.raises(StabilityError):
        sinusoid_amplitude(realize_closed_loop(gly.build_plant(FIG3), 0.0), "dy", 1.0)


def test_unstable_trace_truncated():
    tr = step_response(ss_of([[2.0]]), "u", 1.0, 0.1, 100.0)
    assert tr.diverged
    assert abs(tr.outputs[-1]) > 1e6
    assert tr.times[-1] < 100.0


def test_overflow_names_eigenvalue():
    with pytest.raises(SimulationError, match="eigenvalue"):
        discretize(np.array([[1e3]]), np.ones((1, 1)), 10.0)


def test_bad_timing_rejected():
    ss = ss_of([[-1.0]])
    with pytest.raises(ValueError):
        step_response(ss, "u", 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        step_response(ss, "u", 1.0, 0.1, 0.01)


def test_default_timing():
    dt, T = default_timing(np.diag([-0.1, -50.0]))
    assert dt == pytest.approx(0.002)
    assert T == pytest.approx(500.0)
    assert default_timing(np.diag([-1e-6]))[1] == 1e4


def test_buffering_raises_critical_gain():
    h0 = stability_boundary_gain(gly.build_plant(FIG3), 1.0, 10.0, 1e-4)
    h4 = stability_boundary_gain(gly.build_plant(FIG3.replace(sigma_y=4.0)), 1.0, 10.0, 1e-4)
    assert h4 > h0
    # sigma_y = 0: s^2 + (4 - 3.5h)s + (3.5h - 1); sigma_y = 4: (s+1)(s^2 + (8 - 3.5h)s + 3.5h - 1)
    assert h0 == pytest.approx(8 / 7, abs=1e-4)
    assert h4 == pytest.approx(16 / 7, abs=1e-4)


def test_no_bracket():
    p = LinearPlant(A_yy=-1.0, A_yz=[], A_zy=[], A_zz=[], B_yh=1.0, B_zh=[])
    with pytest.raises(StabilityError):
        stability_boundary_gain(p, 0.0, 10.0)


def test_buffering_attenuates_oscillation():
    amp = {}
    for sy in (0.0, 4.0):
        ss = realize_closed_loop(gly.build_plant(FIG3.replace(sigma_y=sy)), 1.0)
        amp[sy] = step_response(ss, "dy", 1.0, 0.01, 40.0).oscillation_amplitude(1.0)
    assert amp[4.0] < amp[0.0]


def test_csv_format():
    tr = first_order_step(-1.0, 1.0, 1.0, 1.0, 0.5, 1.0)
    text = tr.to_csv()
    assert text.startswith("t,y\n0,0\n0.5,")
    assert text.endswith("\n") and "\r" not in text
    assert len(text.splitlines()[2].split(",")[1]) <= 17
