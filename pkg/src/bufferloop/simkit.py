"""Time-domain simulation of the closed loop by exact LTI discretization."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .errors import SimulationError, StabilityError
from .plantmodel import LinearPlant, StateSpaceCL, is_internally_stable, realize_closed_loop
from .ratcalc import RationalTF

DIVERGENCE_LEVEL = 1e6


@dataclass(frozen=True)
class SimTrace:
    times: np.ndarray
    outputs: np.ndarray
    channel: str
    step_size: float
    states: Optional[np.ndarray] = None
    diverged: bool = False

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def oscillation_amplitude(self, t_after: float = 1.0) -> float:
        """max - min of the output for t > t_after."""
        sel = self.outputs[self.times > t_after]
        return float(sel.max() - sel.min()) if sel.size else 0.0

    def to_csv(self, with_states: bool = False) -> str:
        buf = io.StringIO()
        cols = ["t", "y"]
        data = [self.times, self.outputs]
        if with_states and self.states is not None:
            cols += [f"x{i + 1}" for i in range(self.states.shape[1])]
            data += list(self.states.T)
        buf.write(",".join(cols) + "\n")
        for row in zip(*data):
            buf.write(",".join(f"{v:.15g}" for v in row) + "\n")
        return buf.getvalue()


def discretize(A: np.ndarray, B: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold pair (Phi, Gamma) from ``expm([[A, B], [0, 0]] dt)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n, m = B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A * dt
    M[:n, n:] = B * dt
    with np.errstate(over="raise", invalid="raise"):
        try:
            E = expm(M)
        except (FloatingPointError, OverflowError) as exc:
            raise _overflow(A, dt) from exc
    if not np.all(np.isfinite(E)):
        raise _overflow(A, dt)
    return E[:n, :n], E[:n, n:]


def _overflow(A: np.ndarray, dt: float) -> SimulationError:
    lam = np.linalg.eigvals(A)
    worst = lam[np.argmax(lam.real)]
    return SimulationError(f"matrix exponential overflow at dt={dt}: eigenvalue {worst:.6g}")


def default_timing(A: np.ndarray) -> tuple[float, float]:
    """dt = min(0.01, 0.1/max|lambda|); T = 50/|Re lambda_slowest| capped at 1e4."""
    lam = np.linalg.eigvals(np.atleast_2d(A))
    if lam.size == 0:
        return 0.01, 10.0
    dt = min(0.01, 0.1 / max(float(np.max(np.abs(lam))), 1e-300))
    stable = lam.real[lam.real < 0]
    slow = float(np.min(np.abs(stable))) if stable.size else 0.0
    T = min(50.0 / slow, 1e4) if slow > 0 else 1e4
    return dt, max(T, dt)


def _simulate(Phi, Gamma, C, D, u, x0, n_steps, keep_states):
    x = x0.copy()
    ys = np.empty(n_steps + 1)
    xs = np.empty((n_steps + 1, x.size)) if keep_states else None
    diverged = False
    last = n_steps
    for k in range(n_steps + 1):
        ys[k] = float(C @ x + D @ u)
        if keep_states:
            xs[k] = x
        if not math.isfinite(ys[k]) or abs(ys[k]) > DIVERGENCE_LEVEL:
            diverged, last = True, k
            break
        x = Phi @ x + Gamma @ u
    if diverged:
        ys = ys[: last + 1]
        xs = xs[: last + 1] if keep_states else None
    return ys, xs, diverged, last


def step_response(
    ss: StateSpaceCL,
    channel: str,
    step: float = 1.0,
    dt: Optional[float] = None,
    T: Optional[float] = None,
    keep_states: bool = False,
) -> SimTrace:
    """Response of ``y/ybar`` to a step of size ``step`` on one disturbance channel.

    The input column already carries the channel's ``dhat`` scaling.  Traces
    of unstable loops stop once ``|y|`` exceeds 1e6 and are flagged.
    """
    j = ss.channel_index(channel)
    d_dt, d_T = default_timing(ss.A)
    dt = d_dt if dt is None else float(dt)
    T = d_T if T is None else float(T)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if T < dt:
        raise ValueError("T must be at least dt")
    n_steps = int(round(T / dt))
    b = ss.B[:, j : j + 1]
    Phi, Gamma = discretize(ss.A, b, dt)
    u = np.array([float(step)])
    ys, xs, diverged, last = _simulate(Phi, Gamma, ss.C.reshape(1, -1)[0], ss.D.reshape(1, -1)[0, j : j + 1],
                                       u, np.zeros(ss.A.shape[0]), n_steps, keep_states)
    times = dt * np.arange(ys.size)
    return SimTrace(times, ys, ss.channels[j], float(step), xs, diverged)


def first_order_step(a: float, b: float, c: float, step: float, dt: float, T: float) -> SimTrace:
    """Scalar system ``x' = a x + b u``, ``y = c x``; handy for checks."""
    ss = StateSpaceCL(np.array([[a]]), np.array([[b]]), np.array([[c]]), np.zeros((1, 1)), ("u",), (1.0,), ("x",))
    return step_response(ss, "u", step, dt, T)


def sinusoid_amplitude(ss: StateSpaceCL, channel: str, omega: float, dt: Optional[float] = None, periods: int = 20) -> float:
    """Steady-state output amplitude under input ``sin(omega t)`` on one channel.

    The sinusoid is generated by an oscillator appended to the state, so the
    whole trajectory is exact.  After transients decay, a least-squares fit of
    ``a sin + b cos + c`` over an integer number of periods gives the amplitude.
    """
    stab = is_internally_stable(ss)
    if not stab.stable:
        raise StabilityError("sinusoidal steady state requires a stable loop")
    j = ss.channel_index(channel)
    n = ss.A.shape[0]
    Aa = np.zeros((n + 2, n + 2))
    Aa[:n, :n] = ss.A
    Aa[:n, n] = ss.B[:, j]
    Aa[n, n + 1] = omega
    Aa[n + 1, n] = -omega
    period = 2 * math.pi / omega
    if dt is None:
        dt = min(default_timing(ss.A)[0], period / 200.0)
    settle = 40.0 / abs(stab.abscissa)
    per_period = int(math.ceil(period / dt))
    dt = period / per_period
    n_settle = int(math.ceil(settle / dt))
    n_fit = per_period * periods
    Phi = expm(Aa * dt)
    x = np.zeros(n + 2)
    x[n + 1] = 1.0  # [sin, cos] state starts at (0, 1)
    Phi_settle = np.linalg.matrix_power(Phi, n_settle)
    x = Phi_settle @ x
    c = np.concatenate([ss.C.reshape(-1), [float(ss.D.reshape(-1)[j]), 0.0]])
    t0 = n_settle * dt
    ts = t0 + dt * np.arange(n_fit)
    ys = np.empty(n_fit)
    for k in range(n_fit):
        ys[k] = c @ x
        x = Phi @ x
    M = np.column_stack([np.sin(omega * ts), np.cos(omega * ts), np.ones_like(ts)])
    coef, *_ = np.linalg.lstsq(M, ys, rcond=None)
    return float(math.hypot(coef[0], coef[1]))


def stability_boundary_gain(p: LinearPlant, h_lo: float, h_hi: float, tol: float = 1e-4, axis_tol: float = 1e-9) -> float:
    """Critical proportional gain between ``h_lo`` and ``h_hi`` by bisection on closed-loop stability."""
    def stable(h):
        return is_internally_stable(realize_closed_loop(p, RationalTF.constant(h)), axis_tol).stable

    s_lo, s_hi = stable(h_lo), stable(h_hi)
    if s_lo == s_hi:
        raise StabilityError(f"no stability change between h={h_lo} and h={h_hi} (both {'stable' if s_lo else 'unstable'})")
    lo, hi = h_lo, h_hi
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if stable(mid) == s_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def first_stabilizing_gain(p: LinearPlant, h_max: float = 10.0, step: float = 0.05, axis_tol: float = 1e-9) -> Optional[float]:
    """Smallest grid gain in (0, h_max] giving a stable loop, or None."""
    for k in range(1, int(round(h_max / step)) + 1):
        h = k * step
        if is_internally_stable(realize_closed_loop(p, RationalTF.constant(h)), axis_tol).stable:
            return h
    return None
