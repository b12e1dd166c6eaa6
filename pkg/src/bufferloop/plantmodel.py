"""Buffer-feedback process models: steady state, linearization, closed-loop realization.

The nonlinear model is

    dy/dt = p_y(y, z, u_h) - r_y(y, z, u_h) - g_y(y, x) + g_x(y, x)
    dz/dt = p_z(y, z, u_h) - r_z(y, z, u_h)
    dx/dt = g_y(y, x) - g_x(y, x) - r_x(x)

with ``z`` holding the ``n - 1`` intermediate species.  Its linearization
about a steady state is a :class:`LinearPlant`, which is the starting point
for every frequency-domain computation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import ModelError, NumericalFailure
from .ratcalc import RationalTF

RateFn = Callable[[float, np.ndarray, float], object]


@dataclass(frozen=True)
class NonlinearModel:
    """Rate functions of a single-output buffer-feedback process.

    ``g_y``, ``g_x`` and ``r_x`` may be left as ``None`` for an unbuffered
    process; the buffer state is then dropped from the steady-state problem.
    ``jacobians``, when given, maps a :class:`SteadyState` to the
    partial-derivative dictionary that :func:`linearize` would otherwise
    estimate by differencing.
    """

    n: int
    p_y: RateFn
    r_y: RateFn
    p_z: Optional[RateFn] = None
    r_z: Optional[RateFn] = None
    g_y: Optional[Callable[[float, float], float]] = None
    g_x: Optional[Callable[[float, float], float]] = None
    r_x: Optional[Callable[[float], float]] = None
    u_h: float = 0.0
    jacobians: Optional[Callable[["SteadyState"], Mapping[str, object]]] = None

    @property
    def buffered(self) -> bool:
        return self.g_y is not None

    def _f_y(self, y, z, u):
        return float(self.p_y(y, z, u)) - float(self.r_y(y, z, u))

    def _f_z(self, y, z, u):
        if self.n == 1:
            return np.zeros(0)
        return np.atleast_1d(np.asarray(self.p_z(y, z, u), dtype=float)) - np.atleast_1d(
            np.asarray(self.r_z(y, z, u), dtype=float)
        )

    def _g_net(self, y, x):
        return float(self.g_y(y, x)) - float(self.g_x(y, x))

    def _r_x(self, x):
        return 0.0 if self.r_x is None else float(self.r_x(x))

    def rhs(self, y: float, z: np.ndarray, x: float, u_h: float) -> np.ndarray:
        """Time derivatives (dy, dz..., dx) at zero disturbance."""
        dy = self._f_y(y, z, u_h)
        dz = self._f_z(y, z, u_h)
        if not self.buffered:
            return np.concatenate([[dy], dz])
        net = self._g_net(y, x)
        dx = net - self._r_x(x)
        return np.concatenate([[dy - net], dz, [dx]])


@dataclass(frozen=True)
class SteadyState:
    ybar: float
    zbar: np.ndarray
    xbar: float
    uh_bar: float
    ub_bar: float
    residual: float = 0.0


@dataclass(frozen=True)
class DisturbanceScales:
    dy: float = 1.0
    dz: float = 1.0
    dx: float = 1.0
    db: float = 1.0


@dataclass(frozen=True)
class LinearPlant:
    """Linearized process with buffer and scaling constants.

    Vector blocks are stored as 1-D arrays of length ``n - 1`` and ``A_zz``
    as an ``(n-1, n-1)`` array; all are empty when ``n == 1``.
    """

    A_yy: float
    A_yz: np.ndarray
    A_zy: np.ndarray
    A_zz: np.ndarray
    B_yh: float
    B_zh: np.ndarray
    sigma_y: float = 0.0
    sigma_x: float = 1.0
    a_xx: float = 0.0
    ybar: float = 1.0
    phat: float = 1.0
    dhat: DisturbanceScales = field(default_factory=DisturbanceScales)

    def __post_init__(self):
        conv = {}
        for name in ("A_yz", "A_zy", "B_zh"):
            conv[name] = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).ravel()
        m = len(conv["A_yz"])
        conv["A_zz"] = np.asarray(self.A_zz, dtype=float).reshape(m, m) if m else np.zeros((0, 0))
        for k, v in conv.items():
            v.flags.writeable = False
            object.__setattr__(self, k, v)
        for name in ("A_yy", "B_yh", "sigma_y", "sigma_x", "a_xx", "ybar", "phat"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if len(conv["A_zy"]) != m or len(conv["B_zh"]) != m:
            raise ModelError("A_yz, A_zy and B_zh must all have length n - 1")
        if self.sigma_y < 0 or self.sigma_x <= 0 or self.a_xx < 0:
            raise ModelError("buffer constants require sigma_y >= 0, sigma_x > 0, a_xx >= 0")
        if self.ybar <= 0:
            raise ModelError("ybar must be positive")
        if self.phat == 0:
            raise ModelError("phat must be nonzero")
        if not all(np.isfinite(v).all() for v in conv.values()):
            raise ModelError("plant matrices must be finite")

    @property
    def n(self) -> int:
        return 1 + len(self.A_yz)

    @property
    def ghat(self) -> float:
        return self.ybar

    @property
    def A_process(self) -> np.ndarray:
        """The (y, z) block of the linearized dynamics."""
        m = self.n - 1
        a = np.zeros((m + 1, m + 1))
        a[0, 0] = self.A_yy
        a[0, 1:] = self.A_yz
        a[1:, 0] = self.A_zy
        a[1:, 1:] = self.A_zz
        return a

    def replace(self, **changes) -> "LinearPlant":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "A_yy": self.A_yy,
            "A_yz": self.A_yz.tolist(),
            "A_zy": self.A_zy.tolist(),
            "A_zz": self.A_zz.tolist(),
            "B_yh": self.B_yh,
            "B_zh": self.B_zh.tolist(),
            "sigma_y": self.sigma_y,
            "sigma_x": self.sigma_x,
            "a_xx": self.a_xx,
            "ybar": self.ybar,
            "phat": self.phat,
            "dhat": dataclasses.asdict(self.dhat),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "LinearPlant":
        try:
            n = int(d["n"])
            dh = d.get("dhat", {}) or {}
            plant = cls(
                A_yy=d["A_yy"],
                A_yz=d.get("A_yz", []),
                A_zy=d.get("A_zy", []),
                A_zz=d.get("A_zz", []),
                B_yh=d["B_yh"],
                B_zh=d.get("B_zh", []),
                sigma_y=d.get("sigma_y", 0.0),
                sigma_x=d.get("sigma_x", 1.0),
                a_xx=d.get("a_xx", 0.0),
                ybar=d.get("ybar", 1.0),
                phat=d.get("phat", 1.0),
                dhat=DisturbanceScales(**{k: float(dh.get(k, 1.0)) for k in ("dy", "dz", "dx", "db")}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"malformed plant descriptor: {exc}") from exc
        if plant.n != n:
            raise ModelError(f"descriptor says n={n} but matrices imply n={plant.n}")
        return plant


def _pack(y, z, x, buffered):
    return np.concatenate([[y], z, [x]]) if buffered else np.concatenate([[y], z])


def solve_steady_state(
    m: NonlinearModel,
    guess,
    tol: float = 1e-10,
    max_iter: int = 100,
    fix_y: Optional[float] = None,
) -> SteadyState:
    """Damped Newton solve of the zero-disturbance steady-state equations.

    ``guess`` is the state vector ``[y, z..., x]`` (omit ``x`` for an
    unbuffered model).  With ``fix_y`` the set point is pinned and the
    feedback input ``u_h`` becomes the unknown in place of ``y``.
    Steps are halved (at most 30 times) until the residual decreases and all
    concentrations stay above a floor of ``1e-12`` times the guess scale.
    """
    guess = np.asarray(guess, dtype=float).ravel()
    expected = m.n + (1 if m.buffered else 0)
    if guess.size != expected:
        raise ModelError(f"guess must have {expected} entries")
    if np.any(guess[: m.n] <= 0) or (m.buffered and guess[-1] < 0):
        raise ModelError("steady-state guess must be positive")
    floor = 1e-12 * max(1.0, float(np.max(np.abs(guess))))

    def unpack(v):
        if fix_y is None:
            y, u = v[0], m.u_h
        else:
            y, u = float(fix_y), v[0]
        z = v[1 : m.n]
        x = v[m.n] if m.buffered else 0.0
        return y, z, x, u

    def residual(v):
        y, z, x, u = unpack(v)
        return m.rhs(y, z, x, u)

    def admissible(v):
        y, z, x, _ = unpack(v)
        ok = y > floor and np.all(z > floor)
        return bool(ok and (not m.buffered or x >= 0.0))

    v = guess.copy()
    if fix_y is not None:
        v[0] = m.u_h
    r = residual(v)
    if not np.all(np.isfinite(r)):
        raise NumericalFailure("rate functions are not finite at the initial guess")
    rn = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if rn <= tol:
            break
        jac = np.empty((v.size, v.size))
        for j in range(v.size):
            h = 1e-7 * (1.0 + abs(v[j]))
            vp, vm = v.copy(), v.copy()
            vp[j] += h
            vm[j] -= h
            jac[:, j] = (residual(vp) - residual(vm)) / (2 * h)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular Jacobian in steady-state solve") from exc
        if not np.all(np.isfinite(step)):
            raise NumericalFailure("singular Jacobian in steady-state solve")
        lam = 1.0
        for _halving in range(31):
            trial = v + lam * step
            if admissible(trial):
                rt = residual(trial)
                rtn = float(np.max(np.abs(rt)))
                if np.all(np.isfinite(rt)) and rtn < rn:
                    break
            lam *= 0.5
        else:
            raise NumericalFailure("Newton damping floor reached without progress")
        v, r, rn = trial, rt, rtn
    else:
        if rn > tol:
            raise NumericalFailure(f"steady-state solve did not converge (residual {rn:.3g})")
    y, z, x, u = unpack(v)
    ub = -m._g_net(y, x) if m.buffered else 0.0
    return SteadyState(float(y), np.array(z, dtype=float), float(x), float(u), float(ub), rn)


def _central(fn, x0: float, h_rel: float):
    h = h_rel * (1.0 + abs(x0))
    fp, fm = fn(x0 + h), fn(x0 - h)
    if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
        raise NumericalFailure("rate function is not finite during differencing")
    return (np.asarray(fp, dtype=float) - np.asarray(fm, dtype=float)) / (2 * h)


def linearize(
    m: NonlinearModel,
    ss: SteadyState,
    h_rel: float = 1e-6,
    phat: float = 1.0,
    dhat: Optional[DisturbanceScales] = None,
) -> LinearPlant:
    """Partial derivatives of the rate functions at ``ss`` as a :class:`LinearPlant`."""
    dhat = dhat or DisturbanceScales()
    if m.jacobians is not None:
        j = dict(m.jacobians(ss))
        return LinearPlant(
            A_yy=j["A_yy"], A_yz=j.get("A_yz", []), A_zy=j.get("A_zy", []), A_zz=j.get("A_zz", []),
            B_yh=j["B_yh"], B_zh=j.get("B_zh", []),
            sigma_y=j.get("sigma_y", 0.0), sigma_x=j.get("sigma_x", 1.0), a_xx=j.get("a_xx", 0.0),
            ybar=ss.ybar, phat=phat, dhat=dhat,
        )
    y0, z0, x0, u0 = ss.ybar, np.asarray(ss.zbar, dtype=float), ss.xbar, ss.uh_bar
    k = m.n - 1

    def with_z(j):
        def fz(v):
            z = z0.copy()
            z[j] = v
            return z
        return fz

    A_yy = float(_central(lambda v: m._f_y(v, z0, u0), y0, h_rel))
    B_yh = float(_central(lambda v: m._f_y(y0, z0, v), u0, h_rel))
    A_yz = np.array([float(_central(lambda v, j=j: m._f_y(y0, with_z(j)(v), u0), z0[j], h_rel)) for j in range(k)])
    if k:
        A_zy = _central(lambda v: m._f_z(v, z0, u0), y0, h_rel)
        B_zh = _central(lambda v: m._f_z(y0, z0, v), u0, h_rel)
        A_zz = np.column_stack([_central(lambda v, j=j: m._f_z(y0, with_z(j)(v), u0), z0[j], h_rel) for j in range(k)])
    else:
        A_zy = B_zh = np.zeros(0)
        A_zz = np.zeros((0, 0))
    if m.buffered:
        sigma_y = float(_central(lambda v: m._g_net(v, x0), y0, h_rel))
        sigma_x = -float(_central(lambda v: m._g_net(y0, v), x0, h_rel))
        a_xx = float(_central(m._r_x, x0, h_rel)) if m.r_x is not None else 0.0
    else:
        sigma_y, sigma_x, a_xx = 0.0, 1.0, 0.0
    return LinearPlant(
        A_yy=A_yy, A_yz=A_yz, A_zy=A_zy, A_zz=A_zz, B_yh=B_yh, B_zh=B_zh,
        sigma_y=sigma_y, sigma_x=sigma_x, a_xx=a_xx, ybar=y0, phat=phat, dhat=dhat,
    )


@dataclass(frozen=True)
class MassActionParams:
    """Rate constants of the synthetic two-state test family.

    p_y = k4 z u, r_y = k5 y^2, p_z = k6 u, r_z = k7 y z,
    g_y = k1 y, g_x = k2 x, r_x = k3 x.
    """

    k1: float = 2.0
    k2: float = 1.0
    k3: float = 0.0
    k4: float = 1.0
    k5: float = 1.0
    k6: float = 1.0
    k7: float = 1.0
    u_h: float = 1.0


def mass_action_model(k: MassActionParams, analytic: bool = False) -> NonlinearModel:
    def jac(ss: SteadyState):
        y, z, u = ss.ybar, float(ss.zbar[0]), ss.uh_bar
        return {
            "A_yy": -2 * k.k5 * y, "A_yz": [k.k4 * u], "B_yh": k.k4 * z,
            "A_zy": [-k.k7 * z], "A_zz": [[-k.k7 * y]], "B_zh": [k.k6],
            "sigma_y": k.k1, "sigma_x": k.k2, "a_xx": k.k3,
        }

    return NonlinearModel(
        n=2,
        p_y=lambda y, z, u: k.k4 * z[0] * u,
        r_y=lambda y, z, u: k.k5 * y * y,
        p_z=lambda y, z, u: [k.k6 * u],
        r_z=lambda y, z, u: [k.k7 * y * z[0]],
        g_y=lambda y, x: k.k1 * y,
        g_x=lambda y, x: k.k2 * x,
        r_x=lambda x: k.k3 * x,
        u_h=k.u_h,
        jacobians=jac if analytic else None,
    )


@dataclass(frozen=True)
class StateSpaceCL:
    """Closed-loop realization with states (dy, dz..., dx, controller...).

    Inputs are the unit-scaled disturbances; each column of ``B`` already
    carries its ``dhat`` factor, listed in ``channel_scales``.  The output is
    ``Y = dy / ybar``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    channels: tuple
    channel_scales: tuple
    state_labels: tuple

    def channel_index(self, channel: str) -> int:
        if channel == "dz" and "dz" not in self.channels and "dz1" in self.channels:
            channel = "dz1"
        try:
            return self.channels.index(channel)
        except ValueError:
            raise ModelError(f"unknown disturbance channel {channel!r}; have {self.channels}") from None

    def transfer(self, s: complex) -> np.ndarray:
        """C (sI - A)^-1 B + D at one complex frequency, one entry per channel."""
        n = self.A.shape[0]
        x = np.linalg.solve(s * np.eye(n) - self.A, self.B.astype(complex))
        return (self.C @ x + self.D).ravel()


def z_channel_names(k: int) -> list[str]:
    if k == 1:
        return ["dz"]
    return [f"dz{j + 1}" for j in range(k)]


def controller_realization(c_h: RationalTF):
    """Controllable canonical (Ac, Bc, Cc, Dc) for a proper controller."""
    if not c_h.is_proper:
        raise ModelError("feedback controller must be proper")
    den = c_h.den.coeffs
    m = len(den) - 1
    num = np.zeros(m + 1)
    num[: len(c_h.num.coeffs)] = c_h.num.coeffs
    d = num[m] if m >= 0 else 0.0
    rem = num[:m] - d * den[:m]
    Ac = np.zeros((m, m))
    if m:
        Ac[:-1, 1:] = np.eye(m - 1)
        Ac[-1, :] = -den[:m]
    Bc = np.zeros(m)
    if m:
        Bc[-1] = 1.0
    return Ac, Bc, rem.copy(), float(d)


def realize_closed_loop(p: LinearPlant, c_h) -> StateSpaceCL:
    """Assemble plant, buffer and controller states under ``du_h = -(phat/ybar) C_h dy``."""
    c_h = RationalTF.coerce(c_h)
    Ac, Bc, Cc, Dc = controller_realization(c_h)
    k = p.n - 1
    mc = Ac.shape[0]
    N = p.n + 1 + mc
    iy, iz, ix, ic = 0, slice(1, 1 + k), 1 + k, slice(2 + k, N)
    gain = p.phat / p.ybar
    A = np.zeros((N, N))
    A[:p.n, :p.n] = p.A_process
    A[iy, iy] -= p.sigma_y
    A[iy, ix] = p.sigma_x
    A[ix, iy] = p.sigma_y
    A[ix, ix] = -(p.sigma_x + p.a_xx)
    bu = np.concatenate([[p.B_yh], p.B_zh])
    A[:p.n, iy] -= gain * Dc * bu
    if mc:
        A[:p.n, ic] -= gain * np.outer(bu, Cc)
        A[ic, iy] = Bc
        A[ic, ic] = Ac
    channels = ["dy", *z_channel_names(k), "dx", "db"]
    scales = [p.dhat.dy, *([p.dhat.dz] * k), p.dhat.dx, p.dhat.db]
    B = np.zeros((N, len(channels)))
    B[iy, 0] = p.dhat.dy
    for j in range(k):
        B[1 + j, 1 + j] = p.dhat.dz
    B[ix, 1 + k] = p.dhat.dx
    B[iy, 2 + k] = -p.dhat.db
    B[ix, 2 + k] = p.dhat.db
    C = np.zeros((1, N))
    C[0, iy] = 1.0 / p.ybar
    D = np.zeros((1, len(channels)))
    labels = ["y", *[f"z{j + 1}" for j in range(k)], "x", *[f"c{j + 1}" for j in range(mc)]]
    for arr in (A, B, C, D):
        arr.flags.writeable = False
    return StateSpaceCL(A, B, C, D, tuple(channels), tuple(scales), tuple(labels))


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    eigenvalues: tuple
    abscissa: float
    axis_tol: float

    def __bool__(self):
        return self.stable


def is_internally_stable(ss: StateSpaceCL | np.ndarray, axis_tol: float = 1e-9) -> StabilityReport:
    """True iff every closed-loop eigenvalue has real part below ``-axis_tol``."""
    A = ss.A if isinstance(ss, StateSpaceCL) else np.asarray(ss, dtype=float)
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("eigenvalue iteration failed") from exc
    ev = sorted((complex(e) for e in ev), key=lambda e: (e.real, e.imag))
    absc = max((e.real for e in ev), default=-np.inf)
    return StabilityReport(bool(absc < -axis_tol), tuple(ev), float(absc), axis_tol)
