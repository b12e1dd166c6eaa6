"""Open-loop, buffer and closed-loop transfer functions of a linearized plant."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, HypothesisViolation, ImproperError, ModelError
from .plantmodel import LinearPlant, z_channel_names
from .ratcalc import (
    DEFAULT_AXIS_TOL,
    DEFAULT_CANCEL_TOL,
    Polynomial,
    RationalTF,
    minreal_report,
    tf_eval,
)


def faddeev_leverrier(A: np.ndarray) -> tuple[Polynomial, list[list[Polynomial]]]:
    """Characteristic polynomial and polynomial adjugate of ``sI - A``.

    Returns ``(chi, adj)`` with ``(sI - A)^-1 = adj / chi`` entrywise.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    if m == 0:
        return Polynomial([1.0]), []
    c = np.zeros(m + 1)
    c[m] = 1.0
    M = np.zeros((m, m))
    mats = []
    for k in range(1, m + 1):
        M = A @ M + c[m - k + 1] * np.eye(m)
        mats.append(M)
        c[m - k] = -np.trace(A @ M) / k
    # adj(sI - A) = sum_k mats[k-1] * s^(m-k)
    adj = []
    for i in range(m):
        row = []
        for j in range(m):
            coeffs = np.zeros(m)
            for k in range(1, m + 1):
                coeffs[m - k] = mats[k - 1][i, j]
            row.append(Polynomial(coeffs))
        adj.append(row)
    return Polynomial(c), adj


@dataclass(frozen=True)
class OpenLoopTFs:
    Gz_vec: tuple
    Gy_hat: RationalTF
    Gh_hat: RationalTF
    Gd_hat: tuple
    chi_z: Polynomial
    chi_yz: Polynomial
    gh_num: Polynomial


def build_open_loop(p: LinearPlant) -> OpenLoopTFs:
    """Unscaled process transfer functions from the plant matrices.

    ``Gy_hat = chi_z / chi_yz`` where ``chi_z`` and ``chi_yz`` are the
    characteristic polynomials of the z block and of the full (y, z) block,
    and ``Gh_hat = gh_num / chi_z``.
    """
    k = p.n - 1
    if p.A_zz.shape != (k, k):
        raise ModelError("A_zz has the wrong shape")
    chi_z, adj = faddeev_leverrier(p.A_zz)
    # A_yz adj(sI - A_zz): row of polynomials
    row = [sum((adj[i][j] * float(p.A_yz[i]) for i in range(k)), Polynomial([0.0])) for j in range(k)]
    gz_azy = sum((row[j] * float(p.A_zy[j]) for j in range(k)), Polynomial([0.0]))
    gz_bzh = sum((row[j] * float(p.B_zh[j]) for j in range(k)), Polynomial([0.0]))
    chi_yz = Polynomial([-p.A_yy, 1.0]) * chi_z - gz_azy
    gh_num = chi_z * p.B_yh + gz_bzh
    Gz_vec = tuple(RationalTF(row[j], chi_z) for j in range(k))
    Gy_hat = RationalTF(chi_z, chi_yz)
    Gh_hat = RationalTF(gh_num, chi_z)
    Gd_hat = (RationalTF.constant(1.0), *Gz_vec)
    return OpenLoopTFs(Gz_vec, Gy_hat, Gh_hat, Gd_hat, chi_z, chi_yz, gh_num)


@dataclass(frozen=True)
class BufferTFs:
    Cb: RationalTF
    Cb_lp: RationalTF


def build_buffer(p: LinearPlant) -> BufferTFs:
    """Lead element ``(s + a_xx)/(s + sigma_x + a_xx)`` and its low-pass complement."""
    pole = p.sigma_x + p.a_xx
    if not pole > 0:
        raise DegenerateInputError("sigma_x + a_xx must be positive")
    den = Polynomial([pole, 1.0])
    return BufferTFs(RationalTF([p.a_xx, 1.0], den), RationalTF([p.sigma_x], den))


@dataclass(frozen=True)
class Cancellation:
    where: str
    root: complex


@dataclass(frozen=True)
class LoopSet:
    Gy: RationalTF
    Gh: RationalTF
    Ch: RationalTF
    Lb: RationalTF
    Lh: RationalTF
    L: RationalTF
    S: RationalTF
    T_dyz: tuple
    T_dx: RationalTF
    T_db: RationalTF
    channels: tuple
    cancellations: tuple = field(default=())

    def closed_loop(self, channel: str) -> RationalTF:
        if channel == "dz" and "dz" not in self.channels and "dz1" in self.channels:
            channel = "dz1"
        maps = dict(zip(self.channels, (*self.T_dyz, self.T_dx, self.T_db)))
        try:
            return maps[channel]
        except KeyError:
            raise ModelError(f"unknown disturbance channel {channel!r}") from None

    @property
    def unstable_cancellations(self) -> tuple:
        return tuple(c for c in self.cancellations if c.root.real >= -DEFAULT_AXIS_TOL)


def _reduce(g: RationalTF, where: str, log: list, cancel_tol: float, axis_tol: float) -> RationalTF:
    out, gone = minreal_report(g, cancel_tol, axis_tol)
    log.extend(Cancellation(where, complex(r)) for r in gone)
    return out


def unstable_controller_cancellations(
    gh: RationalTF, c_h: RationalTF, cancel_tol: float = DEFAULT_CANCEL_TOL, axis_tol: float = DEFAULT_AXIS_TOL
) -> list[complex]:
    """Closed-RHP pole/zero coincidences between ``c_h`` and ``gh`` (either direction)."""
    hits = []
    pairs = ((c_h.zeros(axis_tolerance=axis_tol), gh.poles(axis_tolerance=axis_tol)),
             (c_h.poles(axis_tolerance=axis_tol), gh.zeros(axis_tolerance=axis_tol)))
    for a, b in pairs:
        for r in a:
            if a.classify(r) == "lhp":
                continue
            if any(abs(r - q) <= cancel_tol * (abs(r) + 1.0) for q in b):
                hits.append(complex(r))
    return hits


def build_loops(
    ol: OpenLoopTFs,
    b: BufferTFs,
    p: LinearPlant,
    c_h,
    cancel_tol: float = DEFAULT_CANCEL_TOL,
    axis_tol: float = DEFAULT_AXIS_TOL,
) -> LoopSet:
    """Scaled loop pieces, sensitivity and the disturbance-to-output maps.

    Each map is formed as one polynomial ratio over the unreduced closed-loop
    characteristic polynomial, so structural cancellations (chi_yz in S*G_y,
    chi_z in S*G_y*G_z) are exact.  A single minreal then removes the
    remaining common roots, each logged in ``LoopSet.cancellations``.
    """
    c_h = RationalTF.coerce(c_h)
    if not c_h.is_proper:
        raise ImproperError("feedback controller C_h must be proper")
    log: list = []
    red = lambda g, where: _reduce(g, where, log, cancel_tol, axis_tol)  # noqa: E731
    Gy = ol.Gy_hat * (1.0 / p.ybar)
    Gh = ol.Gh_hat * p.phat
    if not c_h.is_zero:
        bad = unstable_controller_cancellations(Gh, c_h, cancel_tol, axis_tol)
        if bad:
            raise HypothesisViolation(f"unstable pole-zero cancellation between C_h and G_h at {bad}")
    buf = b.Cb.den
    lead = b.Cb.num
    nc, dc = c_h.num, c_h.den
    gain = p.phat / p.ybar
    open_den = ol.chi_yz * buf * dc
    lb_num = ol.chi_z * lead * dc * p.sigma_y
    lh_num = ol.gh_num * nc * buf * gain
    delta = open_den + lb_num + lh_num
    Lb = red(RationalTF(ol.chi_z * lead * p.sigma_y, ol.chi_yz * buf), "Lb")
    Lh = red(RationalTF(ol.gh_num * nc * gain, ol.chi_yz * dc), "Lh")
    L = red(RationalTF(lb_num + lh_num, open_den), "L")
    S = red(RationalTF(open_den, delta), "S")
    base = ol.chi_z * dc / p.ybar
    T_dyz = [red(RationalTF(base * buf * p.dhat.dy, delta), "T_dy")]
    for j, gz in enumerate(ol.Gz_vec):
        T_dyz.append(red(RationalTF(gz.num * buf * dc * (p.dhat.dz / p.ybar), delta), f"T_dz{j + 1}"))
    T_dx = red(RationalTF(base * (p.sigma_x * p.dhat.dx), delta), "T_dx")
    T_db = red(RationalTF(base * lead * (-p.dhat.db), delta), "T_db")
    channels = ("dy", *z_channel_names(p.n - 1), "dx", "db")
    return LoopSet(Gy, Gh, c_h, Lb, Lh, L, S, tuple(T_dyz), T_dx, T_db, channels, tuple(log))


def assemble(p: LinearPlant, c_h, cancel_tol: float = DEFAULT_CANCEL_TOL, axis_tol: float = DEFAULT_AXIS_TOL) -> LoopSet:
    """Convenience: open loop, buffer and loops in one call."""
    return build_loops(build_open_loop(p), build_buffer(p), p, c_h, cancel_tol, axis_tol)


def closed_loop_charpoly(p: LinearPlant, c_h) -> Polynomial:
    """Unreduced closed-loop characteristic polynomial (monic, degree n + 1 + controller order).

    chi_yz (s + sx + axx) dc + sigma_y chi_z (s + axx) dc + (phat/ybar) gh_num nc (s + sx + axx)
    """
    c_h = RationalTF.coerce(c_h)
    ol = build_open_loop(p)
    nc, dc = c_h.num, c_h.den
    buf = Polynomial([p.sigma_x + p.a_xx, 1.0])
    lead = Polynomial([p.a_xx, 1.0])
    out = ol.chi_yz * buf * dc + ol.chi_z * lead * dc * p.sigma_y
    if not c_h.is_zero:
        out = out + ol.gh_num * nc * buf * (p.phat / p.ybar)
    return out / out.leading


@dataclass(frozen=True)
class FrequencyResponse:
    omega: np.ndarray
    mag_db: np.ndarray
    phase_deg: np.ndarray

    def rows(self):
        return zip(self.omega.tolist(), self.mag_db.tolist(), self.phase_deg.tolist())


def log_grid(w_min: float, w_max: float, points_per_decade: int) -> np.ndarray:
    if not (0 < w_min < w_max):
        raise ValueError("frequency grid needs 0 < w_min < w_max")
    n = int(round(np.log10(w_max / w_min) * points_per_decade)) + 1
    return np.logspace(np.log10(w_min), np.log10(w_max), max(n, 2))


def frequency_response(g: RationalTF, grid) -> FrequencyResponse:
    """Magnitude in dB and continuity-unwrapped phase in degrees on ``grid``."""
    w = np.asarray(grid, dtype=float).ravel()
    if np.any(w <= 0) or np.any(np.diff(w) <= 0):
        raise ValueError("frequency grid must be positive and strictly increasing")
    if w.size > 1:
        decades = np.log10(w[-1] / w[0])
        if decades > 0 and (w.size - 1) / decades < 40:
            warnings.warn("fewer than 40 points per decade; phase unwrapping may be unreliable", stacklevel=2)
    h = np.asarray(tf_eval(g, 1j * w), dtype=complex)
    with np.errstate(divide="ignore"):
        mag = 20.0 * np.log10(np.abs(h))
    phase = np.degrees(np.unwrap(np.angle(h)))
    return FrequencyResponse(w, mag, phase)
