"""Glycolysis with creatine-phosphate buffering.

Two naming hazards: the intermediate-metabolite steady state is ``zbar``
and the right-half-plane zero of the feedback loop is ``z_rhp``; both are
written "z" in the usual figure captions.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Mapping

from .errors import ModelError
from .plantmodel import DisturbanceScales, LinearPlant, NonlinearModel
from .ratcalc import Polynomial, RationalTF


@dataclass(frozen=True)
class GlycolysisParams:
    """Biochemical parameters; defaults are the Bode/simulation figure set.

    ``V_y`` is not printed with those figures; it follows from the steady
    state identity ``V_y = wbar * zbar``.
    """

    q: float = 1.0
    V_y: float = 1.0
    wbar: float = 1.0
    zbar: float = 1.0
    ybar: float = 1.0
    alpha_f: float = 1.0
    alpha_w: float = -1.0
    beta_f: float = 3.5
    sigma_y: float = 0.0
    sigma_x: float = 1.0
    h: float = 0.0

    def __post_init__(self):
        for name in ("V_y", "wbar", "zbar", "ybar", "beta_f"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be positive")
        if self.q < 0:
            raise ModelError("q must be nonnegative")
        if self.sigma_y < 0 or not self.sigma_x > 0:
            raise ModelError("buffer constants require sigma_y >= 0 and sigma_x > 0")
        if not math.isclose(self.V_y, self.wbar * self.zbar, rel_tol=1e-9, abs_tol=1e-12):
            raise ModelError(f"steady state requires V_y == wbar*zbar (got {self.V_y} vs {self.wbar * self.zbar})")

    @property
    def a_xx(self) -> float:
        return 0.0

    @property
    def z_rhp(self) -> float:
        """RHP zero of the feedback loop, wbar / q."""
        if self.q == 0:
            raise ModelError("q = 0 leaves the feedback loop without a finite zero")
        return self.wbar / self.q

    @property
    def damping(self) -> float:
        """Middle coefficient of the process characteristic polynomial."""
        return self.q * self.alpha_f - (self.q + 1) * self.alpha_w * self.zbar + self.wbar

    def replace(self, **changes) -> "GlycolysisParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "GlycolysisParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ModelError(f"unknown glycolysis parameters: {sorted(unknown)}")
        try:
            return cls(**{k: float(v) for k, v in d.items()})
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"malformed glycolysis parameters: {exc}") from exc


def build_plant(gp: GlycolysisParams) -> LinearPlant:
    q, wb, zb = gp.q, gp.wbar, gp.zbar
    return LinearPlant(
        A_yy=(q + 1) * gp.alpha_w * zb - q * gp.alpha_f,
        A_yz=[(q + 1) * wb],
        A_zy=[gp.alpha_f - gp.alpha_w * zb],
        A_zz=[[-wb]],
        B_yh=-q * gp.beta_f,
        B_zh=[gp.beta_f],
        sigma_y=gp.sigma_y,
        sigma_x=gp.sigma_x,
        a_xx=0.0,
        ybar=gp.ybar,
        phat=gp.V_y,
        dhat=DisturbanceScales(dy=-gp.V_y),
    )


def controller(gp: GlycolysisParams) -> RationalTF:
    """Proportional feedback ``C_h = h``."""
    return RationalTF.constant(gp.h)


@dataclass(frozen=True)
class ClosedFormTFs:
    Gy: RationalTF
    Gh: RationalTF
    Gz_hat: RationalTF
    Lb: RationalTF
    Lh: RationalTF


def closed_form_tfs(gp: GlycolysisParams, c_h=None) -> ClosedFormTFs:
    """Hand-derived transfer functions, kept independent of the generic assembly.

    ``Lb`` is returned without cancelling the common ``s + wbar`` / ``s + sigma_x``
    factors, so compare it after minreal or by evaluation.
    """
    c_h = RationalTF.coerce(gp.h if c_h is None else c_h)
    den = Polynomial([-gp.wbar * gp.alpha_f, gp.damping, 1.0])
    Gy = RationalTF(Polynomial([gp.wbar, 1.0]) / gp.ybar, den)
    Gh = RationalTF(Polynomial([-gp.wbar, gp.q]) * (-gp.V_y * gp.beta_f), [gp.wbar, 1.0])
    Gz_hat = RationalTF([(gp.q + 1) * gp.wbar], [gp.wbar, 1.0])
    Lb = RationalTF(Polynomial([gp.wbar, 1.0]) * Polynomial([0.0, gp.sigma_y]), den * Polynomial([gp.sigma_x, 1.0]))
    # q (s - wbar/q) written as (q s - wbar) so that q = 0 stays finite
    Lh = RationalTF(Polynomial([-gp.wbar, gp.q]) * (-(gp.V_y / gp.ybar) * gp.beta_f), den) * c_h
    return ClosedFormTFs(Gy, Gh, Gz_hat, Lb, Lh)


def lb_at_rhp_zero(gp: GlycolysisParams) -> float:
    """Buffering loop gain at ``z = wbar/q``, in its printed closed form."""
    q, wb = gp.q, gp.wbar
    denom = wb + gp.damping * q - gp.alpha_f * q * q
    if denom == 0 or wb + gp.sigma_x * q == 0:
        raise ModelError("degenerate denominator in L_b(z)")
    return gp.sigma_y * wb / (wb + gp.sigma_x * q) * q * (q + 1) / denom


@dataclass(frozen=True)
class BufferRegime:
    regime: str
    ratio: float
    exact: float
    fast_buffer_Cb: float
    slow_buffer_Cb: float

    @property
    def approximation(self):
        if self.regime == "fast":
            return self.fast_buffer_Cb
        if self.regime == "slow":
            return self.slow_buffer_Cb
        return None


def asymptotic_regimes(gp: GlycolysisParams, fast: float = 10.0, slow: float = 0.1) -> BufferRegime:
    """Classify buffer speed against the RHP zero and report the matching asymptote of sigma_y*C_b(z)."""
    zr = gp.z_rhp
    ratio = gp.sigma_x / zr
    exact = gp.sigma_y * gp.wbar / (gp.wbar + gp.sigma_x * gp.q)
    regime = "fast" if ratio >= fast else "slow" if ratio <= slow else "intermediate"
    return BufferRegime(regime, ratio, exact, gp.sigma_y / gp.sigma_x * zr, gp.sigma_y)


def nonlinear_model(gp: GlycolysisParams, uh_bar: float = 0.0) -> NonlinearModel:
    """A concrete nonlinear realization whose linearization reproduces :func:`build_plant`.

    f = V_y (y/ybar)^a exp(beta_f (u - uh_bar) / V_y) with a = alpha_f ybar / V_y,
    w = wbar (y/ybar)^c with c = alpha_w ybar / wbar, mass-action buffering.
    """
    a = gp.alpha_f * gp.ybar / gp.V_y
    c = gp.alpha_w * gp.ybar / gp.wbar

    def f(y, u):
        return gp.V_y * (y / gp.ybar) ** a * math.exp(gp.beta_f * (u - uh_bar) / gp.V_y)

    def w(y):
        return gp.wbar * (y / gp.ybar) ** c

    return NonlinearModel(
        n=2,
        p_y=lambda y, z, u: (gp.q + 1) * w(y) * z[0],
        r_y=lambda y, z, u: gp.q * f(y, u) + gp.V_y,
        p_z=lambda y, z, u: [f(y, u)],
        r_z=lambda y, z, u: [w(y) * z[0]],
        g_y=lambda y, x: gp.sigma_y * y,
        g_x=lambda y, x: gp.sigma_x * x,
        r_x=None,
        u_h=uh_bar,
    )
