"""Fundamental limits on buffer-feedback sensitivity, analytic and numerical.

Three relations are checked:

* Bode integral:  int_0^inf ln|S(iw)| dw = pi * sum Re p_k - (pi/2) * lim s L(s)
* Weighted integral at an RHP zero z of L_h:
      int_0^inf ln|S(iw)| 2z/(z^2+w^2) dw
          = pi ln prod |(p_k+z)/(p_k-z)| - pi ln |1 + L_b(z)|
* Peak bound:  ||w_p S||_inf >= |w_p(z) / (1 + L_b(z))| prod |(p_k+z)/(p_k-z)|

where p_k are the RHP poles of L = L_b + L_h.  Right-hand sides are
computed from roots; left-hand sides by quadrature and frequency search on
the actual sensitivity function.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import quadrature
from .errors import HypothesisViolation, NumericalFailure, StabilityError, UnboundedLimitError
from .looptf import LoopSet, assemble
from .plantmodel import LinearPlant, is_internally_stable, realize_closed_loop
from .ratcalc import (
    DEFAULT_AXIS_TOL,
    DEFAULT_CANCEL_TOL,
    Polynomial,
    RationalTF,
    RootSet,
    laurent_at_infinity,
    limit_sL,
    tf_eval,
    tf_minreal,
)

DEFAULT_QUAD_TOL = 1e-8
PEAK_SLACK = 1e-6


def quad_tol_from_env(default: float = DEFAULT_QUAD_TOL) -> float:
    """Quadrature tolerance, overridable through ``BUFFERLOOP_TOL``."""
    raw = os.environ.get("BUFFERLOOP_TOL")
    if not raw:
        return default
    val = float(raw)
    if not val > 0:
        raise ValueError("BUFFERLOOP_TOL must be positive")
    return val


def _require_stable(g: RationalTF, what: str, axis_tol: float = DEFAULT_AXIS_TOL) -> RootSet:
    poles = g.poles(axis_tolerance=axis_tol)
    if len(poles.rhp) or len(poles.on_axis):
        raise StabilityError(f"{what} is not stable: poles {poles.expanded()}")
    return poles


def _log_abs(g: RationalTF):
    def f(w):
        s = 1j * np.asarray(w, dtype=float)
        return np.log(np.abs(g.num(s))) - np.log(np.abs(g.den(s)))
    return f


def _blaschke(z: float, rhp_poles) -> float:
    out = 1.0
    for p in rhp_poles:
        out *= abs((p + z) / (p - z))
    return out


def _check_zero(z: float, rhp_poles, axis_tol: float) -> None:
    if not z > axis_tol:
        raise HypothesisViolation(f"zero {z} is not in the open right half plane")
    for p in rhp_poles:
        if abs(p - z) <= axis_tol * (1.0 + abs(z)):
            raise HypothesisViolation(f"zero {z} coincides with unstable pole {p}")


def bode_rhs(L: RationalTF, rhp_poles) -> float:
    """pi * sum Re(p_k) - (pi/2) * lim s L(s); raises for biproper ``L``."""
    return math.pi * sum(p.real for p in rhp_poles) - 0.5 * math.pi * limit_sL(L)


@dataclass(frozen=True)
class BodeIntegral:
    value: float
    tail_estimate: float
    omega_max: float
    quad_error: float


def _log_tail(S: RationalTF, omega_max: float, n_terms: int = 60) -> tuple[float, float]:
    """int_W^inf ln|S(iw)| dw from the series of ln S at infinity.

    With S(W t) = sum a_k t^-k (a_0 = 1), ln S(W t) = sum b_k t^-k and only
    even k contribute to the real part on the imaginary axis, giving
    W * sum_m (-1)^m b_2m / (2m - 1).  Returns (tail, size of last term).
    """
    scale = omega_max ** np.arange(len(S.num.coeffs))
    dscale = omega_max ** np.arange(len(S.den.coeffs))
    num = S.num.coeffs * scale / (S.num.leading * scale[-1])
    den = S.den.coeffs * dscale / dscale[-1]
    a = laurent_at_infinity(RationalTF(num, den), n_terms + 1)
    b = np.zeros(n_terms + 1)
    for n in range(1, n_terms + 1):
        b[n] = a[n] - sum(k * b[k] * a[n - k] for k in range(1, n)) / n
    terms = [(-1) ** m * b[2 * m] / (2 * m - 1) for m in range(1, n_terms // 2 + 1)]
    return omega_max * float(sum(terms)), omega_max * abs(terms[-1])


def bode_lhs_numeric(S: RationalTF, tol: float = DEFAULT_QUAD_TOL) -> BodeIntegral:
    """int_0^inf ln|S(iw)| dw by adaptive quadrature on [0, W] plus an analytic tail.

    W is ten times the largest pole/zero magnitude of S, where the series of
    ln S at infinity converges geometrically; the tail is summed from it.
    """
    poles = _require_stable(S, "sensitivity function")
    if S.relative_degree != 0 or abs(S.num.leading - 1.0) > 1e-9:
        raise UnboundedLimitError("S(i*inf) must equal 1 (loop must be strictly proper)")
    feats = [abs(r) for r in poles]
    if S.num.degree:
        feats += [abs(r) for r in S.zeros()]
    rho = max([1.0, *feats])
    omega_max = 10.0 * rho
    tail, tail_err = _log_tail(S, omega_max)
    if tail_err > tol:
        raise NumericalFailure(f"tail series did not converge (last term {tail_err:.3g})")
    lo = math.floor(math.log10(min([1e-3, *[f for f in feats if f > 0]])))
    brk = [10.0 ** k for k in range(lo, int(math.ceil(math.log10(omega_max))))]
    brk += [f for f in feats if 0 < f < omega_max]
    res = quadrature.integrate(_log_abs(S), 0.0, omega_max, breakpoints=brk, abs_tol=tol, rel_tol=tol)
    return BodeIntegral(res.value + tail, tail, omega_max, res.error)


def weighted_rhs(Lb: RationalTF, z: float, rhp_poles, axis_tol: float = DEFAULT_AXIS_TOL) -> float:
    """pi ln prod |(p_k+z)/(p_k-z)| - pi ln |1 + L_b(z)|."""
    _check_zero(z, rhp_poles, axis_tol)
    one_plus = 1.0 + complex(tf_eval(Lb, z))
    if one_plus == 0:
        raise HypothesisViolation("1 + L_b(z) vanishes")
    return math.pi * math.log(_blaschke(z, rhp_poles)) - math.pi * math.log(abs(one_plus))


def weighted_lhs_numeric(S: RationalTF, z: float, tol: float = DEFAULT_QUAD_TOL) -> float:
    """int_0^inf ln|S(iw)| 2z/(z^2+w^2) dw via w = z tan(t), i.e. int_0^{pi/2} 2 ln|S(i z tan t)| dt."""
    poles = _require_stable(S, "sensitivity function")
    if not z > 0:
        raise HypothesisViolation("weight requires z > 0")
    base = _log_abs(S)
    lim_inf = math.log(abs(S.num.leading)) if S.relative_degree == 0 else -math.inf
    if not math.isfinite(lim_inf):
        raise UnboundedLimitError("ln|S| diverges at infinity")

    def f(t):
        t = np.asarray(t, dtype=float)
        c = np.cos(t)
        out = np.full(t.shape, lim_inf)
        ok = c > 1e-12
        out[ok] = base(z * np.sin(t[ok]) / c[ok])
        return 2.0 * out

    feats = [math.atan(abs(r) / z) for r in poles if abs(r) > 0]
    res = quadrature.integrate(f, 0.0, 0.5 * math.pi, breakpoints=feats, abs_tol=tol, rel_tol=tol)
    return res.value


def weight_integral(z: float, tol: float = 1e-12) -> float:
    """int_0^inf 2z/(z^2+w^2) dw by quadrature on w = t/(1-t); equals pi."""
    def f(t):
        t = np.asarray(t, dtype=float)
        w = t / (1.0 - t)
        return 2.0 * z / (z * z + w * w) / (1.0 - t) ** 2
    return quadrature.integrate(f, 0.0, 1.0, abs_tol=tol, rel_tol=tol).value


def peak_bound(wp, Lb: RationalTF, z: float, rhp_poles, axis_tol: float = DEFAULT_AXIS_TOL) -> float:
    """|w_p(z) / (1 + L_b(z))| times the Blaschke factor of the unstable poles."""
    wp = RationalTF.coerce(wp)
    _check_zero(z, rhp_poles, axis_tol)
    one_plus = 1.0 + complex(tf_eval(Lb, z))
    if one_plus == 0:
        raise HypothesisViolation("1 + L_b(z) vanishes")
    return abs(complex(tf_eval(wp, z)) / one_plus) * _blaschke(z, rhp_poles)


@dataclass(frozen=True)
class PeakResult:
    peak: float
    omega: float


def _golden_max(f, a: float, b: float, tol: float = 1e-10, maxiter: int = 200):
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if abs(b - a) <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def peak_numeric(wp, S: RationalTF, points_per_decade: int = 60, w_min: float = 1e-4, w_max: float = 1e4) -> PeakResult:
    """sup_w |w_p(iw) S(iw)| from a log grid, w = 0, w = inf and golden-section refinement."""
    g = tf_minreal(RationalTF.coerce(wp) * S)
    if not g.is_proper:
        raise UnboundedLimitError("w_p S must be proper")
    _require_stable(g, "w_p S")
    n = int(round(math.log10(w_max / w_min) * points_per_decade)) + 1
    grid = np.logspace(math.log10(w_min), math.log10(w_max), n)
    mags = np.abs(tf_eval(g, 1j * grid))
    i = int(np.argmax(mags))
    best_w, best = float(grid[i]), float(mags[i])
    if 0 < i < n - 1:
        lw, v = _golden_max(lambda u: float(abs(tf_eval(g, 1j * 10.0 ** u))),
                            math.log10(grid[i - 1]), math.log10(grid[i + 1]))
        if v > best:
            best_w, best = 10.0 ** lw, v
    at_zero = float(abs(tf_eval(g, 0.0)))
    if at_zero > best:
        best_w, best = 0.0, at_zero
    at_inf = abs(g.num.leading) if g.relative_degree == 0 else 0.0
    if at_inf > best:
        best_w, best = math.inf, at_inf
    return PeakResult(best, best_w)


@dataclass(frozen=True)
class AllPassFactors:
    S_ap: RationalTF
    S_mp: RationalTF


def allpass_factorize(
    S: RationalTF, rhp_poles_of_L, cancel_tol: float = DEFAULT_CANCEL_TOL, axis_tol: float = DEFAULT_AXIS_TOL
) -> AllPassFactors:
    """S = S_ap * S_mp with S_ap = prod (s - p_k)/(s + p_k)."""
    pk = list(rhp_poles_of_L)
    zs = S.zeros(axis_tolerance=axis_tol).rhp.expanded() if S.num.degree else []
    unmatched = list(zs)
    for p in pk:
        j = next((j for j, q in enumerate(unmatched) if abs(q - p) <= 1e-6 * (1.0 + abs(p))), None)
        if j is None:
            raise HypothesisViolation(f"unstable pole {p} of L is not a zero of S")
        unmatched.pop(j)
    if unmatched:
        raise HypothesisViolation(f"S has RHP zeros {unmatched} that are not poles of L")
    S_ap = RationalTF(Polynomial.from_roots(pk), Polynomial.from_roots([-p for p in pk]))
    S_mp = tf_minreal(S / S_ap, max(cancel_tol, 1e-6), axis_tol)
    for kind, roots in (("zeros", S_mp.zeros(axis_tolerance=axis_tol)), ("poles", S_mp.poles(axis_tolerance=axis_tol))):
        if len(roots.rhp) or len(roots.on_axis):
            raise NumericalFailure(f"minimum-phase factor still has non-LHP {kind}: {roots.expanded()}")
    return AllPassFactors(S_ap, S_mp)


@dataclass
class Comparison:
    name: str
    kind: str  # "equality" or "inequality"
    lhs: Optional[float]
    rhs: Optional[float]
    tol: float
    applicable: bool
    passed: Optional[bool]
    label: str = "standard"

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("name", "kind", "lhs", "rhs", "tol", "applicable", "passed", "label")}


def _close(lhs: float, rhs: float, rtol: float) -> bool:
    return abs(lhs - rhs) <= max(rtol, rtol * abs(rhs))


@dataclass
class LimitReport:
    rhp_poles: RootSet
    rhp_zeros_h: RootSet
    bode: dict
    weighted: list
    peak: dict
    hypothesis_flags: dict
    comparisons: list = field(default_factory=list)
    eigenvalues: tuple = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.comparisons if c.applicable)

    def to_dict(self) -> dict:
        return {
            "rhp_poles": [_cplx(p) for p in self.rhp_poles],
            "rhp_zeros_h": [_cplx(z) for z in self.rhp_zeros_h],
            "bode": self.bode,
            "weighted": self.weighted,
            "peak": self.peak,
            "hypothesis_flags": self.hypothesis_flags,
            "comparisons": [c.to_dict() for c in self.comparisons],
            "closed_loop_eigenvalues": [_cplx(e) for e in self.eigenvalues],
            "passed": self.passed,
        }


def _cplx(z) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def tf_to_dict(g: RationalTF) -> dict:
    return {"num": g.num.coeffs.tolist(), "den": g.den.coeffs.tolist()}


def analyze(
    plant: LinearPlant,
    c_h,
    wp=None,
    tol: Optional[float] = None,
    rtol: float = 1e-2,
    cancel_tol: float = DEFAULT_CANCEL_TOL,
    axis_tol: float = DEFAULT_AXIS_TOL,
    loops: Optional[LoopSet] = None,
) -> LimitReport:
    """Evaluate every limit relation for one plant/controller pair.

    Left-hand sides are only computed when the closed-loop state matrix is
    stable.  Each relation carries a label: ``"standard"`` when all theorem
    hypotheses hold, ``"generalized"`` when the formula is applied outside
    them, ``"not applicable"`` when it cannot be evaluated.
    """
    tol = quad_tol_from_env() if tol is None else tol
    c_h = RationalTF.coerce(c_h)
    wp = RationalTF.constant(1.0) if wp is None else RationalTF.coerce(wp)
    ls = loops or assemble(plant, c_h, cancel_tol, axis_tol)
    stab = is_internally_stable(realize_closed_loop(plant, c_h), axis_tol)
    L_poles = ls.L.poles(axis_tolerance=axis_tol)
    pk = L_poles.rhp
    zeros_h = ls.Lh.zeros(axis_tolerance=axis_tol).rhp if not ls.Lh.is_zero and ls.Lh.num.degree else RootSet((), (), axis_tol)
    lh_poles = ls.Lh.poles(axis_tolerance=axis_tol) if not ls.Lh.is_zero else RootSet((), (), axis_tol)
    z_list = zeros_h.expanded()
    flags = {
        "Ch_proper": c_h.is_proper,
        "Gh_strictly_proper": ls.Gh.is_strictly_proper,
        "L_strictly_proper": ls.L.is_strictly_proper,
        "closed_loop_stable": stab.stable,
        "L_poles_off_axis": len(L_poles.on_axis) == 0,
        "z_distinct_from_pk": all(abs(z - p) > axis_tol * (1 + abs(z)) for z in z_list for p in pk),
        "single_rhp_zero": len(z_list) == 1,
        "unstable_poles_in_Lh": all(any(abs(p - q) <= 1e-6 * (1 + abs(p)) for q in lh_poles) for p in pk),
        "no_unstable_cancellations": not ls.unstable_cancellations,
    }
    comps: list[Comparison] = []

    # Bode integral
    standard_bode = flags["Ch_proper"] and flags["Gh_strictly_proper"]
    bode = {"lhs_numeric": None, "rhs_analytic": None, "rhs_sigma_y_form": None, "lim_sL": None,
            "tail_estimate": None, "omega_max": None, "label": "standard" if standard_bode else "generalized"}
    if flags["L_strictly_proper"]:
        lim = limit_sL(ls.L)
        bode["lim_sL"] = lim
        bode["rhs_analytic"] = bode_rhs(ls.L, pk)
        if standard_bode:
            bode["rhs_sigma_y_form"] = math.pi * sum(p.real for p in pk) - 0.5 * math.pi * plant.sigma_y
        if stab.stable:
            bi = bode_lhs_numeric(ls.S, tol)
            bode.update(lhs_numeric=bi.value, tail_estimate=bi.tail_estimate, omega_max=bi.omega_max)
    else:
        bode["label"] = "not applicable"
    ok_bode = bode["lhs_numeric"] is not None and flags["L_poles_off_axis"]
    comps.append(Comparison(
        "bode_integral", "equality", bode["lhs_numeric"], bode["rhs_analytic"], rtol, ok_bode,
        _close(bode["lhs_numeric"], bode["rhs_analytic"], rtol) if ok_bode else None, bode["label"],
    ))

    # Weighted integral, peak bound and all-pass identity, one per RHP zero of L_h
    weighted = []
    peak_bounds = []
    peak_num = None
    if stab.stable:
        try:
            pr = peak_numeric(wp, ls.S)
            peak_num = {"value": pr.peak, "omega": pr.omega if math.isfinite(pr.omega) else None}
        except (StabilityError, UnboundedLimitError):
            peak_num = None
    factors = None
    if stab.stable and z_list:
        try:
            factors = allpass_factorize(ls.S, pk, cancel_tol, axis_tol)
        except (HypothesisViolation, NumericalFailure):
            factors = None
    for z in z_list:
        entry = {"z": _cplx(z), "lhs_numeric": None, "rhs_analytic": None, "Lb_at_z": None,
                 "blaschke": None, "smp_identity": None, "label": "not applicable"}
        bound_entry = {"z": _cplx(z), "bound_analytic": None, "label": "not applicable"}
        real_z = abs(z.imag) <= axis_tol * (1 + abs(z))
        distinct = all(abs(z - p) > axis_tol * (1 + abs(z)) for p in pk)
        if real_z and distinct:
            zr = z.real
            label = "standard" if flags["single_rhp_zero"] and flags["Ch_proper"] else "generalized"
            lbz = complex(tf_eval(ls.Lb, zr))
            entry.update(rhs_analytic=weighted_rhs(ls.Lb, zr, pk, axis_tol), Lb_at_z=_cplx(lbz),
                         blaschke=_blaschke(zr, pk), label=label)
            bound_entry.update(bound_analytic=peak_bound(wp, ls.Lb, zr, pk, axis_tol), label=label)
            if stab.stable:
                entry["lhs_numeric"] = weighted_lhs_numeric(ls.S, zr, tol)
                if factors is not None:
                    entry["smp_identity"] = math.pi * math.log(abs(complex(tf_eval(factors.S_mp, zr))))
        weighted.append(entry)
        peak_bounds.append(bound_entry)
        ok_w = entry["lhs_numeric"] is not None
        comps.append(Comparison(
            f"weighted_integral[z={z.real:.6g}]", "equality", entry["lhs_numeric"], entry["rhs_analytic"], rtol,
            ok_w, _close(entry["lhs_numeric"], entry["rhs_analytic"], rtol) if ok_w else None, entry["label"],
        ))
        ok_id = ok_w and entry["smp_identity"] is not None
        comps.append(Comparison(
            f"minimum_phase_identity[z={z.real:.6g}]", "equality", entry["lhs_numeric"], entry["smp_identity"], rtol,
            ok_id, _close(entry["lhs_numeric"], entry["smp_identity"], rtol) if ok_id else None, entry["label"],
        ))
        ok_p = peak_num is not None and bound_entry["bound_analytic"] is not None
        comps.append(Comparison(
            f"peak_bound[z={z.real:.6g}]", "inequality", peak_num["value"] if peak_num else None,
            bound_entry["bound_analytic"], PEAK_SLACK, ok_p,
            (peak_num["value"] >= bound_entry["bound_analytic"] - PEAK_SLACK) if ok_p else None, bound_entry["label"],
        ))
    peak = {"bounds": peak_bounds, "peak_numeric": peak_num, "wp_used": tf_to_dict(wp)}
    return LimitReport(pk, zeros_h, bode, weighted, peak, flags, comps, stab.eigenvalues)
