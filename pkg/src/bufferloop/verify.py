"""The acceptance suite, shared by ``bufferloop verify`` and the test-suite.

Each check returns a :class:`CriterionResult`; expected values are computed
from closed forms (golden ratio, sigma_y/4, analytic steps) rather than
from the code under test.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import glycolysis as gly
from .limits import (
    allpass_factorize,
    analyze,
    bode_lhs_numeric,
    bode_rhs,
    peak_bound,
    peak_numeric,
    quad_tol_from_env,
    weighted_lhs_numeric,
    weighted_rhs,
)
from .looptf import assemble, build_buffer, build_open_loop, closed_loop_charpoly
from .plantmodel import (
    DisturbanceScales,
    LinearPlant,
    MassActionParams,
    is_internally_stable,
    linearize,
    mass_action_model,
    realize_closed_loop,
    solve_steady_state,
)
from .ratcalc import Polynomial, RationalTF, limit_sL, poly_roots, tf_eval
from .simkit import sinusoid_amplitude, stability_boundary_gain, step_response

PHI = (1.0 + math.sqrt(5.0)) / 2.0
SEED = 20240611


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"criterion {self.number:2d} [{'PASS' if self.passed else 'FAIL'}] {self.title} ({self.seconds:.2f} s)"

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "detail": self.detail, "seconds": round(self.seconds, 3)}


@dataclass(frozen=True)
class VerifyConfig:
    base: gly.GlycolysisParams = gly.GlycolysisParams()
    rtol: float = 1e-2
    quad_tol: Optional[float] = None
    h_common: float = 1.0

    @property
    def qtol(self) -> float:
        return quad_tol_from_env() if self.quad_tol is None else self.quad_tol


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * (1.0 + abs(b))


def _random_plant(rng: np.random.Generator, n_max: int = 4) -> LinearPlant:
    n = int(rng.integers(1, n_max + 1))
    k = n - 1
    return LinearPlant(
        A_yy=rng.normal(),
        A_yz=rng.normal(size=k),
        A_zy=rng.normal(size=k),
        A_zz=rng.normal(size=(k, k)) - 1.5 * np.eye(k),
        B_yh=rng.normal(),
        B_zh=rng.normal(size=k),
        sigma_y=rng.uniform(0.0, 4.0),
        sigma_x=rng.uniform(0.1, 3.0),
        a_xx=rng.choice([0.0, rng.uniform(0.0, 2.0)]),
        ybar=rng.uniform(0.5, 2.0),
        phat=rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0]),
        dhat=DisturbanceScales(*rng.uniform(0.5, 2.0, size=4)),
    )


def _random_controller(rng: np.random.Generator) -> RationalTF:
    order = int(rng.integers(0, 3))
    den = Polynomial.from_roots(-rng.uniform(0.2, 3.0, size=order))
    num = rng.normal(size=order + 1) * 0.5
    return RationalTF(num, den)


# 1 ---------------------------------------------------------------------------
def c01_structure(cfg: VerifyConfig) -> CriterionResult:
    p = gly.build_plant(cfg.base)
    ol = build_open_loop(p)
    poles = sorted(r.real for r in ol.Gy_hat.poles().expanded())
    expect = [-2 - math.sqrt(5), -2 + math.sqrt(5)]
    pole_err = max(abs(a - b) for a, b in zip(poles, expect))
    zeros = assemble(p, cfg.h_common).Lh.zeros().rhp.expanded()
    gz = ol.Gz_vec[0]
    gz_exact = (list(gz.num.coeffs) == [2.0] and list(gz.den.coeffs) == [1.0, 1.0])
    ok = pole_err <= 1e-9 and len(zeros) == 1 and zeros[0] == 1.0 and gz_exact
    return CriterionResult(1, "glycolysis structure", ok, {
        "pole_error": pole_err, "rhp_zero": [z.real for z in zeros],
        "Gz_num": gz.num.coeffs.tolist(), "Gz_den": gz.den.coeffs.tolist()})


# 2 ---------------------------------------------------------------------------
def c02_lb_closed_form(cfg: VerifyConfig) -> CriterionResult:
    rows = []
    ok = True
    for sy in (0.5, 1.0, 2.0, 4.0):
        gp = cfg.base.replace(sigma_y=sy)
        closed = gly.lb_at_rhp_zero(gp)
        numeric = complex(tf_eval(assemble(gly.build_plant(gp), gp.h).Lb, gp.z_rhp))
        good = abs(closed - sy / 4) <= 1e-12 and abs(closed - numeric) <= 1e-12
        ok &= good
        rows.append({"sigma_y": sy, "closed_form": closed, "tf_eval": numeric.real, "ok": good})
    return CriterionResult(2, "buffer loop gain at the RHP zero", ok, {"rows": rows})


# 3 ---------------------------------------------------------------------------
def stabilizing_lag_pairs(cfg: VerifyConfig, want: int = 4):
    """Automated search for (h, sigma_y) with C_h = h/(s+1) stabilizing the glycolysis loop."""
    found = []
    for sy in (0.0, 1.0, 2.0, 4.0):
        p = gly.build_plant(cfg.base.replace(sigma_y=sy))
        for h in np.arange(0.1, 4.01, 0.1):
            c = RationalTF([h], [1.0, 1.0])
            if is_internally_stable(realize_closed_loop(p, c)).stable:
                found.append((round(float(h), 10), sy))
                break
        if len(found) >= want:
            break
    return found


def c03_bode_generalized(cfg: VerifyConfig) -> CriterionResult:
    t0 = time.perf_counter()
    pairs = stabilizing_lag_pairs(cfg)
    rows = []
    ok = len(pairs) >= 3
    for h, sy in pairs:
        p = gly.build_plant(cfg.base.replace(sigma_y=sy))
        ls = assemble(p, RationalTF([h], [1.0, 1.0]))
        rhs = bode_rhs(ls.L, ls.L.poles().rhp)
        lhs = bode_lhs_numeric(ls.S, cfg.qtol).value
        good = ls.L.is_strictly_proper and abs(lhs - rhs) <= cfg.rtol * (1 + abs(rhs))
        ok &= good
        rows.append({"h": h, "sigma_y": sy, "lhs": lhs, "rhs": rhs, "ok": good})
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 5.0
    return CriterionResult(3, "Bode integral, generalized limit", ok, {"rows": rows, "elapsed": elapsed})


# 4 ---------------------------------------------------------------------------
def open_loop_buffer_cases():
    """C_h = 0 configurations that are closed-loop stable.

    Stable process: glycolysis with alpha_f = -1.  Unstable process: a first-order
    pole at +0.5 held by dissipative buffering (a_xx > 0).
    """
    cases = []
    gp = gly.GlycolysisParams(alpha_f=-1.0)
    for sy in (0.5, 1.0, 2.0, 4.0):
        cases.append((f"stable process, sigma_y={sy}", gly.build_plant(gp.replace(sigma_y=sy)), 0.0))
    for sy in (2.0, 4.0):
        p = LinearPlant(A_yy=0.5, A_yz=[], A_zy=[], A_zz=[], B_yh=1.0, B_zh=[], sigma_y=sy, sigma_x=1.0, a_xx=1.0)
        cases.append((f"pole at +0.5, sigma_y={sy}", p, 0.5))
    return cases


def c04_bode_buffer_term(cfg: VerifyConfig) -> CriterionResult:
    rows = []
    ok = True
    for name, p, pole_sum in open_loop_buffer_cases():
        ls = assemble(p, 0.0)
        stable = is_internally_stable(realize_closed_loop(p, 0.0)).stable
        target = -0.5 * math.pi * p.sigma_y + math.pi * pole_sum
        lhs = bode_lhs_numeric(ls.S, cfg.qtol).value if stable else None
        good = stable and abs(lhs - target) <= cfg.rtol * max(1.0, abs(target))
        ok &= good
        rows.append({"case": name, "lhs": lhs, "target": target, "ok": good})
    return CriterionResult(4, "Bode integral, buffering term", ok, {"rows": rows})


# 5 ---------------------------------------------------------------------------
def c05_weighted(cfg: VerifyConfig) -> CriterionResult:
    targets = {0.0: math.pi * math.log(PHI), 1.0: math.pi * math.log(PHI) - math.pi * math.log(1.25)}
    rows = []
    ok = True
    for sy, target in targets.items():
        gp = cfg.base.replace(sigma_y=sy, h=cfg.h_common)
        p = gly.build_plant(gp)
        ls = assemble(p, gp.h)
        stable = is_internally_stable(realize_closed_loop(p, gp.h)).stable
        z = gp.z_rhp
        rhs = weighted_rhs(ls.Lb, z, ls.L.poles().rhp)
        lhs = weighted_lhs_numeric(ls.S, z, cfg.qtol) if stable else math.nan
        good = stable and abs(lhs - target) <= cfg.rtol * abs(target) and abs(lhs - rhs) <= cfg.rtol * abs(rhs)
        ok &= good
        rows.append({"sigma_y": sy, "h": gp.h, "lhs": lhs, "rhs": rhs, "target": target, "ok": good})
    return CriterionResult(5, "weighted integral at the RHP zero", ok, {"rows": rows})


# 6 ---------------------------------------------------------------------------
def c06_peak(cfg: VerifyConfig) -> CriterionResult:
    bounds = {}
    for sy in (0.0, 1.0, 2.0, 4.0):
        gp = cfg.base.replace(sigma_y=sy)
        ls = assemble(gly.build_plant(gp), cfg.h_common)
        bounds[sy] = peak_bound(1.0, ls.Lb, gp.z_rhp, ls.L.poles().rhp)
    vals = [bounds[s] for s in (0.0, 1.0, 2.0, 4.0)]
    decreasing = all(a > b for a, b in zip(vals, vals[1:]))
    exact = abs(bounds[0.0] - PHI) <= 1e-9 and abs(bounds[1.0] - PHI / 1.25) <= 1e-9
    checks = []
    ineq = True
    for sy in (0.0, 1.0, 2.0, 4.0):
        for h in (0.5, 1.0, 1.5, 2.0):
            gp = cfg.base.replace(sigma_y=sy)
            p = gly.build_plant(gp)
            if not is_internally_stable(realize_closed_loop(p, h)).stable:
                continue
            ls = assemble(p, h)
            pk = peak_numeric(1.0, ls.S).peak
            b = peak_bound(1.0, ls.Lb, gp.z_rhp, ls.L.poles().rhp)
            good = pk >= b - 1e-6
            ineq &= good
            checks.append({"sigma_y": sy, "h": h, "peak": pk, "bound": b, "ok": good})
    ok = decreasing and exact and ineq and len(checks) > 0
    return CriterionResult(6, "sensitivity peak bound", ok, {
        "bounds": {str(k): v for k, v in bounds.items()}, "decreasing": decreasing, "checks": checks})


# 7 ---------------------------------------------------------------------------
def c07_minimum_phase(cfg: VerifyConfig) -> CriterionResult:
    rows = []
    ok = True
    for sy in (0.0, 1.0, 4.0):
        gp = cfg.base.replace(sigma_y=sy)
        p = gly.build_plant(gp)
        ls = assemble(p, cfg.h_common)
        f = allpass_factorize(ls.S, ls.L.poles().rhp.expanded())
        ident = math.pi * math.log(abs(complex(tf_eval(f.S_mp, gp.z_rhp))))
        lhs = weighted_lhs_numeric(ls.S, gp.z_rhp, cfg.qtol)
        good = abs(ident - lhs) <= cfg.rtol * max(1.0, abs(lhs))
        ok &= good
        rows.append({"sigma_y": sy, "pi_ln_Smp": ident, "weighted_lhs": lhs, "ok": good})
    return CriterionResult(7, "minimum-phase factor identity", ok, {"rows": rows})


# 8 ---------------------------------------------------------------------------
def c08_stabilization(cfg: VerifyConfig) -> CriterionResult:
    p0 = gly.build_plant(cfg.base.replace(sigma_y=0.0))
    p4 = gly.build_plant(cfg.base.replace(sigma_y=4.0))
    h0 = stability_boundary_gain(p0, cfg.h_common, 10.0, 1e-4)
    h4 = stability_boundary_gain(p4, cfg.h_common, 10.0, 1e-4)
    amp0 = step_response(realize_closed_loop(p0, cfg.h_common), "dy", 1.0, 0.01, 40.0).oscillation_amplitude(1.0)
    amp4 = step_response(realize_closed_loop(p4, cfg.h_common), "dy", 1.0, 0.01, 40.0).oscillation_amplitude(1.0)
    ok = h4 > h0 and amp4 < amp0
    return CriterionResult(8, "buffering extends the stable gain range", ok, {
        "h_crit_sigma0": h0, "h_crit_sigma4": h4, "amplitude_sigma0": amp0, "amplitude_sigma4": amp4})


# 9 ---------------------------------------------------------------------------
def c09_identities(cfg: VerifyConfig, draws: int = 200) -> CriterionResult:
    rng = np.random.default_rng(SEED)
    worst_s = worst_lim = 0.0
    cb_exact = True
    for _ in range(draws):
        p = _random_plant(rng)
        b = build_buffer(p)
        tot = b.Cb + b.Cb_lp
        cb_exact &= np.array_equal(tot.num.coeffs, tot.den.coeffs)
        ls = assemble(p, _random_controller(rng))
        s = complex(rng.normal(), rng.normal()) * 2.0
        val = complex(tf_eval(ls.S, s)) * (1.0 + complex(tf_eval(ls.L, s)))
        worst_s = max(worst_s, abs(val - 1.0))
        lim = limit_sL(ls.Lb) if p.sigma_y else 0.0
        worst_lim = max(worst_lim, abs(lim - p.sigma_y))
    ok = cb_exact and worst_s <= 1e-9 and worst_lim <= 1e-9
    return CriterionResult(9, "algebraic identities", ok, {
        "Cb_plus_Cblp_exact": cb_exact, "max_S_times_1_plus_L_error": worst_s, "max_lim_sLb_error": worst_lim})


# 10 --------------------------------------------------------------------------
def c10_cross_representation(cfg: VerifyConfig, plants: int = 20, points: int = 50) -> CriterionResult:
    rng = np.random.default_rng(SEED + 1)
    cases = [(gly.build_plant(cfg.base.replace(sigma_y=sy)), RationalTF.constant(cfg.h_common)) for sy in (0.0, 1.0, 4.0)]
    while len(cases) < plants:
        cases.append((_random_plant(rng, 3), _random_controller(rng)))
    worst_tf = worst_pole = 0.0
    for p, c in cases:
        ls = assemble(p, c)
        ss = realize_closed_loop(p, c)
        for _ in range(points):
            s = complex(rng.normal(), rng.normal()) * 2.0
            ref = ss.transfer(s)
            for j, ch in enumerate(ss.channels):
                rat = complex(tf_eval(ls.closed_loop(ch), s))
                worst_tf = max(worst_tf, abs(rat - ref[j]) / max(abs(ref[j]), 1e-300))
        ev = np.linalg.eigvals(ss.A)
        rts = np.array(poly_roots(closed_loop_charpoly(p, c)).expanded())
        cost = np.abs(ev[:, None] - rts[None, :])
        r, k = linear_sum_assignment(cost)
        worst_pole = max(worst_pole, float(np.max(cost[r, k] / (1.0 + np.abs(ev[r])))))
    ok = worst_tf <= 1e-8 and worst_pole <= 1e-8
    return CriterionResult(10, "rational maps vs state-space realization", ok, {
        "max_relative_tf_error": worst_tf, "max_pole_error": worst_pole, "plants": len(cases)})


# 11 --------------------------------------------------------------------------
def c11_linearization(cfg: VerifyConfig, draws: int = 100) -> CriterionResult:
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    for _ in range(draws):
        k = MassActionParams(*rng.uniform(0.5, 2.0, size=2), rng.uniform(0.0, 1.0), *rng.uniform(0.5, 2.0, size=5))
        fd_model = mass_action_model(k)
        ss = solve_steady_state(fd_model, [1.0, 1.0, 1.0])
        fd = linearize(fd_model, ss)
        an = linearize(mass_action_model(k, analytic=True), ss)
        for name in ("A_yy", "A_yz", "A_zy", "A_zz", "B_yh", "B_zh", "sigma_y", "sigma_x", "a_xx"):
            a = np.atleast_1d(getattr(fd, name)).ravel()
            b = np.atleast_1d(getattr(an, name)).ravel()
            worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0))))
    return CriterionResult(11, "finite-difference vs analytic Jacobians", worst <= 1e-6, {"max_relative_error": worst})


# 12 --------------------------------------------------------------------------
def c12_simulation(cfg: VerifyConfig) -> CriterionResult:
    worst_final = 0.0
    traces = 0
    for sy in (0.0, 1.0, 4.0):
        for h in (0.5, 1.0, 1.5):
            p = gly.build_plant(cfg.base.replace(sigma_y=sy))
            ss = realize_closed_loop(p, h)
            if not is_internally_stable(ss).stable:
                continue
            ls = assemble(p, h)
            for ch in ss.channels:
                tr = step_response(ss, ch, 1.0)
                expect = complex(tf_eval(ls.closed_loop(ch), 0.0)).real
                worst_final = max(worst_final, abs(tr.outputs[-1] - expect))
                traces += 1
    p = gly.build_plant(cfg.base.replace(sigma_y=1.0))
    ss = realize_closed_loop(p, cfg.h_common)
    t_dy = assemble(p, cfg.h_common).closed_loop("dy")
    sin_rows = []
    worst_sin = 0.0
    for w in (0.1, 1.0, 10.0):
        amp = sinusoid_amplitude(ss, "dy", w)
        ref = abs(complex(tf_eval(t_dy, 1j * w)))
        rel = abs(amp - ref) / ref
        worst_sin = max(worst_sin, rel)
        sin_rows.append({"omega": w, "simulated": amp, "frequency_domain": ref})
    ok = traces > 0 and worst_final <= 1e-6 and worst_sin <= 1e-3
    return CriterionResult(12, "simulation vs frequency domain", ok, {
        "traces": traces, "max_final_value_error": worst_final, "max_sinusoid_relative_error": worst_sin,
        "sinusoids": sin_rows})


CRITERIA: tuple[Callable[[VerifyConfig], CriterionResult], ...] = (
    c01_structure, c02_lb_closed_form, c03_bode_generalized, c04_bode_buffer_term, c05_weighted,
    c06_peak, c07_minimum_phase, c08_stabilization, c09_identities, c10_cross_representation,
    c11_linearization, c12_simulation,
)


def run_criterion(number: int, cfg: Optional[VerifyConfig] = None) -> CriterionResult:
    cfg = cfg or VerifyConfig()
    fn = CRITERIA[number - 1]
    t0 = time.perf_counter()
    try:
        res = fn(cfg)
    except Exception as exc:  # a crash is a failed criterion, reported with its cause
        res = CriterionResult(number, fn.__name__, False, {"error": f"{type(exc).__name__}: {exc}"})
    res.seconds = time.perf_counter() - t0
    return res


def run_all(cfg: Optional[VerifyConfig] = None) -> list[CriterionResult]:
    cfg = cfg or VerifyConfig()
    return [run_criterion(i, cfg) for i in range(1, len(CRITERIA) + 1)]


def glycolysis_report(gp: gly.GlycolysisParams, tol: Optional[float] = None, rtol: float = 1e-2):
    """Full limit report for one glycolysis parameter set."""
    return analyze(gly.build_plant(gp), gly.controller(gp), tol=tol, rtol=rtol)
