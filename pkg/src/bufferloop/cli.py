"""Command-line front end: ``bufferloop <bode|step|limits|glycolysis|verify>``.

Exit codes: 0 success, 2 input error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import glycolysis as gly
from .errors import BufferLoopError, ModelError
from .limits import analyze, quad_tol_from_env
from .looptf import assemble, frequency_response, log_grid
from .plantmodel import LinearPlant, is_internally_stable, realize_closed_loop
from .ratcalc import RationalTF, tf_eval
from .simkit import step_response
from .verify import VerifyConfig, run_all

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 2, 3
DEFAULT_SWEEP_SY = (0.0, 1.0, 4.0)
DEFAULT_SWEEP_H = (0.5, 1.0, 1.5)


class InputError(Exception):
    """Bad arguments or model file; maps to exit code 2."""


@dataclass(frozen=True)
class Model:
    plant: LinearPlant
    controller: RationalTF
    h: Optional[float]
    glycolysis: Optional[gly.GlycolysisParams] = None
    wp: Optional[RationalTF] = None


@dataclass(frozen=True)
class Point:
    sigma_y: float
    h: Optional[float]
    plant: LinearPlant
    controller: RationalTF

    @property
    def tag(self) -> str:
        return f"sy{_fmt(self.sigma_y)}_h{_fmt(self.h) if self.h is not None else 'rational'}"


def _fmt(x: float) -> str:
    return f"{x:g}"


def _parse_controller(d) -> tuple[RationalTF, Optional[float]]:
    if d is None:
        return RationalTF.constant(0.0), 0.0
    if not isinstance(d, dict):
        raise ModelError("controller must be an object")
    kind = d.get("type")
    if kind == "proportional":
        h = float(d["h"])
        return RationalTF.constant(h), h
    if kind == "rational":
        c = RationalTF(list(map(float, d["num"])), list(map(float, d["den"])))
        if not c.is_proper:
            raise ModelError("controller must be proper")
        return c, None
    raise ModelError(f"unknown controller type {kind!r}")


def _parse_tf(d) -> RationalTF:
    if isinstance(d, (int, float)):
        return RationalTF.constant(float(d))
    return RationalTF(list(map(float, d["num"])), list(map(float, d.get("den", [1.0]))))


def load_model(path: Optional[str], allow_default: bool = False) -> Model:
    """Parse a model descriptor; ``None`` gives the glycolysis defaults when allowed."""
    if path is None:
        if not allow_default:
            raise InputError("--model is required for this command")
        gp = gly.GlycolysisParams()
        return Model(gly.build_plant(gp), gly.controller(gp), gp.h, gp)
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise InputError(f"model file not found: {path}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError("model descriptor must be a JSON object")
    try:
        wp = _parse_tf(raw["wp"]) if "wp" in raw else None
        if "glycolysis" in raw:
            gp = gly.GlycolysisParams.from_dict(raw["glycolysis"])
            return Model(gly.build_plant(gp), gly.controller(gp), gp.h, gp, wp)
        plant = LinearPlant.from_dict(raw)
        ctrl, h = _parse_controller(raw.get("controller"))
        return Model(plant, ctrl, h, None, wp)
    except (ModelError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed model descriptor: {exc}") from exc


def _floats(text: Optional[str]) -> Optional[list[float]]:
    if text is None:
        return None
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InputError(f"bad number list {text!r}") from exc
    if not vals:
        raise InputError("empty sweep list")
    return vals


def sweep_points(model: Model, sweep_sy, sweep_h) -> list[Point]:
    sys_ = sweep_sy if sweep_sy is not None else [model.plant.sigma_y]
    hs = sweep_h if sweep_h is not None else [model.h]
    pts = []
    for sy in sys_:
        if sy < 0:
            raise InputError("sigma_y must be nonnegative")
        if model.glycolysis is not None:
            plant = gly.build_plant(model.glycolysis.replace(sigma_y=sy))
        else:
            plant = model.plant.replace(sigma_y=sy)
        for h in hs:
            ctrl = model.controller if h is None else RationalTF.constant(h)
            pts.append(Point(float(sy), None if h is None else float(h), plant, ctrl))
    return pts


def _clean(obj):
    """Make a structure JSON-safe: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _write(path: Path, text: str) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


def _csv(header: str, rows) -> str:
    lines = [header]
    lines += [",".join(f"{v:.15g}" for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _run(fn, items):
    with ThreadPoolExecutor() as pool:
        return list(pool.map(fn, items))


def _grid(args) -> np.ndarray:
    if args.ppd < 40:
        raise InputError("--ppd must be at least 40")
    if not (0 < args.wmin <= args.wmax):
        raise InputError("frequency grid needs 0 < wmin <= wmax")
    if args.wmin == args.wmax:
        return np.array([args.wmin])
    return log_grid(args.wmin, args.wmax, args.ppd)


def _bode_point(pt: Point, grid, channel: str) -> tuple[str, dict]:
    ls = assemble(pt.plant, pt.controller)
    stable = is_internally_stable(realize_closed_loop(pt.plant, pt.controller)).stable
    fr = frequency_response(ls.closed_loop(channel), grid) if grid.size > 1 else _single(ls.closed_loop(channel), grid)
    i = int(np.argmax(fr.mag_db))
    info = {"sigma_y": pt.sigma_y, "h": pt.h, "stable": stable, "channel": channel,
            "peak_mag_db": float(fr.mag_db[i]), "peak_omega": float(fr.omega[i])}
    return _csv("omega,mag_db,phase_deg", fr.rows()), info


def _single(g, grid):
    from .looptf import FrequencyResponse
    h = complex(tf_eval(g, 1j * grid[0]))
    return FrequencyResponse(grid, np.array([20 * math.log10(abs(h))]), np.array([math.degrees(math.atan2(h.imag, h.real))]))


def _step_point(pt: Point, channel: str, step: float, dt, T) -> tuple[str, dict]:
    ss = realize_closed_loop(pt.plant, pt.controller)
    stab = is_internally_stable(ss)
    tr = step_response(ss, channel, step, dt, T)
    info = {"sigma_y": pt.sigma_y, "h": pt.h, "stable": stab.stable, "diverged": tr.diverged, "channel": channel,
            "step": step, "dt": tr.dt, "samples": int(tr.times.size),
            "final_value": float(tr.outputs[-1]), "oscillation_amplitude": tr.oscillation_amplitude(1.0)}
    if stab.stable:
        info["final_value_expected"] = complex(tf_eval(assemble(pt.plant, pt.controller).closed_loop(channel), 0.0)).real * step
    return tr.to_csv(), info


def _limits_point(pt: Point, wp, tol, rtol) -> tuple[str, dict]:
    rep = analyze(pt.plant, pt.controller, wp=wp, tol=tol, rtol=rtol)
    body = rep.to_dict()
    body.update(sigma_y=pt.sigma_y, h=pt.h)
    info = {"sigma_y": pt.sigma_y, "h": pt.h, "stable": rep.hypothesis_flags["closed_loop_stable"], "passed": rep.passed}
    return dump_json(body), info


def _emit(out: Path, prefix: str, ext: str, pts, results, index: list) -> None:
    for pt, (text, info) in zip(pts, results):
        name = f"{prefix}_{pt.tag}.{ext}"
        _write(out / name, text)
        index.append({"file": name, **info})


def _finish(out: Path, command: str, index: list, extra: Optional[dict] = None) -> None:
    names = [e["file"] for e in index]
    if len(names) != len(set(names)):
        raise InputError("sweep produced duplicate file names")
    doc = {"command": command, "version": __version__, "files": index}
    if extra:
        doc.update(extra)
    _write(out / "index.json", dump_json(doc))


def _outdir(args) -> Path:
    if not args.out:
        raise InputError("--out is required for this command")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_bode(args, model: Model) -> int:
    out = _outdir(args)
    grid = _grid(args)
    pts = sweep_points(model, _floats(args.sweep_sy), _floats(args.sweep_h))
    index: list = []
    _emit(out, "bode", "csv", pts, _run(lambda p: _bode_point(p, grid, args.channel), pts), index)
    _finish(out, "bode", index)
    return EXIT_OK


def cmd_step(args, model: Model) -> int:
    out = _outdir(args)
    pts = sweep_points(model, _floats(args.sweep_sy), _floats(args.sweep_h))
    index: list = []
    _emit(out, "step", "csv", pts, _run(lambda p: _step_point(p, args.channel, args.step, args.dt, args.T), pts), index)
    _finish(out, "step", index)
    return EXIT_OK


def cmd_limits(args, model: Model) -> int:
    out = _outdir(args)
    tol = args.quad_tol or quad_tol_from_env()
    pts = sweep_points(model, _floats(args.sweep_sy), _floats(args.sweep_h))
    index: list = []
    _emit(out, "limits", "json", pts, _run(lambda p: _limits_point(p, model.wp, tol, args.rtol), pts), index)
    _finish(out, "limits", index)
    return EXIT_OK if all(e["passed"] for e in index) else EXIT_FAIL


def cmd_glycolysis(args, model: Model) -> int:
    if model.glycolysis is None:
        raise InputError("the glycolysis command needs a model with a 'glycolysis' object")
    out = _outdir(args)
    grid = _grid(args)
    tol = args.quad_tol or quad_tol_from_env()
    sy = _floats(args.sweep_sy) or list(DEFAULT_SWEEP_SY)
    hs = _floats(args.sweep_h) or list(DEFAULT_SWEEP_H)
    pts = sweep_points(model, sy, hs)
    index: list = []
    _emit(out, "bode", "csv", pts, _run(lambda p: _bode_point(p, grid, "dy"), pts), index)
    _emit(out, "step", "csv", pts, _run(lambda p: _step_point(p, "dy", args.step, args.dt, args.T), pts), index)
    _emit(out, "limits", "json", pts, _run(lambda p: _limits_point(p, model.wp, tol, args.rtol), pts), index)
    gp = model.glycolysis
    summary = []
    for s in sy:
        g = gp.replace(sigma_y=s)
        reg = gly.asymptotic_regimes(g)
        summary.append({"sigma_y": s, "z_rhp": g.z_rhp, "Lb_at_z": gly.lb_at_rhp_zero(g),
                        "regime": reg.regime, "Cb_exact": reg.exact, "Cb_approximation": reg.approximation})
    _finish(out, "glycolysis", index, {"parameters": gp.to_dict(), "buffer_summary": summary})
    passed = all(e.get("passed", True) for e in index)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_verify(args, model: Model) -> int:
    base = model.glycolysis or gly.GlycolysisParams()
    cfg = VerifyConfig(base=base, rtol=args.rtol, quad_tol=args.quad_tol)
    results = run_all(cfg)
    for r in results:
        print(r.line())
    doc = {"command": "verify", "version": __version__, "passed": all(r.passed for r in results),
           "criteria": [r.to_dict() for r in results]}
    # timings vary run to run; keep them out of the file so it stays reproducible
    for c in doc["criteria"]:
        c.pop("seconds")
        c["detail"].pop("elapsed", None)
    if args.out:
        out = _outdir(args)
        _write(out / "verify.json", dump_json(doc))
        _write(out / "index.json", dump_json({"command": "verify", "version": __version__,
                                              "files": [{"file": "verify.json", "passed": doc["passed"]}]}))
    return EXIT_OK if doc["passed"] else EXIT_FAIL


COMMANDS = {"bode": cmd_bode, "step": cmd_step, "limits": cmd_limits, "glycolysis": cmd_glycolysis, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bufferloop", description="Buffer-feedback loop analysis.")
    ap.add_argument("--version", action="version", version=f"bufferloop {__version__}")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--model", help="JSON model descriptor")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--sweep-sy", help="comma-separated sigma_y values")
    ap.add_argument("--sweep-h", help="comma-separated proportional gains")
    ap.add_argument("--wmin", type=float, default=1e-3)
    ap.add_argument("--wmax", type=float, default=1e3)
    ap.add_argument("--ppd", type=int, default=60, help="points per decade (>= 40)")
    ap.add_argument("--dt", type=float, default=None)
    ap.add_argument("--T", type=float, default=None)
    ap.add_argument("--channel", default="dy", help="dy, dz (or dz1..), dx or db")
    ap.add_argument("--step", type=float, default=1.0)
    ap.add_argument("--rtol", type=float, default=1e-2, help="relative tolerance of theorem comparisons")
    ap.add_argument("--quad-tol", type=float, default=None, help="quadrature tolerance (env BUFFERLOOP_TOL)")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        for name in ("rtol", "quad_tol", "dt", "T"):
            v = getattr(args, name)
            if v is not None and not v > 0:
                raise InputError(f"--{name.replace('_', '-')} must be positive")
        quad_tol_from_env()
        model = load_model(args.model, allow_default=args.command in ("glycolysis", "verify"))
        return COMMANDS[args.command](args, model)
    except (InputError, ModelError) as exc:
        print(f"bufferloop: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"bufferloop: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BufferLoopError as exc:
        print(f"bufferloop: numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
