"""Real-coefficient polynomial and rational-function arithmetic.

Coefficients are stored in ascending order: ``coeffs[k]`` multiplies ``s**k``.
Every transfer function in the package is a :class:`RationalTF` whose
denominator is kept monic, so two transfer functions that are equal as
rationals (without cancellation) compare equal coefficient by coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass
from numbers import Number
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateInputError,
    NumericalFailure,
    PoleProximityError,
    UnboundedLimitError,
)

EPS = float(np.finfo(float).eps)

DEFAULT_AXIS_TOL = 1e-9
DEFAULT_CANCEL_TOL = 1e-8
DEFAULT_ROOT_TOL = 1e-10
DEFAULT_CLUSTER_TOL = 1e-6

# leading coefficients below this fraction of the largest one are rounding residue
_TRIM_RTOL = 8 * EPS
# relative band below which a pole evaluation is refused
_POLE_RTOL = 64 * EPS


def _trim(c: np.ndarray) -> np.ndarray:
    if c.size == 0:
        return np.zeros(1)
    big = np.max(np.abs(c))
    if big == 0.0:
        return np.zeros(1)
    keep = np.nonzero(np.abs(c) > _TRIM_RTOL * big)[0]
    return c[: keep[-1] + 1]


class Polynomial:
    """Immutable real polynomial with ascending coefficients."""

    __slots__ = ("_c",)

    def __init__(self, coeffs: Iterable[float] | float):
        c = np.atleast_1d(np.asarray(coeffs))
        if np.iscomplexobj(c):
            if np.any(c.imag != 0):
                raise DegenerateInputError("polynomial coefficients must be real")
            c = c.real
        c = _trim(c.astype(float).copy())
        if not np.all(np.isfinite(c)):
            raise DegenerateInputError("polynomial coefficients must be finite")
        c.flags.writeable = False
        self._c = c

    @classmethod
    def from_roots(cls, roots: Sequence[complex], gain: float = 1.0) -> "Polynomial":
        if len(roots) == 0:
            return cls([gain])
        desc = np.poly(np.asarray(roots, dtype=complex))
        return cls(gain * desc.real[::-1])

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> int:
        return len(self._c) - 1

    @property
    def is_zero(self) -> bool:
        return len(self._c) == 1 and self._c[0] == 0.0

    @property
    def leading(self) -> float:
        return float(self._c[-1])

    def __call__(self, s):
        return np.polyval(self._c[::-1], s)

    def abs_scale(self, r):
        """Sum of |c_k| r**k, the natural magnitude scale of p near |s| = r."""
        return np.polyval(np.abs(self._c[::-1]), np.abs(r))

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0.0])
        return Polynomial(self._c[1:] * np.arange(1, len(self._c)))

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        if isinstance(other, Number):
            return Polynomial([float(other)])
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        n = max(len(self._c), len(other._c))
        out = np.zeros(n)
        out[: len(self._c)] += self._c
        out[: len(other._c)] += other._c
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self._c)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Polynomial(np.convolve(self._c, other._c))

    __rmul__ = __mul__

    def __truediv__(self, k):
        if not isinstance(k, Number):
            return NotImplemented
        return Polynomial(self._c / float(k))

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self._c, other._c)

    def __hash__(self):
        return hash(self._c.tobytes())

    def allclose(self, other: "Polynomial", atol: float = 1e-12) -> bool:
        if self.degree != other.degree:
            return False
        return bool(np.all(np.abs(self._c - other._c) <= atol))

    def roots(self, **kw) -> "RootSet":
        return poly_roots(self, **kw)

    def __repr__(self):
        return f"Polynomial({self._c.tolist()})"


@dataclass(frozen=True)
class RootSet:
    """Distinct roots with multiplicities, classified against the imaginary axis.

    A root is on-axis when ``|Re r| <= max(axis_tolerance, 64*eps*(1+|r|))``;
    the floor keeps classification meaningful when ``axis_tolerance`` is 0.
    """

    roots: tuple
    multiplicities: tuple
    axis_tolerance: float = DEFAULT_AXIS_TOL

    def band(self, r: complex) -> float:
        return max(self.axis_tolerance, 64 * EPS * (1.0 + abs(r)))

    def classify(self, r: complex) -> str:
        b = self.band(r)
        if r.real > b:
            return "rhp"
        if r.real < -b:
            return "lhp"
        return "axis"

    def _subset(self, kind: str) -> "RootSet":
        pairs = [(r, m) for r, m in zip(self.roots, self.multiplicities) if self.classify(r) == kind]
        return RootSet(tuple(r for r, _ in pairs), tuple(m for _, m in pairs), self.axis_tolerance)

    @property
    def rhp(self) -> "RootSet":
        return self._subset("rhp")

    @property
    def lhp(self) -> "RootSet":
        return self._subset("lhp")

    @property
    def on_axis(self) -> "RootSet":
        return self._subset("axis")

    def expanded(self) -> list:
        out = []
        for r, m in zip(self.roots, self.multiplicities):
            out.extend([r] * m)
        return out

    def __len__(self):
        return int(sum(self.multiplicities))

    def __iter__(self):
        return iter(self.expanded())


def _aberth(a: np.ndarray, maxiter: int) -> np.ndarray | None:
    """Aberth-Ehrlich simultaneous iteration on a monic ascending coefficient vector."""
    n = len(a) - 1
    desc = a[::-1]
    ddesc = np.polyder(desc)
    adesc = np.abs(desc)
    radius = 1.0 + np.max(np.abs(a[:-1]))  # Cauchy bound
    k = np.arange(n)
    z = radius * np.exp(1j * (2 * np.pi * k / n + 0.4))
    frozen = np.zeros(n, dtype=bool)
    for _ in range(maxiter):
        pz = np.polyval(desc, z)
        frozen |= np.abs(pz) <= 2 * n * EPS * np.polyval(adesc, np.abs(z))
        if frozen.all():
            return z
        dz = np.polyval(ddesc, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = pz / dz
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            s = np.sum(1.0 / diff, axis=1)
            w = ratio / (1.0 - ratio * s)
        w[frozen] = 0.0
        if not np.all(np.isfinite(w)):
            return None
        z = z - w
        if np.all(np.abs(w) <= 4 * EPS * np.abs(z)):
            return z
    return z


def _companion(a: np.ndarray) -> np.ndarray:
    n = len(a) - 1
    m = np.zeros((n, n))
    m[1:, :-1] = np.eye(n - 1)
    m[:, -1] = -a[:-1]
    return np.linalg.eigvals(m)


def _newton_polish(desc: np.ndarray, z: np.ndarray, steps: int = 3) -> np.ndarray:
    ddesc = np.polyder(desc)
    for _ in range(steps):
        dz = np.polyval(ddesc, z)
        ok = dz != 0
        step = np.zeros_like(z)
        step[ok] = np.polyval(desc, z[ok]) / dz[ok]
        z = z - step
    return z


def _backward_error(p: Polynomial, z: np.ndarray) -> np.ndarray:
    return np.abs(p(z)) / np.maximum(p.abs_scale(z), np.finfo(float).tiny)


def _cluster(z: np.ndarray, tol: float) -> tuple[list, list]:
    n = len(z)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(z[i] - z[j]) <= tol * (1.0 + abs(z[i])):
                parent[find(i)] = find(j)
    groups: dict[int, list] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(z[i])
    centers = [complex(np.mean(g)) for g in groups.values()]
    mult = [len(g) for g in groups.values()]
    return centers, mult


def _multiple_root(p: Polynomial, r: complex, k: int, tol: float) -> tuple[complex, bool]:
    """Newton on p^(k-1) from ``r``; also report whether p..p^(k-1) vanish there to rounding."""
    derivs = [p]
    for _ in range(k):
        derivs.append(derivs[-1].derivative())
    q, dq = derivs[k - 1], derivs[k]
    x = r
    for _ in range(8):
        d = dq(x)
        if d == 0:
            break
        step = q(x) / d
        x = x - step
        if abs(step) <= 4 * EPS * (1.0 + abs(x)):
            break
    if not np.isfinite(x) or abs(x - r) > tol * (1.0 + abs(r)):
        return r, False
    ok = all(abs(dj(x)) <= 64 * EPS * max(dj.abs_scale(x), EPS) for dj in derivs[:k])
    return x, ok


def _refine_multiple(p: Polynomial, centers: list, mult: list, tol: float) -> tuple[list, list]:
    """Polish clustered roots, then merge nearby clusters that form one multiple root.

    A root of multiplicity m splits by about eps^(1/m) under rounding, so
    clusters within 1e-3 (relative) are merged when the refined center makes
    p and its first m-1 derivatives vanish to rounding.
    """
    centers = [(_multiple_root(p, r, k, tol)[0] if k > 1 else r) for r, k in zip(centers, mult)]
    mult = list(mult)
    radius = 1e-3
    merged = True
    while merged and len(centers) > 1:
        merged = False
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                a, b = centers[i], centers[j]
                if abs(a - b) > radius * (1.0 + abs(a)):
                    continue
                k = mult[i] + mult[j]
                c = (a * mult[i] + b * mult[j]) / k
                x, ok = _multiple_root(p, c, k, radius)
                if ok:
                    centers[i], mult[i] = x, k
                    del centers[j], mult[j]
                    merged = True
                    break
            if merged:
                break
    return centers, mult


def _symmetrize(centers: list, mult: list) -> tuple[list, list]:
    """Pair complex roots with their conjugates; lone complex roots become real."""
    out_r, out_m = [], []
    used = [False] * len(centers)
    for i, r in enumerate(centers):
        if used[i]:
            continue
        used[i] = True
        if r.imag == 0.0:
            out_r.append(complex(r.real, 0.0))
            out_m.append(mult[i])
            continue
        best, bestd = None, np.inf
        for j in range(len(centers)):
            if used[j] or mult[j] != mult[i]:
                continue
            d = abs(centers[j] - r.conjugate())
            if d < bestd:
                best, bestd = j, d
        if best is not None and bestd <= 1e-6 * (1.0 + abs(r)) and abs(r.imag) > 0.5 * bestd:
            used[best] = True
            q = centers[best]
            re = 0.5 * (r.real + q.real)
            im = 0.5 * (abs(r.imag) + abs(q.imag))
            out_r += [complex(re, im), complex(re, -im)]
            out_m += [mult[i], mult[i]]
        else:
            out_r.append(complex(r.real, 0.0))
            out_m.append(mult[i])
    return out_r, out_m


def poly_roots(
    p: Polynomial,
    tol: float = DEFAULT_ROOT_TOL,
    axis_tolerance: float = DEFAULT_AXIS_TOL,
    cluster_tol: float = DEFAULT_CLUSTER_TOL,
    maxiter: int = 500,
) -> RootSet:
    """Roots of a real polynomial.

    Aberth-Ehrlich iteration started on a circle of Cauchy-bound radius, with a
    companion-matrix eigenvalue fallback (degree <= 12).  Exact zero roots are
    split off first.  Roots closer than ``cluster_tol`` (relative) are merged
    into one root with multiplicity, and conjugate pairs are made exactly
    symmetric.

    Raises
    ------
    DegenerateInputError
        If ``p`` is constant.
    NumericalFailure
        If neither method meets the backward-error bound ``tol``.
    """
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    if p.degree < 1:
        raise DegenerateInputError(f"cannot find roots of constant polynomial {p!r}")
    c = p.coeffs
    nz = int(np.argmax(c != 0.0))
    reduced = c[nz:]
    found = np.zeros(0, dtype=complex)
    m = len(reduced) - 1
    if m == 1:
        found = np.array([-reduced[0] / reduced[1] + 0j])
    elif m > 1:
        a = reduced / reduced[-1]
        rp = Polynomial(a)
        z = _aberth(a, maxiter)
        if z is None or not np.all(np.isfinite(z)) or np.max(_backward_error(rp, z)) > tol:
            if m > 12 and z is not None and np.all(np.isfinite(z)):
                raise NumericalFailure(f"root iteration did not converge for degree {m}")
            z = _newton_polish(a[::-1], _companion(a))
            if np.max(_backward_error(rp, z)) > tol:
                raise NumericalFailure("root finding failed to reach the backward-error bound")
        found = z
    centers, mult = _cluster(list(found), cluster_tol) if len(found) else ([], [])
    if m > 1:
        centers, mult = _refine_multiple(Polynomial(reduced), centers, mult, cluster_tol)
    centers, mult = _symmetrize(centers, mult)
    if nz:
        centers.append(0j)
        mult.append(nz)
    order = sorted(range(len(centers)), key=lambda i: (centers[i].real, centers[i].imag))
    return RootSet(
        tuple(centers[i] for i in order),
        tuple(mult[i] for i in order),
        axis_tolerance,
    )


class RationalTF:
    """Quotient of real polynomials with a monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=1.0):
        num = num if isinstance(num, Polynomial) else Polynomial(num)
        den = den if isinstance(den, Polynomial) else Polynomial(den)
        if den.is_zero:
            raise DegenerateInputError("transfer function denominator is zero")
        if num.is_zero:
            num, den = Polynomial([0.0]), Polynomial([1.0])
        else:
            lead = den.leading
            if lead != 1.0:
                num, den = num / lead, den / lead
        self.num = num
        self.den = den

    @classmethod
    def constant(cls, k: float) -> "RationalTF":
        return cls([float(k)], [1.0])

    @classmethod
    def coerce(cls, x) -> "RationalTF":
        if isinstance(x, RationalTF):
            return x
        if isinstance(x, Polynomial):
            return cls(x, [1.0])
        if isinstance(x, Number):
            return cls.constant(float(x))
        raise TypeError(f"cannot interpret {type(x).__name__} as a transfer function")

    @property
    def relative_degree(self) -> int:
        if self.num.is_zero:
            return 10**9
        return self.den.degree - self.num.degree

    @property
    def is_zero(self) -> bool:
        return self.num.is_zero

    @property
    def is_proper(self) -> bool:
        return self.relative_degree >= 0

    @property
    def is_strictly_proper(self) -> bool:
        return self.relative_degree >= 1

    def poles(self, **kw) -> RootSet:
        if self.den.degree == 0:
            return RootSet((), (), kw.get("axis_tolerance", DEFAULT_AXIS_TOL))
        return poly_roots(self.den, **kw)

    def zeros(self, **kw) -> RootSet:
        if self.num.degree == 0:
            return RootSet((), (), kw.get("axis_tolerance", DEFAULT_AXIS_TOL))
        return poly_roots(self.num, **kw)

    def __call__(self, s):
        return tf_eval(self, s)

    def __add__(self, other):
        return tf_arith(self, other, "add")

    def __radd__(self, other):
        return tf_arith(other, self, "add")

    def __sub__(self, other):
        return tf_arith(self, other, "sub")

    def __rsub__(self, other):
        return tf_arith(other, self, "sub")

    def __mul__(self, other):
        return tf_arith(self, other, "mul")

    def __rmul__(self, other):
        return tf_arith(other, self, "mul")

    def __truediv__(self, other):
        return tf_arith(self, other, "div")

    def __rtruediv__(self, other):
        return tf_arith(other, self, "div")

    def __neg__(self):
        return RationalTF(-self.num, self.den)

    def __eq__(self, other):
        if not isinstance(other, RationalTF):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def allclose(self, other, atol: float = 1e-12) -> bool:
        other = RationalTF.coerce(other)
        return self.num.allclose(other.num, atol) and self.den.allclose(other.den, atol)

    def minreal(self, cancel_tol: float = DEFAULT_CANCEL_TOL, axis_tolerance: float = DEFAULT_AXIS_TOL):
        return tf_minreal(self, cancel_tol, axis_tolerance)

    def __repr__(self):
        return f"RationalTF(num={self.num.coeffs.tolist()}, den={self.den.coeffs.tolist()})"


def tf_arith(a, b, op: str) -> RationalTF:
    """Exact coefficient arithmetic on transfer functions; no cancellation is attempted."""
    a = RationalTF.coerce(a)
    b = RationalTF.coerce(b)
    if op in ("add", "sub"):
        bn = b.num if op == "add" else -b.num
        if a.den == b.den:
            return RationalTF(a.num + bn, a.den)
        return RationalTF(a.num * b.den + bn * a.den, a.den * b.den)
    if op == "mul":
        return RationalTF(a.num * b.num, a.den * b.den)
    if op == "div":
        if b.num.is_zero:
            raise ZeroDivisionError("division by the zero transfer function")
        return RationalTF(a.num * b.den, a.den * b.num)
    raise ValueError(f"unknown operation {op!r}")


def tf_eval(g: RationalTF, s):
    """Evaluate ``g`` at complex ``s`` (scalar or array) by Horner's rule."""
    d = g.den(s)
    scale = g.den.abs_scale(s)
    if np.any(np.abs(d) <= _POLE_RTOL * scale):
        raise PoleProximityError(f"evaluation point is a pole of {g!r}")
    return g.num(s) / d


def _crosses_axis(z: complex, p: complex, rs: RootSet) -> bool:
    cz, cp = rs.classify(z), rs.classify(p)
    return {cz, cp} == {"rhp", "lhp"}


def minreal_report(
    g: RationalTF,
    cancel_tol: float = DEFAULT_CANCEL_TOL,
    axis_tolerance: float = DEFAULT_AXIS_TOL,
) -> tuple[RationalTF, list[complex]]:
    """Cancel common pole/zero pairs; return the reduced TF and the cancelled roots."""
    if g.num.is_zero or g.num.degree == 0 or g.den.degree == 0:
        return g, []
    n, d = g.num.coeffs, g.den.coeffs
    if g.num.degree == g.den.degree:
        k = g.num.leading
        if np.all(np.abs(n / k - d) <= 1e3 * EPS * np.max(np.abs(d))):
            return RationalTF.constant(k), list(poly_roots(g.den, axis_tolerance=axis_tolerance))
    zs = poly_roots(g.num, axis_tolerance=axis_tolerance)
    ps = poly_roots(g.den, axis_tolerance=axis_tolerance)
    zeros, poles = zs.expanded(), ps.expanded()
    used = [False] * len(poles)
    cancelled = []
    for z in zeros:
        best, bestd = None, np.inf
        for j, p in enumerate(poles):
            if used[j] or _crosses_axis(z, p, zs):
                continue
            dist = abs(z - p)
            if dist <= cancel_tol * (abs(z) + 1.0) and dist < bestd:
                best, bestd = j, dist
        if best is not None:
            used[best] = True
            cancelled.append(0.5 * (z + poles[best]))
    if not cancelled:
        return g, []
    common = Polynomial.from_roots(cancelled)
    return RationalTF(_deconvolve(g.num, common), _deconvolve(g.den, common)), cancelled


def _deconvolve(p: Polynomial, f: Polynomial) -> Polynomial:
    """Quotient ``q`` minimizing ``||f*q - p||`` over coefficients (remainder dropped)."""
    fc, pc = f.coeffs, p.coeffs
    m = len(pc) - len(fc) + 1
    if m <= 0:
        raise NumericalFailure("cancelled factor has higher degree than the polynomial")
    M = np.zeros((len(pc), m))
    for j in range(m):
        M[j : j + len(fc), j] = fc
    q, *_ = np.linalg.lstsq(M, pc, rcond=None)
    return Polynomial(q)


def tf_minreal(
    g: RationalTF,
    cancel_tol: float = DEFAULT_CANCEL_TOL,
    axis_tolerance: float = DEFAULT_AXIS_TOL,
) -> RationalTF:
    """Remove pole/zero pairs closer than ``cancel_tol * (|root| + 1)``.

    Pairs straddling the imaginary axis (one strictly in each half plane) are
    never cancelled.  The input is returned unchanged when nothing cancels.
    """
    return minreal_report(g, cancel_tol, axis_tolerance)[0]


def laurent_at_infinity(g: RationalTF, n_terms: int) -> np.ndarray:
    """Coefficients ``c[k]`` of the expansion ``g(s) = sum_k c[k] s**-k`` for proper ``g``."""
    if g.num.is_zero:
        return np.zeros(n_terms)
    rd = g.relative_degree
    if rd < 0:
        raise UnboundedLimitError("improper transfer function has no expansion at infinity")
    nrev = g.num.coeffs[::-1]
    drev = g.den.coeffs[::-1]
    m = max(n_terms - rd, 0)
    b = np.zeros(m)
    for k in range(m):
        acc = nrev[k] if k < len(nrev) else 0.0
        for j in range(1, min(k, len(drev) - 1) + 1):
            acc -= drev[j] * b[k - j]
        b[k] = acc / drev[0]
    out = np.zeros(n_terms)
    out[rd:] = b[: n_terms - rd]
    return out


def limit_sL(l: RationalTF) -> float:
    """lim_{s->inf} s*L(s): 0 for relative degree >= 2, leading ratio for degree 1."""
    if l.num.is_zero:
        return 0.0
    rd = l.relative_degree
    if rd >= 2:
        return 0.0
    if rd == 1:
        return l.num.leading / l.den.leading
    raise UnboundedLimitError(f"lim s*L(s) is unbounded for relative degree {rd}")
