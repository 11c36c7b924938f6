"""Function representations on the circle and the line, and their calculi.

``LaurentPoly`` carries finitely many Fourier coefficients and acts on
contractions through the semi-spectral calculus (negative powers go to
powers of the adjoint).  ``LineFn`` is a bounded function on the real line
given through its circle representative under the Cayley map.
``GridFunction`` holds uniform samples on the circle and supports the FFT
based Riesz projections and the A-integral.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ValidationError
from .operators import (
    DEFAULT_TOL,
    adjoint,
    as_matrix,
    check_contraction,
    check_dissipative,
)

LOGGER = logging.getLogger(__name__)

DIAGONAL_SWITCH = 1e-7


# ---------------------------------------------------------------------------
# Laurent polynomials

class LaurentPoly:
    """``f(z) = sum_{n=nmin}^{nmin+len-1} a_n z^n``."""

    __slots__ = ("nmin", "coeffs")

    def __init__(self, coeffs: Sequence[complex] = (0.0,), nmin: int = 0):
        c = np.array(coeffs, dtype=complex).ravel()
        if c.size == 0:
            c = np.zeros(1, dtype=complex)
        if not np.all(np.isfinite(c)):
            raise ValidationError("non-finite Laurent coefficient")
        # trim zero ends so that equal polynomials share a representation
        nz = np.flatnonzero(c)
        if nz.size == 0:
            c, nmin = np.zeros(1, dtype=complex), 0
        else:
            nmin = int(nmin) + int(nz[0])
            c = c[nz[0]: nz[-1] + 1]
        self.nmin = int(nmin)
        self.coeffs = c

    # construction ----------------------------------------------------------
    @classmethod
    def monomial(cls, n: int, a: complex = 1.0) -> "LaurentPoly":
        return cls([a], n)

    @classmethod
    def constant(cls, a: complex) -> "LaurentPoly":
        return cls([a], 0)

    @classmethod
    def from_dict(cls, terms: dict) -> "LaurentPoly":
        if not terms:
            return cls()
        lo, hi = min(terms), max(terms)
        c = np.zeros(hi - lo + 1, dtype=complex)
        for n, a in terms.items():
            c[n - lo] += a
        return cls(c, lo)

    # properties --------------------------------------------------------------
    @property
    def nmax(self) -> int:
        return self.nmin + self.coeffs.size - 1

    @property
    def degree(self) -> int:
        return max(self.nmax, 0)

    def is_analytic(self) -> bool:
        return self.nmin >= 0 or not np.any(self.coeffs[: max(0, -self.nmin)])

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def coeff(self, n: int) -> complex:
        k = n - self.nmin
        if 0 <= k < self.coeffs.size:
            return complex(self.coeffs[k])
        return 0j

    def terms(self):
        for k, a in enumerate(self.coeffs):
            if a != 0:
                yield self.nmin + k, complex(a)

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        """Coefficient arrays ``(a_0..a_N, a_{-1}..a_{-M})``."""
        pos = np.array([self.coeff(n) for n in range(0, max(self.nmax, 0) + 1)])
        neg = np.array([self.coeff(-n) for n in range(1, max(-self.nmin, 0) + 1)], dtype=complex)
        return pos, neg

    # algebra -----------------------------------------------------------------
    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        pos, neg = self.split()
        out = np.zeros_like(z)
        for a in pos[::-1]:
            out = out * z + a
        if neg.size:
            w = 1.0 / z
            acc = np.zeros_like(z)
            for a in neg[::-1]:
                acc = (acc + a) * w
            out = out + acc
        return out

    def derivative(self) -> "LaurentPoly":
        return LaurentPoly.from_dict({n - 1: n * a for n, a in self.terms() if n != 0})

    def antiderivative(self) -> "LaurentPoly":
        if self.coeff(-1) != 0:
            raise ValidationError("z^-1 term has no Laurent antiderivative")
        return LaurentPoly.from_dict({n + 1: a / (n + 1) for n, a in self.terms()})

    def _coerce(self, other) -> "LaurentPoly":
        if isinstance(other, LaurentPoly):
            return other
        return LaurentPoly.constant(complex(other))

    def __add__(self, other):
        other = self._coerce(other)
        d = dict(self.terms())
        for n, a in other.terms():
            d[n] = d.get(n, 0) + a
        return LaurentPoly.from_dict(d)

    __radd__ = __add__

    def __neg__(self):
        return LaurentPoly(-self.coeffs, self.nmin)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, LaurentPoly):
            return LaurentPoly(np.convolve(self.coeffs, other.coeffs), self.nmin + other.nmin)
        return LaurentPoly(self.coeffs * complex(other), self.nmin)

    __rmul__ = __mul__

    def conj_reflect(self) -> "LaurentPoly":
        """The polynomial whose boundary values are ``conj(f(zeta))``."""
        return LaurentPoly.from_dict({-n: np.conj(a) for n, a in self.terms()})

    def __eq__(self, other):
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        return self.nmin == other.nmin and np.array_equal(self.coeffs, other.coeffs)

    def allclose(self, other: "LaurentPoly", atol: float = 1e-12) -> bool:
        diff = self - other
        return bool(np.all(np.abs(diff.coeffs) <= atol))

    def __repr__(self):
        return f"LaurentPoly(nmin={self.nmin}, coeffs={self.coeffs.tolist()})"

    # serialization -----------------------------------------------------------
    def to_json(self) -> dict:
        return {"nmin": self.nmin, "coeffs": [[float(a.real), float(a.imag)] for a in self.coeffs]}

    @classmethod
    def from_json(cls, obj: dict) -> "LaurentPoly":
        try:
            nmin = int(obj["nmin"])
            coeffs = [complex(float(re), float(im)) for re, im in obj["coeffs"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed LaurentPoly JSON: {exc}") from exc
        return cls(coeffs, nmin)


ZETA = LaurentPoly.monomial(1)


def require_analytic(f: LaurentPoly, what: str = "f") -> LaurentPoly:
    if not isinstance(f, LaurentPoly):
        raise ValidationError(f"{what} must be a LaurentPoly")
    if not f.is_analytic():
        raise ValidationError(f"{what} has negative-index coefficients; an analytic polynomial is required")
    return f


def polyval_matrix(f: LaurentPoly, M: np.ndarray, M_neg: np.ndarray | None = None) -> np.ndarray:
    """Evaluate ``f`` at a matrix; negative powers use ``M_neg`` (default ``M*``)."""
    n = M.shape[0]
    pos, neg = f.split()
    eye = np.eye(n, dtype=complex)
    out = np.zeros((n, n), dtype=complex)
    for a in pos[::-1]:
        out = out @ M + a * eye
    if neg.size:
        B = adjoint(M) if M_neg is None else M_neg
        acc = np.zeros((n, n), dtype=complex)
        for a in neg[::-1]:
            acc = (acc + a * eye) @ B
        out = out + acc
    return out


def eval_on_contraction(f: LaurentPoly, T, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Semi-spectral calculus ``sum_{n>=0} a_n T^n + sum_{n<0} a_n (T*)^{|n|}``."""
    A = check_contraction(T, tol)
    return polyval_matrix(f, A)


# ---------------------------------------------------------------------------
# divided differences

def divided_difference(f: LaurentPoly, z, w):
    """``(f(z) - f(w)) / (z - w)`` with the derivative on the diagonal."""
    require_analytic(f)
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    z, w = np.broadcast_arrays(z, w)
    out = np.empty(z.shape, dtype=complex)
    near = np.abs(z - w) < DIAGONAL_SWITCH
    far = ~near
    if np.any(far):
        out[far] = (f(z[far]) - f(w[far])) / (z[far] - w[far])
    if np.any(near):
        zn, wn = z[near], w[near]
        acc = np.zeros(zn.shape, dtype=complex)
        for n, a in f.terms():
            if n <= 0:
                continue
            s = np.zeros(zn.shape, dtype=complex)
            for j in range(n):
                s += zn ** j * wn ** (n - 1 - j)
            acc += a * s
        out[near] = acc
    return out[()] if out.ndim == 0 else out


def haagerup_terms(f: LaurentPoly) -> list[tuple[LaurentPoly, LaurentPoly]]:
    """Finite list ``[(phi_k, psi_k)]`` with ``df(z, w) = sum phi_k(z) psi_k(w)``.

    Terms are collected by the power of ``w``: ``psi_k = w^k`` and
    ``phi_k(z) = sum_{n>k} a_n z^{n-1-k}``.
    """
    require_analytic(f)
    N = f.nmax
    out = []
    for k in range(0, N):
        phi = LaurentPoly.from_dict({n - 1 - k: f.coeff(n) for n in range(k + 1, N + 1)})
        if not phi.is_zero():
            out.append((phi, LaurentPoly.monomial(k)))
    return out


# ---------------------------------------------------------------------------
# Cayley transform and line functions

def cayley(L) -> np.ndarray:
    """``(L - iI)(L + iI)^{-1}``."""
    A = as_matrix(L, "L")
    eye = np.eye(A.shape[0])
    B = A + 1j * eye
    if np.linalg.cond(B) > 1e14:
        raise ValidationError("Cayley transform singular: -i is (nearly) an eigenvalue")
    return np.linalg.solve(B.T, (A - 1j * eye).T).T


def inverse_cayley(T) -> np.ndarray:
    """``i(I + T)(I - T)^{-1}``; inverse of :func:`cayley`."""
    A = as_matrix(T, "T")
    eye = np.eye(A.shape[0])
    B = eye - A
    if np.linalg.cond(B) > 1e14:
        raise ValidationError("inverse Cayley transform singular: 1 is an eigenvalue")
    return 1j * np.linalg.solve(B.T, (eye + A).T).T


def circle_point(t):
    """``(t - i)/(t + i)``; maps the real line onto the circle minus 1."""
    t = np.asarray(t, dtype=complex)
    return (t - 1j) / (t + 1j)


def line_point(theta):
    """Inverse of :func:`circle_point` in angle form: ``t = -cot(theta/2)``."""
    theta = np.asarray(theta, dtype=float)
    return -1.0 / np.tan(0.5 * theta)


@dataclass(frozen=True)
class LineFn:
    """``f(t) = circle_rep((t - i)/(t + i))`` with an analytic representative."""

    circle_rep: LaurentPoly

    def __post_init__(self):
        require_analytic(self.circle_rep, "circle_rep")

    def __call__(self, t):
        return self.circle_rep(circle_point(t))

    def derivative(self, t):
        t = np.asarray(t, dtype=complex)
        return self.circle_rep.derivative()(circle_point(t)) * 2j / (t + 1j) ** 2

    def derivative_on_circle(self) -> LaurentPoly:
        """``f'(t(zeta))`` as a polynomial in ``zeta``: ``-(i/2)(1-zeta)^2 c'(zeta)``."""
        sq = LaurentPoly([1.0, -2.0, 1.0])
        return sq * self.circle_rep.derivative() * (-0.5j)


def eval_on_dissipative(f: LineFn, L, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``f(L)`` through the Cayley transform."""
    A = check_dissipative(L, tol)
    try:
        T = cayley(A)
    except ValidationError as exc:
        raise RuntimeError(f"internal error: {exc}") from exc
    return eval_on_contraction(f.circle_rep, T, max(tol, 1e-9))


# ---------------------------------------------------------------------------
# grid functions

def is_power_of_two(M: int) -> bool:
    return M >= 1 and (M & (M - 1)) == 0


def circle_grid(M: int, shifted: bool = False) -> np.ndarray:
    if not is_power_of_two(M):
        raise ValidationError(f"grid size {M} is not a power of two")
    k = np.arange(M, dtype=float)
    return 2 * np.pi * (k + (0.5 if shifted else 0.0)) / M


def grid_frequencies(M: int) -> np.ndarray:
    """Fourier indices in ``(-M/2, M/2]`` in FFT order; Nyquist counts as nonnegative."""
    n = np.fft.fftfreq(M, d=1.0 / M).astype(int)
    if M % 2 == 0 and M > 1:
        n[M // 2] = M // 2
    return n


@dataclass
class GridFunction:
    """Samples on the uniform grid ``theta_k = (k + s) 2 pi / M``, ``s`` in {0, 1/2}."""

    values: np.ndarray
    shifted: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).ravel()
        if not is_power_of_two(self.values.size):
            raise ValidationError(f"grid size {self.values.size} is not a power of two")

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def theta(self) -> np.ndarray:
        return circle_grid(self.M, self.shifted)

    @property
    def zeta(self) -> np.ndarray:
        return np.exp(1j * self.theta)

    @classmethod
    def sample(cls, f, M: int, shifted: bool = False) -> "GridFunction":
        """Sample a ``LaurentPoly`` (in zeta) or a callable of theta."""
        th = circle_grid(M, shifted)
        if isinstance(f, LaurentPoly):
            return cls(f(np.exp(1j * th)), shifted)
        return cls(np.asarray(f(th), dtype=complex) * np.ones(M), shifted)

    def like(self, values) -> "GridFunction":
        return GridFunction(values, self.shifted)

    def _check(self, other: "GridFunction"):
        if other.M != self.M or other.shifted != self.shifted:
            raise ValidationError("grid mismatch")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return self.like(self.values + other.values)
        return self.like(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return self.like(self.values - other.values)
        return self.like(self.values - other)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return self.like(self.values * other.values)
        return self.like(self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.values)

    def conj(self) -> "GridFunction":
        return self.like(np.conj(self.values))

    @property
    def real(self) -> "GridFunction":
        return self.like(self.values.real)

    @property
    def imag(self) -> "GridFunction":
        return self.like(self.values.imag)

    def mean(self) -> complex:
        """Grid quadrature of ``int g dm``."""
        return complex(np.mean(self.values))

    def fourier(self) -> tuple[np.ndarray, np.ndarray]:
        """Indices in ``(-M/2, M/2]`` and coefficients ``c_n`` of the samples."""
        M = self.M
        n = grid_frequencies(M)
        c = np.fft.fft(self.values) / M
        if self.shifted:
            c = c * np.exp(-1j * np.pi * n / M)
        return n, c

    @classmethod
    def from_fourier(cls, n: np.ndarray, c: np.ndarray, shifted: bool = False) -> "GridFunction":
        M = c.size
        c = np.asarray(c, dtype=complex)
        if shifted:
            c = c * np.exp(1j * np.pi * n / M)
        return cls(np.fft.ifft(c) * M, shifted)

    # csv -------------------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "re", "im"])
        for th, v in zip(self.theta, self.values):
            w.writerow([f"{th:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridFunction":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [h.strip() for h in rows[0]] != ["theta", "re", "im"]:
            raise ValidationError("GridFunction CSV must have header theta,re,im")
        try:
            data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
        except ValueError as exc:
            raise ValidationError(f"malformed GridFunction CSV: {exc}") from exc
        if data.ndim != 2 or data.shape[1] != 3:
            raise ValidationError("GridFunction CSV needs three columns")
        M = data.shape[0]
        if not is_power_of_two(M):
            raise ValidationError(f"grid size {M} is not a power of two")
        shifted = bool(abs(data[0, 0] - np.pi / M) < 1e-9)
        if not np.allclose(data[:, 0], circle_grid(M, shifted), atol=1e-9):
            raise ValidationError("theta column is not a uniform grid")
        return cls(data[:, 1] + 1j * data[:, 2], shifted)


def riesz_project(g, sign: str):
    """Keep Fourier indices ``>= 0`` (``sign='+'``) or ``< 0`` (``sign='-'``)."""
    if sign not in ("+", "-"):
        raise ValidationError("sign must be '+' or '-'")
    if isinstance(g, LaurentPoly):
        keep = (lambda n: n >= 0) if sign == "+" else (lambda n: n < 0)
        return LaurentPoly.from_dict({n: a for n, a in g.terms() if keep(n)})
    if not isinstance(g, GridFunction):
        raise ValidationError("riesz_project expects a GridFunction or LaurentPoly")
    n, c = g.fourier()
    mask = n >= 0 if sign == "+" else n < 0
    return GridFunction.from_fourier(n, np.where(mask, c, 0.0), g.shifted)


def realize_real_ssf(xi: GridFunction) -> GridFunction:
    """``Re xi + i(P_-(Im xi) - conj(P_-(Im xi)))``: a real representative."""
    p = riesz_project(xi.imag, "-")
    return xi.real + 1j * (p - p.conj())


@dataclass
class AIntegral:
    value: complex
    thresholds: np.ndarray
    truncated: np.ndarray
    tails: np.ndarray
    differences: np.ndarray = field(default_factory=lambda: np.zeros(0))
    converged: bool = False

    def to_json(self) -> dict:
        return {
            "value": [self.value.real, self.value.imag],
            "thresholds": self.thresholds.tolist(),
            "truncated": [[v.real, v.imag] for v in self.truncated],
            "tails": self.tails.tolist(),
            "differences": self.differences.tolist(),
            "converged": self.converged,
        }


def default_thresholds(g: GridFunction, count: int = 24) -> np.ndarray:
    """Geometric ladder ending above ``max |g|``."""
    a = np.abs(g.values)
    top = float(a.max()) if a.size else 1.0
    base = float(np.median(a)) if a.size else 1.0
    lo = max(base, 1e-300)
    hi = max(2.0 * top, 2.0 * lo)
    return np.geomspace(lo, hi, count)


def a_integral(g: GridFunction, thresholds: Sequence[float] | None = None,
               tol: float = 1e-6) -> AIntegral:
    """Truncated integrals ``int_{|g|<t} g dm`` along ascending thresholds."""
    if thresholds is None:
        thresholds = default_thresholds(g)
    th = np.asarray(thresholds, dtype=float)
    if th.size == 0:
        raise ValidationError("thresholds must be nonempty")
    if np.any(np.diff(th) < 0) or np.any(th <= 0):
        raise ValidationError("thresholds must be positive and ascending")
    a = np.abs(g.values)
    M = g.M
    trunc = np.array([np.sum(np.where(a < t, g.values, 0.0)) / M for t in th], dtype=complex)
    tails = np.array([t * np.count_nonzero(a > t) / M for t in th])
    diffs = np.abs(np.diff(trunc))
    converged = True
    if th.size >= 2:
        converged = bool(diffs[-1] < tol)
    if th.size >= 3:
        converged = converged and bool(np.all(np.diff(tails[-3:]) <= 1e-15))
    return AIntegral(complex(trunc[-1]), th, trunc, tails, diffs, converged)
