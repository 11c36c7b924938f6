"""Spectral shift functions, perturbation determinants and trace formulas.

Conventions
-----------
On the circle ``trace(f(X1) - f(X0)) = int f'(zeta) xi(zeta) dzeta`` with
``dzeta = 2 pi i zeta dm`` and ``dm`` the normalized arc length.  On the line
the element is ``dt``.  A line-domain sample is stored through its circle
counterpart ``xi_c(zeta) = xi(t)`` with ``zeta = (t - i)/(t + i)``, so that
pairing a ``LineFn`` with it is the circle pairing with the representative.

An :class:`SSFSample` keeps grid values together with exact components:

* resolvent terms ``(w, T, W)`` describing ``nu = sum w trace(W E_T)`` with
  ``E_T`` the semi-spectral measure of a c.n.u. contraction ``T``; ``xi``
  equals ``q(zeta) g / (2 pi i zeta)`` where ``g = dnu/dm`` and ``q`` is a
  polynomial factor fixed by the construction;
* oriented step pieces (counting functions), paired through ``f`` itself;
* point masses of the measure ``xi dzeta``;
* plain grid samples.

Exact components let trace formulas be evaluated without aliasing when a path
runs close to the unit circle, while the samples carry the pointwise values
used for sign certificates, CSV output and FFT based post-processing.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .calculus import (
    GridFunction,
    LaurentPoly,
    LineFn,
    a_integral,
    cayley,
    circle_grid,
    default_thresholds,
    is_power_of_two,
    line_point,
    polyval_matrix,
    realize_real_ssf,
    require_analytic,
    riesz_project,
)
from .dilation import CircleMeasure, cnu_split, trace_density, unitary_atoms
from .errors import BranchError, ConvergenceError, PhaseTrackingError, ValidationError
from .operators import (
    DEFAULT_TOL,
    adjoint,
    as_matrix,
    check_contraction,
    check_dissipative,
    check_hermitian,
    check_unitary,
    opnorm,
    unitary_log,
)
from .serialization import complex_pair, matrix_from_json, matrix_to_json

LOGGER = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
ATOM_TOL = 1e-10
ALIAS_TOL = 1e-14


# ---------------------------------------------------------------------------
# quadrature settings

@dataclass(frozen=True)
class QuadratureSpec:
    t_nodes: int = 64
    theta_grid: int = 2048
    path_steps: int = 2000
    shift_grid: bool = False
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        if self.t_nodes < 2:
            raise ValidationError("t_nodes must be >= 2")
        if not is_power_of_two(self.theta_grid):
            raise ValidationError(f"theta_grid {self.theta_grid} is not a power of two")
        if self.path_steps < 1:
            raise ValidationError("path_steps must be >= 1")
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be positive")

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre nodes and weights on (0, 1)."""
        x, w = np.polynomial.legendre.leggauss(self.t_nodes)
        return 0.5 * (x + 1.0), 0.5 * w

    def theta(self) -> np.ndarray:
        return circle_grid(self.theta_grid, self.shift_grid)

    def with_shift(self) -> "QuadratureSpec":
        return replace(self, shift_grid=True)


# ---------------------------------------------------------------------------
# exact components

class _Part:
    kind = "part"

    def sample(self, theta: np.ndarray, domain: str) -> np.ndarray:
        raise NotImplementedError

    def scaled(self, c: complex) -> "_Part":
        raise NotImplementedError


@dataclass
class ResolventPart(_Part):
    """``xi = scale q(zeta) g(theta) / (2 pi i zeta)``, ``g = sum w trace(W K_T)``."""

    terms: list
    factor: LaurentPoly = field(default_factory=lambda: LaurentPoly.constant(1.0))
    scale: complex = 1.0
    kind = "resolvent"

    def density(self, theta: np.ndarray) -> np.ndarray:
        g = np.zeros(theta.shape, dtype=complex)
        for w, T, W in self.terms:
            g += w * trace_density(T, W, theta)
        return g

    def sample(self, theta, domain):
        z = np.exp(1j * theta)
        return self.scale * self.factor(z) * self.density(theta) / (TWO_PI * 1j * z)

    def spectral_radius(self) -> float:
        r = 0.0
        for _, T, _ in self.terms:
            if T.size:
                r = max(r, float(np.max(np.abs(np.linalg.eigvals(T)))))
        return r

    def alias_safe(self, M: int) -> bool:
        r = self.spectral_radius()
        return r == 0.0 or (M // 2) * math.log(max(r, 1e-300)) < math.log(ALIAS_TOL)

    def pair_exact(self, c: LaurentPoly) -> complex:
        p = self.factor * c.derivative()
        total = 0j
        for w, T, W in self.terms:
            total += w * np.trace(W @ polyval_matrix(p, T))
        return complex(self.scale * total)

    def scaled(self, c):
        return ResolventPart(self.terms, self.factor, self.scale * c)

    def to_json(self):
        return {
            "type": self.kind,
            "factor": self.factor.to_json(),
            "scale": complex_pair(self.scale),
            "terms": [{"w": float(w), "T": matrix_to_json(T), "W": matrix_to_json(W)}
                      for w, T, W in self.terms],
        }

    @classmethod
    def from_json(cls, obj):
        terms = [(float(t["w"]), matrix_from_json(t["T"]), matrix_from_json(t["W"])) for t in obj["terms"]]
        return cls(terms, LaurentPoly.from_json(obj["factor"]), complex(*obj["scale"]))


@dataclass
class StepPart(_Part):
    """Sum of ``weight`` times oriented indicators of ``[a, b)``.

    On the circle ``a`` and ``b`` are unwrapped angles and the pieces wind.
    """

    pieces: list
    domain: str = "circle"
    kind = "steps"

    def sample(self, theta, domain):
        out = np.zeros(theta.shape, dtype=complex)
        if self.domain == "circle":
            for a, b, w in self.pieces:
                out += w * (np.ceil((b - theta) / TWO_PI) - np.ceil((a - theta) / TWO_PI))
        else:
            t = line_point(theta)
            for a, b, w in self.pieces:
                out += w * ((a <= t).astype(float) - (b <= t).astype(float))
        return out

    def pair_with(self, F: Callable) -> complex:
        total = 0j
        for a, b, w in self.pieces:
            total += w * (complex(F(b)) - complex(F(a)))
        return total

    def scaled(self, c):
        return StepPart([(a, b, w * c) for a, b, w in self.pieces], self.domain)

    def breakpoints(self) -> np.ndarray:
        pts = [p for a, b, _ in self.pieces for p in (a, b)]
        if self.domain == "circle":
            pts = [float(np.mod(p, TWO_PI)) for p in pts]
        return np.unique(np.asarray(pts, dtype=float))

    def to_json(self):
        return {"type": self.kind, "domain": self.domain,
                "pieces": [[float(a), float(b)] + complex_pair(w) for a, b, w in self.pieces]}

    @classmethod
    def from_json(cls, obj):
        return cls([(float(p[0]), float(p[1]), complex(p[2], p[3])) for p in obj["pieces"]], obj["domain"])


@dataclass
class AtomPart(_Part):
    """Point masses of ``xi dzeta`` at angles: contributes ``mass f'(zeta)``."""

    atoms: list
    kind = "atoms"

    def sample(self, theta, domain):
        return np.zeros(theta.shape, dtype=complex)

    def pair_exact(self, c: LaurentPoly) -> complex:
        d = c.derivative()
        return complex(sum(m * d(np.exp(1j * th)) for th, m in self.atoms))

    def scaled(self, c):
        return AtomPart([(th, m * c) for th, m in self.atoms])

    def to_json(self):
        return {"type": self.kind, "atoms": [[float(th)] + complex_pair(m) for th, m in self.atoms]}

    @classmethod
    def from_json(cls, obj):
        return cls([(float(a[0]), complex(a[1], a[2])) for a in obj["atoms"]])


@dataclass
class GridPart(_Part):
    """Plain samples on the sample grid; paired by quadrature only."""

    values: np.ndarray
    kind = "grid"

    def sample(self, theta, domain):
        if theta.shape != self.values.shape:
            raise ValidationError("grid part size mismatch")
        return np.asarray(self.values, dtype=complex)

    def scaled(self, c):
        return GridPart(self.values * c)

    def to_json(self):
        return {"type": self.kind, "values": [complex_pair(v) for v in self.values]}

    @classmethod
    def from_json(cls, obj):
        return cls(np.array([complex(re, im) for re, im in obj["values"]]))


_PART_TYPES = {cls.kind: cls for cls in (ResolventPart, StepPart, AtomPart, GridPart)}


# ---------------------------------------------------------------------------
# SSF samples

@dataclass
class SSFSample:
    domain: str
    M: int
    shifted: bool
    gauge: str
    parts: list = field(default_factory=list)
    normalization: str = "dzeta"
    max_degree: int | None = None
    meta: dict = field(default_factory=dict)
    _values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.domain not in ("circle", "line"):
            raise ValidationError(f"unknown domain {self.domain!r}")
        if self.gauge not in ("raw", "real-part", "counting"):
            raise ValidationError(f"unknown gauge {self.gauge!r}")
        if self.domain == "line" and not self.shifted:
            raise ValidationError("line-domain samples need the shifted grid")
        if not is_power_of_two(self.M):
            raise ValidationError(f"grid size {self.M} is not a power of two")

    # grids ---------------------------------------------------------------
    @property
    def theta(self) -> np.ndarray:
        return circle_grid(self.M, self.shifted)

    @property
    def grid(self) -> np.ndarray:
        """Angles on the circle, points ``t = -cot(theta/2)`` on the line."""
        return self.theta if self.domain == "circle" else line_point(self.theta)

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            th = self.theta
            v = np.zeros(self.M, dtype=complex)
            for p in self.parts:
                v = v + p.sample(th, self.domain)
            self._values = v
        return self._values

    def grid_function(self) -> GridFunction:
        return GridFunction(self.values, self.shifted)

    def atoms(self) -> list:
        return [a for p in self.parts if isinstance(p, AtomPart) for a in p.atoms]

    # algebra ---------------------------------------------------------------
    def _compatible(self, other: "SSFSample"):
        if (self.domain, self.M, self.shifted, self.normalization) != (
                other.domain, other.M, other.shifted, other.normalization):
            raise ValidationError("SSF samples live on different grids or conventions")

    def __add__(self, other: "SSFSample") -> "SSFSample":
        self._compatible(other)
        gauge = self.gauge if self.gauge == other.gauge else "raw"
        deg = [d for d in (self.max_degree, other.max_degree) if d is not None]
        return SSFSample(self.domain, self.M, self.shifted, gauge, self.parts + other.parts,
                         self.normalization, min(deg) if deg else None)

    def scaled(self, c: complex) -> "SSFSample":
        return SSFSample(self.domain, self.M, self.shifted, self.gauge,
                         [p.scaled(c) for p in self.parts], self.normalization, self.max_degree,
                         dict(self.meta))

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def add_grid(self, values) -> "SSFSample":
        """Add plain grid samples (e.g. an analytic gauge term)."""
        v = np.asarray(values, dtype=complex)
        if v.shape != (self.M,):
            raise ValidationError("grid values have the wrong length")
        return SSFSample(self.domain, self.M, self.shifted, "raw", self.parts + [GridPart(v)],
                         self.normalization, self.max_degree)

    def as_line(self) -> "SSFSample":
        if not self.shifted:
            raise ValidationError("line pullback requires a shifted circle grid")
        return SSFSample("line", self.M, self.shifted, self.gauge, list(self.parts),
                         self.normalization, self.max_degree, dict(self.meta))

    # trace pairing -----------------------------------------------------------
    def resolve_method(self, method: str = "auto") -> str:
        if method not in ("auto", "grid", "exact"):
            raise ValidationError(f"unknown pairing method {method!r}")
        if method != "auto":
            return method
        for p in self.parts:
            if isinstance(p, ResolventPart) and not p.alias_safe(self.M):
                return "exact"
        return "grid"

    def _grid_pair(self, part: _Part, c: LaurentPoly) -> complex:
        z = np.exp(1j * self.theta)
        v = part.sample(self.theta, self.domain)
        return complex(np.mean(c.derivative()(z) * v * TWO_PI * 1j * z))

    def pair(self, f, method: str = "auto") -> complex:
        """``int f' xi`` against ``dzeta`` (circle) or ``dt`` (line)."""
        how = self.resolve_method(method)
        c, F = self._pairing_functions(f)
        if self.max_degree is not None and c is not None and c.nmax > self.max_degree:
            raise ValidationError(f"this sample is only valid up to degree {self.max_degree}")
        total = 0j
        for p in self.parts:
            if isinstance(p, StepPart):
                total += p.pair_with(F if p.domain == self.domain else self._circle_F(c))
            elif c is None:
                total += self._line_grid_pair(p, f)
            elif isinstance(p, AtomPart):
                total += p.pair_exact(c)
            elif isinstance(p, ResolventPart) and how == "exact":
                total += p.pair_exact(c)
            else:
                total += self._grid_pair(p, c)
        return complex(total)

    def _circle_F(self, c):
        if c is None:
            raise ValidationError("a polynomial in t cannot be paired with circle pieces")
        return lambda th: c(np.exp(1j * th))

    def _pairing_functions(self, f):
        if self.domain == "circle":
            if not isinstance(f, LaurentPoly):
                raise ValidationError("circle samples pair with LaurentPoly functions")
            return f, (lambda th: f(np.exp(1j * th)))
        if isinstance(f, LineFn):
            return f.circle_rep, f
        if isinstance(f, LaurentPoly):
            require_analytic(f, "polynomial in t")
            return None, f
        raise ValidationError("line samples pair with LineFn or polynomials in t")

    def _line_grid_pair(self, part, f: LaurentPoly) -> complex:
        if isinstance(part, AtomPart) and part.atoms:
            raise ValidationError("a polynomial in t cannot be paired with point masses")
        if isinstance(part, ResolventPart) and part.terms:
            raise ValidationError("a polynomial in t needs a counting SSF; use a LineFn")
        t = line_point(self.theta)
        w = (1.0 + t ** 2) * 0.5 * TWO_PI / self.M
        v = part.sample(self.theta, self.domain)
        return complex(np.sum(f.derivative()(t) * v * w))

    # summaries ---------------------------------------------------------------
    def summability_proxy(self) -> float:
        """``sum |xi(t_k)| / (1 + t_k^2) dt_k`` on the pulled-back grid."""
        t = line_point(self.theta)
        dt = (1.0 + t ** 2) * 0.5 * TWO_PI / self.M
        return float(np.sum(np.abs(self.values) / (1.0 + t ** 2) * dt))

    def breakpoints(self) -> np.ndarray:
        pts = [p.breakpoints() for p in self.parts if isinstance(p, StepPart)]
        return np.unique(np.concatenate(pts)) if pts else np.zeros(0)

    # io ------------------------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta_or_t", "re_xi", "im_xi"])
        for x, v in zip(self.grid, self.values):
            w.writerow([f"{x:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, domain: str = "circle", gauge: str = "raw") -> "SSFSample":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [h.strip() for h in rows[0]] != ["theta_or_t", "re_xi", "im_xi"]:
            raise ValidationError("SSF CSV must have header theta_or_t,re_xi,im_xi")
        try:
            data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
        except ValueError as exc:
            raise ValidationError(f"malformed SSF CSV: {exc}") from exc
        if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != 3:
            raise ValidationError("SSF CSV needs three numeric columns")
        M = data.shape[0]
        if not is_power_of_two(M):
            raise ValidationError(f"SSF CSV has {M} rows; a power of two is required")
        if not np.all(np.isfinite(data)):
            raise ValidationError("SSF CSV has non-finite entries")
        x = data[:, 0]
        if domain == "line":
            shifted = True
            expected = line_point(circle_grid(M, True))
        else:
            shifted = bool(abs(x[0] - np.pi / M) < 1e-9)
            expected = circle_grid(M, shifted)
        if not np.allclose(x, expected, rtol=1e-9, atol=1e-9):
            raise ValidationError("SSF CSV grid column does not match a uniform circle grid")
        return cls(domain, M, shifted, gauge, [GridPart(data[:, 1] + 1j * data[:, 2])])

    def to_json(self) -> dict:
        return {
            "domain": self.domain,
            "grid": self.M,
            "shifted": self.shifted,
            "gauge": self.gauge,
            "normalization": self.normalization,
            "max_degree": self.max_degree,
            "parts": [p.to_json() for p in self.parts],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SSFSample":
        try:
            parts = [_PART_TYPES[p["type"]].from_json(p) for p in obj["parts"]]
            return cls(obj["domain"], int(obj["grid"]), bool(obj["shifted"]), obj["gauge"], parts,
                       obj.get("normalization", "dzeta"), obj.get("max_degree"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed SSF JSON: {exc}") from exc


def zero_ssf(spec: QuadratureSpec, domain: str = "circle", gauge: str = "raw") -> SSFSample:
    return SSFSample(domain, spec.theta_grid, spec.shift_grid or domain == "line", gauge, [])


# ---------------------------------------------------------------------------
# path engine

def ssf_along_path(path: Callable[[float], tuple[np.ndarray, np.ndarray]], spec: QuadratureSpec,
                   factor: LaurentPoly, drop_atoms: bool, domain: str = "circle",
                   gauge: str = "raw", atom_scale: float = 1.0) -> SSFSample:
    """Integrate ``nu_t = trace(W_t E_{T_t})`` over Gauss-Legendre nodes.

    ``path(t)`` returns ``(T_t, W_t)``.  Unitary-part atoms are either
    dropped after checking that their ``W_t``-mass vanishes or kept as
    point masses of ``xi dzeta`` (multiplied by ``factor``).
    """
    nodes, weights = spec.nodes()
    terms, atoms = [], []
    atom_limit = ATOM_TOL * max(1.0, atom_scale)
    for t, w in zip(nodes, weights):
        Tt, Wt = path(float(t))
        split = cnu_split(Tt, spec.tolerance)
        if split.cnu_basis.shape[1]:
            Vc = split.cnu_basis
            terms.append((float(w), split.cnu_part, adjoint(Vc) @ Wt @ Vc))
        for th, P in unitary_atoms(split):
            m = complex(np.trace(Wt @ P))
            if drop_atoms:
                if abs(m) > atom_limit:
                    raise ConvergenceError(
                        f"unitary part carries mass {abs(m):.3e} at t={t:.6f}; refusing to drop it")
                continue
            atoms.append((th, float(w) * m * complex(factor(np.exp(1j * th)))))
    parts: list = [ResolventPart(terms, factor)]
    if atoms:
        parts.append(AtomPart(atoms))
    shifted = spec.shift_grid or domain == "line"
    return SSFSample(domain, spec.theta_grid, shifted, gauge, parts)


# ---------------------------------------------------------------------------
# contraction and unitary pairs

def ssf_contraction_pair(T0, T1, spec: QuadratureSpec | None = None) -> SSFSample:
    """SSF of a contraction pair along ``T_t = T0 + t(T1 - T0)``; gauge ``raw``."""
    spec = spec or QuadratureSpec()
    A0 = check_contraction(T0, spec.tolerance, "T0")
    A1 = check_contraction(T1, spec.tolerance, "T1")
    if A0.shape != A1.shape:
        raise ValidationError("dimension mismatch")
    K = A1 - A0

    def path(t):
        Tt = A0 + t * K
        try:
            Tt = check_contraction(Tt, max(spec.tolerance, 1e-9), "T_t")
        except ValidationError as exc:
            raise ValidationError(f"path left the contraction class at t={t}: {exc}") from exc
        return Tt, K

    return ssf_along_path(path, spec, LaurentPoly.constant(1.0), drop_atoms=True,
                          atom_scale=opnorm(K))


def _wrap(x):
    return (x + np.pi) % TWO_PI - np.pi


class _PhaseTracker:
    """Nearest-phase matching of eigenphases along ``U_t = exp(itA) U0``."""

    def __init__(self, Q: np.ndarray, alpha: np.ndarray, U0: np.ndarray,
                 max_step: float = np.pi / 4, max_depth: int = 30):
        self.Q, self.alpha, self.U0 = Q, alpha, U0
        self.max_step, self.max_depth = max_step, max_depth

    def eig_phases(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(t)
        E = np.exp(1j * t[:, None] * self.alpha[None, :])
        Ut = (self.Q[None, :, :] * E[:, None, :]) @ (adjoint(self.Q) @ self.U0)[None]
        return np.angle(np.linalg.eigvals(Ut))

    def _match(self, prev: np.ndarray, new: np.ndarray):
        D = _wrap(new[None, :] - prev[:, None])
        rows, cols = linear_sum_assignment(np.abs(D))
        step = np.empty_like(prev)
        step[rows] = D[rows, cols]
        return prev + step, float(np.max(np.abs(step))) if step.size else 0.0

    def advance(self, prev, t0, t1, new, depth=0):
        nxt, jump = self._match(prev, new)
        if jump <= self.max_step:
            return nxt
        if depth >= self.max_depth:
            raise PhaseTrackingError(
                f"eigenphase matching ambiguous near t={t0:.6g}; increase path steps")
        tm = 0.5 * (t0 + t1)
        mid = self.eig_phases(np.array([tm]))[0]
        half = self.advance(prev, t0, tm, mid, depth + 1)
        return self.advance(half, tm, t1, new, depth + 1)

    def run(self, steps: int) -> tuple[np.ndarray, np.ndarray]:
        ts = np.linspace(0.0, 1.0, steps + 1)
        phases = self.eig_phases(ts)
        start = np.sort(phases[0])
        cur = start.copy()
        for k in range(1, steps + 1):
            cur = self.advance(cur, ts[k - 1], ts[k], phases[k])
        return start, cur


def ssf_unitary_pair(U0, U1, spec: QuadratureSpec | None = None) -> SSFSample:
    """Counting SSF from the eigenphase flow of ``exp(itA) U0``, ``exp(iA) = U1 U0*``."""
    spec = spec or QuadratureSpec()
    tol = max(spec.tolerance, 1e-9)
    V0 = check_unitary(U0, tol, "U0")
    V1 = check_unitary(U1, tol, "U1")
    if V0.shape != V1.shape:
        raise ValidationError("dimension mismatch")
    A = unitary_log(V1 @ adjoint(V0))
    alpha, Q = np.linalg.eigh(A)
    tracker = _PhaseTracker(Q, alpha, V0)
    start, end = tracker.run(spec.path_steps)
    pieces = [(float(a), float(b), 1.0) for a, b in zip(start, end) if a != b]
    out = SSFSample("circle", spec.theta_grid, spec.shift_grid, "counting", [StepPart(pieces, "circle")])
    out.meta["winding"] = [float((b - a) / TWO_PI) for a, b in zip(start, end)]
    return out


def ssf_selfadjoint_pair(A0, A1, spec: QuadratureSpec | None = None,
                         cross_check: bool = True) -> SSFSample:
    """Counting function ``#{eig A0 <= t} - #{eig A1 <= t}`` on the line."""
    spec = spec or QuadratureSpec()
    H0 = check_hermitian(A0, max(spec.tolerance, 1e-10), "A0")
    H1 = check_hermitian(A1, max(spec.tolerance, 1e-10), "A1")
    if H0.shape != H1.shape:
        raise ValidationError("dimension mismatch")
    a = np.linalg.eigvalsh(H0)
    b = np.linalg.eigvalsh(H1)
    pieces = [(float(x), float(y), 1.0) for x, y in zip(a, b) if x != y]
    out = SSFSample("line", spec.theta_grid, True, "counting", [StepPart(pieces, "line")])
    out.meta["breakpoints"] = np.unique(np.concatenate([a, b])).tolist()
    if cross_check:
        xu = ssf_unitary_pair(cayley(H0), cayley(H1), spec)
        gap = 0.0
        for k in (1, 2, 3):
            f = LineFn(LaurentPoly.monomial(k))
            gap = max(gap, abs(out.pair(f) - xu.pair(f.circle_rep)))
        out.meta["cayley_crosscheck"] = gap
        if gap > 1e-6:
            LOGGER.warning("Cayley cross-check gap %.3e", gap)
    return out


# ---------------------------------------------------------------------------
# determinants

def perturbation_determinant(A0, A1, z: complex) -> complex:
    """``det(I + (A1 - A0)(A0 - z)^{-1})``."""
    H0, H1 = as_matrix(A0, "A0"), as_matrix(A1, "A1")
    if H0.shape != H1.shape:
        raise ValidationError("dimension mismatch")
    lam = np.linalg.eigvals(H0)
    if np.min(np.abs(lam - z)) < 1e-14:
        raise ValidationError("z is an eigenvalue of A0")
    n = H0.shape[0]
    R = np.linalg.inv(H0 - z * np.eye(n))
    return complex(np.linalg.det(np.eye(n) + (H1 - H0) @ R))


@dataclass
class DeterminantResult:
    value: float
    ladder: np.ndarray
    trace: np.ndarray
    last_change: float
    converged: bool

    def to_json(self):
        return {"value": self.value, "ladder": self.ladder.tolist(), "trace": self.trace.tolist(),
                "last_change": self.last_change, "converged": self.converged}


def default_ladder() -> np.ndarray:
    return np.logspace(3, -6, 37)


def ssf_via_determinant(A0, A1, t: float, y_ladder: Sequence[float] | None = None,
                        max_jump: float = np.pi / 2) -> DeterminantResult:
    """``(1/pi) Im log Delta(t + iy)`` followed down a decreasing ladder of ``y``."""
    H0 = check_hermitian(A0, 1e-10, "A0")
    H1 = check_hermitian(A1, 1e-10, "A1")
    ys = np.asarray(default_ladder() if y_ladder is None else y_ladder, dtype=float)
    if ys.size == 0 or np.any(ys <= 0) or np.any(np.diff(ys) >= 0):
        raise ValidationError("y ladder must be positive and strictly decreasing")
    ev = np.concatenate([np.linalg.eigvalsh(H0), np.linalg.eigvalsh(H1)])
    if np.min(np.abs(ev - t)) < 1e-8:
        raise ValidationError("t is within 1e-8 of an eigenvalue")
    dets = np.array([perturbation_determinant(H0, H1, t + 1j * y) for y in ys])
    phase = np.empty(ys.size)
    phase[0] = np.angle(dets[0])
    for k in range(1, ys.size):
        inc = np.angle(dets[k] / dets[k - 1])
        if abs(inc) > max_jump:
            raise BranchError(f"argument jump {inc:.3f} between y={ys[k-1]:.3e} and {ys[k]:.3e}")
        phase[k] = phase[k - 1] + inc
    vals = phase / np.pi
    change = float(abs(vals[-1] - vals[-2])) if vals.size > 1 else 0.0
    return DeterminantResult(float(vals[-1]), ys, vals, change, change < 1e-3)


@dataclass
class ContourResult:
    value: complex
    winding: int
    nodes: int
    max_increment: float


def langer_contour_trace(f: LaurentPoly, T0, T1, center: complex = 0.0, radius: float | None = None,
                         nodes: int = 4096) -> ContourResult:
    """Contour form of ``trace(f(T1) - f(T0))`` through ``log Delta``.

    The branch of ``log Delta`` is the one vanishing at infinity; with it the
    trace equals ``-(1/2 pi i) \\oint f'(z) log Delta(z) dz`` on a positively
    oriented circle enclosing both spectra.
    """
    require_analytic(f)
    B0, B1 = as_matrix(T0, "T0"), as_matrix(T1, "T1")
    if B0.shape != B1.shape:
        raise ValidationError("dimension mismatch")
    n = B0.shape[0]
    spec_pts = np.concatenate([np.linalg.eigvals(B0), np.linalg.eigvals(B1)])
    reach = float(np.max(np.abs(spec_pts - center)))
    if radius is None:
        radius = 2.0 * max(reach, 0.5)
    if reach >= radius:
        raise ValidationError("contour does not enclose the spectra")
    phi = TWO_PI * np.arange(nodes) / nodes
    z = center + radius * np.exp(1j * phi)
    R = np.linalg.inv(B0[None] - z[:, None, None] * np.eye(n)[None])
    dets = np.linalg.det(np.eye(n)[None] + (B1 - B0)[None] @ R)
    if np.min(np.abs(dets)) == 0.0:
        raise BranchError("perturbation determinant vanishes on the contour")
    inc = np.angle(np.roll(dets, -1) / dets)
    max_inc = float(np.max(np.abs(inc)))
    if max_inc > np.pi / 2:
        raise BranchError("contour too coarse for branch tracking")
    winding = int(round(np.sum(inc) / TWO_PI))
    if winding != 0:
        raise BranchError(f"log Delta is not single valued on the contour: winding {winding}")
    phase = np.concatenate([[np.angle(dets[0])], np.angle(dets[0]) + np.cumsum(inc[:-1])])
    phase -= TWO_PI * round(float(np.mean(phase)) / TWO_PI)
    logd = np.log(np.abs(dets)) + 1j * phase
    dz = 1j * radius * np.exp(1j * phi) * (TWO_PI / nodes)
    val = -np.sum(f.derivative()(z) * logd * dz) / (TWO_PI * 1j)
    return ContourResult(complex(val), winding, nodes, max_inc)


# ---------------------------------------------------------------------------
# dissipative pairs

def ssf_dissipative_resolvent_pair(L0, L1, spec: QuadratureSpec | None = None) -> SSFSample:
    """Line SSF ``xi(t) = xi_c((t - i)/(t + i))`` from the Cayley transforms."""
    spec = (spec or QuadratureSpec()).with_shift()
    M0 = check_dissipative(L0, spec.tolerance, "L0")
    M1 = check_dissipative(L1, spec.tolerance, "L1")
    if M0.shape != M1.shape:
        raise ValidationError("dimension mismatch")
    T0 = check_contraction(cayley(M0), 1e-9, "cayley(L0)")
    T1 = check_contraction(cayley(M1), 1e-9, "cayley(L1)")
    return ssf_contraction_pair(T0, T1, spec).as_line()


LINE_FACTOR = LaurentPoly([1.0, -2.0, 1.0]) * (-0.5j)


def ssf_dissipative_additive(L0, K, spec: QuadratureSpec | None = None) -> SSFSample:
    """Line SSF along ``L_s = L0 + sK`` with ``nu_s = trace(K E_{L_s})``."""
    spec = (spec or QuadratureSpec()).with_shift()
    M0 = check_dissipative(L0, spec.tolerance, "L0")
    Kp = as_matrix(K, "K")
    if Kp.shape != M0.shape:
        raise ValidationError("dimension mismatch")

    def path(s):
        try:
            Ls = check_dissipative(M0 + s * Kp, spec.tolerance, "L_s")
        except ValidationError as exc:
            raise ValidationError(f"path left the dissipative class at s={s}: {exc}") from exc
        return check_contraction(cayley(Ls), 1e-9), Kp

    return ssf_along_path(path, spec, LINE_FACTOR, drop_atoms=False, domain="line")


# ---------------------------------------------------------------------------
# verification

def trace_difference(X0, X1, f, domain: str = "circle") -> complex:
    """``trace(f(X1) - f(X0))`` in the calculus matching the sample domain."""
    A0, A1 = as_matrix(X0, "X0"), as_matrix(X1, "X1")
    if A0.shape != A1.shape:
        raise ValidationError("dimension mismatch")
    if domain == "circle":
        if not isinstance(f, LaurentPoly):
            raise ValidationError("circle pairs need a LaurentPoly")
        return complex(np.trace(polyval_matrix(f, A1) - polyval_matrix(f, A0)))
    if isinstance(f, LineFn):
        T0, T1 = cayley(A0), cayley(A1)
        c = f.circle_rep
        return complex(np.trace(polyval_matrix(c, T1) - polyval_matrix(c, T0)))
    if isinstance(f, LaurentPoly):
        require_analytic(f, "polynomial in t")
        return complex(np.trace(polyval_matrix(f, A1) - polyval_matrix(f, A0)))
    raise ValidationError("line pairs need a LineFn or a polynomial in t")


def verify_trace_formula(pair: tuple, f, xi: SSFSample, method: str = "auto") -> dict:
    """Residual of ``trace(f(X1) - f(X0)) = int f' xi``."""
    if xi.normalization != "dzeta":
        raise ValidationError(f"unsupported normalization {xi.normalization!r}")
    X0, X1 = pair
    tr = trace_difference(X0, X1, f, xi.domain)
    how = xi.resolve_method(method)
    integral = xi.pair(f, how)
    res = abs(tr - integral)
    return {
        "trace": tr,
        "integral": integral,
        "residual": res,
        "relative": res / max(abs(tr), 1.0),
        "method": how,
    }


def contraction_path_measure(T0, T1, spec: QuadratureSpec | None = None) -> CircleMeasure:
    """``nu = int_0^1 trace(K E_{T_t}) dt`` assembled from DOI trace measures."""
    from .doi import trace_measure

    spec = spec or QuadratureSpec()
    A0 = check_contraction(T0, spec.tolerance, "T0")
    A1 = check_contraction(T1, spec.tolerance, "T1")
    K = A1 - A0
    nodes, weights = spec.nodes()
    atoms, dens = [], np.zeros(spec.theta_grid, dtype=complex)
    for t, w in zip(nodes, weights):
        mu = trace_measure(A0 + t * K, K, spec.theta_grid, spec.shift_grid, max(spec.tolerance, 1e-9))
        atoms.extend((th, w * m) for th, m in mu.atoms)
        dens = dens + w * mu.density
    return CircleMeasure(atoms, dens, spec.shift_grid)


def brothers_riesz_check(nu: CircleMeasure, xi: SSFSample, J: int = 8, method: str = "auto") -> dict:
    """Negative Fourier coefficients of ``lambda = nu - xi dzeta``."""
    if not nu.is_scalar():
        raise ValidationError("brothers_riesz_check needs a scalar measure")
    if xi.domain != "circle":
        raise ValidationError("circle sample required")
    coeffs = []
    for j in range(-1, -J - 1, -1):
        k = -j
        a = complex(nu.moment(k))
        F = LaurentPoly.monomial(k + 1, 1.0 / (k + 1))
        b = xi.pair(F, method)
        coeffs.append(a - b)
    coeffs = np.array(coeffs)
    return {"indices": list(range(-1, -J - 1, -1)), "coefficients": coeffs,
            "max": float(np.max(np.abs(coeffs))) if coeffs.size else 0.0}


def _a_thresholds(g: GridFunction) -> np.ndarray:
    a = np.abs(g.values)
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return np.array([1.0, 2.0, 4.0])
    base = default_thresholds(g)
    return np.concatenate([base[base < top], [2.0 * top, 4.0 * top]])


def a_integral_trace(T0, T1, f: LaurentPoly, spec: QuadratureSpec | None = None,
                     xi: SSFSample | None = None) -> tuple[complex, complex, dict]:
    """Trace formula through A-integrals of ``f' eta_-`` and ``f' xi_r``."""
    spec = spec or QuadratureSpec()
    require_analytic(f)
    if xi is None:
        xi = ssf_contraction_pair(T0, T1, spec)
    G = xi.grid_function()
    z = G.zeta
    weight = G.like(f.derivative()(z) * TWO_PI * 1j * z)
    eta_minus = riesz_project(G, "-")
    xi_r = realize_real_ssf(G)
    plus = riesz_project(G, "+")
    results = {}
    for name, h in (("eta_minus", eta_minus), ("xi_r", xi_r), ("p_plus", plus)):
        g = weight * h
        results[name] = a_integral(g, _a_thresholds(g))
    flags = {k: v.converged for k, v in results.items()}
    if not all(flags.values()):
        raise ConvergenceError(f"A-integral did not converge: {flags}")
    tr = trace_difference(T0, T1, f)
    report = {
        "trace": tr,
        "alexandrov_term": results["p_plus"].value,
        "converged": flags,
        "diagnostics": {k: v.to_json() for k, v in results.items()},
        "xi_r_max_imag": float(np.max(np.abs(xi_r.values.imag))),
    }
    return results["eta_minus"].value, results["xi_r"].value, report
