"""Double operator integrals for spectral and semi-spectral measures."""
from __future__ import annotations

import logging
from typing import Callable, Sequence

import numpy as np

from .calculus import (
    LaurentPoly,
    LineFn,
    cayley,
    divided_difference,
    eval_on_dissipative,
    haagerup_terms,
    polyval_matrix,
    require_analytic,
)
from .dilation import CircleMeasure, cnu_split, trace_density, unitary_atoms
from .calculus import circle_grid
from .errors import ConvergenceError, ValidationError
from .operators import (
    DEFAULT_TOL,
    adjoint,
    as_matrix,
    check_contraction,
    check_dissipative,
    normal_eig,
    opnorm,
)

LOGGER = logging.getLogger(__name__)


class SchurSymbol:
    """A function ``Phi(x, y)`` given by a rule, a Haagerup list, or both."""

    def __init__(self, func: Callable | None = None,
                 terms: Sequence[tuple[LaurentPoly, LaurentPoly]] | None = None):
        if func is None and terms is None:
            raise ValidationError("SchurSymbol needs a rule or a Haagerup list")
        self.func = func
        self.terms = list(terms) if terms is not None else None

    @classmethod
    def divided_difference(cls, f: LaurentPoly) -> "SchurSymbol":
        require_analytic(f)
        return cls(lambda x, y: divided_difference(f, x, y), haagerup_terms(f))

    @classmethod
    def from_terms(cls, terms) -> "SchurSymbol":
        return cls(None, terms)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        if self.func is not None:
            return np.asarray(self.func(x, y), dtype=complex) * np.ones(np.broadcast(x, y).shape)
        return self._from_terms(x, y)

    def _from_terms(self, x, y):
        out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        for phi, psi in self.terms:
            out = out + phi(x) * psi(y)
        return out

    def consistency(self, x, y) -> float:
        """Largest gap between the rule and the Haagerup list at the given points."""
        if self.func is None or self.terms is None:
            return 0.0
        return float(np.max(np.abs(self.func(x, y) - self._from_terms(np.asarray(x), np.asarray(y)))))


def doi_spectral(phi: SchurSymbol, A, B, Q) -> np.ndarray:
    """``sum_{i,j} Phi(lambda_i, mu_j) P_i Q R_j`` for normal ``A`` and ``B``.

    Computed as a Schur product in the two orthonormal eigenbases.
    """
    A, B, Q = as_matrix(A, "A"), as_matrix(B, "B"), np.asarray(Q, dtype=complex)
    if Q.shape != (A.shape[0], B.shape[0]):
        raise ValidationError("Q has incompatible shape")
    da, db = normal_eig(A), normal_eig(B)
    G = phi(da.eigenvalues[:, None], db.eigenvalues[None, :])
    Qt = adjoint(da.vectors) @ Q @ db.vectors
    return da.vectors @ (G * Qt) @ adjoint(db.vectors)


def doi_semispectral(f: LaurentPoly, T1, T0, Q, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``sum_k phi_k(T1) Q psi_k(T0)`` over the Haagerup terms of ``df``."""
    require_analytic(f)
    A1 = check_contraction(T1, tol, "T1")
    A0 = check_contraction(T0, tol, "T0")
    Q = np.asarray(Q, dtype=complex)
    out = np.zeros((A1.shape[0], A0.shape[0]), dtype=complex)
    for phi, psi in haagerup_terms(f):
        out += polyval_matrix(phi, A1) @ Q @ polyval_matrix(psi, A0)
    return out


def lipschitz_difference(f: LaurentPoly, T1, T0, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``f(T1) - f(T0)`` written as the integral of ``df`` against ``T1 - T0``."""
    A1 = check_contraction(T1, tol, "T1")
    A0 = check_contraction(T0, tol, "T0")
    out = doi_semispectral(f, A1, A0, A1 - A0, tol)
    direct = polyval_matrix(f, A1) - polyval_matrix(f, A0)
    err = opnorm(out - direct)
    if err > 1e-9 * (1.0 + opnorm(direct)):
        LOGGER.warning("difference identity residual %.3e", err)
    return out


def parametric_derivative(f: LaurentPoly, T0, K, t: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Derivative of ``s -> f(T0 + sK)`` at ``s = t``."""
    A0 = as_matrix(T0, "T0")
    K = as_matrix(K, "K")
    Tt = check_contraction(A0 + t * K, tol, "T_t")
    return doi_semispectral(f, Tt, Tt, K, tol)


def finite_difference_error(f: LaurentPoly, T0, K, t: float, h: float,
                            scheme: str = "forward") -> float:
    """Norm of the gap between a difference quotient and the DOI derivative."""
    A0, K = as_matrix(T0), as_matrix(K)
    exact = parametric_derivative(f, A0, K, t)
    if scheme == "forward":
        fd = (polyval_matrix(f, A0 + (t + h) * K) - polyval_matrix(f, A0 + t * K)) / h
    elif scheme == "central":
        fd = (polyval_matrix(f, A0 + (t + h) * K) - polyval_matrix(f, A0 + (t - h) * K)) / (2 * h)
    else:
        raise ValidationError(f"unknown scheme {scheme!r}")
    return opnorm(fd - exact)


def trace_measure(T: np.ndarray, K: np.ndarray, M: int = 2048, shifted: bool = False,
                  tol: float = DEFAULT_TOL) -> CircleMeasure:
    """Scalar measure ``trace(K E_T(.))`` with atoms from the unitary part."""
    A = check_contraction(T, tol)
    split = cnu_split(A, tol)
    atoms = [(th, complex(np.trace(K @ w))) for th, w in unitary_atoms(split)]
    theta = circle_grid(M, shifted)
    if split.cnu_basis.shape[1]:
        Vc = split.cnu_basis
        dens = trace_density(split.cnu_part, adjoint(Vc) @ K @ Vc, theta)
    else:
        dens = np.zeros(M, dtype=complex)
    return CircleMeasure(atoms, dens, shifted)


def doi_trace(f: LaurentPoly, T, K, M: int = 2048, shifted: bool = False,
              tol: float = DEFAULT_TOL) -> tuple[complex, CircleMeasure]:
    """``trace`` of the DOI of ``df`` at ``(T, T)`` applied to ``K``, and its measure."""
    A = check_contraction(T, tol)
    K = as_matrix(K, "K")
    value = complex(np.trace(doi_semispectral(f, A, A, K, tol)))
    mu = trace_measure(A, K, M, shifted, tol)
    quad = complex(mu.integrate(f.derivative()))
    if abs(quad - value) > 1e-8 * (1.0 + abs(value)):
        LOGGER.warning("doi_trace quadrature gap %.3e (grid %d)", abs(quad - value), M)
    return value, mu


def doi_dissipative_difference(f: LineFn, L1, L0, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``f(L1) - f(L0)`` for dissipative ``L0, L1``, cross-checked on the circle."""
    A1 = check_dissipative(L1, tol, "L1")
    A0 = check_dissipative(L0, tol, "L0")
    out = eval_on_dissipative(f, A1, tol) - eval_on_dissipative(f, A0, tol)
    T1, T0 = cayley(A1), cayley(A0)
    circ = doi_semispectral(f.circle_rep, T1, T0, T1 - T0, max(tol, 1e-9))
    gap = opnorm(out - circ)
    if gap > 1e-9 * (1.0 + opnorm(out)):
        raise ConvergenceError(f"circle DOI cross-check failed: gap {gap:.3e}")
    return out
