"""Dense complex matrix algebra and operator-class validation.

Every operator is carried as a square ``complex128`` numpy array.  The
helpers in this module validate class membership (contraction, unitary,
Hermitian, dissipative), compute the decompositions used downstream and
build reproducible random test ensembles.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import ValidationError

LOGGER = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
NORMALITY_TOL = 1e-9
DEFECT_FLOOR = 1e-14

KINDS = ("contraction", "unitary", "hermitian", "dissipative")


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite square complex array."""
    A = np.array(M, dtype=complex, copy=True)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    return A


def adjoint(M: np.ndarray) -> np.ndarray:
    return np.conj(M).T


def opnorm(M: np.ndarray) -> float:
    """Largest singular value."""
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def hermitian_part(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + adjoint(M))


def imaginary_part(M: np.ndarray) -> np.ndarray:
    """Hermitian imaginary part ``(M - M*)/(2i)``."""
    return (M - adjoint(M)) / 2j


# ---------------------------------------------------------------------------
# class validation

def check_contraction(M, tol: float = DEFAULT_TOL, name: str = "T") -> np.ndarray:
    """Validate ``||M|| <= 1 + tol``; rescale drift in ``(1, 1 + tol]``."""
    A = as_matrix(M, name)
    nrm = opnorm(A)
    if nrm > 1.0 + tol:
        raise ValidationError(f"{name} is not a contraction: norm {nrm:.3e}")
    if nrm > 1.0:
        A = A / nrm
    return A


def check_unitary(M, tol: float = DEFAULT_TOL, name: str = "U") -> np.ndarray:
    A = as_matrix(M, name)
    err = opnorm(adjoint(A) @ A - np.eye(A.shape[0]))
    if err > tol:
        raise ValidationError(f"{name} is not unitary: ||U*U - I|| = {err:.3e}")
    return A


def check_hermitian(M, tol: float = DEFAULT_TOL, name: str = "A") -> np.ndarray:
    A = as_matrix(M, name)
    err = opnorm(A - adjoint(A))
    if err > tol:
        raise ValidationError(f"{name} is not Hermitian: ||A - A*|| = {err:.3e}")
    return hermitian_part(A)


def check_dissipative(M, tol: float = DEFAULT_TOL, name: str = "L") -> np.ndarray:
    A = as_matrix(M, name)
    lo = float(np.linalg.eigvalsh(imaginary_part(A))[0])
    if lo < -tol:
        raise ValidationError(f"{name} is not dissipative: min eig Im = {lo:.3e}")
    return A


_CHECKS = {
    "contraction": check_contraction,
    "unitary": check_unitary,
    "hermitian": check_hermitian,
    "dissipative": check_dissipative,
}


@dataclass(frozen=True)
class OperatorClass:
    """A matrix together with a validated class membership."""

    kind: str
    matrix: np.ndarray
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        if self.kind not in _CHECKS:
            raise ValidationError(f"unknown operator kind {self.kind!r}")
        if self.tolerance < 0:
            raise ValidationError("tolerance must be nonnegative")
        object.__setattr__(self, "matrix", _CHECKS[self.kind](self.matrix, self.tolerance))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def validate(kind: str, M, tol: float = DEFAULT_TOL) -> np.ndarray:
    return OperatorClass(kind, M, tol).matrix


# ---------------------------------------------------------------------------
# decompositions

@dataclass
class Decomposition:
    """``eigenvalues`` with a factor matrix; ``kind`` names the factorization.

    For ``svd`` the eigenvalues hold singular values, ``vectors`` the left
    factor and ``right`` the right factor.  For ``polar`` the vectors hold
    the isometric factor and ``right`` the positive factor.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    kind: str
    right: np.ndarray | None = None
    triangular: np.ndarray | None = None

    def reconstruct(self) -> np.ndarray:
        V = self.vectors
        if self.kind in ("hermitian-eig", "unitary-eig"):
            return (V * self.eigenvalues) @ adjoint(V)
        if self.kind == "schur":
            return V @ self.triangular @ adjoint(V)
        if self.kind == "svd":
            return (V * self.eigenvalues) @ adjoint(self.right)
        if self.kind == "polar":
            return V @ self.right
        raise ValueError(self.kind)


def hermitian_eig(M) -> Decomposition:
    A = hermitian_part(as_matrix(M))
    w, V = np.linalg.eigh(A)
    return Decomposition(w, V, "hermitian-eig")


def schur_decompose(M) -> Decomposition:
    A = as_matrix(M)
    R, Z = sla.schur(A, output="complex")
    return Decomposition(np.diag(R).copy(), Z, "schur", triangular=R)


def normality_defect(M: np.ndarray) -> float:
    """Frobenius norm of the strictly upper part of the Schur form."""
    R, _ = sla.schur(M, output="complex")
    return float(np.linalg.norm(np.triu(R, 1)))


def normal_eig(M, tol: float = NORMALITY_TOL) -> Decomposition:
    """Orthonormal eigendecomposition of a normal matrix via the Schur form."""
    A = as_matrix(M)
    R, Z = sla.schur(A, output="complex")
    off = float(np.linalg.norm(np.triu(R, 1)))
    if off > tol * max(opnorm(A), 1.0):
        raise ValidationError(f"matrix is not normal: Schur residual {off:.3e}")
    return Decomposition(np.diag(R).copy(), Z, "schur", triangular=np.diag(np.diag(R)))


def unitary_eig(M, tol: float = DEFAULT_TOL) -> Decomposition:
    """Eigenphases of a unitary, sorted by principal argument in (-pi, pi]."""
    U = check_unitary(M, max(tol, 1e-9))
    dec = normal_eig(U)
    lam = dec.eigenvalues / np.abs(dec.eigenvalues)
    order = np.argsort(np.angle(lam), kind="stable")
    return Decomposition(lam[order], dec.vectors[:, order], "unitary-eig")


def svd_decompose(M) -> Decomposition:
    A = as_matrix(M)
    W, s, Vh = np.linalg.svd(A)
    return Decomposition(s, W, "svd", right=adjoint(Vh))


def polar_decompose(M, rank_tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Polar factors ``M = U P`` with ``P = (M*M)^{1/2}``.

    ``U`` is unitary when ``M`` is invertible and otherwise the partial
    isometry with initial space ``range(P)``.
    """
    A = as_matrix(M, "M")
    W, s, Vh = np.linalg.svd(A)
    P = (adjoint(Vh) * s) @ Vh
    P = hermitian_part(P)
    keep = s > rank_tol * max(s[0] if s.size else 0.0, 1.0)
    if np.all(keep):
        U = W @ Vh
    else:
        U = W[:, keep] @ Vh[keep, :]
    return U, P


def hermitian_log_split(P) -> tuple[np.ndarray, np.ndarray]:
    """Split ``log P = C+ - C-`` into commuting positive parts."""
    A = check_hermitian(P, max(DEFAULT_TOL, 1e-10 * max(opnorm(as_matrix(P)), 1.0)))
    w, V = np.linalg.eigh(A)
    if w.size and w[0] <= 0:
        raise ValidationError(f"matrix is not positive definite: min eig {w[0]:.3e}")
    c = np.log(w)
    Cplus = (V * np.where(c >= 0, c, 0.0)) @ adjoint(V)
    Cminus = (V * np.where(c < 0, -c, 0.0)) @ adjoint(V)
    return hermitian_part(Cplus), hermitian_part(Cminus)


def defect(T, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Defect operator ``(I - T*T)^{1/2}``."""
    A = check_contraction(T, tol)
    G = np.eye(A.shape[0]) - adjoint(A) @ A
    w, V = np.linalg.eigh(hermitian_part(G))
    # eigenvalues at rounding level would turn into 1e-8 noise under the root
    w = np.where(w > DEFECT_FLOOR, w, 0.0)
    return hermitian_part((V * np.sqrt(w)) @ adjoint(V))


def _apply_scalar(f: Callable, lam: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(f(lam), dtype=complex)
        if out.shape == lam.shape:
            return out
    except Exception:  # noqa: BLE001 - fall back to elementwise evaluation
        pass
    return np.array([complex(f(x)) for x in lam], dtype=complex)


def matfun(f: Callable, M, tol: float = NORMALITY_TOL) -> np.ndarray:
    """``V diag(f(lambda)) V*`` for a normal matrix ``M``."""
    A = as_matrix(M)
    if opnorm(A - adjoint(A)) <= tol * max(opnorm(A), 1.0):
        w, V = np.linalg.eigh(hermitian_part(A))
        lam = w.astype(complex)
    else:
        dec = normal_eig(A, tol)
        lam, V = dec.eigenvalues, dec.vectors
    return (V * _apply_scalar(f, lam)) @ adjoint(V)


def unitary_log(U, cut_tol: float = 1e-9) -> np.ndarray:
    """Hermitian ``A`` with ``exp(iA) = U``.

    The branch cut sits at -1 unless an eigenvalue lies within ``cut_tol``
    of it, in which case the cut moves to the middle of the largest gap
    between neighbouring eigenphases.
    """
    dec = unitary_eig(U, 1e-8)
    lam, V = dec.eigenvalues, dec.vectors
    phi = np.angle(lam)
    if lam.size and np.min(np.abs(lam + 1.0)) < cut_tol:
        s = np.sort(phi)
        gaps = np.diff(np.concatenate([s, [s[0] + 2 * np.pi]]))
        k = int(np.argmax(gaps))
        cut = s[k] + 0.5 * gaps[k]
        phi = cut - np.mod(cut - phi, 2 * np.pi)
        LOGGER.debug("rotated log branch cut to %.6f", cut)
    return hermitian_part((V * phi) @ adjoint(V))


def expm_hermitian(H: np.ndarray, scale: complex = 1.0) -> np.ndarray:
    """``exp(scale * H)`` for Hermitian ``H`` through its eigenbasis."""
    w, V = np.linalg.eigh(hermitian_part(H))
    return (V * np.exp(scale * w)) @ adjoint(V)


def matrix_power(M: np.ndarray, n: int) -> np.ndarray:
    if n < 0:
        raise ValueError("negative power")
    return np.linalg.matrix_power(M, n)


# ---------------------------------------------------------------------------
# random ensembles

def random_ensemble(kind: str, n: int, seed: int) -> np.ndarray:
    """Reproducible random matrix of the requested operator class."""
    if n < 1:
        raise ValidationError("dimension must be at least 1")
    rng = np.random.default_rng(seed)
    G = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    if kind == "unitary":
        Q, R = np.linalg.qr(G)
        d = np.diag(R)
        return Q * (d / np.abs(d))
    if kind == "hermitian":
        return hermitian_part(G)
    if kind == "contraction":
        return 0.9 * G / opnorm(G)
    if kind == "dissipative":
        B = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
        P = B @ adjoint(B) / n
        return hermitian_part(G) + 1j * hermitian_part(P)
    raise ValidationError(f"unknown ensemble kind {kind!r}")
