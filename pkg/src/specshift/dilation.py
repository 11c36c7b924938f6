"""Unitary dilations, completely nonunitary splitting and semi-spectral measures."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .operators import (
    DEFAULT_TOL,
    adjoint,
    check_contraction,
    defect,
    hermitian_part,
    normal_eig,
    opnorm,
)
from .calculus import circle_grid

LOGGER = logging.getLogger(__name__)

# threshold on eigenvalues of I - S*S; the square root would lift rounding
# noise of 1e-16 to 1e-8 so the kernel test is done before taking roots
UNITARY_TOL = 1e-10
PHASE_MERGE_TOL = 1e-9


# ---------------------------------------------------------------------------
# Schaffer window

@dataclass
class SchafferWindow:
    T: np.ndarray
    halfwidth: int
    matrix: np.ndarray

    @property
    def d(self) -> int:
        return self.T.shape[0]

    def block(self, j: int, k: int) -> np.ndarray:
        d, W = self.d, self.halfwidth
        r, c = (j + W) * d, (k + W) * d
        return self.matrix[r:r + d, c:c + d]


def schaffer_block(T, W: int, tol: float = DEFAULT_TOL) -> SchafferWindow:
    """Central ``(2W+1)``-block window of the bilateral Schaffer matrix.

    The window is a truncation of a unitary on two-sided sequence space and
    is not itself unitary.
    """
    if W < 1:
        raise ValidationError("halfwidth must be >= 1")
    A = check_contraction(T, tol)
    d = A.shape[0]
    size = 2 * W + 1
    out = np.zeros((size * d, size * d), dtype=complex)

    def put(j, k, B):
        if -W <= j <= W and -W <= k <= W:
            r, c = (j + W) * d, (k + W) * d
            out[r:r + d, c:c + d] = B

    put(0, 0, A)
    put(0, 1, defect(adjoint(A), tol))
    put(-1, 0, defect(A, tol))
    put(-1, 1, -adjoint(A))
    eye = np.eye(d)
    for j in range(-W, W):
        if j not in (0, -1):
            put(j, j + 1, eye)
    return SchafferWindow(A, W, out)


def _kernel_basis(G: np.ndarray, thresh: float) -> np.ndarray:
    """Orthonormal basis of the eigenvectors of PSD ``G`` with eigenvalue <= thresh."""
    w, V = np.linalg.eigh(hermitian_part(G))
    return V[:, w <= thresh]


def kernel_isometry_check(T, tol: float = DEFAULT_TOL, window: int = 3) -> dict:
    """Check that ``-T`` maps ``Ker D_T`` isometrically onto ``Ker D_{T*}``."""
    A = check_contraction(T, tol)
    n = A.shape[0]
    eye = np.eye(n)
    KT = _kernel_basis(eye - adjoint(A) @ A, UNITARY_TOL)
    KTs = _kernel_basis(eye - A @ adjoint(A), UNITARY_TOL)
    iso = 0.0
    member = 0.0
    if KT.shape[1]:
        Y = -A @ KT
        iso = float(np.max(np.abs(np.linalg.norm(Y, axis=0) - 1.0)))
        # component of -T x outside Ker D_{T*}
        proj = KTs @ (adjoint(KTs) @ Y)
        member = float(np.linalg.norm(Y - proj))
    win = schaffer_block(A, window, tol)
    d = n
    cols = win.matrix[:, d * 1: d * (2 * window)]  # block columns -W+1 .. W-1
    gram = adjoint(cols) @ cols
    interior = float(np.linalg.norm(gram - np.eye(gram.shape[0])))
    dims_equal = KT.shape[1] == KTs.shape[1]
    ok = dims_equal and iso <= 1e-8 and member <= 1e-8 and interior <= 1e-10
    return {
        "dim_ker_DT": int(KT.shape[1]),
        "dim_ker_DTstar": int(KTs.shape[1]),
        "dims_equal": bool(dims_equal),
        "isometry_residual": iso,
        "membership_residual": member,
        "window_interior_residual": interior,
        "passed": bool(ok),
        "ker_DT": KT,
        "ker_DTstar": KTs,
    }


# ---------------------------------------------------------------------------
# power dilation

@dataclass
class PowerDilation:
    T: np.ndarray
    order: int
    W: np.ndarray

    @property
    def d(self) -> int:
        return self.T.shape[0]

    def block(self, M: np.ndarray, j: int = 0, k: int = 0) -> np.ndarray:
        d = self.d
        return M[j * d:(j + 1) * d, k * d:(k + 1) * d]

    def compression(self, n: int) -> np.ndarray:
        """Block (0, 0) of ``W^n``."""
        return self.block(np.linalg.matrix_power(self.W, n))

    def embed(self) -> np.ndarray:
        d = self.d
        E = np.zeros((self.W.shape[0], d), dtype=complex)
        E[:d, :] = np.eye(d)
        return E


def power_dilation(T, N: int, tol: float = DEFAULT_TOL) -> PowerDilation:
    """Unitary ``W`` on ``(N+1)`` copies with ``P W^n |H = T^n`` for ``n <= N``."""
    if N < 1:
        raise ValidationError("order must be >= 1")
    A = check_contraction(T, tol)
    d = A.shape[0]
    size = (N + 1) * d
    W = np.zeros((size, size), dtype=complex)

    def put(j, k, B):
        W[j * d:(j + 1) * d, k * d:(k + 1) * d] = B

    put(0, 0, A)
    put(1, 0, defect(A, tol))
    for j in range(1, N):
        put(j + 1, j, np.eye(d))
    put(0, N, defect(adjoint(A), tol))
    put(1, N, -adjoint(A))
    return PowerDilation(A, N, W)


# ---------------------------------------------------------------------------
# completely nonunitary split

@dataclass
class CnuSplit:
    T: np.ndarray
    unitary_basis: np.ndarray
    cnu_basis: np.ndarray
    unitary_part: np.ndarray
    cnu_part: np.ndarray
    off_diagonal: float

    @property
    def unitary_dim(self) -> int:
        return self.unitary_basis.shape[1]

    def cnu_spectral_radius(self) -> float:
        if self.cnu_part.size == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.cnu_part))))


def cnu_split(T, tol: float = DEFAULT_TOL, unitary_tol: float = UNITARY_TOL) -> CnuSplit:
    """Split off the largest reducing subspace on which ``T`` is unitary.

    The subspace is the common kernel of ``I - (T^k)*T^k`` and
    ``I - T^k (T^k)*`` for ``k = 1..d``.
    """
    A = check_contraction(T, tol)
    n = A.shape[0]
    eye = np.eye(n)
    blocks = []
    P = eye.astype(complex)
    for _ in range(n):
        P = P @ A
        blocks.append(eye - adjoint(P) @ P)
        blocks.append(eye - P @ adjoint(P))
    S = np.vstack(blocks)
    _, s, Vh = np.linalg.svd(S)
    V = adjoint(Vh)
    sv = np.zeros(n)
    sv[: s.size] = s
    mask = sv <= unitary_tol
    Vu, Vc = V[:, mask], V[:, ~mask]
    Tu = adjoint(Vu) @ A @ Vu
    Tc = adjoint(Vc) @ A @ Vc
    off = 0.0
    if Vu.shape[1] and Vc.shape[1]:
        off = max(opnorm(adjoint(Vu) @ A @ Vc), opnorm(adjoint(Vc) @ A @ Vu))
    return CnuSplit(A, Vu, Vc, Tu, Tc, off)


# ---------------------------------------------------------------------------
# Poisson density and semi-spectral measure

def resolvent_batch(T: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``(I - z T)^{-1}`` for every entry of ``z``; shape ``(len(z), n, n)``."""
    n = T.shape[0]
    z = np.asarray(z, dtype=complex).ravel()
    B = np.eye(n)[None, :, :] - z[:, None, None] * T[None, :, :]
    return np.linalg.inv(B)


def poisson_density(Tcnu, theta) -> np.ndarray:
    """Density ``K(theta)`` of the semi-spectral measure of a c.n.u. contraction.

    ``K = (I - e^{-i theta} T)^{-1} + (I - e^{i theta} T*)^{-1} - I`` against
    normalized arc length; accepts a scalar angle or an array of angles.
    """
    A = np.atleast_2d(np.asarray(Tcnu, dtype=complex))
    if A.size and np.max(np.abs(np.linalg.eigvals(A))) >= 1.0:
        raise ValidationError("spectral radius must be < 1 for the Poisson density")
    th = np.asarray(theta, dtype=float)
    R = resolvent_batch(A, np.exp(-1j * th.ravel()))
    K = R + np.conj(np.swapaxes(R, 1, 2)) - np.eye(A.shape[0])[None]
    K = 0.5 * (K + np.conj(np.swapaxes(K, 1, 2)))
    return K[0] if th.ndim == 0 else K.reshape(th.shape + K.shape[1:])


def trace_density(Tcnu: np.ndarray, W: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``trace(W K(theta))`` without forming the Hermitian average."""
    R = resolvent_batch(Tcnu, np.exp(-1j * np.asarray(theta, dtype=float)))
    a = np.einsum("ij,mji->m", W, R)
    b = np.conj(np.einsum("ij,mji->m", adjoint(W), R))
    return a + b - np.trace(W)


def unitary_atoms(split: CnuSplit, merge_tol: float = PHASE_MERGE_TOL) -> list[tuple[float, np.ndarray]]:
    """Eigenphases of the unitary part with full-space projection weights."""
    if split.unitary_dim == 0:
        return []
    dec = normal_eig(split.unitary_part, 1e-8)
    lam = dec.eigenvalues / np.abs(dec.eigenvalues)
    phases = np.angle(lam)
    order = np.argsort(phases, kind="stable")
    groups: list[list[int]] = []
    for k in order:
        if groups and abs(np.exp(1j * phases[k]) - np.exp(1j * phases[groups[-1][-1]])) < merge_tol:
            groups[-1].append(int(k))
        else:
            groups.append([int(k)])
    if len(groups) > 1 and abs(np.exp(1j * phases[groups[0][0]]) - np.exp(1j * phases[groups[-1][-1]])) < merge_tol:
        groups[0] = groups.pop() + groups[0]
    atoms = []
    for g in groups:
        X = split.unitary_basis @ dec.vectors[:, g]
        theta = float(np.mod(np.angle(np.mean(lam[g])), 2 * np.pi))
        atoms.append((theta, X @ adjoint(X)))
    return atoms


@dataclass
class CircleMeasure:
    """Atoms plus density samples against normalized arc length ``dm``.

    Atom weights and density samples are matrices ``(n, n)`` or, for the
    trace-only variant, scalars.
    """

    atoms: list = field(default_factory=list)
    density: np.ndarray | None = None
    shifted: bool = False

    @property
    def M(self) -> int:
        return 0 if self.density is None else self.density.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return circle_grid(self.M, self.shifted)

    def is_scalar(self) -> bool:
        if self.density is not None:
            return self.density.ndim == 1
        return all(np.ndim(w) == 0 for _, w in self.atoms)

    def integrate(self, h) -> np.ndarray | complex:
        """``int h dmu`` for a callable ``h(zeta)``; density by grid quadrature."""
        total = 0
        for th, w in self.atoms:
            total = total + complex(h(np.exp(1j * th))) * w
        if self.density is not None:
            vals = np.asarray(h(np.exp(1j * self.theta)), dtype=complex) * np.ones(self.M)
            if self.density.ndim == 1:
                total = total + np.mean(vals * self.density)
            else:
                total = total + np.einsum("m,mij->ij", vals, self.density) / self.M
        return total

    def moment(self, k: int):
        return self.integrate(lambda z: z ** k)

    def total_mass(self):
        return self.integrate(lambda z: np.ones_like(z))

    def trace_with(self, K: np.ndarray) -> "CircleMeasure":
        """Scalar measure ``trace(K E(.))``."""
        atoms = [(th, complex(np.trace(K @ w))) for th, w in self.atoms]
        dens = None
        if self.density is not None:
            dens = np.einsum("ij,mji->m", K, self.density)
        return CircleMeasure(atoms, dens, self.shifted)

    def to_json(self) -> dict:
        from .serialization import matrix_to_json

        def enc(w):
            if np.ndim(w) == 0:
                return [float(np.real(w)), float(np.imag(w))]
            return matrix_to_json(w)

        out = {"atoms": [{"theta": float(th), "weight": enc(w)} for th, w in self.atoms]}
        if self.density is not None:
            out["density"] = {"grid": self.M, "shifted": self.shifted,
                              "samples": [enc(s) for s in self.density]}
        return out


def semi_spectral_measure(T, M: int = 2048, shifted: bool = False,
                          tol: float = DEFAULT_TOL) -> CircleMeasure:
    """Semi-spectral measure of a contraction on an ``M``-point grid."""
    A = check_contraction(T, tol)
    n = A.shape[0]
    split = cnu_split(A, tol)
    atoms = unitary_atoms(split)
    theta = circle_grid(M, shifted)
    dens = np.zeros((M, n, n), dtype=complex)
    if split.cnu_basis.shape[1]:
        Vc = split.cnu_basis
        Kc = poisson_density(split.cnu_part, theta)
        dens = np.einsum("ia,mab,jb->mij", Vc, Kc, np.conj(Vc))
    return CircleMeasure(atoms, dens, shifted)
