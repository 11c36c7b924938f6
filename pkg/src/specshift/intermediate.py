"""Multiplicative factors, intermediate contractions and regularization.

Pairs that differ by a unitary or positive left factor get SSFs with a
fixed sign structure:

* ``{T, UT}``: path ``exp(itA) T`` with ``exp(iA) = U``; weight ``A``,
  factor ``i zeta``, real SSF.
* ``{T, XT}``: path ``exp(-tD) T`` with ``X = exp(-D)``; weight ``D >= 0``,
  factor ``-zeta``, SSF with nonnegative imaginary part.

A general pair of invertible contractions is bridged by an intermediate
contraction ``T`` so that ``{T0, T}`` has ``Im xi >= 0`` and ``{T, T1}`` has
``Im xi <= 0``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .calculus import LaurentPoly
from .dilation import power_dilation
from .errors import ValidationError
from .operators import (
    adjoint,
    as_matrix,
    check_contraction,
    check_unitary,
    defect,
    expm_hermitian,
    hermitian_log_split,
    hermitian_part,
    opnorm,
    polar_decompose,
    unitary_log,
)
from .ssf import (
    QuadratureSpec,
    SSFSample,
    ssf_along_path,
    ssf_unitary_pair,
    trace_difference,
    zero_ssf,
)

LOGGER = logging.getLogger(__name__)

INVERTIBILITY_FLOOR = 1e-8
KERNEL_TOL = 1e-10
SIGN_TOL = 1e-8


def _zero_like(spec: QuadratureSpec) -> SSFSample:
    return zero_ssf(spec)


def ssf_unitary_factor(T, U, spec: QuadratureSpec | None = None) -> SSFSample:
    """Real SSF of the pair ``{T, UT}``."""
    spec = spec or QuadratureSpec()
    A0 = check_contraction(T, spec.tolerance, "T")
    V = check_unitary(U, max(spec.tolerance, 1e-9), "U")
    if A0.shape != V.shape:
        raise ValidationError("dimension mismatch")
    A = unitary_log(V)
    if opnorm(A) == 0.0:
        return _zero_like(spec)

    def path(t):
        E = expm_hermitian(A, 1j * t)
        return check_contraction(E @ A0, 1e-9), A

    return ssf_along_path(path, spec, LaurentPoly.monomial(1, 1j), drop_atoms=False)


def ssf_positive_factor(T, X, spec: QuadratureSpec | None = None) -> SSFSample:
    """SSF of ``{T, XT}`` for an invertible ``0 < X <= I``; ``Im xi >= 0``."""
    spec = spec or QuadratureSpec()
    A0 = check_contraction(T, spec.tolerance, "T")
    Xh = as_matrix(X, "X")
    if Xh.shape != A0.shape:
        raise ValidationError("dimension mismatch")
    if opnorm(Xh - adjoint(Xh)) > 1e-10 * max(1.0, opnorm(Xh)):
        raise ValidationError("X is not Hermitian")
    w, Q = np.linalg.eigh(hermitian_part(Xh))
    if w[0] < INVERTIBILITY_FLOOR:
        raise ValidationError(f"X is not invertible and positive: min eig {w[0]:.3e}")
    if w[-1] > 1.0 + spec.tolerance:
        raise ValidationError(f"X is not a contraction: max eig {w[-1]:.6g}")
    d = -np.log(np.clip(w, None, 1.0))
    D = hermitian_part((Q * d) @ adjoint(Q))
    if not np.any(d > 0):
        return _zero_like(spec)

    def path(t):
        E = (Q * np.exp(-t * d)) @ adjoint(Q)
        return check_contraction(E @ A0, 1e-9), D

    return ssf_along_path(path, spec, LaurentPoly.monomial(1, -1.0), drop_atoms=False)


# ---------------------------------------------------------------------------
# intermediate contraction

@dataclass
class IntermediateResult:
    T: np.ndarray
    xi0: SSFSample
    xi1: SSFSample
    xi: SSFSample
    certificates: dict = field(default_factory=dict)

    def sign_ok(self, tol: float = SIGN_TOL) -> bool:
        c = self.certificates
        return c["min_im_xi0"] >= -tol and c["max_im_xi1"] <= tol

    def to_json(self) -> dict:
        from .serialization import matrix_to_json
        return {"T": matrix_to_json(self.T), "certificates": self.certificates}


def _aligned(a: SSFSample, b: SSFSample) -> tuple[SSFSample, SSFSample]:
    if a.M == b.M and a.shifted == b.shifted:
        return a, b
    M = max(a.M, b.M)
    shifted = a.shifted or b.shifted

    def regrid(s):
        return SSFSample(s.domain, M, shifted, s.gauge, list(s.parts), s.normalization,
                         s.max_degree, dict(s.meta))

    return regrid(a), regrid(b)


def _certify(T0, T1, T, xi0, xi1, extra: dict) -> dict:
    cert = {
        "norm_T_minus_T0": opnorm(T - T0),
        "norm_T_minus_T1": opnorm(T - T1),
        "min_im_xi0": float(np.min(xi0.values.imag)) if xi0.M else 0.0,
        "max_im_xi1": float(np.max(xi1.values.imag)) if xi1.M else 0.0,
    }
    cert.update(extra)
    cert["sign_ok"] = bool(cert["min_im_xi0"] >= -SIGN_TOL and cert["max_im_xi1"] <= SIGN_TOL)
    return cert


def _require_invertible(T, name):
    s = np.linalg.svd(T, compute_uv=False)
    if s[-1] < INVERTIBILITY_FLOOR:
        raise ValidationError(f"{name} is not invertible: smallest singular value {s[-1]:.3e}")


def intermediate_contraction(T0, T1, spec: QuadratureSpec | None = None) -> IntermediateResult:
    """Intermediate contraction for invertible ``T0, T1`` and the split ``xi = xi0 + xi1``."""
    spec = spec or QuadratureSpec()
    A0 = check_contraction(T0, spec.tolerance, "T0")
    A1 = check_contraction(T1, spec.tolerance, "T1")
    if A0.shape != A1.shape:
        raise ValidationError("dimension mismatch")
    _require_invertible(A0, "T0")
    _require_invertible(A1, "T1")
    R = A1 @ np.linalg.inv(A0)
    U, P = polar_decompose(R)
    Cp, Cm = hermitian_log_split(P)
    Xm = expm_hermitian(Cm, -1.0)
    Xp = U @ expm_hermitian(Cp, -1.0) @ adjoint(U)
    Xp = hermitian_part(Xp)
    T2 = Xm @ A0
    T = U @ T2
    cert_gap = opnorm(T - Xp @ A1)

    eta0 = ssf_positive_factor(A0, Xm, spec)
    digamma = ssf_unitary_factor(T2, U, spec)
    xi0 = eta0 + digamma
    xi1 = -ssf_positive_factor(A1, Xp, spec)
    xi0, xi1 = _aligned(xi0, xi1)
    xi = xi0 + xi1
    extra = {
        "factorization_gap": cert_gap,
        "factorization_relative": cert_gap / max(opnorm(A1), 1e-300),
        "commutator_CpCm": opnorm(Cp @ Cm),
        "norm_C_plus": opnorm(Cp),
        "norm_C_minus": opnorm(Cm),
    }
    return IntermediateResult(T, xi0, xi1, xi, _certify(A0, A1, T, xi0, xi1, extra))


# ---------------------------------------------------------------------------
# regularization

def fredholm_regularize(T, tol: float = KERNEL_TOL) -> tuple[np.ndarray, np.ndarray]:
    """``Q = T + V`` with ``V`` mapping ``Ker T`` isometrically onto ``Ker T*``."""
    A = check_contraction(T, tol, "T")
    n, m = A.shape
    if n != m:
        raise ValidationError("kernel dimensions differ for a non-square matrix")
    W, s, Vh = np.linalg.svd(A)
    small = s <= tol
    k_right = adjoint(Vh)[:, small]
    k_left = W[:, small]
    if k_right.shape[1] != k_left.shape[1]:
        raise ValidationError("kernel dimension mismatch")
    V = k_left @ adjoint(k_right)
    Q = A + V
    return Q, V


def regularization_report(T, Q, V) -> dict:
    A = as_matrix(T)
    n = A.shape[0]
    I = np.eye(n)
    DT, DQ = I - adjoint(A) @ A, I - adjoint(Q) @ Q
    DTs, DQs = I - A @ adjoint(A), I - Q @ adjoint(Q)
    s = np.linalg.svd(Q, compute_uv=False)
    return {
        "rank_V": int(np.linalg.matrix_rank(V, tol=1e-8)) if V.size else 0,
        "norm_Q": opnorm(Q),
        "min_singular_Q": float(s[-1]),
        "defect_identity": opnorm(DQ - (DT - adjoint(V) @ V)),
        "defect_identity_adjoint": opnorm(DQs - (DTs - V @ adjoint(V))),
    }


def ssf_schaffer_transfer(T, Q, N: int = 6, spec: QuadratureSpec | None = None,
                          compute_ssf: bool = True) -> dict:
    """Transfer ``{T, Q}`` to power dilations and compare traces of powers.

    Dilations of order ``N + 1`` reproduce ``trace(T^n)`` for ``n <= N``; the
    unitary SSF of the dilation pair then serves ``{T, Q}`` for analytic
    polynomials up to degree ``N``.
    """
    spec = spec or QuadratureSpec()
    A = check_contraction(T, spec.tolerance, "T")
    B = check_contraction(Q, spec.tolerance, "Q")
    if A.shape != B.shape:
        raise ValidationError("dimension mismatch")
    if N < 1:
        raise ValidationError("order must be >= 1")
    WA = power_dilation(A, N + 1).W
    WB = power_dilation(B, N + 1).W
    gaps, traces = [], []
    PA, PB, pa, pb = (np.eye(WA.shape[0]), np.eye(WB.shape[0]), np.eye(A.shape[0]), np.eye(B.shape[0]))
    for _ in range(N):
        PA, PB, pa, pb = PA @ WA, PB @ WB, pa @ A, pb @ B
        direct = complex(np.trace(pb - pa))
        dil = complex(np.trace(PB - PA))
        traces.append(direct)
        gaps.append(abs(direct - dil))
    report = {
        "order": N,
        "trace_differences": traces,
        "trace_gaps": gaps,
        "max_trace_gap": max(gaps),
        "defect_gap": opnorm(defect(A) - defect(B)),
        "defect_gap_adjoint": opnorm(defect(adjoint(A)) - defect(adjoint(B))),
        "dilation_gap": opnorm(WA - WB),
    }
    if compute_ssf:
        if opnorm(WA - WB) == 0.0:
            xi = zero_ssf(spec, gauge="counting")
        else:
            xi = ssf_unitary_pair(WA, WB, spec)
        xi.max_degree = N
        xi.meta["transfer_order"] = N
        res = []
        for k in range(1, min(N, 3) + 1):
            f = LaurentPoly.monomial(k)
            tr = trace_difference(A, B, f)
            res.append(abs(tr - xi.pair(f)))
        report["ssf"] = xi
        report["residuals"] = res
        report["max_residual"] = max(res)
    return report


def _transfer_ssf(T, Q, V, spec, order) -> SSFSample:
    if opnorm(V) == 0.0:
        return zero_ssf(spec)
    return ssf_schaffer_transfer(T, Q, order, spec)["ssf"]


def intermediate_general(T0, T1, spec: QuadratureSpec | None = None, order: int = 8) -> IntermediateResult:
    """Intermediate construction after regularizing singular endpoints.

    The regularizer SSFs are real and valid for analytic polynomials of
    degree at most ``order``.
    """
    spec = spec or QuadratureSpec()
    A0 = check_contraction(T0, spec.tolerance, "T0")
    A1 = check_contraction(T1, spec.tolerance, "T1")
    if A0.shape != A1.shape:
        raise ValidationError("dimension mismatch")
    if opnorm(A1 - A0) == 0.0:
        z = zero_ssf(spec)
        return IntermediateResult(A0.copy(), z, z, z, _certify(A0, A1, A0, z, z, {"regularized": False}))
    Q0, V0 = fredholm_regularize(A0)
    Q1, V1 = fredholm_regularize(A1)
    core = intermediate_contraction(Q0, Q1, spec)
    if opnorm(V0) == 0.0 and opnorm(V1) == 0.0:
        core.certificates["regularized"] = False
        return core
    f0 = _transfer_ssf(A0, Q0, V0, spec, order)
    f1 = _transfer_ssf(A1, Q1, V1, spec, order)
    xi0 = f0 + core.xi0
    xi1 = core.xi1 - f1
    xi0, xi1 = _aligned(xi0, xi1)
    xi = xi0 + xi1
    extra = dict(core.certificates)
    extra.update({
        "regularized": True,
        "regularizer_rank_T0": int(round(np.sum(np.abs(np.linalg.svd(V0, compute_uv=False)) > 0.5))),
        "regularizer_rank_T1": int(round(np.sum(np.abs(np.linalg.svd(V1, compute_uv=False)) > 0.5))),
        "valid_degree": order,
    })
    for key in ("norm_T_minus_T0", "norm_T_minus_T1", "min_im_xi0", "max_im_xi1", "sign_ok"):
        extra.pop(key, None)
    return IntermediateResult(core.T, xi0, xi1, xi, _certify(A0, A1, core.T, xi0, xi1, extra))


def ssf_unitary_to_contraction(U, T, spec: QuadratureSpec | None = None, order: int = 8) -> SSFSample:
    """SSF of ``{U, T}`` with ``Im xi >= 0`` through the polar factor of ``T``."""
    spec = spec or QuadratureSpec()
    V0 = check_unitary(U, max(spec.tolerance, 1e-9), "U")
    A = check_contraction(T, spec.tolerance, "T")
    if A.shape != V0.shape:
        raise ValidationError("dimension mismatch")
    if opnorm(A - V0) == 0.0:
        return zero_ssf(spec)
    Q, Vreg = fredholm_regularize(A)
    reg = None
    if opnorm(Vreg) > 0.0:
        reg = _transfer_ssf(A, Q, Vreg, spec, order)
    V, P = polar_decompose(Q)
    X = hermitian_part(V @ P @ adjoint(V))
    xi_u = ssf_unitary_pair(V0, V, spec) if opnorm(V - V0) > 0 else zero_ssf(spec, gauge="counting")
    xi_p = ssf_positive_factor(V, X, spec)
    xi_u, xi_p = _aligned(xi_u, xi_p)
    xi = xi_u + xi_p
    if reg is not None:
        xi, reg = _aligned(xi, reg)
        xi = xi - reg
        xi.max_degree = order
    xi.meta["min_im"] = float(np.min(xi.values.imag))
    return xi
