import numpy as np
import pytest

from specshift.calculus import LaurentPoly, LineFn
from specshift.dilation import CircleMeasure
from specshift.errors import BranchError, ValidationError
from specshift.operators import opnorm, random_ensemble
from specshift.ssf import (
    QuadratureSpec,
    SSFSample,
    a_integral_trace,
    brothers_riesz_check,
    contraction_path_measure,
    langer_contour_trace,
    perturbation_determinant,
    ssf_contraction_pair,
    ssf_dissipative_additive,
    ssf_dissipative_resolvent_pair,
    ssf_selfadjoint_pair,
    ssf_unitary_pair,
    ssf_via_determinant,
    verify_trace_formula,
)

Z = LaurentPoly.monomial


def s(x):
    return np.array([[x]], dtype=complex)


# Oracle values computed independently by adaptive quadrature of the scalar
# Poisson kernel, g(theta) = int_0^{1/2} (1 - r^2)/(1 - 2r cos theta + r^2) dr.
CONTRACTION_HALF_G = {
    0.0: 0.8862943611198907,
    np.pi / 2: 0.4272952180016122,
    np.pi: 0.31093021621632877,
}


class TestQuadratureSpec:
    def test_validation(self):
        with pytest.raises(ValidationError):
            QuadratureSpec(t_nodes=1)
        with pytest.raises(ValidationError):
            QuadratureSpec(theta_grid=1000)
        with pytest.raises(ValidationError):
            QuadratureSpec(tolerance=0)

    def test_nodes_interior(self):
        t, w = QuadratureSpec(t_nodes=8).nodes()
        assert np.all((t > 0) & (t < 1)) and abs(w.sum() - 1) < 1e-14


class TestContractionPair:
    def test_scalar_trace(self):
        xi = ssf_contraction_pair(s(0), s(0.5))
        assert abs(xi.pair(Z(2)) - 0.25) < 1e-8
        assert xi.gauge == "raw"

    def test_scalar_values_match_oracle(self):
        xi = ssf_contraction_pair(s(0), s(0.5), QuadratureSpec(theta_grid=8))
        for th, g in CONTRACTION_HALF_G.items():
            k = int(round(th / (2 * np.pi / 8)))
            expected = g / (2j * np.pi * np.exp(1j * th))
            assert abs(xi.values[k] - expected) < 1e-12

    def test_identical(self):
        T = random_ensemble("contraction", 3, 1)
        xi = ssf_contraction_pair(T, T)
        assert np.allclose(xi.values, 0)

    @pytest.mark.parametrize("seed", [0, 1])
    def test_random_cube(self, seed):
        T0 = random_ensemble("contraction", 4, 10 + seed)
        T1 = random_ensemble("contraction", 4, 20 + seed)
        xi = ssf_contraction_pair(T0, T1)
        assert verify_trace_formula((T0, T1), Z(3), xi)["residual"] <= 1e-6

    def test_unitary_endpoints_match_unitary_pair(self):
        U0 = random_ensemble("unitary", 3, 3)
        U1 = random_ensemble("unitary", 3, 4)
        xc = ssf_contraction_pair(U0, U1)
        xu = ssf_unitary_pair(U0, U1)
        assert xc.resolve_method() == "exact"
        for k in (1, 2, 3):
            assert abs(xc.pair(Z(k)) - xu.pair(Z(k))) < 1e-6

    def test_exact_and_grid_pairing_agree_when_resolved(self):
        T0 = random_ensemble("contraction", 3, 5)
        T1 = random_ensemble("contraction", 3, 6)
        xi = ssf_contraction_pair(T0, T1)
        for k in (1, 2, 4):
            assert abs(xi.pair(Z(k), "grid") - xi.pair(Z(k), "exact")) < 1e-10


class TestUnitaryPair:
    def test_quarter_arc(self):
        xi = ssf_unitary_pair(s(1), s(1j), QuadratureSpec(theta_grid=64))
        th = xi.theta
        inside = (th > 0) & (th < np.pi / 2)
        assert np.all(xi.values[inside] == 1) and np.all(xi.values[th > np.pi / 2] == 0)
        r = verify_trace_formula((s(1), s(1j)), Z(1), xi)
        assert r["residual"] < 1e-12

    def test_identical(self):
        U = random_ensemble("unitary", 3, 2)
        assert np.allclose(ssf_unitary_pair(U, U).values, 0)

    def test_random_residuals_and_integer_values(self):
        U0 = random_ensemble("unitary", 4, 7)
        U1 = random_ensemble("unitary", 4, 8)
        xi = ssf_unitary_pair(U0, U1)
        for k in (2, 3):
            assert verify_trace_formula((U0, U1), Z(k), xi)["relative"] <= 1e-8
        v = xi.values
        assert np.max(np.abs(v.imag)) == 0 and np.max(np.abs(v.real - np.round(v.real))) <= 1e-8

    def test_long_rotation_winds(self):
        # exp(i 3) is reached by turning 3 radians, crossing theta = pi
        xi = ssf_unitary_pair(s(1), s(np.exp(3j)))
        assert abs(xi.pair(Z(1)) - (np.exp(3j) - 1)) < 1e-12


class TestSelfAdjoint:
    def test_unit_step(self):
        xi = ssf_selfadjoint_pair(s(0), s(1))
        f = LaurentPoly([0, 0, 0, 1])
        assert abs(xi.pair(f) - 1) < 1e-14
        assert xi.breakpoints().tolist() == [0.0, 1.0]

    def test_two_steps(self):
        xi = ssf_selfadjoint_pair(np.diag([0.0, 2.0]), np.diag([1.0, 3.0]))
        assert abs(xi.pair(Z(2)) - 6) < 1e-14
        t = xi.grid
        inside = ((t >= 0) & (t < 1)) | ((t >= 2) & (t < 3))
        assert np.all(xi.values[inside] == 1) and np.all(xi.values[~inside] == 0)

    def test_identical(self):
        A = random_ensemble("hermitian", 4, 1)
        assert np.allclose(ssf_selfadjoint_pair(A, A).values, 0)

    def test_cayley_cross_check(self):
        A0, A1 = random_ensemble("hermitian", 4, 2), random_ensemble("hermitian", 4, 3)
        assert ssf_selfadjoint_pair(A0, A1).meta["cayley_crosscheck"] < 1e-8


class TestDeterminant:
    def test_identity_pair(self):
        A = random_ensemble("hermitian", 3, 1)
        assert abs(perturbation_determinant(A, A, 0.3 + 1j) - 1) < 1e-14

    def test_scalar(self):
        assert abs(perturbation_determinant(s(0), s(1), 1j) - (1 + 1j)) < 1e-14

    def test_multiplicativity(self):
        A0, A1, A2 = (random_ensemble("hermitian", 3, k) for k in (4, 5, 6))
        z = 2j
        lhs = perturbation_determinant(A0, A2, z)
        rhs = perturbation_determinant(A1, A2, z) * perturbation_determinant(A0, A1, z)
        assert abs(lhs - rhs) < 1e-10 * max(1, abs(lhs))

    def test_rejects_eigenvalue(self):
        with pytest.raises(ValidationError):
            perturbation_determinant(s(0.5), s(1), 0.5)

    def test_inversion_scalar(self):
        r = ssf_via_determinant(s(0), s(1), 0.5)
        # frozen oracle: arg((t - 1 + iy)/(t + iy))/pi at y = 1e-6
        assert abs(r.value - 0.9999987267604553) < 1e-12
        assert r.converged

    def test_outside(self):
        assert abs(ssf_via_determinant(s(0), s(1), 2.0).value) < 1e-5

    def test_identical(self):
        A = random_ensemble("hermitian", 3, 1)
        assert ssf_via_determinant(A, A, 0.123).value == 0

    def test_coarse_ladder_branch_error(self):
        with pytest.raises(BranchError):
            ssf_via_determinant(s(0), s(1), 0.5, [1e3, 1e-6])

    def test_rejects_near_eigenvalue(self):
        with pytest.raises(ValidationError):
            ssf_via_determinant(s(0), s(1), 1.0 + 1e-9)


class TestLanger:
    def test_scalar(self):
        r = langer_contour_trace(Z(2), s(0), s(0.5), radius=2.0, nodes=4096)
        assert abs(r.value - 0.25) < 1e-6 and r.winding == 0

    def test_identical(self):
        T = random_ensemble("contraction", 3, 1)
        assert abs(langer_contour_trace(Z(3), T, T).value) < 1e-14

    def test_diagonal(self, rng):
        a = rng.uniform(-0.8, 0.8, 3) + 1j * rng.uniform(-0.5, 0.5, 3)
        b = rng.uniform(-0.8, 0.8, 3) + 1j * rng.uniform(-0.5, 0.5, 3)
        r = langer_contour_trace(Z(3), np.diag(a), np.diag(b), radius=2.0)
        assert abs(r.value - np.sum(b ** 3 - a ** 3)) < 1e-8

    def test_contour_must_enclose(self):
        with pytest.raises(ValidationError):
            langer_contour_trace(Z(2), s(0), s(3.0), radius=2.0)


class TestDissipative:
    def test_resolvent_scalar(self):
        xi = ssf_dissipative_resolvent_pair(s(1j), s(2j))
        r = verify_trace_formula((s(1j), s(2j)), LineFn(Z(1)), xi)
        assert abs(r["trace"] - 1 / 3) < 1e-15 and r["residual"] < 1e-8
        assert xi.domain == "line"

    def test_resolvent_identical(self):
        L = random_ensemble("dissipative", 2, 1)
        assert np.allclose(ssf_dissipative_resolvent_pair(L, L).values, 0)

    def test_resolvent_selfadjoint_matches_counting(self):
        A0, A1 = random_ensemble("hermitian", 3, 5), random_ensemble("hermitian", 3, 6)
        xd = ssf_dissipative_resolvent_pair(A0, A1)
        xs = ssf_selfadjoint_pair(A0, A1, cross_check=False)
        for k in (1, 2, 3):
            f = LineFn(Z(k))
            assert abs(xd.pair(f) - xs.pair(f)) < 1e-6

    def test_additive_scalar_closed_form(self):
        # xi(t) = (i/pi) int_0^1 (1+s)/(t^2+(1+s)^2) ds = (i/2pi) log((t^2+4)/(t^2+1))
        xi = ssf_dissipative_additive(s(1j), s(1j))
        t = xi.grid
        expected = 1j / (2 * np.pi) * np.log((t ** 2 + 4) / (t ** 2 + 1))
        assert np.max(np.abs(xi.values - expected)) < 1e-12
        r = verify_trace_formula((s(1j), s(2j)), LineFn(Z(1)), xi)
        assert r["residual"] < 1e-6
        mid = np.argmin(np.abs(t))
        assert abs(expected[mid] - 0.2206356001526516j) < 1e-5

    def test_additive_zero(self):
        L = random_ensemble("dissipative", 2, 1)
        assert np.allclose(ssf_dissipative_additive(L, np.zeros((2, 2))).values, 0)

    def test_additive_accumulative_sign(self):
        L0 = random_ensemble("dissipative", 2, 4)
        P = random_ensemble("contraction", 2, 5)
        K = 0.3j * (P @ P.conj().T)
        xi = ssf_dissipative_additive(L0, K)
        assert xi.values.imag.min() >= -1e-8
        assert xi.summability_proxy() < np.inf
        for k in (1, 2):
            assert verify_trace_formula((L0, L0 + K), LineFn(Z(k)), xi)["residual"] < 1e-6

    def test_rejects_non_dissipative(self):
        with pytest.raises(ValidationError):
            ssf_dissipative_additive(s(1j), s(-3j))


class TestVerify:
    def test_zero_pair(self):
        T = random_ensemble("contraction", 2, 1)
        xi = ssf_contraction_pair(T, T)
        assert verify_trace_formula((T, T), Z(2), xi)["residual"] == 0

    def test_normalization_mismatch(self):
        xi = ssf_contraction_pair(s(0), s(0.5))
        xi.normalization = "dm"
        with pytest.raises(ValidationError):
            verify_trace_formula((s(0), s(0.5)), Z(2), xi)

    def test_domain_function_mismatch(self):
        xi = ssf_selfadjoint_pair(s(0), s(1), cross_check=False)
        with pytest.raises(ValidationError):
            xi.pair(np.sin)

    def test_degree_bound(self):
        xi = ssf_contraction_pair(s(0), s(0.5))
        xi.max_degree = 2
        with pytest.raises(ValidationError):
            xi.pair(Z(3))


class TestBrothersRiesz:
    def test_uniform_against_matching(self):
        M = 256
        nu = CircleMeasure([], np.ones(M, dtype=complex))
        xi = SSFSample("circle", M, False, "raw").add_grid(1 / (2j * np.pi * np.exp(2j * np.pi * np.arange(M) / M)))
        assert brothers_riesz_check(nu, xi)["max"] < 1e-14

    def test_point_mass_fails(self):
        nu = CircleMeasure([(0.0, 1.0 + 0j)], None)
        xi = SSFSample("circle", 64, False, "raw")
        rep = brothers_riesz_check(nu, xi)
        assert abs(rep["coefficients"][0] - 1) < 1e-15

    def test_pipelines_consistent(self):
        nu = contraction_path_measure(s(0), s(0.5))
        xi = ssf_contraction_pair(s(0), s(0.5))
        assert brothers_riesz_check(nu, xi)["max"] <= 1e-6


class TestAIntegral:
    def test_scalar(self):
        spec = QuadratureSpec(theta_grid=8192)
        a, b, rep = a_integral_trace(s(0), s(0.5), Z(2), spec)
        assert abs(a - 0.25) < 1e-4 and abs(b - 0.25) < 1e-4
        assert abs(rep["alexandrov_term"]) <= 1e-3
        assert all(rep["converged"].values())

    def test_constant_function(self):
        a, b, _ = a_integral_trace(s(0), s(0.5), LaurentPoly.constant(3.0))
        assert a == 0 and b == 0

    def test_real_ssf_gives_ordinary_integral(self):
        U0, U1 = s(1), s(np.exp(0.5j))
        xi = ssf_unitary_pair(U0, U1, QuadratureSpec(shift_grid=True))
        _, b, rep = a_integral_trace(U0, U1, Z(1), QuadratureSpec(shift_grid=True), xi=xi)
        G = xi.grid_function()
        plain = np.mean(G.zeta * 2j * np.pi * G.zeta ** 0 * G.values)
        assert abs(b - plain) < 1e-12 and rep["xi_r_max_imag"] == 0


class TestSerialization:
    def test_csv_roundtrip(self):
        xi = ssf_contraction_pair(s(0), s(0.5), QuadratureSpec(theta_grid=64))
        back = SSFSample.from_csv(xi.to_csv())
        assert np.array_equal(back.values, xi.values)
        assert abs(back.pair(Z(2), "grid") - xi.pair(Z(2), "grid")) < 1e-15

    def test_line_csv_roundtrip(self):
        xi = ssf_selfadjoint_pair(s(0), s(1), QuadratureSpec(theta_grid=64), cross_check=False)
        back = SSFSample.from_csv(xi.to_csv(), domain="line")
        assert np.array_equal(back.values, xi.values)

    def test_json_roundtrip_exact(self):
        T0, T1 = random_ensemble("contraction", 2, 1), random_ensemble("contraction", 2, 2)
        xi = ssf_contraction_pair(T0, T1, QuadratureSpec(t_nodes=8, theta_grid=64))
        back = SSFSample.from_json(xi.to_json())
        assert abs(back.pair(Z(3), "exact") - xi.pair(Z(3), "exact")) < 1e-15
        assert np.allclose(back.values, xi.values, atol=1e-15)

    def test_bad_csv(self):
        with pytest.raises(ValidationError):
            SSFSample.from_csv("theta_or_t,re_xi,im_xi\n0,a,b\n")
        with pytest.raises(ValidationError):
            SSFSample.from_csv("x,y\n")

    def test_gauge_shift_leaves_pairing(self, rng):
        xi = ssf_contraction_pair(s(0), s(0.5))
        h = LaurentPoly(rng.normal(size=4) + 1j * rng.normal(size=4))
        shifted = xi.add_grid(h(np.exp(1j * xi.theta)))
        assert abs(shifted.pair(Z(2)) - xi.pair(Z(2))) < 1e-10
