import numpy as np
import pytest

from specshift.calculus import (
    GridFunction,
    LaurentPoly,
    LineFn,
    a_integral,
    cayley,
    divided_difference,
    eval_on_contraction,
    eval_on_dissipative,
    grid_frequencies,
    haagerup_terms,
    inverse_cayley,
    line_point,
    circle_point,
    polyval_matrix,
    realize_real_ssf,
    riesz_project,
)
from specshift.errors import ValidationError
from specshift.operators import opnorm, random_ensemble

Z = LaurentPoly.monomial


def _disk_points(rng, k):
    r = np.sqrt(rng.uniform(0, 1, k))
    return r * np.exp(2j * np.pi * rng.uniform(0, 1, k))


class TestLaurentPoly:
    def test_trim_and_equality(self):
        p = LaurentPoly([0, 1, 2, 0, 0], nmin=-1)
        assert p.nmin == 0 and p.nmax == 1
        assert p == LaurentPoly([1, 2])

    def test_algebra(self):
        p = Z(1) + Z(-1)
        q = p * p
        assert q.allclose(Z(2) + 2 + Z(-2))
        assert (q - q).is_zero()
        assert Z(3).derivative().allclose(Z(2, 3))
        assert Z(2).antiderivative().allclose(Z(3, 1 / 3))

    def test_json_roundtrip(self):
        p = LaurentPoly([1 + 2j, 0, -3], nmin=-2)
        assert LaurentPoly.from_json(p.to_json()) == p
        assert p.to_json()["nmin"] == -2

    def test_json_rejects_garbage(self):
        with pytest.raises(ValidationError):
            LaurentPoly.from_json({"nmin": 0})

    def test_evaluation(self):
        p = LaurentPoly([1, 0, 2], nmin=-1)
        z = np.array([1.0, 1j, 0.5])
        assert np.allclose(p(z), 1 / z + 2 * z)


class TestDividedDifference:
    def test_examples(self):
        assert abs(divided_difference(Z(3), 1, 1j) - 1j) < 1e-14
        z0 = 0.3 + 0.4j
        assert abs(divided_difference(Z(2), z0, z0) - 2 * z0) < 1e-14
        assert abs(divided_difference(Z(2), 1, -1)) < 1e-15

    def test_near_diagonal_is_continuous(self):
        f = LaurentPoly([0.3, -1, 0.5, 2, 1j])
        z = 0.6 + 0.2j
        for h in (1e-6, 1e-8, 1e-10):
            assert abs(divided_difference(f, z + h, z) - f.derivative()(z)) < 1e-5

    def test_rejects_nonanalytic(self):
        with pytest.raises(ValidationError):
            divided_difference(Z(-1), 0.5, 0.2)

    def test_symmetry(self, rng):
        f = LaurentPoly(rng.normal(size=6) + 1j * rng.normal(size=6))
        z, w = _disk_points(rng, 50), _disk_points(rng, 50)
        assert np.max(np.abs(divided_difference(f, z, w) - divided_difference(f, w, z))) < 1e-12


class TestHaagerup:
    def test_square(self):
        terms = haagerup_terms(Z(2))
        assert len(terms) == 2
        z, w = 0.3, -0.7j
        assert abs(sum(p(z) * q(w) for p, q in terms) - (z + w)) < 1e-15

    def test_linear(self):
        terms = haagerup_terms(Z(1))
        assert len(terms) == 1
        assert terms[0][0] == LaurentPoly.constant(1) and terms[0][1] == LaurentPoly.constant(1)

    def test_cube_pointwise(self, rng):
        terms = haagerup_terms(Z(3))
        assert len(terms) <= 3
        z, w = _disk_points(rng, 100), _disk_points(rng, 100)
        vals = sum(p(z) * q(w) for p, q in terms)
        assert np.max(np.abs(vals - divided_difference(Z(3), z, w))) < 1e-12
        assert np.max(np.abs(vals - (z * z + z * w + w * w))) < 1e-12


class TestContractionCalculus:
    def test_constant_is_identity(self):
        T = random_ensemble("contraction", 3, 1)
        assert np.allclose(eval_on_contraction(LaurentPoly.constant(1), T), np.eye(3))

    def test_laurent_on_unitary(self):
        U = random_ensemble("unitary", 3, 2)
        assert np.allclose(eval_on_contraction(Z(1) + Z(-1), U), U + U.conj().T)

    def test_nilpotent_square(self):
        T = np.array([[0, 1], [0, 0]], dtype=complex)
        assert np.allclose(eval_on_contraction(Z(2), T), 0)

    def test_multiplicative(self, rng):
        T = random_ensemble("contraction", 4, 3)
        f = LaurentPoly(rng.normal(size=4))
        g = LaurentPoly(rng.normal(size=3) + 1j)
        lhs = eval_on_contraction(f * g, T)
        rhs = eval_on_contraction(f, T) @ eval_on_contraction(g, T)
        assert opnorm(lhs - rhs) < 1e-10


class TestCayley:
    def test_scalars(self):
        assert abs(cayley(np.array([[1j]]))[0, 0]) < 1e-15
        assert abs(cayley(np.array([[2j]]))[0, 0] - 1 / 3) < 1e-15

    def test_roundtrip(self):
        L = random_ensemble("dissipative", 4, 5)
        assert opnorm(inverse_cayley(cayley(L)) - L) < 1e-10

    def test_line_point_inverts_circle_point(self):
        t = np.array([-3.0, -0.2, 0.0, 0.7, 12.0])
        th = np.mod(np.angle(circle_point(t)), 2 * np.pi)
        assert np.allclose(line_point(th), t)

    def test_eval_on_dissipative(self):
        assert abs(eval_on_dissipative(LineFn(Z(1)), np.array([[1j]]))[0, 0]) < 1e-15
        assert np.allclose(eval_on_dissipative(LineFn(LaurentPoly.constant(1)), np.array([[1j]])), 1)
        assert abs(eval_on_dissipative(LineFn(Z(2)), np.array([[2j]]))[0, 0] - 1 / 9) < 1e-15

    def test_line_function_derivative(self):
        f = LineFn(LaurentPoly([0.2, 1, -0.5, 0.1]))
        t = np.linspace(-4, 4, 9)
        h = 1e-6
        fd = (f(t + h) - f(t - h)) / (2 * h)
        assert np.max(np.abs(fd - f.derivative(t))) < 1e-8
        z = circle_point(t)
        assert np.max(np.abs(f.derivative_on_circle()(z) - f.derivative(t))) < 1e-12

    def test_linefn_needs_analytic(self):
        with pytest.raises(ValidationError):
            LineFn(Z(-1))


class TestRiesz:
    def test_laurent(self):
        g = Z(1) + Z(-1)
        assert riesz_project(g, "+") == Z(1)
        assert riesz_project(g, "-") == Z(-1)

    def test_constant_grid(self):
        g = GridFunction(np.full(64, 2.5 - 1j))
        assert np.allclose(riesz_project(g, "+").values, 2.5 - 1j)
        assert np.allclose(riesz_project(g, "-").values, 0)

    @pytest.mark.parametrize("shifted", [False, True])
    def test_poisson_real_part(self, shifted):
        # Re 1/(1 - r zeta) = 1/2 + (1/2) sum_{n != 0} r^|n| zeta^n, so its analytic
        # projection is 1/2 + (1/2)/(1 - r zeta)
        r = 0.5
        g = GridFunction.sample(lambda th: np.real(1 / (1 - r * np.exp(1j * th))), 2048, shifted)
        z = g.zeta
        expected = 0.5 + 0.5 / (1 - r * z)
        assert np.max(np.abs(riesz_project(g, "+").values - expected)) < 1e-10

    def test_nyquist_counts_as_nonnegative(self):
        n = grid_frequencies(8)
        assert sorted(n.tolist()) == [-3, -2, -1, 0, 1, 2, 3, 4]

    def test_shifted_fourier_roundtrip(self, rng):
        g = GridFunction(rng.normal(size=32) + 1j * rng.normal(size=32), shifted=True)
        n, c = g.fourier()
        assert np.allclose(GridFunction.from_fourier(n, c, True).values, g.values)
        h = GridFunction.sample(Z(3), 32, True)
        n, c = h.fourier()
        assert abs(c[n == 3][0] - 1) < 1e-13 and np.sum(np.abs(c)) - 1 < 1e-12


class TestRealize:
    def test_real_input(self, rng):
        x = GridFunction(rng.normal(size=128))
        assert np.allclose(realize_real_ssf(x).values, x.values)

    def test_cosine(self):
        xi = GridFunction.sample(lambda th: 2j * np.cos(th), 256)
        xr = realize_real_ssf(xi)
        assert np.max(np.abs(xr.values.imag)) < 1e-12
        assert np.max(np.abs(xr.values - 2 * np.sin(xi.theta))) < 1e-12
        n, c = (xi - xr).fourier()
        assert np.max(np.abs(c[n < 0])) < 1e-12

    def test_imaginary_constant(self):
        xi = GridFunction(np.full(64, 1j))
        assert np.allclose(realize_real_ssf(xi).values, 0)


class TestAIntegral:
    def test_bounded_cosine(self):
        g = GridFunction.sample(np.cos, 1024)
        res = a_integral(g)
        assert abs(res.value) < 1e-14 and res.converged

    def test_cotangent_kernel(self):
        g = GridFunction.sample(lambda th: 1 / (1 - np.exp(1j * th)), 8192, shifted=True)
        res = a_integral(g)
        assert abs(res.value - 0.5) < 1e-10
        assert res.tails[-1] == 0

    def test_constant(self):
        g = GridFunction(np.full(16, 0.75 + 0j))
        assert abs(a_integral(g, [1.0, 2.0]).value - 0.75) < 1e-15

    def test_bounded_equals_mean(self, rng):
        g = GridFunction(rng.normal(size=256) + 1j * rng.normal(size=256))
        top = np.abs(g.values).max()
        assert abs(a_integral(g, [top / 2, 2 * top]).value - g.mean()) < 1e-12

    def test_empty_thresholds(self):
        with pytest.raises(ValidationError):
            a_integral(GridFunction(np.ones(4)), [])


class TestGridCSV:
    def test_roundtrip(self, rng):
        g = GridFunction(rng.normal(size=16) + 1j * rng.normal(size=16), shifted=True)
        h = GridFunction.from_csv(g.to_csv())
        assert h.shifted and np.array_equal(h.values, g.values)

    def test_bad_size(self):
        text = "theta,re,im\n0,1,0\n1,1,0\n2,1,0\n"
        with pytest.raises(ValidationError):
            GridFunction.from_csv(text)


def test_polyval_negative_powers_use_adjoint():
    T = random_ensemble("contraction", 3, 8)
    M = polyval_matrix(Z(-2), T)
    assert np.allclose(M, T.conj().T @ T.conj().T)
