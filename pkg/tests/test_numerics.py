import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, special

from outcap.errors import ConvergenceError, DomainError, NonMonotoneError
from outcap.numerics import (
    EULER_GAMMA,
    RootSolveSettings,
    harmonic_number,
    invert_monotone_cdf,
    q_function,
    q_inverse,
    regularized_lower_gamma,
)

REL_TOL = 1e-12
ROUND_TRIP_TOL = 1e-9


def gaussian_tail_quad(x):
    """Independent oracle: integrate the normal density from x to infinity."""
    val, _ = integrate.quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), x, np.inf,
                            epsabs=0, epsrel=1e-13)
    return val


class TestRegularizedLowerGamma:
    def test_single_branch_closed_form(self):
        x = math.log(1 / 0.9)
        assert regularized_lower_gamma(1, x) == pytest.approx(0.1, rel=REL_TOL)

    def test_zero_is_zero(self):
        assert regularized_lower_gamma(5, 0.0) == 0.0

    def test_two_branch_example(self):
        x = 0.5318
        oracle = 1 - math.exp(-x) * (1 + x)
        assert regularized_lower_gamma(2, x) == pytest.approx(oracle, rel=REL_TOL)
        assert abs(regularized_lower_gamma(2, x) - 0.1) < 1e-3

    @pytest.mark.parametrize("a", [0.5, 1, 2, 5, 10, 19.5, 20, 30, 50, 51, 100, 1000, 1e4, 1e6])
    @pytest.mark.parametrize("rel_x", [1e-3, 0.1, 0.5, 0.9, 1.0, 1.1, 2.0, 5.0])
    def test_matches_scipy(self, a, rel_x):
        x = a * rel_x
        expected = special.gammainc(a, x)
        if expected < 1e-300:
            pytest.skip("underflow")
        assert regularized_lower_gamma(a, x) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("a,x", [(3, 0.01), (40, 20.0), (100, 70.0), (1e5, 99_000.0)])
    def test_matches_mpmath_in_lower_tail(self, a, x):
        mpmath.mp.dps = 40
        expected = float(mpmath.gammainc(a, 0, x, regularized=True))
        assert regularized_lower_gamma(a, x) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("a", [1, 7, 50])
    def test_integer_equals_finite_poisson_sum(self, a):
        for x in (0.3, a * 0.8, a * 1.0, a * 1.7):
            poisson = math.fsum(x ** k / math.factorial(k) for k in range(a)) * math.exp(-x)
            assert regularized_lower_gamma(a, x) == pytest.approx(1 - poisson, rel=REL_TOL, abs=1e-15)

    def test_array_path_matches_scalar(self):
        x = np.linspace(0, 300, 301)
        for a in (1, 3, 60, 150.5):
            arr = regularized_lower_gamma(a, x)
            scal = np.array([regularized_lower_gamma(a, float(v)) for v in x])
            np.testing.assert_allclose(arr, scal, rtol=1e-13, atol=0)

    def test_tends_to_one(self):
        assert regularized_lower_gamma(10, 1e4) == pytest.approx(1.0, abs=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(a=st.floats(0.5, 2000), xs=st.lists(st.floats(0, 4000), min_size=2, max_size=30))
    def test_monotone_in_x(self, a, xs):
        xs = sorted(xs)
        vals = [regularized_lower_gamma(a, x) for x in xs]
        assert all(v2 >= v1 for v1, v2 in zip(vals, vals[1:]))

    @pytest.mark.parametrize("a,x", [(0, 1.0), (-1, 1.0), (2, -0.1), (2, math.nan), (math.inf, 1.0)])
    def test_rejects_bad_domain(self, a, x):
        with pytest.raises(DomainError):
            regularized_lower_gamma(a, x)

    def test_rejects_bad_array(self):
        with pytest.raises(DomainError):
            regularized_lower_gamma(2, np.array([1.0, np.inf]))


class TestQFunction:
    def test_median(self):
        assert q_function(0.0) == 0.5

    @pytest.mark.parametrize("x,expected,tol", [(1.281552, 0.1, 1e-6), (3.090232, 1e-3, 1e-8)])
    def test_examples(self, x, expected, tol):
        assert abs(q_function(x) - expected) < tol

    @pytest.mark.parametrize("x", [-3.0, -0.5, 0.7, 2.0, 5.0, 8.0])
    def test_matches_quadrature(self, x):
        assert q_function(x) == pytest.approx(gaussian_tail_quad(x), rel=1e-10)


class TestQInverse:
    def test_median(self):
        assert q_inverse(0.5) == 0.0

    @pytest.mark.parametrize("eps,expected", [(0.1, 1.281552), (1e-3, 3.090232)])
    def test_examples(self, eps, expected):
        oracle = optimize.bisect(lambda z: q_function(z) - eps, 0, 10, xtol=1e-14)
        assert abs(q_inverse(eps) - expected) < 1e-6
        assert q_inverse(eps) == pytest.approx(oracle, abs=1e-12)

    @pytest.mark.parametrize("eps", np.logspace(-6, math.log10(1 - 1e-6), 41))
    def test_round_trip(self, eps):
        assert q_function(q_inverse(eps)) == pytest.approx(eps, rel=ROUND_TRIP_TOL)

    def test_antisymmetric(self):
        for eps in (1e-5, 0.01, 0.3):
            assert q_inverse(1 - eps) == pytest.approx(-q_inverse(eps), rel=1e-9)

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.1, 1.5, math.nan])
    def test_rejects_non_probability(self, eps):
        with pytest.raises(DomainError):
            q_inverse(eps)


class TestHarmonicNumber:
    @pytest.mark.parametrize("n,expected", [(1, 1.0), (4, 25 / 12), (6, 2.45)])
    def test_examples(self, n, expected):
        assert harmonic_number(n) == pytest.approx(expected, rel=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 10, 999, 1000, 1001, 5000, 10**6])
    def test_recurrence(self, n):
        assert harmonic_number(n + 1) - harmonic_number(n) == pytest.approx(1 / (n + 1), rel=1e-6, abs=1e-15)

    @pytest.mark.parametrize("n", [1001, 2 * 10**4, 10**7])
    def test_asymptotic_branch_matches_digamma(self, n):
        assert harmonic_number(n) == pytest.approx(special.digamma(n + 1) + EULER_GAMMA, rel=1e-14)

    def test_excess_decreases_to_zero_from_above(self):
        ns = [int(v) for v in np.unique(np.logspace(0, 7, 50).astype(int))]
        excess = [harmonic_number(n) - (math.log(n) + EULER_GAMMA) for n in ns]
        assert all(e > 0 for e in excess)
        assert all(b < a for a, b in zip(excess, excess[1:]))
        assert excess[-1] < 1e-7

    @pytest.mark.parametrize("n", [0, -3, 2.5, True])
    def test_rejects_non_positive_integer(self, n):
        with pytest.raises(DomainError):
            harmonic_number(n)


class TestInvertMonotoneCdf:
    def test_exponential_closed_form(self):
        res = invert_monotone_cdf(lambda x: regularized_lower_gamma(1, x), 0.1, 1.0)
        assert abs(res.x - math.log(1 / 0.9)) < 1e-9

    def test_two_branch_against_bisection(self):
        oracle = optimize.bisect(lambda x: 1 - math.exp(-x) * (1 + x) - 0.1, 0, 5, xtol=1e-15)
        res = invert_monotone_cdf(lambda x: regularized_lower_gamma(2, x), 0.1, 1.0)
        assert abs(res.x - 0.5318) < 1e-4
        assert res.x == pytest.approx(oracle, rel=1e-11)

    @pytest.mark.parametrize("a", [1, 2, 5, 10, 50, 100, 1000, 10**4, 10**6])
    @pytest.mark.parametrize("eps", [1e-4, 1e-3, 1e-2, 1e-1, 0.5, 0.9])
    def test_round_trip(self, a, eps):
        res = invert_monotone_cdf(lambda x: regularized_lower_gamma(a, x), eps, float(a))
        assert regularized_lower_gamma(a, res.x) == pytest.approx(eps, rel=ROUND_TRIP_TOL)
        assert res.residual <= 1e-12 * eps + 1e-16

    def test_tiny_hint_expands_bracket(self):
        res = invert_monotone_cdf(lambda x: regularized_lower_gamma(500, x), 0.5, 1e-3)
        assert regularized_lower_gamma(500, res.x) == pytest.approx(0.5, rel=ROUND_TRIP_TOL)

    def test_loose_settings_respected(self):
        loose = RootSolveSettings(rel_tol=1e-3)
        res = invert_monotone_cdf(lambda x: regularized_lower_gamma(3, x), 0.2, 1.0, loose)
        assert res.residual <= 1e-3 * 0.2

    def test_non_monotone_detected(self):
        def bumpy(x):
            return 0.3 if x < 1 else 0.1 if x < 4 else 0.9
        with pytest.raises(NonMonotoneError):
            invert_monotone_cdf(bumpy, 0.5, 1.0)

    def test_unreachable_target_fails_to_bracket(self):
        with pytest.raises(ConvergenceError):
            invert_monotone_cdf(lambda x: 0.4 * (1 - math.exp(-x)), 0.5, 1.0,
                                RootSolveSettings(max_iter=50))

    def test_bad_hint(self):
        with pytest.raises(DomainError):
            invert_monotone_cdf(lambda x: x, 0.5, 0.0)

    @pytest.mark.parametrize("kw", [dict(rel_tol=0), dict(abs_tol=-1), dict(max_iter=0), dict(max_iter=1.5)])
    def test_settings_validation(self, kw):
        with pytest.raises(DomainError):
            RootSolveSettings(**kw)
