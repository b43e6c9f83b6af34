import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rscert import specfun as sf

mp.mp.dps = 30

P_GRID = np.linspace(0.01, 0.99, 99)


class TestGamma:
    def test_zero_and_exponential(self):
        assert sf.gamma_cdf(0.0, 1.0) == 0.0
        assert sf.gamma_cdf(math.log(2), 1.0) == pytest.approx(0.5, abs=1e-15)

    def test_quadrature_oracle(self):
        oracle = float(mp.quad(lambda t: t * mp.e ** (-t), [0, 2]) / mp.gamma(2))
        assert sf.gamma_cdf(2.0, 2.0) == pytest.approx(oracle, abs=1e-12)

    @pytest.mark.parametrize("shape", [1, 2, 5, 17])
    def test_erlang_closed_form(self, shape):
        for x in [0.1, 1.0, 4.0, 20.0]:
            erlang = 1 - math.exp(-x) * sum(x ** i / math.factorial(i) for i in range(shape))
            assert sf.gamma_cdf(x, shape) == pytest.approx(erlang, abs=1e-12)

    @pytest.mark.parametrize("shape", [0.1, 1.0, 10.0, 1000.0])
    def test_inverse_round_trip(self, shape):
        x = sf.gamma_cdf_inv(P_GRID, shape)
        assert np.allclose(sf.gamma_cdf(x, shape), P_GRID, rtol=1e-8, atol=0)

    def test_inverse_special_points(self):
        assert sf.gamma_cdf_inv(0.0, 3.0) == 0.0
        assert sf.gamma_cdf_inv(0.5, 1.0) == pytest.approx(math.log(2), rel=1e-14)
        assert sf.gamma_cdf_inv(1.0, 2.0) == math.inf

    @pytest.mark.parametrize("shape", [0.5, 3.0, 1536.0])
    def test_sf_inverse_deep_tail(self, shape):
        for q in [1e-3, 1e-10, 1e-30]:
            x = sf.gamma_sf_inv(q, shape)
            assert sf.gamma_sf(x, shape) == pytest.approx(q, rel=1e-9)

    def test_matches_mpmath(self):
        for shape, x in [(0.3, 0.01), (7.5, 3.0), (1536.0, 1500.0)]:
            ref = float(mp.gammainc(shape, 0, x, regularized=True))
            assert sf.gamma_cdf(x, shape) == pytest.approx(ref, rel=1e-12)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            sf.gamma_cdf(-1.0, 1.0)
        with pytest.raises(ValueError):
            sf.gamma_cdf(1.0, 0.0)
        with pytest.raises(ValueError):
            sf.gamma_cdf_inv(1.5, 1.0)

    @given(st.floats(0.05, 50), st.floats(0, 100), st.floats(0, 100))
    def test_monotone(self, shape, x, y):
        lo, hi = sorted((x, y))
        assert sf.gamma_cdf(lo, shape) <= sf.gamma_cdf(hi, shape)


class TestBeta:
    @pytest.mark.parametrize("a", [0.3, 1.0, 7.0, 511.5])
    def test_symmetric_half(self, a):
        assert sf.beta_cdf(0.5, a, a) == pytest.approx(0.5, abs=1e-14)

    def test_uniform(self):
        for x in [0.0, 0.2, 0.7, 1.0]:
            assert sf.beta_cdf(x, 1, 1) == pytest.approx(x, abs=1e-15)

    def test_binomial_identity(self):
        a, b, x = 3, 5, 0.25
        n = a + b - 1
        ref = sum(math.comb(n, j) * x ** j * (1 - x) ** (n - j) for j in range(a, n + 1))
        assert sf.beta_cdf(x, a, b) == pytest.approx(ref, abs=1e-14)

    @given(st.floats(0.01, 0.99), st.floats(0.2, 40), st.floats(0.2, 40))
    def test_reflection(self, x, a, b):
        assert sf.beta_cdf(x, a, b) == pytest.approx(1 - sf.beta_cdf(1 - x, b, a), abs=1e-12)

    @pytest.mark.parametrize("a,b", [(0.5, 0.5), (2.0, 9.0), (511.5, 511.5)])
    def test_inverse_round_trip(self, a, b):
        x = sf.beta_cdf_inv(P_GRID, a, b)
        assert np.allclose(sf.beta_cdf(x, a, b), P_GRID, rtol=1e-8, atol=0)

    def test_rejects_domain(self):
        with pytest.raises(ValueError):
            sf.beta_cdf(1.5, 1, 1)


class TestBetaPrime:
    def test_special_points(self):
        assert sf.beta_prime_cdf(0.0, 2.0, 3.0) == 0.0
        assert sf.beta_prime_cdf(1.0, 4.0, 4.0) == pytest.approx(0.5, abs=1e-14)

    def test_defining_identity(self):
        assert sf.beta_prime_cdf(2.0, 3, 4) == pytest.approx(sf.beta_cdf(2 / 3, 3, 4), abs=1e-15)

    @given(st.floats(0.01, 100), st.floats(0.3, 30), st.floats(0.3, 30))
    def test_beta_consistency(self, x, a, b):
        assert sf.beta_prime_cdf(x, a, b) == pytest.approx(sf.beta_cdf(x / (1 + x), a, b), abs=1e-12)

    @pytest.mark.parametrize("a,b", [(3.0, 1.0), (100.0, 2.5), (0.5, 7.0)])
    def test_inverse_round_trip(self, a, b):
        x = sf.beta_prime_cdf_inv(P_GRID, a, b)
        assert np.allclose(sf.beta_prime_cdf(x, a, b), P_GRID, rtol=1e-8, atol=0)

    def test_sf_inverse(self):
        for q in [0.3, 1e-6, 1e-15]:
            x = sf.beta_prime_sf_inv(q, 3.0, 2.0)
            assert sf.beta_prime_sf(x, 3.0, 2.0) == pytest.approx(q, rel=1e-8)


class TestGaussian:
    def test_special_points(self):
        assert sf.gaussian_cdf(0.0) == 0.5
        assert sf.gaussian_cdf_inv(0.5) == 0.0

    def test_golden_quantile(self):
        # bisection on an mpmath erf oracle
        target = mp.mpf("0.9")
        root = mp.findroot(lambda x: (1 + mp.erf(x / mp.sqrt(2))) / 2 - target, 1.28)
        assert sf.gaussian_cdf_inv(0.9) == pytest.approx(float(root), abs=1e-12)
        assert abs(sf.gaussian_cdf_inv(0.9) - 1.2815515655) < 1e-8

    @given(st.floats(-30, 30))
    def test_symmetry(self, x):
        assert abs(sf.gaussian_cdf(x) + sf.gaussian_cdf(-x) - 1) < 1e-15

    def test_round_trip(self):
        assert np.allclose(sf.gaussian_cdf(sf.gaussian_cdf_inv(P_GRID)), P_GRID, rtol=1e-12)


class TestBinomialTail:
    def test_small_cases(self):
        assert sf.binomial_tail(1, 0) == 0.5
        assert sf.binomial_tail(4, 2) == pytest.approx(5 / 16, abs=1e-16)
        assert sf.binomial_tail(4, 4) == 0.0

    def test_clt(self):
        d, j = 10_000, 5100
        clt = 0.5 * math.erfc((j + 0.5 - d / 2) / math.sqrt(d / 4) / math.sqrt(2))
        assert sf.binomial_tail(d, j) == pytest.approx(clt, rel=1e-3)

    def test_exact_enumeration(self):
        d = 31
        for j in range(d + 1):
            ref = sum(math.comb(d, m) for m in range(j + 1, d + 1)) / 2 ** d
            assert sf.binomial_tail(d, j) == pytest.approx(ref, rel=1e-12, abs=1e-300)

    @pytest.mark.parametrize("q", [0.5, 0.1, 1e-5])
    def test_inverse(self, q):
        d = 200
        j = sf.binomial_tail_inv(d, q)
        assert sf.binomial_tail(d, j) <= q
        assert j == 0 or sf.binomial_tail(d, j - 1) > q

    def test_range(self):
        with pytest.raises(ValueError):
            sf.binomial_tail(4, 5)


class TestHyp2f1:
    def test_origin(self):
        assert sf.hyp2f1_special(3.0, 0.0) == 1.0

    def test_artanh_identity(self):
        z = 0.25
        assert sf.hyp2f1_special(1.0, z) == pytest.approx(math.atanh(math.sqrt(z)) / math.sqrt(z), abs=1e-10)

    @pytest.mark.parametrize("a,z", [(2.0, 0.5), (0.7, 0.9), (5.0, 0.999)])
    def test_mpmath(self, a, z):
        b = a / (a + 1)
        assert sf.hyp2f1_special(a, z) == pytest.approx(float(mp.hyp2f1(1, b, b + 1, z)), rel=1e-10)

    def test_long_series(self):
        b = 2 / 3
        n = np.arange(1_000_000, dtype=float)
        ref = math.fsum(b * 0.5 ** n / (b + n))
        assert sf.hyp2f1_special(2.0, 0.5) == pytest.approx(ref, rel=1e-12)

    def test_rejects_one(self):
        with pytest.raises(ValueError):
            sf.hyp2f1_special(1.0, 1.0)


class TestPolylog:
    def test_special_points(self):
        assert sf.polylog(3, 0.0) == 0.0
        assert sf.polylog(2, 1.0) == pytest.approx(math.pi ** 2 / 6, abs=1e-15)
        with pytest.raises(ValueError):
            sf.polylog(1, 1.0)

    def test_long_series(self):
        k = np.arange(1, 200, dtype=float)
        ref = math.fsum(0.5 ** k / k ** 2)
        assert sf.polylog(2, 0.5) == pytest.approx(ref, abs=1e-14)

    @settings(max_examples=60)
    @given(st.integers(1, 6), st.floats(1e-10, 0.999999))
    def test_mpmath(self, n, z):
        assert sf.polylog(n, z) == pytest.approx(float(mp.polylog(n, z)), rel=1e-10)

    @pytest.mark.parametrize("z", [5e-324, 1e-300, 1e-200])
    def test_tiny_argument(self, z):
        # Li_n(z) = z + O(z^2)
        for n in (1, 2, 4):
            assert sf.polylog(n, z) == pytest.approx(z, rel=1e-15)
