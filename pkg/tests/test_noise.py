import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from rscert import noise
from rscert.noise import NoiseSpec

# one representative per family; d = 8 keeps moment tests cheap
FAMILIES = [
    ("gaussian", {}),
    ("laplace", {}),
    ("uniform_linf", {}),
    ("uniform_l2", {}),
    ("exp_linf", {"k": 2.0, "j": 1.0}),
    ("exp_l2", {"k": 1.0, "j": 0.0}),
    ("exp_l1", {"k": 0.5}),
    ("exp_lp_iid", {"p": 0.5}),
    ("exp_lp_iid", {"p": 3.0}),
    ("power_linf", {"a": 30.0}),
    ("power_l2", {"a": 12.0, "k": 2.0}),
    ("pareto_iid", {"a": 9.0}),
]


def _ids(fams):
    return [f + "".join(f"-{k}{v:g}" for k, v in p.items()) for f, p in fams]


class TestSpec:
    def test_defaults_and_params(self):
        s = NoiseSpec("exp_linf", 1.0, 4)
        assert (s.k, s.j) == (1.0, 0.0)
        assert s.params == {"k": 1.0, "j": 0.0}

    @pytest.mark.parametrize("kwargs", [
        dict(family="exp_linf", lam=1.0, dim=3, j=3.0),
        dict(family="power_linf", lam=1.0, dim=3, a=3.0),
        dict(family="power_l2", lam=1.0, dim=4, a=2.0, k=2.0),
        dict(family="gaussian", lam=0.0, dim=3),
        dict(family="gaussian", lam=1.0, dim=0),
        dict(family="gaussian", lam=1.0, dim=3, k=2.0),
        dict(family="pareto_iid", lam=1.0, dim=3),
        dict(family="cauchy", lam=1.0, dim=3),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            NoiseSpec(**kwargs)

    def test_text_form(self):
        s = NoiseSpec.from_text("family=exp_linf k=1 j=0 lambda=0.5 dim=3072")
        assert s == NoiseSpec("exp_linf", 0.5, 3072, k=1, j=0)
        assert s.to_text() == "family=exp_linf k=1 j=0 lambda=0.5 dim=3072"

    @pytest.mark.parametrize("text", [
        "family=gaussian lambda=1 dim=3 k=2",
        "family=gaussian lambda=1",
        "family=gaussian Lambda=1 dim=3",
        "family=gaussian lambda=1 lambda=2 dim=3",
        "family=gaussian lambda dim=3",
    ])
    def test_text_rejects(self, text):
        with pytest.raises(ValueError):
            NoiseSpec.from_text(text)

    @given(st.sampled_from(FAMILIES), st.floats(1e-3, 1e3), st.integers(1, 64))
    def test_text_round_trip(self, fam, lam, dim):
        name, params = fam
        try:
            s = NoiseSpec(name, lam, dim, **params)
        except ValueError:
            return
        assert NoiseSpec.from_text(s.to_text()) == s


class TestScale:
    @pytest.mark.parametrize("family,ratio", [
        ("gaussian", 1.0), ("uniform_linf", math.sqrt(3)), ("laplace", 1 / math.sqrt(2)),
    ])
    def test_table_ratios(self, family, ratio):
        assert noise.lambda_for_sigma(family, 10, 1.0) == pytest.approx(ratio, rel=1e-15)

    @pytest.mark.parametrize("family,params", FAMILIES, ids=_ids(FAMILIES))
    def test_round_trip(self, family, params):
        s = noise.spec_for_sigma(family, 8, 0.37, **params)
        assert noise.sigma_for_lambda(s) == pytest.approx(0.37, rel=1e-13)

    def test_infinite_variance_rejected(self):
        with pytest.raises(ValueError):
            noise.lambda_for_sigma("power_linf", 8, 1.0, a=10.0)
        with pytest.raises(ValueError):
            noise.lambda_for_sigma("pareto_iid", 8, 1.0, a=2.0)

    @pytest.mark.parametrize("family,params", FAMILIES, ids=_ids(FAMILIES))
    def test_sampled_variance(self, family, params):
        d, n = 8, 200_000
        s = noise.spec_for_sigma(family, d, 0.5, **params)
        x = noise.sample(s, np.random.default_rng(11), n)
        per = np.sum(x * x, axis=1) / d
        se = per.std(ddof=1) / math.sqrt(n)
        assert abs(per.mean() - 0.25) < 4 * se


class TestSampling:
    def test_uniform_linf_ks(self):
        s = NoiseSpec("uniform_linf", 2.0, 3)
        x = noise.sample(s, np.random.default_rng(0), 1_000_000)
        for i in range(3):
            stat = stats.kstest(x[:, i], stats.uniform(loc=-2, scale=4).cdf).statistic
            assert stat < 1.95 / math.sqrt(1_000_000)

    def test_exp_l2_mean_norm(self):
        d, lam, n = 6, 0.7, 1_000_000
        s = NoiseSpec("exp_l2", lam, d)
        r = np.linalg.norm(noise.sample(s, np.random.default_rng(1), n), axis=1)
        assert abs(r.mean() - lam * d) < 4 * r.std() / math.sqrt(n)

    @pytest.mark.parametrize("family,params", [f for f in FAMILIES if f[0] in noise.RADIAL_NORM],
                             ids=_ids([f for f in FAMILIES if f[0] in noise.RADIAL_NORM]))
    def test_radial_law_ks(self, family, params):
        s = NoiseSpec(family, 1.3, 5, **params)
        x = noise.sample(s, np.random.default_rng(2), 100_000)
        r = noise._norm(x / s.lam, noise.RADIAL_NORM[family])
        stat = stats.kstest(r, lambda t: noise.radial_cdf(s, t)).statistic
        assert stat < 1.95 / math.sqrt(100_000)

    @pytest.mark.parametrize("kind", ["l1", "l2", "linf"])
    def test_spheres_on_unit_sphere(self, kind):
        u = noise._SPHERES[kind](np.random.default_rng(3), 1000, 7)
        assert np.allclose(noise._norm(u, kind), 1.0, atol=1e-12)

    def test_linf_sphere_face_uniform(self):
        u = noise.sphere_linf(np.random.default_rng(4), 200_000, 3)
        face = np.argmax(np.abs(u), axis=1)
        counts = np.bincount(face, minlength=3)
        assert stats.chisquare(counts).pvalue > 1e-4
        other = u[face == 0][:, 1]
        assert stats.kstest(other, stats.uniform(loc=-1, scale=2).cdf).pvalue > 1e-4

    def test_direction_radius_independent(self):
        s = NoiseSpec("exp_linf", 1.0, 4, k=2.0)
        x = noise.sample(s, np.random.default_rng(5), 200_000)
        r = np.max(np.abs(x), axis=1)
        corr = np.corrcoef(r, np.abs(x[:, 0]) / r)[0, 1]
        assert abs(corr) < 4 / math.sqrt(200_000)

    def test_scale_equivariance(self):
        base = NoiseSpec("exp_l1", 1.0, 5, k=2.0)
        big = base.with_lambda(3.0)
        a = noise.sample(base, np.random.default_rng(6), 200_000)
        b = noise.sample(big, np.random.default_rng(7), 200_000)
        ra, rb = np.abs(a).sum(axis=1), np.abs(b).sum(axis=1) / 3.0
        se = math.sqrt(ra.var() / ra.size + rb.var() / rb.size)
        assert abs(ra.mean() - rb.mean()) < 4 * se
        se2 = math.sqrt((ra ** 2).var() / ra.size + (rb ** 2).var() / rb.size)
        assert abs((ra ** 2).mean() - (rb ** 2).mean()) < 4 * se2

    def test_float32_and_determinism(self):
        s = NoiseSpec("laplace", 1.0, 4)
        a = noise.sample(s, np.random.default_rng(8), 10, dtype=np.float32)
        b = noise.sample(s, np.random.default_rng(8), 10, dtype=np.float32)
        assert a.dtype == np.float32 and np.array_equal(a, b)
        with pytest.raises(ValueError):
            noise.sample(s, np.random.default_rng(8), 0)

    def test_chunks(self):
        s = NoiseSpec("gaussian", 1.0, 3)
        blocks = list(noise.sample_chunks(s, np.random.default_rng(0), 10, chunk=4))
        assert [len(b) for b in blocks] == [4, 4, 2]

    @pytest.mark.parametrize("family,params", [
        ("gaussian", {}), ("exp_linf", {"k": 1.0, "j": 0.0}), ("exp_l1", {"k": 2.0}),
        ("power_l2", {"a": 3.0, "k": 1.0}),
    ])
    def test_histogram_matches_density(self, family, params):
        s = NoiseSpec(family, 1.0, 2, **params)
        n = 2_000_000
        x = noise.sample(s, np.random.default_rng(9), n)
        edges = np.linspace(-2.5, 2.5, 33)
        counts, _, _ = np.histogram2d(x[:, 0], x[:, 1], bins=[edges, edges])
        # cell probabilities by a 6x6 Gauss-Legendre rule per cell
        g, w = np.polynomial.legendre.leggauss(6)
        h = edges[1] - edges[0]
        mids = (edges[:-1] + edges[1:]) / 2
        pts = (mids[:, None] + g[None, :] * h / 2).ravel()
        xx, yy = np.meshgrid(pts, pts, indexing="ij")
        dens = np.exp(noise.log_density(s, np.stack([xx, yy], -1)) - noise.log_norm_const(s))
        ww = np.outer(np.tile(w, 32), np.tile(w, 32)) * (h / 2) ** 2
        prob = (dens * ww).reshape(32, 6, 32, 6).sum(axis=(1, 3))
        expect = n * prob
        ok = expect > 20
        z = (counts[ok] - expect[ok]) / np.sqrt(expect[ok])
        assert np.max(np.abs(z)) < 5.5


class TestDensity:
    def test_gaussian_form(self):
        s = NoiseSpec("gaussian", 2.0, 3)
        x = np.array([1.0, -2.0, 0.5])
        assert noise.log_density(s, x) == pytest.approx(-np.sum((x / 2) ** 2) / 2)

    def test_exp_linf_ratio(self):
        s = NoiseSpec("exp_linf", 0.5, 3)
        x, y = np.array([0.3, -1.0, 0.2]), np.array([0.1, 0.4, -0.6])
        ratio = math.exp(noise.log_density(s, x) - noise.log_density(s, y))
        assert ratio == pytest.approx(math.exp((0.6 - 1.0) / 0.5))

    def test_singular_origin(self):
        s = NoiseSpec("exp_l2", 1.0, 3, j=1.0)
        assert noise.log_density(s, np.zeros(3)) == math.inf

    def test_outside_support(self):
        s = NoiseSpec("uniform_l2", 1.0, 2)
        assert noise.log_density(s, np.array([0.8, 0.8])) == -math.inf

    @pytest.mark.parametrize("family,params", FAMILIES, ids=_ids(FAMILIES))
    def test_norm_const_1d(self, family, params):
        try:
            s = NoiseSpec(family, 0.8, 1, **params)
        except ValueError:
            pytest.skip("parameters need a larger dimension")
        f = lambda t: math.exp(noise.log_density(s, np.array([t])))
        val = 2 * integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-11, limit=400)[0]
        assert math.log(val) == pytest.approx(noise.log_norm_const(s), abs=1e-6)

    @pytest.mark.parametrize("family,params", [
        ("exp_linf", {"k": 2.0, "j": 0.5}), ("exp_l2", {"k": 1.5, "j": 0.0}), ("exp_l1", {"k": 0.7}),
        ("power_linf", {"a": 5.0}), ("power_l2", {"a": 2.0, "k": 2.0}), ("uniform_l2", {}),
        ("pareto_iid", {"a": 1.5}), ("exp_lp_iid", {"p": 0.7}),
    ])
    def test_norm_const_2d(self, family, params):
        s = NoiseSpec(family, 1.0, 2, **params)

        # polar coordinates: an integral over angle and radius is independent of the norm
        def f(r, th):
            pt = np.array([r * math.cos(th), r * math.sin(th)])
            return r * math.exp(noise.log_density(s, pt))

        val = integrate.dblquad(f, 0, math.pi / 2, 0, np.inf, epsabs=0, epsrel=1e-9)[0] * 4
        assert math.log(val) == pytest.approx(noise.log_norm_const(s), abs=1e-6)


class TestCoordinate:
    def test_laplace_centre(self):
        assert noise.coordinate_cdf(NoiseSpec("laplace", 1.0, 3), 0.0) == 0.5

    def test_pareto(self):
        s = NoiseSpec("pareto_iid", 0.5, 2, a=3.0)
        for t in [0.0, 0.3, 4.0]:
            assert noise.coordinate_cdf(s, t) == pytest.approx(1 - 0.5 * (1 + t / 0.5) ** -3.0, abs=1e-15)

    def test_exp_lp_two_is_gaussian(self):
        s = NoiseSpec("exp_lp_iid", 0.9, 2, p=2.0)
        for t in [-1.5, 0.1, 0.7, 3.0]:
            ref = 0.5 * (1 + special.erf(t / 0.9))
            assert noise.coordinate_cdf(s, t) == pytest.approx(ref, abs=1e-14)

    @pytest.mark.parametrize("family,params", [f for f in FAMILIES if f[0] in noise.IID_FAMILIES],
                             ids=_ids([f for f in FAMILIES if f[0] in noise.IID_FAMILIES]))
    def test_ppf_round_trip(self, family, params):
        s = NoiseSpec(family, 1.7, 3, **params)
        u = np.linspace(0.01, 0.99, 99)
        assert np.allclose(noise.coordinate_cdf(s, noise.coordinate_ppf(s, u)), u, rtol=1e-10, atol=0)

    def test_sf_symmetry(self):
        s = NoiseSpec("exp_lp_iid", 1.0, 2, p=0.5)
        assert noise.coordinate_sf(s, 1.3) == pytest.approx(1 - noise.coordinate_cdf(s, 1.3), abs=1e-15)

    def test_non_iid_rejected(self):
        with pytest.raises(noise.UnsupportedOperation):
            noise.coordinate_cdf(NoiseSpec("exp_l2", 1.0, 3), 0.1)
