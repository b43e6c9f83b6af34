"""Smoothing distributions: specification, sampling, densities, scale conversion.

Every family is parametrised by a scale ``lam`` (lambda) and dimension
``dim``.  Norm-radial families are sampled as ``lam * r * u`` with ``r`` drawn
from the radial law of the defining norm and ``u`` uniform on that norm's
unit sphere (cone measure).  The i.i.d. families draw coordinates directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special as sc

from . import specfun

FAMILY_PARAMS = {
    "gaussian": (),
    "laplace": (),
    "uniform_linf": (),
    "uniform_l2": (),
    "exp_linf": ("k", "j"),
    "exp_l2": ("k", "j"),
    "exp_l1": ("k",),
    "exp_lp_iid": ("p",),
    "power_linf": ("a",),
    "power_l2": ("a", "k"),
    "pareto_iid": ("a",),
}

PARAM_DEFAULTS = {"k": 1.0, "j": 0.0}

# norm whose level sets define the density, for the norm-radial families
RADIAL_NORM = {
    "gaussian": "l2",
    "laplace": "l1",
    "uniform_linf": "linf",
    "uniform_l2": "l2",
    "exp_linf": "linf",
    "exp_l2": "l2",
    "exp_l1": "l1",
    "power_linf": "linf",
    "power_l2": "l2",
}

IID_FAMILIES = frozenset({"gaussian", "laplace", "exp_lp_iid", "pareto_iid", "uniform_linf"})
SPHERICAL_FAMILIES = frozenset({"gaussian", "exp_l2", "power_l2", "uniform_l2"})


class UnsupportedOperation(ValueError):
    """The requested operation is not defined for this noise family."""


@dataclass(frozen=True)
class NoiseSpec:
    """A smoothing distribution: family, shape parameters, scale and dimension."""

    family: str
    lam: float
    dim: int
    k: float | None = None
    j: float | None = None
    a: float | None = None
    p: float | None = None
    _params: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILY_PARAMS:
            raise ValueError(f"unknown family {self.family!r}; expected one of {sorted(FAMILY_PARAMS)}")
        names = FAMILY_PARAMS[self.family]
        for name in ("k", "j", "a", "p"):
            val = getattr(self, name)
            if name not in names:
                if val is not None:
                    raise ValueError(f"family {self.family} takes no parameter {name!r}")
                continue
            if val is None:
                if name not in PARAM_DEFAULTS:
                    raise ValueError(f"family {self.family} requires parameter {name!r}")
                val = PARAM_DEFAULTS[name]
            val = float(val)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, val)
        lam = float(self.lam)
        if not (math.isfinite(lam) and lam > 0):
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        self._validate()

    def _validate(self):
        d, f = self.dim, self.family
        if self.k is not None and self.k <= 0:
            raise ValueError("k must be positive")
        if self.j is not None and not 0 <= self.j < d:
            raise ValueError(f"j must satisfy 0 <= j < dim, got j={self.j}, dim={d}")
        if self.p is not None and self.p <= 0:
            raise ValueError("p must be positive")
        if self.a is not None and self.a <= 0:
            raise ValueError("a must be positive")
        if f == "power_linf" and not self.a > d:
            raise ValueError(f"power_linf requires a > dim, got a={self.a}, dim={d}")
        if f == "power_l2" and not self.a * self.k > d:
            raise ValueError(f"power_l2 requires a*k > dim, got a*k={self.a * self.k}, dim={d}")

    @property
    def params(self) -> dict:
        return {n: getattr(self, n) for n in FAMILY_PARAMS[self.family]}

    def with_lambda(self, lam: float) -> "NoiseSpec":
        return replace(self, lam=lam)

    # text form ---------------------------------------------------------

    def to_text(self) -> str:
        parts = [f"family={self.family}"]
        parts += [f"{n}={_fmt(v)}" for n, v in self.params.items()]
        parts += [f"lambda={_fmt(self.lam)}", f"dim={self.dim}"]
        return " ".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "NoiseSpec":
        fields = {}
        for tok in text.split():
            key, sep, val = tok.partition("=")
            if not sep or not val:
                raise ValueError(f"malformed token {tok!r}; expected key=value")
            if key != key.lower():
                raise ValueError(f"keys must be lowercase, got {key!r}")
            if key in fields:
                raise ValueError(f"duplicate key {key!r}")
            fields[key] = val
        if "family" not in fields:
            raise ValueError("missing key 'family'")
        family = fields.pop("family")
        allowed = {"lambda", "dim", *FAMILY_PARAMS.get(family, ())}
        unknown = set(fields) - allowed
        if unknown:
            raise ValueError(f"unknown keys for {family}: {sorted(unknown)}")
        if "lambda" not in fields or "dim" not in fields:
            raise ValueError("both 'lambda' and 'dim' are required")
        try:
            dim = int(fields.pop("dim"))
            lam = float(fields.pop("lambda"))
            params = {k: float(v) for k, v in fields.items()}
        except ValueError as exc:
            raise ValueError(f"bad numeric value in {text!r}") from exc
        return cls(family, lam, dim, **params)

    def __str__(self):
        return self.to_text()


def _fmt(x: float) -> str:
    return repr(float(x)) if float(x) != int(x) else str(int(x))


# --- scale conversion ----------------------------------------------------

def _sigma_ratio(family, dim, k=None, j=None, a=None, p=None) -> float:
    """lambda / sigma, where sigma^2 = E ||delta||_2^2 / d."""
    d = dim
    cube_dir = (d - 1) / 3 + 1            # E ||u||_2^2 on the linf sphere
    lg = sc.gammaln
    if family == "gaussian":
        return 1.0
    if family == "laplace":
        return 1 / math.sqrt(2)
    if family == "uniform_linf":
        return math.sqrt(3)
    if family == "uniform_l2":
        return math.sqrt(d + 2)
    if family == "exp_linf":
        return math.sqrt(d / cube_dir * math.exp(lg((d - j) / k) - lg((d + 2 - j) / k)))
    if family == "exp_l2":
        return math.sqrt(d * math.exp(lg((d - j) / k) - lg((d + 2 - j) / k)))
    if family == "exp_l1":
        return math.sqrt(d * (d + 1) / 2 * math.exp(lg(d / k) - lg((d + 2) / k)))
    if family == "exp_lp_iid":
        return math.sqrt(math.exp(lg(1 / p) - lg(3 / p)))
    if family == "power_linf":
        if not a > d + 2:
            raise ValueError(f"power_linf has infinite variance unless a > dim + 2 (a={a}, dim={d})")
        return math.sqrt((a - d - 1) * (a - d - 2) / ((d + 1) * cube_dir))
    if family == "power_l2":
        if not a - (d + 2) / k > 0:
            raise ValueError(f"power_l2 has infinite variance unless a > (dim + 2)/k (a={a}, k={k}, dim={d})")
        return math.sqrt(d * math.exp(lg(d / k) + lg(a - d / k) - lg((d + 2) / k) - lg(a - (d + 2) / k)))
    if family == "pareto_iid":
        if not a > 2:
            raise ValueError(f"pareto_iid has infinite variance unless a > 2 (a={a})")
        return math.sqrt((a - 1) * (a - 2) / 2)
    raise ValueError(f"unknown family {family!r}")


def lambda_for_sigma(family: str, dim: int, sigma: float, **params) -> float:
    """Scale ``lambda`` giving per-coordinate standard deviation ``sigma``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    probe = NoiseSpec(family, 1.0, dim, **params)
    return _sigma_ratio(family, dim, **probe.params) * sigma


def sigma_for_lambda(spec: NoiseSpec) -> float:
    return spec.lam / _sigma_ratio(spec.family, spec.dim, **spec.params)


def spec_for_sigma(family: str, dim: int, sigma: float, **params) -> NoiseSpec:
    return NoiseSpec(family, lambda_for_sigma(family, dim, sigma, **params), dim, **params)


# --- radial law ------------------------------------------------------------

def radial_ppf(spec: NoiseSpec, u):
    """Quantile function of ``||delta|| / lam`` in the family's own norm."""
    u = np.asarray(u, dtype=float)
    d, f = spec.dim, spec.family
    if f == "gaussian":
        return np.sqrt(2 * specfun.gamma_cdf_inv(u, d / 2))
    if f == "laplace":
        return specfun.gamma_cdf_inv(u, float(d))
    if f in ("uniform_linf", "uniform_l2"):
        return u ** (1.0 / d)
    if f in ("exp_linf", "exp_l2"):
        return specfun.gamma_cdf_inv(u, (d - spec.j) / spec.k) ** (1 / spec.k)
    if f == "exp_l1":
        return specfun.gamma_cdf_inv(u, d / spec.k) ** (1 / spec.k)
    if f == "power_linf":
        return specfun.beta_prime_cdf_inv(u, d, spec.a - d)
    if f == "power_l2":
        return specfun.beta_prime_cdf_inv(u, d / spec.k, spec.a - d / spec.k) ** (1 / spec.k)
    raise UnsupportedOperation(f"{f} is not norm-radial")


def radial_cdf(spec: NoiseSpec, r):
    """CDF of ``||delta|| / lam`` in the family's own norm."""
    r = np.asarray(r, dtype=float)
    d, f = spec.dim, spec.family
    if f == "gaussian":
        return specfun.gamma_cdf(r * r / 2, d / 2)
    if f == "laplace":
        return specfun.gamma_cdf(r, float(d))
    if f in ("uniform_linf", "uniform_l2"):
        return np.clip(r, 0, 1) ** d
    if f in ("exp_linf", "exp_l2"):
        return specfun.gamma_cdf(r ** spec.k, (d - spec.j) / spec.k)
    if f == "exp_l1":
        return specfun.gamma_cdf(r ** spec.k, d / spec.k)
    if f == "power_linf":
        return specfun.beta_prime_cdf(r, d, spec.a - d)
    if f == "power_l2":
        return specfun.beta_prime_cdf(r ** spec.k, d / spec.k, spec.a - d / spec.k)
    raise UnsupportedOperation(f"{f} is not norm-radial")


def _radial_sample(spec, rng, count, dtype):
    d, f = spec.dim, spec.family
    if f in ("exp_linf", "exp_l2"):
        return rng.standard_gamma((d - spec.j) / spec.k, count) ** (1 / spec.k)
    if f == "exp_l1":
        return rng.standard_gamma(d / spec.k, count) ** (1 / spec.k)
    if f in ("uniform_linf", "uniform_l2"):
        return (1.0 - rng.random(count)) ** (1.0 / d)
    if f == "power_linf":
        return rng.standard_gamma(d, count) / rng.standard_gamma(spec.a - d, count)
    if f == "power_l2":
        # inverse CDF keeps extreme heavy tails exact
        u = rng.random(count)
        return specfun.beta_prime_cdf_inv(u, d / spec.k, spec.a - d / spec.k) ** (1 / spec.k)
    raise UnsupportedOperation(f"{f} has no radial sampler")


# --- sphere directions ------------------------------------------------------

def _flip_signs(rng, arr):
    """Give every entry of a float array an independent uniform random sign.

    Uses one random bit per entry, applied to the IEEE sign bit in place.
    """
    flat = arr.reshape(-1)
    nbits = flat.size
    bits = np.unpackbits(np.frombuffer(rng.bytes((nbits + 7) // 8), dtype=np.uint8), count=nbits)
    if arr.dtype == np.float32:
        flat.view(np.uint32)[...] ^= bits.astype(np.uint32) << np.uint32(31)
    else:
        flat.view(np.uint64)[...] ^= bits.astype(np.uint64) << np.uint64(63)
    return arr


def sphere_linf(rng, count, dim, dtype=np.float64):
    """Uniform points on the boundary of ``[-1, 1]^dim``.

    Facets have equal area, so pick one uniformly, pin that coordinate to
    +-1 and draw the rest uniformly on ``[-1, 1]``.
    """
    u = rng.random((count, dim), dtype=dtype)
    u *= 2
    u -= 1
    face = rng.integers(0, dim, size=count)
    sign = np.where(rng.random(count) < 0.5, -1.0, 1.0).astype(dtype)
    u[np.arange(count), face] = sign
    return u


def sphere_l1(rng, count, dim, dtype=np.float64):
    """Uniform points on the unit l1 sphere (signed flat Dirichlet)."""
    e = rng.standard_exponential((count, dim), dtype=dtype)
    e /= e.sum(axis=1, keepdims=True, dtype=np.float64).astype(dtype)
    return _flip_signs(rng, e)


def sphere_l2(rng, count, dim, dtype=np.float64):
    """Uniform points on the unit Euclidean sphere."""
    g = rng.standard_normal((count, dim), dtype=dtype)
    g /= np.sqrt(np.einsum("ij,ij->i", g, g, dtype=np.float64)).astype(dtype)[:, None]
    return g


_SPHERES = {"linf": sphere_linf, "l1": sphere_l1, "l2": sphere_l2}


# --- sampling ----------------------------------------------------------------

def sample(spec: NoiseSpec, rng: np.random.Generator, count: int, dtype=np.float64) -> np.ndarray:
    """Draw ``count`` i.i.d. noise vectors as a ``(count, dim)`` array.

    ``dtype=float32`` halves memory traffic for large batches; the
    distribution is the same up to float32 rounding.
    """
    count = int(count)
    if count < 1:
        raise ValueError("count must be positive")
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be float32 or float64")
    d, f, lam = spec.dim, spec.family, spec.lam
    shape = (count, d)
    if f == "gaussian":
        out = rng.standard_normal(shape, dtype=dtype)
    elif f == "laplace":
        out = _flip_signs(rng, rng.standard_exponential(shape, dtype=dtype))
    elif f == "uniform_linf":
        out = rng.random(shape, dtype=dtype)
        out *= 2
        out -= 1
    elif f == "exp_lp_iid":
        out = _sample_exp_lp(spec.p, rng, shape, dtype)
    elif f == "pareto_iid":
        # 1 - U lies in (0, 1], so the power never overflows
        w = rng.random(shape, dtype=dtype)
        np.subtract(1, w, out=w)
        w **= dtype.type(-1 / spec.a)
        w -= 1
        out = _flip_signs(rng, w)
    else:
        r = _radial_sample(spec, rng, count, dtype)
        out = _SPHERES[RADIAL_NORM[f]](rng, count, d, dtype)
        out *= (r * lam).astype(dtype)[:, None]
        return out
    if lam != 1.0:
        out *= dtype.type(lam)
    return out


def _sample_exp_lp(p, rng, shape, dtype):
    if p == 2:
        # Gamma(1/2)^(1/2) with a random sign is N(0, 1/2)
        out = rng.standard_normal(shape, dtype=dtype)
        out *= dtype.type(math.sqrt(0.5))
        return out
    if p == 1:
        return _flip_signs(rng, rng.standard_exponential(shape, dtype=dtype))
    mag = rng.standard_gamma(1 / p, shape, dtype=dtype)
    mag **= dtype.type(1 / p)
    return _flip_signs(rng, mag)


def sample_chunks(spec: NoiseSpec, rng: np.random.Generator, count: int, chunk: int = 4096, dtype=np.float64):
    """Yield samples in blocks of at most ``chunk`` rows."""
    left = int(count)
    while left > 0:
        n = min(chunk, left)
        yield sample(spec, rng, n, dtype)
        left -= n


# --- densities -------------------------------------------------------------

def _norm(x, kind):
    x = np.abs(x)
    if kind == "linf":
        return np.max(x, axis=-1)
    if kind == "l1":
        return np.sum(x, axis=-1)
    return np.sqrt(np.sum(x * x, axis=-1))


def log_density(spec: NoiseSpec, x):
    """Unnormalised log density; ``log q(x) = log_density - log_norm_const``.

    Families with ``j > 0`` are singular at the origin and return ``+inf``
    there.  Points outside a bounded support give ``-inf``.
    """
    x = np.asarray(x, dtype=float) / spec.lam
    if x.shape[-1] != spec.dim:
        raise ValueError(f"last axis must have length {spec.dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    f = spec.family
    if f == "gaussian":
        return -0.5 * np.sum(x * x, axis=-1)
    if f == "laplace":
        return -np.sum(np.abs(x), axis=-1)
    if f == "exp_lp_iid":
        return -np.sum(np.abs(x) ** spec.p, axis=-1)
    if f == "pareto_iid":
        return -(spec.a + 1) * np.sum(np.log1p(np.abs(x)), axis=-1)
    r = _norm(x, RADIAL_NORM[f])
    if f in ("uniform_linf", "uniform_l2"):
        return np.where(r <= 1, 0.0, -np.inf)
    if f in ("exp_linf", "exp_l2", "exp_l1"):
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -(r ** spec.k)
            if f != "exp_l1" and spec.j > 0:
                val = np.where(r > 0, val - spec.j * np.log(r), np.inf)
        return val
    if f == "power_linf":
        return -spec.a * np.log1p(r)
    if f == "power_l2":
        return -spec.a * np.log1p(r ** spec.k)
    raise AssertionError(f)


def log_unit_ball_volume(kind: str, d: int) -> float:
    if kind == "linf":
        return d * math.log(2)
    if kind == "l1":
        return d * math.log(2) - math.lgamma(d + 1)
    if kind == "l2":
        return d / 2 * math.log(math.pi) - math.lgamma(d / 2 + 1)
    raise ValueError(f"unknown norm {kind!r}")


def log_norm_const(spec: NoiseSpec) -> float:
    """``log`` of the integral of ``exp(log_density)`` over R^d.

    Radial families use ``int g(||x||) dx = d Vol(B) int g(r) r^(d-1) dr``.
    """
    d, f = spec.dim, spec.family
    scale = d * math.log(spec.lam)
    lg = math.lgamma
    if f == "gaussian":
        return d / 2 * math.log(2 * math.pi) + scale
    if f == "laplace":
        return d * math.log(2) + scale
    if f == "exp_lp_iid":
        return d * math.log(2 * math.gamma(1 + 1 / spec.p)) + scale
    if f == "pareto_iid":
        return d * math.log(2 / spec.a) + scale
    kind = RADIAL_NORM[f]
    log_cone = math.log(d) + log_unit_ball_volume(kind, d)
    if f in ("uniform_linf", "uniform_l2"):
        return log_unit_ball_volume(kind, d) + scale
    if f in ("exp_linf", "exp_l2"):
        return log_cone + lg((d - spec.j) / spec.k) - math.log(spec.k) + scale
    if f == "exp_l1":
        return log_cone + lg(d / spec.k) - math.log(spec.k) + scale
    if f == "power_linf":
        return log_cone + float(sc.betaln(d, spec.a - d)) + scale
    if f == "power_l2":
        return log_cone + float(sc.betaln(d / spec.k, spec.a - d / spec.k)) - math.log(spec.k) + scale
    raise AssertionError(f)


# --- coordinate marginals -----------------------------------------------------

def coordinate_cdf(spec: NoiseSpec, t):
    """Marginal CDF of one coordinate for the i.i.d. families."""
    if spec.family not in IID_FAMILIES:
        raise UnsupportedOperation(f"coordinate_cdf needs an i.i.d. family, got {spec.family}")
    z = np.asarray(t, dtype=float) / spec.lam
    f = spec.family
    if f == "gaussian":
        out = specfun.gaussian_cdf(z)
    elif f == "laplace":
        out = np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0)), 1 - 0.5 * np.exp(-np.maximum(z, 0)))
    elif f == "uniform_linf":
        out = np.clip((z + 1) / 2, 0.0, 1.0)
    elif f == "exp_lp_iid":
        half = 0.5 * sc.gammainc(1 / spec.p, np.abs(z) ** spec.p)
        out = 0.5 + np.sign(z) * half
    else:  # pareto_iid
        tail = 0.5 * (1 + np.abs(z)) ** (-spec.a)
        out = np.where(z > 0, 1 - tail, tail)
    return specfun._out(out)


def coordinate_sf(spec: NoiseSpec, t):
    """``1 - coordinate_cdf``, computed from the lower tail by symmetry."""
    return coordinate_cdf(spec, -np.asarray(t, dtype=float))


def coordinate_ppf(spec: NoiseSpec, u):
    """Inverse of :func:`coordinate_cdf` on ``(0, 1)``."""
    if spec.family not in IID_FAMILIES:
        raise UnsupportedOperation(f"coordinate_ppf needs an i.i.d. family, got {spec.family}")
    u = np.asarray(specfun._unit_interval("u", u), dtype=float)
    f = spec.family
    s = np.sign(u - 0.5)
    m = np.abs(2 * u - 1)          # P[|z| <= t]
    tail = np.minimum(u, 1 - u)    # one-sided tail mass, kept exact
    with np.errstate(divide="ignore"):
        if f == "gaussian":
            z = specfun.gaussian_cdf_inv(u)
        elif f == "laplace":
            z = -s * np.log(2 * tail)
        elif f == "uniform_linf":
            z = 2 * u - 1
        elif f == "exp_lp_iid":
            z = s * specfun.gamma_cdf_inv(m, 1 / spec.p) ** (1 / spec.p)
        else:
            z = s * ((2 * tail) ** (-1 / spec.a) - 1)
    return specfun._out(spec.lam * np.asarray(z))
