"""Special functions used by the radius formulas.

Forward evaluations delegate to :mod:`scipy.special`.  Inverse CDFs start
from SciPy's estimate and are polished by a safeguarded Newton step so that
round trips hold to the relative tolerance in :data:`POLICY`.  Every public
function accepts scalars or arrays and returns the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances shared by every numerical routine in the package."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    quad_rel_tol: float = 1e-8
    rho_max: float = 1.0 - 1e-12


POLICY = NumericPolicy()


def _finite(name, x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {x!r}")
    return arr


def _positive(name, x):
    arr = _finite(name, x)
    if np.any(arr <= 0):
        raise ValueError(f"{name} must be positive, got {x!r}")
    return arr


def _unit_interval(name, x, *, closed_right=True):
    arr = _finite(name, x)
    hi_bad = arr > 1 if closed_right else arr >= 1
    if np.any(arr < 0) or np.any(hi_bad):
        bound = "[0, 1]" if closed_right else "[0, 1)"
        raise ValueError(f"{name} must lie in {bound}, got {x!r}")
    return arr


def _out(arr):
    arr = np.asarray(arr, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def _newton_polish(x, target, cdf, pdf, lo, hi, iters=3):
    """Refine ``x`` so that ``cdf(x) == target``, never leaving ``[lo, hi]``."""
    x = np.array(x, dtype=float, copy=True)
    for _ in range(iters):
        with np.errstate(all="ignore"):
            resid = cdf(x) - target
            dens = pdf(x)
            step = np.where(dens > 0, resid / dens, 0.0)
            cand = x - step
        ok = np.isfinite(cand) & (cand > lo) & (cand < hi)
        if not np.any(ok):
            break
        with np.errstate(all="ignore"):
            better = np.abs(cdf(cand) - target) <= np.abs(resid)
        x = np.where(ok & better, cand, x)
    return x


# --- gamma ---------------------------------------------------------------

def gamma_cdf(x, shape):
    """Regularized lower incomplete gamma ``P(shape, x)``."""
    x = _finite("x", x)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    shape = _positive("shape", shape)
    return _out(sc.gammainc(shape, x))


def gamma_sf(x, shape):
    """Upper tail ``Q(shape, x) = 1 - P(shape, x)`` without cancellation."""
    x = _finite("x", x)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    shape = _positive("shape", shape)
    return _out(sc.gammaincc(shape, x))


def _gamma_pdf(x, shape):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.exp((shape - 1) * np.log(x) - x - sc.gammaln(shape))


def gamma_cdf_inv(p, shape):
    """Inverse of :func:`gamma_cdf` in ``x``.  ``p == 1`` gives ``inf``."""
    p = _unit_interval("p", p)
    shape = _positive("shape", shape)
    p, shape = np.broadcast_arrays(p, shape)
    x0 = sc.gammaincinv(shape, p)
    x = _newton_polish(x0, p, lambda t: sc.gammainc(shape, t),
                       lambda t: _gamma_pdf(t, shape), 0.0, np.inf)
    x = np.where(p == 0, 0.0, np.where(p == 1, np.inf, x))
    return _out(x)


def gamma_sf_inv(q, shape):
    """``x`` with ``gamma_sf(x, shape) == q``; accurate when ``q`` is tiny."""
    q = _unit_interval("q", q)
    shape = _positive("shape", shape)
    q, shape = np.broadcast_arrays(q, shape)
    x0 = sc.gammainccinv(shape, q)
    x = _newton_polish(x0, -q, lambda t: -sc.gammaincc(shape, t),
                       lambda t: _gamma_pdf(t, shape), 0.0, np.inf)
    x = np.where(q == 1, 0.0, np.where(q == 0, np.inf, x))
    return _out(x)


# --- beta ------------------------------------------------------------------

def beta_cdf(x, a, b):
    """Regularized incomplete beta ``I_x(a, b)``."""
    x = _unit_interval("x", x)
    a = _positive("a", a)
    b = _positive("b", b)
    return _out(sc.betainc(a, b, x))


def _beta_pdf(x, a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.exp((a - 1) * np.log(x) + (b - 1) * np.log1p(-x) - sc.betaln(a, b))


def beta_cdf_inv(p, a, b):
    """Inverse of :func:`beta_cdf` in ``x``."""
    p = _unit_interval("p", p)
    a = _positive("a", a)
    b = _positive("b", b)
    p, a, b = np.broadcast_arrays(p, a, b)
    x0 = sc.betaincinv(a, b, p)
    x = _newton_polish(x0, p, lambda t: sc.betainc(a, b, t),
                       lambda t: _beta_pdf(t, a, b), 0.0, 1.0)
    x = np.where(p == 0, 0.0, np.where(p == 1, 1.0, x))
    return _out(x)


def beta_prime_cdf(x, a, b):
    """CDF of the beta prime law, ``I_{x/(1+x)}(a, b)``."""
    x = _finite("x", x)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    a = _positive("a", a)
    b = _positive("b", b)
    with np.errstate(divide="ignore"):
        # for x > 1 use the complementary tail so 1/(1+x) keeps full precision
        lo = sc.betainc(a, b, x / (1 + x))
        hi = 1.0 - sc.betainc(b, a, 1 / (1 + x))
    return _out(np.where(x <= 1, lo, hi))


def beta_prime_sf(x, a, b):
    """Upper tail of the beta prime law."""
    x = _finite("x", x)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    a = _positive("a", a)
    b = _positive("b", b)
    return _out(sc.betainc(b, a, 1 / (1 + x)))


def beta_prime_cdf_inv(p, a, b):
    """Inverse of :func:`beta_prime_cdf`.  ``p == 1`` gives ``inf``."""
    p = _unit_interval("p", p)
    a = _positive("a", a)
    b = _positive("b", b)
    p, a, b = np.broadcast_arrays(p, a, b)
    y = np.asarray(beta_cdf_inv(np.minimum(p, 0.5), a, b))
    z = np.asarray(beta_cdf_inv(np.minimum(1 - p, 0.5), b, a))  # z = 1/(1+x)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(p <= 0.5, y / (1 - y), (1 - z) / z)
    x = np.where(p == 1, np.inf, x)
    return _out(x)


def beta_prime_sf_inv(q, a, b):
    """``x`` with upper tail ``beta_prime_sf(x, a, b) == q``; exact for tiny ``q``."""
    q = _unit_interval("q", q)
    a = _positive("a", a)
    b = _positive("b", b)
    z = np.asarray(beta_cdf_inv(q, b, a))  # z = 1/(1+x)
    with np.errstate(divide="ignore"):
        x = np.where(z <= 0.5, (1 - z) / z, 1 / z - 1)
    return _out(x)


def beta_prime_pdf(x, a, b):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return _out(np.exp((a - 1) * np.log(x) - (a + b) * np.log1p(x) - sc.betaln(a, b)))


def gamma_pdf(x, shape):
    return _out(_gamma_pdf(np.asarray(x, dtype=float), shape))


def beta_pdf(x, a, b):
    return _out(_beta_pdf(np.asarray(x, dtype=float), a, b))


# --- gaussian ------------------------------------------------------------

def gaussian_cdf(x):
    """Standard normal CDF."""
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise ValueError("x must not be NaN")
    return _out(sc.ndtr(x))


def gaussian_cdf_inv(p):
    """Standard normal quantile; ``0 -> -inf`` and ``1 -> inf``."""
    p = _unit_interval("p", p)
    return _out(sc.ndtri(p))


def gaussian_pdf(x):
    x = np.asarray(x, dtype=float)
    return _out(np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi))


# --- binomial ------------------------------------------------------------

def _log_binom_pmf_half(d):
    m = np.arange(d + 1)
    return sc.gammaln(d + 1) - sc.gammaln(m + 1) - sc.gammaln(d - m + 1) - d * math.log(2)


def binomial_tail(d: int, j: int) -> float:
    """``P[Binom(d, 1/2) > j]`` summed in log space over the shorter tail."""
    d, j = int(d), int(j)
    if d < 1:
        raise ValueError("d must be a positive integer")
    if not 0 <= j <= d:
        raise ValueError(f"j must lie in [0, {d}], got {j}")
    if j == d:
        return 0.0
    logpmf = _log_binom_pmf_half(d)
    if j >= d // 2:
        return float(np.exp(sc.logsumexp(logpmf[j + 1:])))
    return float(-np.expm1(sc.logsumexp(logpmf[: j + 1])))


def binomial_tail_inv(d: int, q: float) -> int:
    """Smallest ``j`` in ``[0, d]`` with ``binomial_tail(d, j) <= q``."""
    d = int(d)
    if d < 1:
        raise ValueError("d must be a positive integer")
    q = float(_unit_interval("q", q))
    logpmf = _log_binom_pmf_half(d)
    # tails[j] = P[X > j]
    rev = np.logaddexp.accumulate(logpmf[::-1])[::-1]
    tails = np.append(np.exp(rev[1:]), 0.0)
    idx = np.nonzero(tails <= q)[0]
    return int(idx[0])


# --- hypergeometric instance --------------------------------------------

def hyp2f1_special(a_param: float, z: float) -> float:
    """``2F1(1, b; b + 1; z)`` with ``b = a/(a+1)``, for ``0 <= z < 1``.

    Small ``z`` uses the defining series ``sum b z^n / (b + n)``.  Above 1/2
    the series converges slowly, so the logarithmic connection formula
    around ``z = 1`` (``c - a - b = 0``) is used instead.
    """
    a_param = float(_positive("a_param", a_param))
    z = float(_finite("z", z))
    if not 0 <= z < 1:
        raise ValueError(f"z must lie in [0, 1), got {z}")
    b = a_param / (a_param + 1)
    if z <= 0.5:
        total, zn, n = 0.0, 1.0, 0
        while True:
            term = b * zn / (b + n)
            total += term
            if term <= 1e-17 * total:
                return total
            n += 1
            zn *= z
    w = 1 - z
    lw = math.log(w)
    coef = 1.0                      # (b)_n / n!
    psi1 = float(sc.digamma(1.0))   # psi(n + 1)
    psib = float(sc.digamma(b))     # psi(b + n)
    wn = 1.0
    total = 0.0
    n = 0
    while True:
        term = coef * (psi1 - psib - lw) * wn
        total += term
        if abs(term) < 1e-17 * abs(total) and n > 2:
            return b * total
        psi1 += 1.0 / (n + 1)
        psib += 1.0 / (b + n)
        coef *= (b + n) / (n + 1)
        wn *= w
        n += 1


# --- polylogarithm -------------------------------------------------------

def polylog(n: int, z: float) -> float:
    """``Li_n(z) = sum z^k / k^n`` for integer ``n >= 1`` and ``z`` in [0, 1]."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be a positive integer")
    z = float(_unit_interval("z", z))
    if n == 1:
        if z == 1:
            raise ValueError("polylog(1, 1) diverges")
        return -math.log1p(-z)
    if z == 0:
        return 0.0
    if z == 1:
        return float(sc.zeta(n))
    if z <= 0.5:
        total, k, zk = 0.0, 1, z
        while True:
            term = zk / k ** n
            total += term
            if term <= 1e-17 * total:
                return total
            k += 1
            zk *= z
    # expansion in mu = ln z, convergent for |mu| < 2 pi
    mu = math.log(z)
    harmonic = math.fsum(1.0 / i for i in range(1, n))
    total = mu ** (n - 1) / math.factorial(n - 1) * (harmonic - math.log(-mu))
    # |mu| < ln 2 here, so the terms decay at least like (ln 2 / 2 pi)^k
    terms = []
    fact = 1.0
    for k in range(0, n + 40):
        if k > 0:
            fact *= k
        if k == n - 1:
            continue
        terms.append(float(sc.zeta(n - k)) * mu ** k / fact)
    return math.fsum(terms) + total
