"""Certified radii for (noise, adversary) pairs.

Two routes are provided.  Closed forms cover the rows that have them.  The
generic route evaluates the master integral ``R = lam * int_{1-rho}^{1/2}
dp / Phi(p)`` where ``Phi`` is the worst-case infinitesimal growth rate of
a set of measure ``p``.  When ``Phi(p) = phibar(phi^{-1}(p))`` is known in
factored form, the integral is taken in the threshold variable ``c`` so the
inverse CDF never appears inside the integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy import optimize
from scipy import special as sc

from . import specfun as sf
from .noise import IID_FAMILIES, NoiseSpec, coordinate_ppf
from .quadrature import adaptive_simpson
from .specfun import POLICY

NOT_CERTIFIED = "not_certified"
CONSERVATIVE = "conservative"
SUPREMUM = "supremum"

_QUAD_REL = 1e-10
_TINY_MASS = 1e-18  # probability mass neglected when clipping a threshold range


class Adversary(str, Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @classmethod
    def parse(cls, value) -> "Adversary":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("ℓ", "l").replace("∞", "inf")
        key = {"1": "l1", "2": "l2", "inf": "linf", "l_inf": "linf", "l_1": "l1", "l_2": "l2"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown adversary {value!r}; expected l1, l2 or linf") from None

    def __str__(self):
        return self.value


class Method(str, Enum):
    CLOSED_FORM = "ClosedForm"
    DIFFERENTIAL = "DifferentialQuadrature"
    LEVEL_SET = "LevelSetTable"

    def __str__(self):
        return self.value


class UnsupportedPair(ValueError):
    """No radius is available for this (family, adversary) combination."""

    def __init__(self, family: str, adversary, alternatives=()):
        self.family = family
        self.adversary = str(adversary)
        self.alternatives = tuple(alternatives)
        msg = f"no certified radius for {family} against {self.adversary}"
        if self.alternatives:
            msg += "; alternatives: " + "; ".join(self.alternatives)
        super().__init__(msg)


@dataclass(frozen=True)
class CertifiedRadius:
    value: float
    method: Method
    adversary: Adversary
    rho: float
    spec: NoiseSpec | None = None
    flags: tuple = ()

    @property
    def certified(self) -> bool:
        return self.value > 0

    def __float__(self):
        return float(self.value)

    def to_dict(self) -> dict:
        return {
            "radius": self.value,
            "method": self.method.value,
            "adversary": self.adversary.value,
            "rho": self.rho,
            "spec": None if self.spec is None else self.spec.to_text(),
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class FactoredPhi:
    """``Phi(p) = phibar(phi^{-1}(p))`` exposed through the threshold ``c``.

    ``limits(p0, p_hi)`` returns ``(c_lo, c_hi, extra)``: the master integral
    over ``[p0, p_hi]`` equals ``int_{c_lo}^{c_hi} integrand(c) dc + extra``,
    where ``extra`` is an analytic contribution from a clipped end.
    """

    integrand: Callable[[float], float]
    limits: Callable[[float, float], tuple]
    log_variable: bool = True


@dataclass(frozen=True)
class PhiFunction:
    """Worst-case growth rate ``Phi(p)`` for ``p`` in ``[p_min, 1/2]``.

    ``base`` evaluates ``Phi`` at unit scale; the radius scales linearly with
    ``lam``.  ``Phi`` is constant on ``[p_flat, 1/2]``.  ``bounded`` marks
    pairs whose master integral stays finite as ``p -> 0``.
    """

    base: Callable[[float], float]
    lam: float = 1.0
    p_min: float = 0.0
    p_flat: float = 0.5
    bounded: bool = False
    breakpoints: tuple = ()
    factored: FactoredPhi | None = None
    label: str = ""

    def __call__(self, p: float) -> float:
        p = float(p)
        if not (self.p_min <= p <= 0.5) or p <= 0:
            raise ValueError(f"p={p!r} outside the validity range ({self.p_min}, 1/2]")
        return self.base(p) / self.lam

    def scaled(self, factor: float) -> "PhiFunction":
        """``factor * Phi``; the radius shrinks by the same factor."""
        base = self.base
        fac = self.factored
        if fac is not None:
            inner = fac.integrand
            fac = FactoredPhi(lambda c: inner(c) / factor, fac.limits, fac.log_variable)
        return PhiFunction(lambda p: factor * base(p), self.lam, self.p_min, self.p_flat,
                           self.bounded, self.breakpoints, fac, self.label)


# --- master integral ----------------------------------------------------------

def _check_rho(rho) -> float:
    rho = float(rho)
    if not (math.isfinite(rho) and 0.0 <= rho <= 1.0):
        raise ValueError(f"rho must lie in [0, 1], got {rho!r}")
    return rho


def _direct_integral(phi: PhiFunction, lo: float, hi: float) -> float:
    """``int_lo^hi dp / base(p)``: log-spaced near 0, linear elsewhere."""
    base = phi.base
    split = min(hi, 0.1)
    total = 0.0
    if lo == 0.0:
        val, _ = adaptive_simpson(lambda p: 1.0 / base(p), 0.0, hi, rel_tol=_QUAD_REL,
                                  abs_tol=1e-15, breakpoints=phi.breakpoints)
        return val
    if lo < split:
        knots = [math.log(b) for b in phi.breakpoints if lo < b < split]
        val, _ = adaptive_simpson(lambda t: math.exp(t) / base(math.exp(t)), math.log(lo),
                                  math.log(split), rel_tol=_QUAD_REL, abs_tol=1e-15, breakpoints=knots)
        total += val
    a = max(lo, split)
    if a < hi:
        val, _ = adaptive_simpson(lambda p: 1.0 / base(p), a, hi, rel_tol=_QUAD_REL,
                                  abs_tol=1e-15, breakpoints=phi.breakpoints)
        total += val
    return total


def _factored_integral(fac: FactoredPhi, lo: float, hi: float) -> float:
    c_lo, c_hi, extra = fac.limits(lo, hi)
    if not c_hi > c_lo:
        return extra
    if fac.log_variable:
        g = fac.integrand
        val, _ = adaptive_simpson(lambda t: math.exp(t) * g(math.exp(t)), math.log(c_lo),
                                  math.log(c_hi), rel_tol=_QUAD_REL, abs_tol=1e-15)
    else:
        val, _ = adaptive_simpson(fac.integrand, c_lo, c_hi, rel_tol=_QUAD_REL, abs_tol=1e-15)
    return val + extra


def integrate_inverse_phi(phi: PhiFunction, rho, *, use_factored: bool | None = None,
                          spec: NoiseSpec | None = None, adversary=Adversary.L2) -> CertifiedRadius:
    """Evaluate ``lam * int_{1-rho}^{1/2} dp / Phi(p)``.

    The factored threshold form is used when available unless
    ``use_factored`` is False.  ``rho`` above ``POLICY.rho_max`` gives the
    supremum for bounded integrals and ``inf`` otherwise.
    """
    rho = _check_rho(rho)
    adversary = Adversary.parse(adversary)

    def result(value, flags=()):
        return CertifiedRadius(value, Method.DIFFERENTIAL, adversary, rho, spec, tuple(flags))

    if rho <= 0.5:
        return result(0.0, (NOT_CERTIFIED,))
    flags = []
    if rho > POLICY.rho_max:
        if not phi.bounded:
            return result(math.inf)
        p0 = 0.0
        flags.append(SUPREMUM)
    else:
        p0 = 1.0 - rho
    if p0 < phi.p_min:
        raise ValueError(f"rho={rho} needs p={p0} below the validity range start {phi.p_min}")
    if use_factored and phi.factored is None:
        raise ValueError("this Phi has no factored form")
    use = phi.factored is not None if use_factored is None else use_factored
    if p0 == 0.0 and not use and phi.p_flat > 0:
        raise ValueError("the supremum needs the factored form of Phi")

    total = 0.0
    hi = 0.5
    if phi.p_flat < 0.5:
        total += (0.5 - max(p0, phi.p_flat)) / phi.base(0.5)
        hi = phi.p_flat
    if p0 < hi:
        if use:
            total += _factored_integral(phi.factored, p0, hi)
        else:
            total += _direct_integral(phi, p0, hi)
    return result(phi.lam * total, flags)


# --- Phi constructions (unit scale) -------------------------------------------

def _gauss_phi() -> PhiFunction:
    base = lambda p: math.exp(-0.5 * sc.ndtri(p) ** 2) / math.sqrt(2 * math.pi)
    fac = FactoredPhi(lambda c: 1.0, lambda lo, hi: (0.0, -float(sc.ndtri(lo)), 0.0), log_variable=False)
    return PhiFunction(base, factored=fac, label="gaussian")


def _laplace_l1_phi() -> PhiFunction:
    fac = FactoredPhi(lambda c: 1.0, lambda lo, hi: (0.0, -math.log(2 * lo), 0.0), log_variable=False)
    return PhiFunction(lambda p: p, factored=fac, label="laplace-l1")


class _SignSum:
    """Law of the sum of ``d`` Rademacher signs restricted to values >= 0.

    Atoms are listed in decreasing order; ``start[i]`` is the mass strictly
    above atom ``i`` and ``moment[i]`` is the first moment of that mass.
    Atoms whose mass underflows are dropped.
    """

    def __init__(self, d: int):
        m = np.arange(d, (d - 1) // 2, -1)
        vals = (2 * m - d).astype(float)
        logw = sc.gammaln(d + 1) - sc.gammaln(m + 1) - sc.gammaln(d - m + 1) - d * math.log(2)
        w = np.exp(logw)
        keep = (w > 0) & (vals >= 0)
        self.values, self.weights = vals[keep], w[keep]
        self.start = np.concatenate([[0.0], np.cumsum(self.weights)[:-1]])
        self.moment = np.concatenate([[0.0], np.cumsum(self.values * self.weights)[:-1]])
        pos = self.values > 0
        self.positive_mass = float(self.weights[pos].sum())
        self.positive_moment = float((self.values * self.weights)[pos].sum())


def _laplace_linf_phi(d: int) -> PhiFunction:
    law = _SignSum(d)
    start, moment, vals = law.start, law.moment, law.values

    def base(p):
        i = int(np.searchsorted(start, p, side="right")) - 1
        return moment[i] + vals[i] * (p - start[i])

    p_flat = law.positive_mass if d % 2 == 0 else 0.5
    knots = tuple(float(t) for t in start if 0 < t < 0.5)
    return PhiFunction(base, p_flat=p_flat, breakpoints=knots, label="laplace-linf")


def laplace_linf_radius(d: int, rho: float) -> float:
    """Unit-scale master integral for Laplace noise against l_inf, piecewise exact.

    Between consecutive atoms of the sign-sum law ``Phi`` is affine in ``p``,
    so each piece integrates to a logarithm.
    """
    rho = _check_rho(rho)
    if rho <= 0.5:
        return 0.0
    if rho > POLICY.rho_max:
        return math.inf
    p0 = 1.0 - rho
    law = _SignSum(d)
    total = []
    for c, w, t, s in zip(law.values, law.weights, law.start, law.moment):
        lo, hi = max(p0, t), min(0.5, t + w)
        if hi <= lo:
            if t >= 0.5:
                break
            continue
        if c == 0:
            total.append((hi - lo) / s)
        else:
            at_lo = s + c * (lo - t)
            total.append(math.log1p(c * (hi - lo) / at_lo) / c)
    return math.fsum(total)


def _upper_gamma_phi(s: float, t: float, const: float, label: str) -> PhiFunction:
    """``Phi(p) = const * Q(Q^{-1}(2p; s); s + t)``, ``Q`` the upper regularized gamma."""

    def base(p):
        return const * float(sc.gammaincc(s + t, sf.gamma_sf_inv(2 * p, s)))

    def integrand(c):
        # |dp/dc| = g(c; s)/2 with g the Gamma(s) density
        logg = (s - 1) * math.log(c) - c - sc.gammaln(s)
        return 0.5 * math.exp(logg) / (const * sc.gammaincc(s + t, c))

    def limits(lo, hi):
        c_hi = sf.gamma_sf_inv(2 * lo, s)
        c_lo = sf.gamma_cdf_inv(_TINY_MASS, s)
        # the clipped range carries p-mass _TINY_MASS/2 at rate Phi(1/2) = const
        return c_lo, c_hi, 0.5 * _TINY_MASS / const if c_hi > c_lo else (0.5 - lo) / const

    return PhiFunction(base, factored=FactoredPhi(integrand, limits), label=label)


def _lower_gamma_phi(s: float, t: float, const: float, label: str) -> PhiFunction:
    """``Phi(p) = const * P(P^{-1}(2p; s); s + t)`` with ``t < 0``; the integral is bounded."""

    def base(p):
        return const * float(sc.gammainc(s + t, sf.gamma_cdf_inv(2 * p, s)))

    def integrand(c):
        logg = (s - 1) * math.log(c) - c - sc.gammaln(s)
        return 0.5 * math.exp(logg) / (const * sc.gammainc(s + t, c))

    # near c = 0 the integrand behaves like coef * c^(-t-1)
    coef = math.exp(sc.gammaln(s + t + 1) - sc.gammaln(s)) / (2 * const)

    def limits(lo, hi):
        c_hi = sf.gamma_sf_inv(_TINY_MASS, s)
        extra = 0.5 * _TINY_MASS / const
        if lo > 0:
            return sf.gamma_cdf_inv(2 * lo, s), c_hi, extra
        c_lo = 1e-10 * max(1.0, s)
        return c_lo, c_hi, extra + coef * c_lo ** (-t) / (-t)

    return PhiFunction(base, bounded=True, factored=FactoredPhi(integrand, limits), label=label)


def _exp_linf_l1_phi(d: int, k: float, j: float) -> PhiFunction:
    if k == 1 and j == 0:
        cap = 1 / (2 * d)
        return PhiFunction(lambda p: min(p, cap), p_flat=cap, label="exp_linf-l1")
    const = (d - 1) / (2 * d) * math.exp(sc.gammaln((d - 1 - j) / k) - sc.gammaln((d - j) / k))
    return PhiFunction(lambda p: const, p_min=1 / (2 * d), p_flat=1 / (2 * d), label="exp_linf-l1")


def _exp_linf_linf_phi(d: int, k: float, j: float) -> PhiFunction:
    s = (d - j) / k
    t = (k - 1) / k
    if j == 0:
        const = 0.5 * k * math.exp(sc.gammaln(s + t) - sc.gammaln(s))
        return _upper_gamma_phi(s, t, const, "exp_linf-linf")
    return _radial_gamma_phi(s, k, j)


def _radial_gamma_phi(s: float, k: float, j: float) -> PhiFunction:
    """Phi for ``gamma = k xi^((k-1)/k) + j xi^(-1/k)``, ``xi ~ Gamma(s)``, times a fair sign.

    ``Phi(p) = phibar(phi^{-1}(2p)) / 2`` with ``phi(c) = P[gamma > c]``.  For
    ``k > 1`` the map is convex in ``xi`` with a single minimum, so the
    superlevel set is ``{xi < a} U {xi > b}``; for ``k = 1`` only ``xi < a``.
    """
    t = (k - 1) / k
    xi_star = j / (k * (k - 1)) if k > 1 else math.inf
    lg = sc.gammaln(s)
    m_pos = k * math.exp(sc.gammaln(s + t) - lg)
    m_neg = j * math.exp(sc.gammaln(s - 1 / k) - lg)

    def gam(x):
        return k * x ** t + j * x ** (-1 / k)

    g_min = gam(xi_star) if k > 1 else k  # k = 1: inf over xi is 1 (xi -> inf)

    def roots(c):
        # lower root a in (0, xi_star), upper root b in (xi_star, inf)
        f = lambda u: math.log(gam(math.exp(u))) - math.log(c)
        top = math.log(xi_star) if k > 1 else 700.0
        lo = top - 1.0
        while f(lo) <= 0:
            lo -= 2 * (top - lo)
        a = math.exp(optimize.brentq(f, lo, top, xtol=1e-15, rtol=1e-15)) if f(top) < 0 else math.exp(top)
        if k == 1:
            return a, math.inf
        hi = top + 1.0
        while f(hi) <= 0:
            hi += 2 * (hi - top)
        b = math.exp(optimize.brentq(f, top, hi, xtol=1e-15, rtol=1e-15))
        return a, b

    def tails(c):
        if c <= g_min:
            return 1.0, m_pos + m_neg
        a, b = roots(c)
        prob = sc.gammainc(s, a) + (sc.gammaincc(s, b) if b < math.inf else 0.0)
        lower = m_pos * sc.gammainc(s + t, a) + m_neg * sc.gammainc(s - 1 / k, a)
        upper = 0.0
        if b < math.inf:
            upper = m_pos * sc.gammaincc(s + t, b) + m_neg * sc.gammaincc(s - 1 / k, b)
        return float(prob), float(lower + upper)

    def base(p):
        q = 2 * p
        if q >= 1:
            return 0.5 * (m_pos + m_neg)
        lo, hi = g_min, 2 * g_min + 1
        while tails(hi)[0] > q:
            hi *= 2
        c = optimize.brentq(lambda c: tails(c)[0] - q, lo, hi, xtol=1e-14, rtol=1e-15)
        return 0.5 * tails(c)[1]

    return PhiFunction(base, label="exp_linf-linf")


def _exp_l2_phi(d: int) -> PhiFunction:
    h = (d - 1) / 2
    r_const = math.exp(sc.gammaln(d / 2) - sc.gammaln(h)) / math.sqrt(math.pi)

    def base(p):
        x = sf.beta_cdf_inv(p, h, h)
        return r_const / (d - 1) * math.exp(h * math.log(4 * x * (1 - x)))

    # threshold c = 1 - 2x with x the Beta quantile; the integrand in x is smooth
    fac = FactoredPhi(lambda x: (d - 1) / (2 * x * (1 - x)),
                      lambda lo, hi: (sf.beta_cdf_inv(lo, h, h), 0.5, 0.0))
    return PhiFunction(base, factored=fac, label="exp_l2")


def _exp_l1_l1_phi(d: int, k: float) -> PhiFunction:
    s = d / k
    t = (k - 1) / k
    const = 0.5 * k * math.exp(sc.gammaln(s + t) - sc.gammaln(s))
    if k >= 1:
        return _upper_gamma_phi(s, t, const, "exp_l1-l1")
    return _lower_gamma_phi(s, t, const, "exp_l1-l1")


def _exp_l1_linf_phi(d: int, k: float) -> PhiFunction:
    """Phi for ``gamma = S * k xi^t`` with ``S`` a sum of ``d`` signs and ``xi ~ Gamma(d/k)``."""
    s = d / k
    t = (k - 1) / k
    law = _SignSum(d)
    pos = law.values > 0
    vals, w = law.values[pos], law.weights[pos]
    ratio = math.exp(sc.gammaln(s + t) - sc.gammaln(s))
    coef = w * vals * k * ratio
    lgs = sc.gammaln(s)

    def xi_of(c):
        return (c / (k * vals)) ** (1 / t)

    def tail_prob(c):
        return float(np.dot(w, sc.gammaincc(s, xi_of(c))))

    def tail_moment(c):
        return float(np.dot(coef, sc.gammaincc(s + t, xi_of(c))))

    p_top = law.positive_mass
    flat_value = law.positive_moment * k * ratio

    def c_of(p):
        lo, hi = 1e-300, k * vals[-1] * sf.gamma_sf_inv(0.5, s) ** t
        while tail_prob(hi) > p:
            hi *= 2
        u = optimize.brentq(lambda u: math.log(tail_prob(math.exp(u))) - math.log(p),
                            math.log(hi) - 60, math.log(hi), xtol=1e-14, rtol=1e-15) \
            if tail_prob(hi * math.exp(-60)) > p else math.log(hi) - 60
        return math.exp(u)

    def base(p):
        if p >= p_top:
            return flat_value
        return tail_moment(c_of(p))

    def integrand(c):
        x = xi_of(c)
        dens = np.exp((s - 1) * np.log(x) - x - lgs)
        dphi = float(np.dot(w, dens * x)) / (t * c)
        return dphi / tail_moment(c)

    def limits(lo, hi):
        c_hi = c_of(lo)
        x_lo = sf.gamma_cdf_inv(_TINY_MASS, s)
        c_lo = k * vals[-1] * x_lo ** t
        return c_lo, c_hi, _TINY_MASS / flat_value

    p_flat = p_top if d % 2 == 0 else 0.5
    return PhiFunction(base, p_flat=p_flat, factored=FactoredPhi(integrand, limits), label="exp_l1-linf")


def _power_linf_linf_phi(d: int, a: float) -> PhiFunction:
    b0, b1 = a - d, a + 1 - d
    const = (a - d) / 2

    def base(p):
        if p >= 0.5:
            return const
        return const * sf.beta_prime_cdf(sf.beta_prime_cdf_inv(2 * p, d, b0), d, b1)

    lb = sc.betaln(d, b0)

    def integrand(c):
        dens = math.exp((d - 1) * math.log(c) - a * math.log1p(c) - lb)
        return 0.5 * dens / (const * sf.beta_prime_cdf(c, d, b1))

    def limits(lo, hi):
        c_hi = sf.beta_prime_sf_inv(_TINY_MASS, d, b0)
        return sf.beta_prime_cdf_inv(2 * lo, d, b0), c_hi, 0.5 * _TINY_MASS / const

    return PhiFunction(base, factored=FactoredPhi(integrand, limits), label="power_linf-linf")


def _exp_lp_phi(pe: float) -> PhiFunction:
    norm = 2 * math.gamma(1 + 1 / pe)
    if pe >= 1:
        base = lambda p: math.exp(-sf.gamma_sf_inv(2 * p, 1 / pe)) / norm
        fac = FactoredPhi(lambda c: 1.0,
                          lambda lo, hi: (0.0, sf.gamma_sf_inv(2 * lo, 1 / pe) ** (1 / pe), 0.0),
                          log_variable=False)
        return PhiFunction(base, factored=fac, label="exp_lp_iid")

    def base(p):
        return -math.expm1(-sf.gamma_cdf_inv(2 * p, 1 / pe)) / norm

    # in s = c^pe the integrand is s^(1/pe-1) / (pe (e^s - 1))
    e = 1 / pe

    def integrand(u):
        return math.exp(math.log(e) + (e - 1) * math.log(u) - u - math.log(-math.expm1(-u)))

    def limits(lo, hi):
        s_hi = 800.0
        if lo > 0:
            return sf.gamma_cdf_inv(2 * lo, e), s_hi, 0.0
        s_lo = 1e-12
        return s_lo, s_hi, e * s_lo ** (e - 1) / (e - 1)

    return PhiFunction(base, bounded=True, factored=FactoredPhi(integrand, limits), label="exp_lp_iid")


def _pareto_phi(a: float) -> PhiFunction:
    ex = (a + 1) / a

    def base(p):
        if p >= 0.5:
            return 0.5 * a
        return -0.5 * a * math.expm1(ex * math.log1p(-2 * p))

    return PhiFunction(base, label="pareto_iid")


_LEVEL_SET_HINT = "build a level-set table (levelset.build_table) for the l2 adversary"


def _unsupported(spec: NoiseSpec, adv: Adversary):
    f = spec.family
    alts = []
    if f in ("power_l2", "exp_l2"):
        alts.append(_LEVEL_SET_HINT)
    elif f in ("uniform_l2",) or (f == "uniform_linf" and adv == Adversary.L2):
        alts.append("certified_radius closed form against l1 or linf")
    supported = [a.value for a in Adversary if _supports(spec, a)]
    if supported:
        alts.append("supported adversaries for this spec: " + ", ".join(supported))
    return UnsupportedPair(f, adv, alts)


def phi_function(spec: NoiseSpec, adv) -> PhiFunction:
    """Growth-rate function for a (noise, adversary) pair, at the spec's scale."""
    adv = Adversary.parse(adv)
    f, d = spec.family, spec.dim
    phi = None
    if f == "gaussian":
        phi = _gauss_phi() if adv != Adversary.LINF else _gauss_phi().scaled(math.sqrt(d))
    elif f == "laplace" or (f == "exp_l1" and spec.k == 1):
        if adv == Adversary.L1:
            phi = _laplace_l1_phi()
        elif adv == Adversary.LINF:
            phi = _laplace_linf_phi(d)
    elif f == "uniform_linf" and adv == Adversary.L1:
        phi = PhiFunction(lambda p: 0.5, p_flat=0.0, bounded=True, label="uniform_linf-l1")
    elif f == "exp_linf":
        if adv == Adversary.L1 and spec.k >= 1 and spec.j < d - 1:
            phi = _exp_linf_l1_phi(d, spec.k, spec.j)
        elif adv == Adversary.LINF and spec.k >= 1 and spec.j < d - 1:
            phi = _exp_linf_linf_phi(d, spec.k, spec.j)
    elif f == "exp_l2" and spec.k == 1 and spec.j == 0 and d >= 2:
        phi = _exp_l2_phi(d)
        if adv == Adversary.LINF:
            phi = phi.scaled(math.sqrt(d))
    elif f == "exp_l2" and spec.k == 1 and spec.j == 0 and d == 1 and adv != Adversary.LINF:
        phi = _laplace_l1_phi()
    elif f == "exp_l1":
        if adv == Adversary.L1:
            phi = _exp_l1_l1_phi(d, spec.k)
        elif adv == Adversary.LINF and spec.k > 1:
            phi = _exp_l1_linf_phi(d, spec.k)
    elif f == "exp_lp_iid" and adv == Adversary.L1:
        phi = _exp_lp_phi(spec.p)
    elif f == "power_linf":
        if adv == Adversary.L1:
            phi = PhiFunction(lambda p, c=(spec.a - d) / (2 * d): c, p_flat=0.0, bounded=True,
                              label="power_linf-l1")
        elif adv == Adversary.LINF:
            phi = _power_linf_linf_phi(d, spec.a)
    elif f == "pareto_iid" and adv == Adversary.L1:
        phi = _pareto_phi(spec.a)
    if phi is None:
        raise _unsupported(spec, adv)
    return PhiFunction(phi.base, spec.lam, phi.p_min, phi.p_flat, phi.bounded, phi.breakpoints,
                       phi.factored, phi.label)


# --- closed forms ---------------------------------------------------------------

def pareto_radius_series(a: float, rho: float) -> float:
    """Unit-scale Pareto l1 radius from the hypergeometric closed form."""
    z = 2 * rho - 1
    if z >= 1:
        return math.inf
    return z / a * sf.hyp2f1_special(a, z ** (1 + 1 / a))


def pareto_radius_quadrature(a: float, rho: float) -> float:
    """Unit-scale Pareto l1 radius by quadrature of the master integral."""
    if rho >= 1:
        return math.inf
    return _direct_integral(_pareto_phi(a), 1 - rho, 0.5)


def exp_lp_logconvex_radius(pe: float, rho: float, method: str = "quadrature") -> float:
    """Unit-scale l1 radius for i.i.d. ``exp(-|x|^pe)`` noise with ``pe < 1``.

    ``(1/pe) int_{s0}^inf s^(1/pe - 1) / (e^s - 1) ds`` with
    ``s0 = GammaCDF^{-1}(2(1-rho); 1/pe)``.  ``method="polylog"`` uses the
    series form available when ``1/pe`` is an integer.
    """
    if not 0 < pe < 1:
        raise ValueError("the log-convex branch needs 0 < p < 1")
    if rho <= 0.5:
        return 0.0
    e = 1 / pe
    s0 = sf.gamma_cdf_inv(2 * (1 - rho), e) if rho < 1 else 0.0
    if method == "polylog":
        n = round(e)
        if abs(n - e) > 1e-12:
            raise ValueError("the polylog form needs 1/p to be an integer")
        if s0 == 0.0:
            return n * math.factorial(n - 1) * sf.polylog(n, 1.0)
        z = math.exp(-s0)
        terms = [math.factorial(n - 1) / math.factorial(n - 1 - m) * s0 ** (n - 1 - m) * sf.polylog(m + 1, z)
                 for m in range(n)]
        return n * math.fsum(terms)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    phi = _exp_lp_phi(pe)
    return _factored_integral(phi.factored, 1 - rho, 0.5)


def _uniform_l2_unit(d: int, rho: float) -> float:
    h = (d + 1) / 2
    return 2 - 4 * sf.beta_cdf_inv(0.75 - rho / 2, h, h)


def _exp_l2_unit(d: int, rho: float) -> float:
    if rho >= 1:
        return math.inf
    h = (d - 1) / 2
    x = sf.beta_cdf_inv(1 - rho, h, h)
    # artanh(1 - 2x) = (ln(1 - x) - ln x) / 2
    return (d - 1) * 0.5 * (math.log1p(-x) - math.log(x))


def _supports(spec: NoiseSpec, adv: Adversary) -> bool:
    return _find_route(spec, adv) is not None


def _route(spec: NoiseSpec, adv: Adversary):
    found = _find_route(spec, adv)
    if found is None:
        raise _unsupported(spec, adv)
    return found


def _find_route(spec: NoiseSpec, adv: Adversary):
    """Return ``(kind, unit_radius_fn, bounded)`` for a supported pair, else None.

    ``kind`` is ``"closed"`` or ``"phi"``; ``unit_radius_fn(rho)`` gives the
    unit-scale radius for ``rho`` in ``(1/2, 1]``.
    """
    f, d = spec.family, spec.dim
    L1, L2, LINF = Adversary.L1, Adversary.L2, Adversary.LINF
    root_d = math.sqrt(d)
    if f == "gaussian":
        scale = root_d if adv == LINF else 1.0
        return "closed", lambda r: float(sc.ndtri(r)) / scale if r < 1 else math.inf, False
    laplace_like = (f == "laplace" or (f == "exp_l1" and spec.k == 1)
                    or (f == "exp_l2" and d == 1 and spec.k == 1 and spec.j == 0))
    if laplace_like:
        if adv == L1 or d == 1:
            return "closed", lambda r: -math.log(2 * (1 - r)) if r < 1 else math.inf, False
        if adv == LINF:
            return "closed", lambda r: laplace_linf_radius(d, r), False
    if f == "uniform_linf":
        if adv == L1:
            return "closed", lambda r: 2 * (r - 0.5), True
        if adv == LINF:
            return "closed", lambda r: 2 * (1 - math.exp(math.log1p(0.5 - r) / d)), True
    if f == "uniform_l2":
        scale = root_d if adv == LINF else 1.0
        return "closed", lambda r: _uniform_l2_unit(d, r) / scale, True
    if f == "exp_linf" and spec.k >= 1 and spec.j < d - 1:
        k, j = spec.k, spec.j
        if adv == L1 and k == 1 and j == 0:
            def exp_linf_l1(r):
                if r <= 1 - 1 / (2 * d):
                    return 2 * d * (r - 0.5)
                return math.log(1 / (2 * d * (1 - r))) + (d - 1) if r < 1 else math.inf
            return "closed", exp_linf_l1, False
        if adv == L1:
            slope = 2 * d / (d - 1) * math.exp(sc.gammaln((d - j) / k) - sc.gammaln((d - 1 - j) / k))
            return "closed", lambda r: slope * (min(r, 1 - 1 / (2 * d)) - 0.5), True
        if adv == LINF and k == 1 and j == 0:
            return "closed", lambda r: math.log(1 / (2 * (1 - r))) if r < 1 else math.inf, False
        if adv == LINF:
            return "phi", None, False
    if f == "exp_l2" and spec.k == 1 and spec.j == 0 and d >= 2:
        scale = root_d if adv == LINF else 1.0
        return "closed", lambda r: _exp_l2_unit(d, r) / scale, False
    if f == "exp_l1":
        if adv == L1:
            return "phi", None, spec.k < 1
        if adv == LINF and spec.k > 1:
            return "phi", None, False
    if f == "exp_lp_iid" and adv == L1:
        pe = spec.p
        if pe >= 1:
            return "closed", lambda r: sf.gamma_cdf_inv(2 * r - 1, 1 / pe) ** (1 / pe) if r < 1 else math.inf, False
        polylog = abs(1 / pe - round(1 / pe)) < 1e-12 and round(1 / pe) in (2, 3, 4)
        return "closed", lambda r: exp_lp_logconvex_radius(pe, r, "polylog" if polylog else "quadrature"), True
    if f == "power_linf":
        if adv == L1:
            return "closed", lambda r: 2 * d / (spec.a - d) * (r - 0.5), True
        if adv == LINF:
            return "phi", None, False
    if f == "pareto_iid" and adv == L1:
        return "closed", lambda r: _pareto_checked(spec.a, r), False
    return None


def _pareto_checked(a: float, rho: float) -> float:
    if rho >= 1:
        return math.inf
    quad = pareto_radius_quadrature(a, rho)
    series = pareto_radius_series(a, rho)
    if abs(quad - series) > 1e-7 * max(1.0, abs(quad)):
        raise ArithmeticError(f"pareto radius mismatch at rho={rho}: quadrature {quad!r}, series {series!r}")
    return quad


def certified_radius(spec: NoiseSpec, adv, rho) -> CertifiedRadius:
    """Certified radius for a noise spec, adversary norm and top-class probability."""
    adv = Adversary.parse(adv)
    rho = _check_rho(rho)
    kind, fn, bounded = _route(spec, adv)
    method = Method.CLOSED_FORM if kind == "closed" else Method.DIFFERENTIAL
    if rho <= 0.5:
        return CertifiedRadius(0.0, method, adv, rho, spec, (NOT_CERTIFIED,))
    if kind == "phi":
        return integrate_inverse_phi(phi_function(spec, adv), rho, spec=spec, adversary=adv)
    flags = []
    r_eval = rho
    if rho > POLICY.rho_max:
        if not bounded:
            return CertifiedRadius(math.inf, method, adv, rho, spec, ())
        r_eval = 1.0
        flags.append(SUPREMUM)
    if spec.family == "exp_linf" and adv == Adversary.L1 and not (spec.k == 1 and spec.j == 0) \
            and rho > 1 - 1 / (2 * spec.dim):
        flags = [CONSERVATIVE]
    value = spec.lam * fn(r_eval)
    return CertifiedRadius(value, method, adv, rho, spec, tuple(flags))


def radius_iid(spec: NoiseSpec, rho) -> CertifiedRadius:
    """l1 radius for an i.i.d. family via its coordinate law.

    Log-concave coordinates give ``CDF^{-1}(rho)``; the log-convex
    exponential branch (``p < 1``) uses the threshold integral.
    """
    if spec.family not in IID_FAMILIES:
        raise ValueError(f"radius_iid needs an i.i.d. family, got {spec.family}")
    rho = _check_rho(rho)
    adv = Adversary.L1
    if rho <= 0.5:
        return CertifiedRadius(0.0, Method.CLOSED_FORM, adv, rho, spec, (NOT_CERTIFIED,))
    if spec.family in ("pareto_iid",) or (spec.family == "exp_lp_iid" and spec.p < 1):
        return certified_radius(spec, adv, rho)
    if rho > POLICY.rho_max:
        bounded = spec.family == "uniform_linf"
        value = spec.lam if bounded else math.inf
        return CertifiedRadius(value, Method.CLOSED_FORM, adv, rho, spec, (SUPREMUM,) if bounded else ())
    return CertifiedRadius(float(coordinate_ppf(spec, rho)), Method.CLOSED_FORM, adv, rho, spec, ())


def radius_curve(spec: NoiseSpec, adv, rho_grid) -> list:
    """``[(rho, radius), ...]`` over a grid; radii are checked to be nondecreasing in rho."""
    pairs = sorted((float(r), certified_radius(spec, adv, r).value) for r in rho_grid)
    for (r0, v0), (r1, v1) in zip(pairs, pairs[1:]):
        if v1 < v0 * (1 - 1e-9) - 1e-15:
            raise ArithmeticError(f"radius decreased between rho={r0} and rho={r1}")
    return pairs


def supported_adversaries(spec: NoiseSpec) -> list:
    return [a for a in Adversary if _supports(spec, a)]
