"""Level-set certification for spherical smoothing densities against l2.

The density is ``q(x) ∝ qbar(||x||_2 / lam)`` with ``qbar`` strictly
decreasing.  For a likelihood-ratio threshold ``kappa`` and shift ``eps``,
the Neyman-Pearson set and its shifted measure are expectations over the
radial law of sphere-cap probabilities ``W_d(r, s, eps)``.  A table of
``(p_i, r_i)`` pairs is built by solving ``p1 = 1/2`` for ``kappa`` at each
radius, and certification is a monotone lookup.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sc

from .noise import NoiseSpec, radial_ppf, sigma_for_lambda
from .quadrature import composite_gauss_legendre, graded_breaks
from .radius import NOT_CERTIFIED, Adversary, CertifiedRadius, Method, UnsupportedPair

LEVEL_SET_FAMILIES = ("gaussian", "exp_l2", "power_l2")
BELOW_TABLE = "below_table"
TABLE_TRUNCATED = "table_truncated"

_PANELS = 48
_ORDER = 16


class NumericalFailure(ArithmeticError):
    """A root search could not be bracketed or did not converge."""


# --- sphere caps --------------------------------------------------------------

def w_cap(r, s, eps, d: int, *, complement: bool = False):
    """Mass of the radius-``r`` sphere lying outside the radius-``s`` ball
    centred ``eps`` away from the origin.

    With ``complement=True`` the mass inside the ball is returned, computed
    directly rather than as ``1 - W`` so that small values keep precision.
    """
    r, s, eps = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, s, eps)))
    if np.any(r <= 0) or np.any(eps <= 0) or np.any(s < 0):
        raise ValueError("w_cap needs r > 0, eps > 0, s >= 0")
    if d < 1:
        raise ValueError("d must be a positive integer")
    if d == 1:
        # two-point sphere {+r, -r}; the ball is centred at -eps
        out = 0.5 * ((np.abs(r + eps) > s).astype(float) + (np.abs(eps - r) > s).astype(float))
        out = 1.0 - out if complement else out
        return out if out.ndim else float(out)
    h = (d - 1) / 2
    denom = 4 * eps * r
    if complement:
        x = (s * s - (r - eps) ** 2) / denom
    else:
        x = ((r + eps) ** 2 - s * s) / denom
    out = sc.betainc(h, h, np.clip(x, 0.0, 1.0))
    return out if out.ndim else float(out)


# --- radial profiles ---------------------------------------------------------

def _log_qbar(spec: NoiseSpec, r):
    f = spec.family
    with np.errstate(divide="ignore"):
        if f == "gaussian":
            return -0.5 * r * r
        if f == "exp_l2":
            return -(r ** spec.k) - spec.j * np.log(r)
        if f == "power_l2":
            return -spec.a * np.log1p(r ** spec.k)
    raise UnsupportedPair(f, "l2", ["closed-form certified_radius"])


def _log_qbar_top(spec: NoiseSpec) -> float:
    """``log qbar(0)``; infinite when the density has a pole at the origin."""
    if spec.family == "exp_l2" and spec.j > 0:
        return math.inf
    return 0.0


def _log_qbar_inv(spec: NoiseSpec, level):
    """Radius with ``log qbar(r) == level``; ``level >= log qbar(0)`` maps to 0."""
    level = np.asarray(level, dtype=float)
    f = spec.family
    top = _log_qbar_top(spec)
    out = np.zeros_like(level)
    m = level < top
    lv = level[m]
    if f == "gaussian":
        out[m] = np.sqrt(-2 * lv)
    elif f == "power_l2":
        out[m] = np.expm1(-lv / spec.a) ** (1 / spec.k)
    elif spec.j == 0:
        out[m] = (-lv) ** (1 / spec.k)
    else:
        out[m] = _solve_exp_level(-lv, spec.k, spec.j)
    return out


def _solve_exp_level(target, k: float, j: float):
    """Solve ``r^k + j log r = target`` for ``r`` (vectorized, monotone in log r)."""
    h = lambda u: np.exp(k * u) + j * u
    span = np.abs(target) + 1.0
    lo = -span / j - 1.0
    hi = np.log(span) / k + 1.0
    lo = np.broadcast_to(lo, target.shape).copy()
    hi = np.broadcast_to(hi, target.shape).copy()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = h(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(hi))):
            break
    u = 0.5 * (lo + hi)
    for _ in range(2):
        u = u - (h(u) - target) / (k * np.exp(k * u) + j)
    return np.exp(u)


@dataclass(frozen=True)
class RadialLaw:
    """Law of ``||delta||_2 / lam`` with density ∝ ``r^(d-1) qbar(r)``.

    Expectations are taken in the quantile variable on a composite
    Gauss-Legendre rule graded toward both ends of ``(0, 1)``.
    """

    spec: NoiseSpec
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @classmethod
    def of(cls, spec: NoiseSpec, panels: int = _PANELS, order: int = _ORDER) -> "RadialLaw":
        if spec.family not in LEVEL_SET_FAMILIES:
            raise UnsupportedPair(spec.family, "l2", ["closed-form certified_radius"])
        if spec.dim < 2:
            # the two-point sphere makes the cap mass a step function of r
            raise ValueError("level-set tables need dim >= 2; use certified_radius in one dimension")
        u, w = composite_gauss_legendre(graded_breaks(panels), order)
        r = np.asarray(radial_ppf(spec, u), dtype=float)
        ok = np.isfinite(r) & (r > 0)
        return cls(spec, r[ok], w[ok])

    def quantile(self, u):
        return radial_ppf(self.spec, u)

    def expect(self, values) -> float:
        return float(np.dot(self.weights, values))

    def moment(self, power: float) -> float:
        return self.expect(self.nodes ** power)


def _np_pair(law: RadialLaw, log_kappa, eps):
    """``(p0, p1)`` arrays for ``log kappa`` values and matching unit-scale shifts."""
    spec, d = law.spec, law.spec.dim
    lk = np.atleast_1d(np.asarray(log_kappa, dtype=float))
    eps = np.broadcast_to(np.asarray(eps, dtype=float), lk.shape)
    r = law.nodes[:, None]
    shape = (r.shape[0], lk.size)
    lq = _log_qbar(spec, r)
    s_minus = _log_qbar_inv(spec, np.broadcast_to(lq - lk[None, :], shape))
    s_plus = _log_qbar_inv(spec, np.broadcast_to(lq + lk[None, :], shape))
    rr = np.broadcast_to(r, shape)
    ee = np.broadcast_to(eps[None, :], shape)
    inside = w_cap(rr, s_minus, ee, d, complement=True)
    outside = w_cap(rr, s_plus, ee, d)
    return law.weights @ inside, law.weights @ outside


def growth_pair(spec: NoiseSpec, kappa: float, eps: float, law: RadialLaw | None = None):
    """Measure ``p0`` of the likelihood-ratio set at threshold ``kappa`` and
    its measure ``p1`` after a shift of length ``eps`` (same units as ``lam``).
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if not eps > 0:
        raise ValueError("eps must be positive")
    law = law or RadialLaw.of(spec)
    p0, p1 = _np_pair(law, math.log(kappa), eps / spec.lam)
    return float(p0[0]), float(p1[0])


# --- tables --------------------------------------------------------------------

@dataclass(frozen=True)
class RadiusTable:
    """Pairs ``(p_i, r_i)`` with ``p`` strictly decreasing and ``r`` strictly increasing."""

    entries: tuple
    spec: NoiseSpec | None = None
    adversary: Adversary = Adversary.L2

    def __post_init__(self):
        ent = tuple((float(p), float(r)) for p, r in self.entries)
        for (p0, r0), (p1, r1) in zip(ent, ent[1:]):
            if not (p1 < p0 and r1 > r0):
                raise ValueError("table entries must have p strictly decreasing and radius strictly increasing")
        object.__setattr__(self, "entries", ent)

    def __len__(self):
        return len(self.entries)

    @property
    def p(self) -> np.ndarray:
        return np.array([e[0] for e in self.entries])

    @property
    def radii(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "radius"])
        for p, r in self.entries:
            w.writerow([format(p, ".17g"), format(r, ".17g")])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, spec: NoiseSpec | None = None) -> "RadiusTable":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["p", "radius"]:
            raise ValueError("expected a CSV header 'p,radius'")
        entries = []
        for row in rows[1:]:
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"malformed row {row!r}")
            entries.append((float(row[0]), float(row[1])))
        return cls(tuple(entries), spec)


def default_radii(spec: NoiseSpec, count: int = 512) -> np.ndarray:
    """``count`` radii spaced geometrically over ``[1e-3 sigma, 10 sigma]``."""
    try:
        sigma = sigma_for_lambda(spec)
    except ValueError:
        sigma = spec.lam  # infinite variance: fall back to the scale parameter
    return np.geomspace(1e-3 * sigma, 10 * sigma, count)


def build_table(spec: NoiseSpec, radii=None, *, tol: float = 1e-9, law: RadialLaw | None = None) -> RadiusTable:
    """For each radius find the threshold whose shifted set has measure 1/2.

    The resulting ``p_i`` is the largest misclassification mass certified at
    radius ``r_i``.  Entries whose ``p`` underflows or fails to decrease
    strictly are dropped from the end of the table.
    """
    radii = default_radii(spec) if radii is None else np.asarray(radii, dtype=float)
    if radii.size == 0:
        return RadiusTable((), spec)
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    law = law or RadialLaw.of(spec)
    p_out = _solve_half(law, radii / spec.lam, tol, radii)
    entries = []
    for p, r in zip(p_out, radii):
        if not (p > 0) or (entries and p >= entries[-1][0]):
            break
        entries.append((float(p), float(r)))
    return RadiusTable(tuple(entries), spec)


def _solve_half(law: RadialLaw, eps, tol: float, radii):
    """Solve ``p1 = 1/2`` in ``log kappa`` at every shift at once.

    Uses the Illinois variant of regula falsi on a bracket expanded by
    doubling.  Returns the matching ``p0`` values.  ``p1`` must increase
    with kappa; a violation is reported as a numerical failure.
    """
    n = eps.size
    lo, hi = -np.ones(n), np.ones(n)
    f_lo = _np_pair(law, lo, eps)[1] - 0.5
    f_hi = _np_pair(law, hi, eps)[1] - 0.5
    for _ in range(200):
        bad_lo, bad_hi = f_lo >= 0, f_hi <= 0
        if not (bad_lo.any() or bad_hi.any()):
            break
        lo[bad_lo] *= 2
        hi[bad_hi] *= 2
        if bad_lo.any():
            f_lo[bad_lo] = _np_pair(law, lo[bad_lo], eps[bad_lo])[1] - 0.5
        if bad_hi.any():
            f_hi[bad_hi] = _np_pair(law, hi[bad_hi], eps[bad_hi])[1] - 0.5
    else:
        i = int(np.argmax(bad_lo | bad_hi))
        raise NumericalFailure(f"could not bracket kappa at radius {radii[i]}")
    g_lo, g_hi = f_lo.copy(), f_hi.copy()  # unmodified residuals for the monotonicity check
    p0_out = np.full(n, np.nan)
    active = np.arange(n)
    side = np.zeros(n, dtype=int)  # which end moved last, for the Illinois halving
    for _ in range(200):
        if active.size == 0:
            return p0_out
        a, b, fa, fb = lo[active], hi[active], f_lo[active], f_hi[active]
        x = b - fb * (b - a) / (fb - fa)
        # fall back to the midpoint when the secant step stalls at an end
        stall = ~((x > a) & (x < b)) | ((b - a) < 1e-13 * np.maximum(1.0, np.abs(b)))
        x = np.where(stall, 0.5 * (a + b), x)
        p0_x, p1_x = _np_pair(law, x, eps[active])
        fx = p1_x - 0.5
        bad = (fx < g_lo[active] - 1e-12) | (fx > g_hi[active] + 1e-12)
        if bad.any():
            i = active[np.argmax(bad)]
            raise NumericalFailure(f"p1 not monotone in kappa at radius {radii[i]}")
        done = (np.abs(fx) < tol) | ((b - a) < 1e-13 * np.maximum(1.0, np.abs(x)))
        p0_out[active[done]] = p0_x[done]
        up = (fx < 0) & ~done
        down = (fx > 0) & ~done
        iu, idn = active[up], active[down]
        lo[iu], f_lo[iu], g_lo[iu] = x[up], fx[up], fx[up]
        hi[idn], f_hi[idn], g_hi[idn] = x[down], fx[down], fx[down]
        # Illinois: halve the stale end's residual when the same end moves twice
        rep_up = up & (side[active] == 1)
        rep_dn = down & (side[active] == -1)
        f_hi[active[rep_up]] *= 0.5
        f_lo[active[rep_dn]] *= 0.5
        side[iu], side[idn] = 1, -1
        active = active[~done]
    raise NumericalFailure(f"kappa search did not converge at radius {radii[active[0]]}")


def lookup(table: RadiusTable, rho) -> CertifiedRadius:
    """Largest tabulated radius whose ``p_i`` is at least ``1 - rho``."""
    rho = float(rho)
    if not 0 <= rho <= 1:
        raise ValueError(f"rho must lie in [0, 1], got {rho!r}")
    adv = table.adversary

    def out(value, flags=()):
        return CertifiedRadius(value, Method.LEVEL_SET, adv, rho, table.spec, tuple(flags))

    if rho <= 0.5:
        return out(0.0, (NOT_CERTIFIED,))
    if len(table) == 0:
        return out(0.0, (BELOW_TABLE,))
    target = 1.0 - rho
    p = table.p
    # p is decreasing; count entries with p_i >= target
    n = int(np.searchsorted(-p, -target, side="right"))
    if n == 0:
        return out(0.0, (BELOW_TABLE,))
    flags = (TABLE_TRUNCATED,) if n == len(table) and target < p[-1] else ()
    return out(float(table.radii[n - 1]), flags)
