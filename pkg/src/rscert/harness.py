"""Monte-Carlo certification against synthetic classifiers with known ``rho``.

Halfspace and linear classifiers have analytic smoothed probabilities, so a
certified radius can be compared with the true robust radius (the distance to
the decision boundary in the adversary's norm).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import specfun
from .levelset import RadiusTable, lookup
from .noise import (IID_FAMILIES, NoiseSpec, UnsupportedOperation, coordinate_sf, radial_cdf, radial_ppf,
                    sample)
from .radius import NOT_CERTIFIED, Adversary, CertifiedRadius, Method, certified_radius

SELECTION_SAMPLES = 64
SHARD_SIZE = 1 << 15
ABSTAIN = "abstain"


@dataclass(frozen=True)
class ClassifierSpec:
    """Binary base classifier with labels 0 and 1.

    ``halfspace``: label 1 iff ``side * (x[axis] - threshold) >= 0``.
    ``linear``: label 1 iff ``w . x + b >= 0``.
    ``constant``: always ``label``.
    """

    kind: str
    axis: int = 0
    threshold: float = 0.0
    side: int = 1
    w: tuple | None = None
    b: float = 0.0
    label: int = 1

    def __post_init__(self):
        if self.kind not in ("halfspace", "linear", "constant"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.side not in (1, -1):
            raise ValueError("side must be +1 or -1")
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        if self.kind == "halfspace" and self.axis < 0:
            raise ValueError("axis must be nonnegative")
        if self.kind == "linear":
            if self.w is None:
                raise ValueError("linear classifier needs w")
            w = tuple(float(v) for v in self.w)
            if not all(math.isfinite(v) for v in w) or not any(w):
                raise ValueError("w must be finite and nonzero")
            object.__setattr__(self, "w", w)

    @classmethod
    def halfspace(cls, axis: int = 0, threshold: float = 0.0, side: int = 1) -> "ClassifierSpec":
        return cls("halfspace", axis=axis, threshold=threshold, side=side)

    @classmethod
    def linear(cls, w, b: float = 0.0) -> "ClassifierSpec":
        return cls("linear", w=tuple(w), b=b)

    @classmethod
    def constant(cls, label: int = 1) -> "ClassifierSpec":
        return cls("constant", label=label)

    def check_dim(self, d: int):
        if self.kind == "halfspace" and self.axis >= d:
            raise ValueError(f"axis {self.axis} out of range for dim {d}")
        if self.kind == "linear" and len(self.w) != d:
            raise ValueError(f"w has length {len(self.w)}, expected {d}")

    def normal(self, d: int) -> np.ndarray:
        """Normal vector pointing into the label-1 region."""
        if self.kind == "halfspace":
            n = np.zeros(d)
            n[self.axis] = self.side
            return n
        if self.kind == "linear":
            return np.asarray(self.w, dtype=float)
        raise ValueError("a constant classifier has no decision boundary")

    def margin(self, x) -> float:
        """Signed score ``n . x + offset``; label 1 iff it is >= 0."""
        x = np.asarray(x, dtype=float)
        if self.kind == "halfspace":
            return float(self.side * (x[self.axis] - self.threshold))
        if self.kind == "linear":
            return float(np.dot(self.w, x) + self.b)
        raise ValueError("a constant classifier has no margin")

    def predict(self, xs) -> np.ndarray:
        xs = np.asarray(xs)
        if self.kind == "constant":
            return np.full(xs.shape[0], self.label, dtype=np.int8)
        if self.kind == "halfspace":
            score = self.side * (xs[:, self.axis] - self.threshold)
        else:
            score = xs @ np.asarray(self.w, dtype=xs.dtype) + self.b
        return (score >= 0).astype(np.int8)


# --- exact smoothed probabilities --------------------------------------------

def _sphere_tail(spec: NoiseSpec, t: float) -> float:
    """``P[delta_1 >= t]`` for ``t >= 0`` and a spherically symmetric family.

    ``(1 + u_1) / 2`` is Beta((d-1)/2, (d-1)/2) for ``u`` uniform on the
    sphere; integrate that tail over the radial quantile.
    """
    d = spec.dim
    z = t / spec.lam
    if spec.family == "uniform_l2":
        # the ball marginal is Beta((d+1)/2, (d+1)/2) on [-1, 1]
        h = (d + 1) / 2
        return float(specfun.beta_cdf((1 - z) / 2, h, h)) if z < 1 else 0.0
    if z == 0:
        return 0.5
    h = (d - 1) / 2
    if d == 1:
        return 0.5 * float(1 - radial_cdf(spec, z))
    u0 = float(radial_cdf(spec, z))

    def integrand(u):
        r = float(radial_ppf(spec, u))
        if not r > z:
            return 0.0
        return float(specfun.beta_cdf((1 - z / r) / 2, h, h))

    # the integrand climbs from 0 on the scale of u0, so break there geometrically
    points = [u0 * 2.0 ** k for k in range(1, 60) if u0 * 2.0 ** k < 0.5]
    val, _ = integrate.quad(integrand, u0, 1.0, epsabs=1e-13, epsrel=1e-11, limit=400, points=points or None)
    return val


def _projection_tail(spec: NoiseSpec, n: np.ndarray, t: float) -> float:
    """``P[n . delta >= t]`` for ``t >= 0``."""
    f = spec.family
    nrm = float(np.linalg.norm(n))
    if f == "gaussian":
        return float(specfun.gaussian_cdf(-t / (spec.lam * nrm)))
    if f in ("exp_l2", "power_l2", "uniform_l2"):
        return _sphere_tail(spec, t / nrm)
    nz = n[n != 0]
    if f in IID_FAMILIES and nz.size == 1:
        return float(coordinate_sf(spec, t / abs(nz[0])))
    raise UnsupportedOperation(
        f"no exact smoothed probability for this classifier under {f}; use certify_mc instead")


def label_probability(clf: ClassifierSpec, spec: NoiseSpec, x) -> float:
    """Exact ``P[f(x + delta) = 1]``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise ValueError(f"x must have shape ({spec.dim},)")
    clf.check_dim(spec.dim)
    if clf.kind == "constant":
        return float(clf.label)
    n = clf.normal(spec.dim)
    m = clf.margin(x)
    # label 1 iff n . delta >= -m; the projection is symmetric
    tail = _projection_tail(spec, n, abs(m))
    return 1.0 - tail if m >= 0 else tail


def exact_rho(clf: ClassifierSpec, spec: NoiseSpec, x) -> float:
    """Exact smoothed probability of the top label at ``x``."""
    p1 = label_probability(clf, spec, x)
    return max(p1, 1.0 - p1)


def adversarial_direction(clf: ClassifierSpec, d: int, adv) -> np.ndarray:
    """Unit-norm (in ``adv``) direction of steepest descent of the margin."""
    adv = Adversary.parse(adv)
    n = clf.normal(d)
    if adv == Adversary.L1:
        v = np.zeros(d)
        i = int(np.argmax(np.abs(n)))
        v[i] = -np.sign(n[i])
        return v
    if adv == Adversary.L2:
        return -n / np.linalg.norm(n)
    return -np.sign(n)


def true_robust_radius(clf: ClassifierSpec, spec: NoiseSpec, x, adv) -> float:
    """Smallest shift (in ``adv`` norm) that moves the smoothed prediction to 1/2,
    found by bisection on ``exact_rho`` along the adversarial direction."""
    x = np.asarray(x, dtype=float)
    p1 = label_probability(clf, spec, x)
    if p1 == 0.5:
        return 0.0
    toward = 1.0 if p1 > 0.5 else -1.0
    v = toward * adversarial_direction(clf, spec.dim, adv)

    def g(s):
        return toward * (label_probability(clf, spec, x + s * v) - 0.5)

    hi = max(abs(clf.margin(x)), spec.lam)
    while g(hi) > 0:
        hi *= 2
        if hi > 1e12:
            raise ArithmeticError("robust radius bracket failed")
    return optimize.brentq(g, 0.0, hi, xtol=1e-14, rtol=1e-13)


# --- confidence bound and Monte-Carlo certification ----------------------------

def clopper_pearson_lower(successes: int, n: int, alpha: float) -> float:
    """One-sided exact lower confidence bound for a binomial proportion."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if int(successes) != successes or not 0 <= successes <= n:
        raise ValueError("successes must be an integer in [0, n]")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if successes == 0:
        return 0.0
    if successes == n:
        return alpha ** (1.0 / n)
    return float(specfun.beta_cdf_inv(alpha, successes, n - successes + 1))


@dataclass(frozen=True)
class CertificationResult:
    predicted_label: int
    rho_lower: float
    radius: CertifiedRadius
    n: int
    alpha: float
    seed: int
    successes: int
    selection_counts: tuple = field(default=(0, 0))

    @property
    def abstained(self) -> bool:
        return ABSTAIN in self.radius.flags

    @property
    def label(self):
        return None if self.abstained else self.predicted_label

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "rho_lower": self.rho_lower,
            "radius": self.radius.value,
            "method": self.radius.method.value,
            "n": self.n,
            "alpha": self.alpha,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _streams(seed: int, count: int):
    """Independent Philox generators: stream 0 selects, the rest estimate."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _count_labels(clf, x, spec, rng, count) -> np.ndarray:
    """Counts of labels 0 and 1 over ``count`` noisy copies of ``x``."""
    rows = max(1, (1 << 21) // spec.dim)
    counts = np.zeros(2, dtype=np.int64)
    left = count
    while left > 0:
        m = min(rows, left)
        batch = sample(spec, rng, m)
        batch += x
        counts += np.bincount(clf.predict(batch), minlength=2)
        left -= m
    return counts


def certify_mc(clf: ClassifierSpec, spec: NoiseSpec, x, adv, n: int, alpha: float, *,
               seed: int = 0, threads: int = 1, table: RadiusTable | None = None) -> CertificationResult:
    """Sample-based certification: select a label on 64 draws, bound its
    probability on ``n`` fresh draws, and convert the bound to a radius.

    Sampling is split into fixed-size shards with their own streams, so the
    result does not depend on ``threads``.  ``table`` supplies a level-set
    table for pairs without a closed form or differential route.
    """
    adv = Adversary.parse(adv)
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if int(threads) != threads or threads < 1:
        raise ValueError("threads must be a positive integer")
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise ValueError(f"x must have shape ({spec.dim},)")
    clf.check_dim(spec.dim)
    shard_sizes = [SHARD_SIZE] * (n // SHARD_SIZE) + ([n % SHARD_SIZE] if n % SHARD_SIZE else [])
    rngs = _streams(seed, 1 + len(shard_sizes))
    sel = _count_labels(clf, x, spec, rngs[0], SELECTION_SAMPLES)
    label = int(np.argmax(sel))

    def work(i):
        return _count_labels(clf, x, spec, rngs[1 + i], shard_sizes[i])

    if threads == 1 or len(shard_sizes) == 1:
        parts = [work(i) for i in range(len(shard_sizes))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(shard_sizes))))
    successes = int(sum(int(p[label]) for p in parts))
    rho_lower = clopper_pearson_lower(successes, n, alpha)

    if rho_lower <= 0.5:
        method = Method.LEVEL_SET if table is not None else Method.CLOSED_FORM
        radius = CertifiedRadius(0.0, method, adv, rho_lower, spec, (NOT_CERTIFIED, ABSTAIN))
    elif table is not None:
        radius = lookup(table, rho_lower)
    else:
        radius = certified_radius(spec, adv, rho_lower)
    return CertificationResult(label, rho_lower, radius, int(n), float(alpha), int(seed), successes,
                               (int(sel[0]), int(sel[1])))


# --- tightness -----------------------------------------------------------------

@dataclass(frozen=True)
class TightnessReport:
    rho: float
    radius: float
    p_at_radius: float
    p_beyond: float
    passed: bool


def tightness_check(clf: ClassifierSpec, spec: NoiseSpec, x, eps_beyond: float, *, adv="l1",
                    tol: float = 1e-8) -> TightnessReport:
    """Shift ``x`` by the certified radius along the adversarial direction and
    check the top-label probability is still >= 1/2 (within ``tol``) but drops
    below 1/2 once the shift exceeds the radius by a factor ``1 + eps_beyond``."""
    if not eps_beyond > 0:
        raise ValueError("eps_beyond must be positive")
    x = np.asarray(x, dtype=float)
    p1 = label_probability(clf, spec, x)
    top = 1 if p1 >= 0.5 else 0
    rho = max(p1, 1 - p1)
    r = certified_radius(spec, adv, rho).value
    v = (1.0 if top == 1 else -1.0) * adversarial_direction(clf, spec.dim, adv)

    def p_top(shift):
        q = label_probability(clf, spec, x + shift * v)
        return q if top == 1 else 1 - q

    p_at = p_top(r)
    p_out = p_top(r * (1 + eps_beyond))
    return TightnessReport(rho, r, p_at, p_out, bool(p_at >= 0.5 - tol and p_out < 0.5))
