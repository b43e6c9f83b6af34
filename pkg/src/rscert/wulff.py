"""Wulff-crystal geometry: zonotope volumes and set-growth functionals.

The growth of a unit-volume set ``S`` along ``v`` is the rate at which
``Vol((S + r v) \\ S)`` increases with ``r``, i.e. the volume of the
projection of ``S`` onto ``v^⊥`` times ``||v||_2``.  For the adversaries here
the Wulff crystal (the best level-set shape) is a scaled zonotope of the
adversary ball's vertices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special as sc

from .radius import Adversary

MAX_VECTORS = 24
MAX_DIM = 8
MAX_ENUM_DIM = 20   # sign-vector enumeration for cross-polytope growth
MAX_MC_DIM = 12
_DET_BATCH = 65536


class Shape(str, Enum):
    CUBE = "cube"
    BALL = "ball"
    CROSS_POLYTOPE = "cross_polytope"
    LINF_WULFF = "linf_wulff"


@dataclass(frozen=True)
class ShapeId:
    shape: Shape
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("dim must be a positive integer")


def _as_vectors(vs) -> np.ndarray:
    arr = np.asarray(vs, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected an (n, d) array of vectors")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vectors must be finite")
    return arr


def _sum_abs_dets(mats_iter) -> float:
    parts = []
    batch = []
    for m in mats_iter:
        batch.append(m)
        if len(batch) == _DET_BATCH:
            parts.append(float(np.abs(np.linalg.det(np.array(batch))).sum()))
            batch.clear()
    if batch:
        parts.append(float(np.abs(np.linalg.det(np.array(batch))).sum()))
    return math.fsum(parts)


def zonotope_volume(vs) -> float:
    """Volume of the Minkowski sum of segments ``[0, v]``: the sum of ``|det|``
    over all ``d``-subsets of the vectors."""
    arr = _as_vectors(vs)
    n, d = arr.shape
    if n > MAX_VECTORS or d > MAX_DIM:
        raise ValueError(f"exact enumeration is limited to n <= {MAX_VECTORS} vectors and d <= {MAX_DIM}; "
                         "use cube_zonotope_volume_mc for sign-vector zonotopes")
    if n < d:
        return 0.0
    return _sum_abs_dets(arr[list(c)] for c in itertools.combinations(range(n), d))


def _sign_vectors(d: int) -> np.ndarray:
    return np.array(list(itertools.product((1.0, -1.0), repeat=d)))


def _log_ball_volume(d: int) -> float:
    return 0.5 * d * math.log(math.pi) - sc.gammaln(d / 2 + 1)


def cube_zonotope_volume_mc(d: int, samples: int, rng: np.random.Generator):
    """Monte-Carlo volume of ``Zon({±1}^d)`` as ``2^(d^2) / d! * E|det X|``
    for a uniform random sign matrix ``X``; returns ``(estimate, std_error)``."""
    if not 1 <= d <= MAX_MC_DIM:
        raise ValueError(f"d must lie in [1, {MAX_MC_DIM}]")
    if samples < 2:
        raise ValueError("need at least two samples")
    scale = math.exp(d * d * math.log(2) - sc.gammaln(d + 1))
    sums, sq = 0.0, 0.0
    done = 0
    while done < samples:
        m = min(_DET_BATCH, samples - done)
        x = rng.integers(0, 2, size=(m, d, d)).astype(float) * 2 - 1
        det = np.abs(np.linalg.det(x))
        sums += float(det.sum())
        sq += float((det * det).sum())
        done += m
    mean = sums / samples
    var = max(sq / samples - mean * mean, 0.0) * samples / (samples - 1)
    return scale * mean, scale * math.sqrt(var / samples)


def wulff_crystal_volume(adv, d: int, *, samples: int = 200_000, seed: int = 0) -> float:
    """Volume of the Wulff crystal ``(2 / |Vert|) Zon(Vert)`` of the adversary ball.

    Exact for l1 and l2 in every dimension and for l_inf with ``d <= 4``;
    larger l_inf dimensions use the Monte-Carlo determinant estimate.
    """
    adv = Adversary.parse(adv)
    if int(d) != d or d < 1:
        raise ValueError("d must be a positive integer")
    if adv == Adversary.L1:
        return (2 / d) ** d
    if adv == Adversary.L2:
        radius = math.exp(sc.gammaln(d / 2) - sc.gammaln((d + 1) / 2)) / math.sqrt(math.pi)
        return math.exp(_log_ball_volume(d) + d * math.log(radius))
    scale = (2.0 ** (1 - d)) ** d
    if 2 ** d <= MAX_VECTORS:
        return scale * zonotope_volume(_sign_vectors(d))
    est, _ = cube_zonotope_volume_mc(d, samples, np.random.default_rng(seed))
    return scale * est


# --- growth of unit-volume shapes --------------------------------------------

def _abs_sign_mean(v: np.ndarray) -> float:
    """``E|<s, v>|`` for uniform random signs ``s``."""
    d = v.size
    nz = v[v != 0]
    if nz.size == 0:
        return 0.0
    if nz.size == 1:
        return float(abs(nz[0]))
    if np.all(nz == nz[0]) or np.all(np.abs(nz) == abs(nz[0])):
        # equal magnitudes: |<s, v>| = |v_1| * |sum of m signs|
        m = nz.size
        i = np.arange(0, (m + 1) // 2)
        i = i[m - 2 * i > 0]
        logc = sc.gammaln(m + 1) - sc.gammaln(i + 1) - sc.gammaln(m - i + 1) + (1 - m) * math.log(2)
        return float(abs(nz[0]) * np.sum(np.exp(logc) * (m - 2 * i)))
    if nz.size > MAX_ENUM_DIM:
        raise ValueError(f"cross-polytope growth is catalogued for axis and diagonal directions, "
                         f"or for at most {MAX_ENUM_DIM} nonzero coordinates (got {nz.size} of {d})")
    s = _sign_vectors(nz.size)
    return float(np.abs(s @ nz).mean())


def set_growth(shape: ShapeId, v) -> float:
    """Growth rate of the unit-volume ``shape`` under a shift along ``v``."""
    v = np.asarray(v, dtype=float)
    d = shape.dim
    if v.shape != (d,):
        raise ValueError(f"v must have shape ({d},)")
    if not np.all(np.isfinite(v)):
        raise ValueError("v must be finite")
    kind = shape.shape
    if kind == Shape.CUBE:
        return float(np.abs(v).sum())
    if kind == Shape.BALL:
        if d == 1:
            return float(abs(v[0]))
        log_c = _log_ball_volume(d - 1) - (d - 1) / d * _log_ball_volume(d)
        return math.exp(log_c) * float(np.linalg.norm(v))
    if kind == Shape.CROSS_POLYTOPE:
        return d * math.exp(-sc.gammaln(d + 1) / d) * _abs_sign_mean(v)
    # l_inf Wulff crystal: zonotope of sign vectors, projected along v
    if 2 ** d > MAX_VECTORS or d < 2:
        raise ValueError(f"l_inf Wulff growth is enumerated only for 2 <= d <= 4, got d={d}")
    gens = _sign_vectors(d)
    vol = zonotope_volume(gens)
    proj = _sum_abs_dets(np.vstack([gens[list(c)], v[None, :]])
                         for c in itertools.combinations(range(len(gens)), d - 1))
    return proj * vol ** (-(d - 1) / d)


def _adversary_directions(adv: Adversary, d: int):
    """Directions whose growth attains the sup over the adversary's vertices
    for the catalogued shapes (all vertices are equivalent by symmetry)."""
    axis = np.zeros(d)
    axis[0] = 1.0
    diag = np.ones(d)
    if adv == Adversary.L1:
        return [axis]
    if adv == Adversary.LINF:
        return [diag]
    return [axis, diag / math.sqrt(d)]


def shape_phi_compare(adv, d: int) -> list:
    """Cube, ball and cross-polytope ranked by worst-case growth against ``adv``.

    Returns ``[(shape, value), ...]`` sorted ascending, so the first entry
    is the best level-set shape among the three.
    """
    adv = Adversary.parse(adv)
    rows = []
    for kind in (Shape.CUBE, Shape.BALL, Shape.CROSS_POLYTOPE):
        sid = ShapeId(kind, d)
        rows.append((kind, max(set_growth(sid, v) for v in _adversary_directions(adv, d))))
    return sorted(rows, key=lambda t: t[1])
