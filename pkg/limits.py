"""
GilbertLab Limit Theory
Expected crossings, the w* fixed point, the limiting line process and polytrope densities
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_laguerre

from geom import Angle, as_angle, kill_region, points_in_convex_polygon, region_area
from procs import AngleKey, LineProcessSpec, ModelSpec, make_rng

SQRT2 = math.sqrt(2.0)

# Closed-form tropical-line constants at unit site intensity
TROPICAL_MU = 2.0 ** 0.75 / math.sqrt(1.0 + SQRT2)
TROPICAL_MU_DIAG = (SQRT2 + 3.0) / 4.0 * TROPICAL_MU

# Reference decimals for p_3..p_6 of the tropical-line limit
REFERENCE_POLYTROPE_DENSITIES = {3: 0.429367312053161, 4: 2.222217564, 5: 0.267462937, 6: 0.080952188}

FIX_TOL = 1e-10
MAX_STAGES = 200


class SolverError(RuntimeError):
    """Raised when the fixed-point staircase fails to converge"""


class QuadratureError(RuntimeError):
    """Raised when the polytrope integral misses its error tolerance"""


@dataclass
class WeightVector:
    w: Dict[Angle, float]

    def __post_init__(self):
        self.w = {as_angle(a): float(v) for a, v in self.w.items()}
        for a, v in self.w.items():
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"Weight for angle {a.radians} must be finite and non-negative, got {v}")

    def __getitem__(self, angle) -> float:
        key = as_angle(angle)
        if key not in self.w:
            raise ValueError(f"Unknown angle {key.radians} not in weight vector")
        return self.w[key]

    @classmethod
    def uniform(cls, spec: ModelSpec, value: float) -> 'WeightVector':
        return cls({a: value for a in spec.angles})

    def scaled(self, factor: float) -> 'WeightVector':
        return WeightVector({a: factor * v for a, v in self.w.items()})

    def values(self, spec: ModelSpec) -> List[float]:
        return [self[a] for a in spec.angles]


def _check_angle(spec: ModelSpec, phi) -> Angle:
    phi = as_angle(phi)
    if phi not in spec.angles:
        raise ValueError(f"Unknown angle {phi.radians} not in model angles {[a.radians for a in spec.angles]}")
    return phi


def _pair_area(phi: Angle, psi: Angle, w: WeightVector) -> float:
    return region_area(kill_region(phi, psi, w[phi], w[psi]))


def expected_crossings(spec: ModelSpec, w: WeightVector, phi) -> float:
    """E(w, phi) in collapsed form: sum over psi != phi of |T_{phi psi}| * nu_psi"""
    phi = _check_angle(spec, phi)
    total = 0.0
    for i, psi in enumerate(spec.angles):
        if psi == phi:
            continue
        nu = spec.nu_index(i)
        if nu > 0.0:
            total += _pair_area(phi, psi, w) * nu
    return total


def expected_crossings_double_sum(spec: ModelSpec, w: WeightVector, phi) -> float:
    """E(w, phi) as the literal double sum over subsets Q of A minus phi"""
    phi = _check_angle(spec, phi)
    p = spec.index_of(phi)
    others = [i for i in range(len(spec.angles)) if i != p]
    total = 0.0
    for r in range(1, len(others) + 1):
        for q in itertools.combinations(others, r):
            weight = spec.mu_key(tuple(sorted(q + (p,)))) + spec.mu_key(q)
            if weight == 0.0:
                continue
            total += weight * sum(_pair_area(phi, spec.angles[i], w) for i in q)
    return total


def expected_crossings_disjoint(spec: ModelSpec, w: WeightVector, phi, samples: int = 200000,
                                seed: int = 0) -> Tuple[float, float]:
    """
    Monte Carlo over the disjoint pieces of the union of kill regions: each sampled
    start position counts once per region it belongs to, weighted by mu_{phi+Q} + mu_Q.
    Returns (mean, standard error).
    """
    phi = _check_angle(spec, phi)
    p = spec.index_of(phi)
    others = [i for i in range(len(spec.angles)) if i != p]
    regions = {i: kill_region(phi, spec.angles[i], w[phi], w[spec.angles[i]]).vertices for i in others}
    allpts = np.array([v for verts in regions.values() for v in verts])
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    box_area = float(np.prod(hi - lo))
    if box_area <= 0.0:
        return 0.0, 0.0
    rng = make_rng(seed)
    pts = lo + rng.random((samples, 2)) * (hi - lo)
    member = {i: points_in_convex_polygon(pts, regions[i]) for i in others}

    value = np.zeros(samples)
    for r in range(1, len(others) + 1):
        for q in itertools.combinations(others, r):
            weight = spec.mu_key(tuple(sorted(q + (p,)))) + spec.mu_key(q)
            if weight == 0.0:
                continue
            # |S| of the exact membership set within Q
            value += weight * sum(member[i].astype(float) for i in q)
    value *= box_area
    return float(value.mean()), float(value.std(ddof=1) / math.sqrt(samples))


class LimitSolver:
    """Staircase construction of w*: raise the unfixed weights together, fix the argmax set"""

    def __init__(self, spec: ModelSpec, tol: float = 1e-12):
        self.spec = spec
        self.tol = tol

    def _weights(self, fixed: Dict[Angle, float], level: float) -> WeightVector:
        return WeightVector({a: fixed.get(a, level) for a in self.spec.angles})

    def _stage_gap(self, fixed: Dict[Angle, float], level: float) -> float:
        w = self._weights(fixed, level)
        return max(expected_crossings(self.spec, w, a) for a in self.spec.angles if a not in fixed) - 1.0

    def _bracket(self, fixed: Dict[Angle, float], lo: float) -> float:
        hi = max(2.0 * lo, 1.0)
        for _ in range(200):
            if self._stage_gap(fixed, hi) > 0.0:
                return hi
            hi *= 2.0
        raise SolverError(f"Could not bracket the fixed point above level {lo}; "
                          f"unfixed angles {[a.radians for a in self.spec.angles if a not in fixed]} never reach E = 1")

    def solve(self) -> WeightVector:
        fixed: Dict[Angle, float] = {}
        level = 0.0
        for _ in range(MAX_STAGES):
            if len(fixed) == len(self.spec.angles):
                return self._weights(fixed, level)
            hi = self._bracket(fixed, level)
            level = brentq(lambda v: self._stage_gap(fixed, v), level, hi, xtol=self.tol, rtol=4 * np.finfo(float).eps,
                           maxiter=500)
            w = self._weights(fixed, level)
            values = {a: expected_crossings(self.spec, w, a) for a in self.spec.angles if a not in fixed}
            top = max(values.values())
            for a, e in values.items():
                if e >= top - FIX_TOL:
                    fixed[a] = level
        if len(fixed) == len(self.spec.angles):
            return self._weights(fixed, level)
        raise SolverError(f"Fixed-point staircase did not finish within {MAX_STAGES} stages")

    def residual(self, w: WeightVector) -> float:
        return max(abs(expected_crossings(self.spec, w, a) - 1.0) for a in self.spec.angles)


def solve_wstar(spec: ModelSpec) -> WeightVector:
    """The unique positive w with E(w, phi) = 1 for every model angle"""
    return LimitSolver(spec).solve()


def limit_measure(spec: ModelSpec, w: WeightVector) -> LineProcessSpec:
    """Per-direction line intensities w_phi * nu_phi, Lambda and the normal-direction law"""
    return LineProcessSpec.from_intensities({a: w[a] * spec.nu_index(i) for i, a in enumerate(spec.angles)})


def default_margin(spec: ModelSpec, k: int, w: Optional[WeightVector] = None) -> float:
    """4 * max_phi w*_phi * sqrt(k)"""
    w = w or solve_wstar(spec)
    return 4.0 * max(w.w.values()) * math.sqrt(k)


@dataclass
class TropicalLineConstants:
    mu_horizontal: float
    mu_vertical: float
    mu_diagonal: float

    @property
    def Lambda(self) -> float:
        return self.mu_horizontal + self.mu_vertical + self.mu_diagonal

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.mu_horizontal, self.mu_vertical, self.mu_diagonal)


def tropical_line_constants(lam: float = 1.0) -> TropicalLineConstants:
    """Closed-form line intensities of the tropical-line limit at site intensity lam"""
    scale = math.sqrt(lam)
    return TropicalLineConstants(TROPICAL_MU * scale, TROPICAL_MU * scale, TROPICAL_MU_DIAG * scale)


def line_orientation(angle) -> float:
    """Orientation of a line with the given direction, in [0, pi)"""
    return math.fmod(as_angle(angle).radians, math.pi)


def orientation_intensities(lp: LineProcessSpec) -> Dict[float, float]:
    """Line intensity per orientation, merging antiparallel directions"""
    out: Dict[float, float] = {}
    for angle, rate in lp.per_direction_intensity.items():
        if rate <= 0.0:
            continue
        key = round(line_orientation(angle), 12)
        out[key] = out.get(key, 0.0) + rate
    return out


def intersection_intensities(lp: LineProcessSpec) -> Dict[Tuple[float, float], float]:
    """Crossing intensity mu_a * mu_b * |sin(a - b)| per unordered orientation pair"""
    per = orientation_intensities(lp)
    out = {}
    for a, b in itertools.combinations(sorted(per), 2):
        out[(a, b)] = per[a] * per[b] * abs(math.sin(a - b))
    return out


@dataclass
class MosaicIntensities:
    lambda0: float
    lambda1: float
    lambda2: float

    @property
    def mean_vertices_per_face(self) -> float:
        return 2.0 * self.lambda1 / self.lambda2 if self.lambda2 > 0 else float('nan')


def mosaic_intensities(spec: ModelSpec, k: int) -> Dict[str, MosaicIntensities]:
    """
    Vertex, edge and face intensities under two site conventions: each site counted
    once per motorcycle ('multiplicity') or once as a shared origin ('shared_origin').
    """
    lam = spec.lam
    em = spec.mean_multiplicity
    weighted = MosaicIntensities((k + 1) * em * lam, (4 * k - 1 + em) * em * lam / 2.0,
                                 (em + 2 * k - 3) * em * lam / 2.0)
    shared = MosaicIntensities((1.0 + k * em) * lam, 2.0 * k * em * lam, (k * em - 1.0) * lam)
    return {'multiplicity': weighted, 'shared_origin': shared}


@dataclass
class PolytropeDensities:
    p: Dict[int, float]
    method: str
    error: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ('integral', 'monte_carlo'):
            raise ValueError(f"Unsupported method: {self.method}")

    @property
    def total(self) -> float:
        return sum(self.p.values())

    @property
    def weighted_total(self) -> float:
        return sum(i * v for i, v in self.p.items())


def rectangle_face_census(n_a: int, n_b: int, n_c: int) -> Tuple[int, int, int, int]:
    """
    Faces of a rectangle cut by parallel diagonal chords, sorted A-block (corner cuts
    on one side), B-block (through chords), C-block (corner cuts on the other side).
    Returns (triangles, quads, pentagons, hexagons).
    """
    if min(n_a, n_b, n_c) < 0:
        raise ValueError(f"Chord counts must be non-negative, got {(n_a, n_b, n_c)}")
    chords = 'A' * n_a + 'B' * n_b + 'C' * n_c
    if not chords:
        return (0, 1, 0, 0)
    counts = {3: 0, 4: 0, 5: 0, 6: 0}
    counts[{'A': 3, 'B': 4, 'C': 5}[chords[0]]] += 1
    counts[{'C': 3, 'B': 4, 'A': 5}[chords[-1]]] += 1
    junction = {'AA': 4, 'BB': 4, 'CC': 4, 'AB': 5, 'BC': 5, 'AC': 6}
    for left, right in zip(chords, chords[1:]):
        counts[junction[left + right]] += 1
    return (counts[3], counts[4], counts[5], counts[6])


def face_expectations(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> Dict[int, np.ndarray]:
    """Expected face counts of each class for independent Poisson(a), Poisson(b), Poisson(c) chord blocks"""
    pa = -np.expm1(-a)
    pb = -np.expm1(-b)
    pc = -np.expm1(-c)
    qa, qb, qc = np.exp(-a), np.exp(-b), np.exp(-c)
    tri = pa + pc
    pent = pa * pb + pb * pc + qa * qb * pc + qb * qc * pa
    hexa = pa * qb * pc
    quad = 1.0 + a + b + c - tri - pent - hexa
    return {3: tri, 4: quad, 5: pent, 6: hexa}


def _laguerre_sum(mu_rect: float, mu_diag: float, nodes: int) -> Dict[int, float]:
    x, wx = roots_laguerre(nodes)
    kappa = mu_diag / SQRT2
    # s = min(x, y) ~ rate 2 mu, t = |x - y| ~ rate mu, two mirror triangles
    s = x[:, None] / (2.0 * mu_rect)
    t = x[None, :] / mu_rect
    weights = wx[:, None] * wx[None, :]
    e = face_expectations(kappa * s, kappa * t, kappa * s)
    return {i: mu_rect ** 2 * float(np.sum(weights * e[i])) for i in (3, 4, 5, 6)}


def polytrope_densities_integral(mu_rect: float = TROPICAL_MU, mu_diag: float = TROPICAL_MU_DIAG,
                                 nodes: int = 128, check_nodes: int = 192, tol: float = 1e-8) -> PolytropeDensities:
    """
    p_i = mu_rect^4 * integral of e_i(x, y) exp(-mu_rect (x + y)) over the quadrant,
    with tensor Gauss-Laguerre quadrature; error estimated against a finer rule.
    """
    if mu_rect <= 0.0 or mu_diag < 0.0:
        raise ValueError(f"Need mu_rect > 0 and mu_diag >= 0, got {mu_rect}, {mu_diag}")
    coarse = _laguerre_sum(mu_rect, mu_diag, nodes)
    fine = _laguerre_sum(mu_rect, mu_diag, check_nodes)
    error = {i: abs(coarse[i] - fine[i]) for i in coarse}
    worst = max(error.values())
    if worst > tol * max(1.0, mu_rect ** 2):
        raise QuadratureError(f"Polytrope quadrature error estimate {worst:.3e} exceeds tolerance {tol:.1e}")
    return PolytropeDensities(fine, 'integral', error)


def polytrope_constraints(mu_rect: float, mu_diag: float) -> Tuple[float, float]:
    """Exact values of sum p_i and sum (#vertices) p_i for given line intensities"""
    total = mu_rect ** 2 + SQRT2 * mu_rect * mu_diag
    return total, 4.0 * total


def arm_body_mean(body_lengths: Mapping[float, float], D: Sequence[float], mu: Sequence[float],
                  lam: float = 1.0) -> float:
    """
    Mean number of order-k arm crossings of a body with total length l_o per
    orientation o, against horizontal, vertical and diagonal limit lines.
    """
    d_h, d_v, d_d = D
    mu_h, mu_v, mu_d = mu
    total = 0.0
    for orientation, length in body_lengths.items():
        if length < 0.0:
            raise ValueError(f"Body length for orientation {orientation} must be non-negative, got {length}")
        o = float(orientation)
        total += length * (abs(math.sin(o - math.pi / 2.0)) * d_v * mu_v
                           + abs(math.sin(o)) * d_h * mu_h
                           + abs(math.sin(o - math.pi / 4.0)) * d_d * mu_d)
    return lam * total
