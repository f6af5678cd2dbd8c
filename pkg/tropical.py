"""
GilbertLab Tropical Curves
Min-plus polynomials, regular subdivisions, dual plane curves, stable intersections and germ-grain ensembles
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull

from geom import Point, Rectangle, Segment, cross2, smallest_enclosing_ball
from motorsim import Motorcycle, Obstacle
from procs import make_rng
from run_config import VERBOSE

ZERO_TOL = 1e-9
PLANE_TOL = 1e-9
MAX_REDRAWS = 3

Monomial = Tuple[int, int]


class DegeneracyError(RuntimeError):
    """Raised when a perturbed intersection stays non-transversal"""


class ArmDirection(Enum):
    EAST = "east"
    NORTH = "north"
    SOUTHWEST = "southwest"

    @property
    def radians(self) -> float:
        return {'east': 0.0, 'north': math.pi / 2.0, 'southwest': 5.0 * math.pi / 4.0}[self.value]

    @property
    def vector(self) -> np.ndarray:
        return {'east': np.array([1.0, 0.0]), 'north': np.array([0.0, 1.0]),
                'southwest': np.array([-1.0, -1.0]) / math.sqrt(2.0)}[self.value]

    @property
    def lattice(self) -> Tuple[int, int]:
        return {'east': (1, 0), 'north': (0, 1), 'southwest': (-1, -1)}[self.value]


class CentroidKind(Enum):
    C1_MIN_Y_HORIZONTAL_APEX = "c1"
    C2_MIN_X_VERTICAL_APEX = "c2"
    MASS_CENTER = "mass"


@dataclass
class TropPoly:
    """min over the support of c_ij + i*x + j*y; absent monomials are +infinity"""
    coeffs: Dict[Monomial, float]

    def __post_init__(self):
        clean = {}
        for (i, j), c in self.coeffs.items():
            if int(i) < 0 or int(j) < 0:
                raise ValueError(f"Exponents must be non-negative, got {(i, j)}")
            if math.isfinite(float(c)):
                clean[(int(i), int(j))] = float(c)
        if not clean:
            raise ValueError("Tropical polynomial needs at least one finite coefficient")
        self.coeffs = clean

    @property
    def degree(self) -> int:
        return max(i + j for i, j in self.coeffs)

    @property
    def is_standard(self) -> bool:
        d = self.degree
        return d >= 1 and all(m in self.coeffs for m in ((0, 0), (d, 0), (0, d)))

    @property
    def spread(self) -> float:
        values = list(self.coeffs.values())
        return max(values) - min(values)

    def eval(self, x: float, y: float) -> Tuple[float, List[Monomial]]:
        terms = {m: c + m[0] * x + m[1] * y for m, c in self.coeffs.items()}
        value = min(terms.values())
        tol = ZERO_TOL * max(1.0, abs(value))
        return value, sorted(m for m, v in terms.items() if v - value <= tol)

    def is_zero(self, x: float, y: float) -> bool:
        return len(self.eval(x, y)[1]) >= 2

    def shifted(self, dx: float, dy: float) -> 'TropPoly':
        """Polynomial whose zero set is this one translated by (dx, dy)"""
        return TropPoly({(i, j): c - i * dx - j * dy for (i, j), c in self.coeffs.items()})

    def to_text(self) -> str:
        return ''.join(f"{i} {j} {c!r}\n" for (i, j), c in sorted(self.coeffs.items()))

    @classmethod
    def from_text(cls, text: str) -> 'TropPoly':
        coeffs = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"Line {lineno}: expected 'i j c', got {line!r}")
            try:
                coeffs[(int(parts[0]), int(parts[1]))] = float(parts[2])
            except ValueError:
                raise ValueError(f"Line {lineno}: expected integers i j and a real c, got {line!r}")
        return cls(coeffs)

    @classmethod
    def from_file(cls, path: str) -> 'TropPoly':
        with open(path) as f:
            return cls.from_text(f.read())


def evaluate(f: TropPoly, x: float, y: float) -> Tuple[float, List[Monomial]]:
    return f.eval(x, y)


def tropical_line() -> TropPoly:
    """x + y + 0 in min-plus notation"""
    return TropPoly({(1, 0): 0.0, (0, 1): 0.0, (0, 0): 0.0})


def figure_cubic() -> TropPoly:
    """A cubic whose subdivision skips the lattice points (0, 1) and (2, 0)"""
    return TropPoly({(0, 3): 3.0, (0, 2): 1.0, (1, 2): 1.0, (0, 1): 9.0, (1, 1): 0.0, (2, 1): 1.0,
                     (0, 0): 3.0, (1, 0): 1.0, (2, 0): 8.0, (3, 0): 2.0})


@dataclass
class Subdivision:
    """Cells of the regular subdivision of Newt(f), as CCW lattice-point loops"""
    cells: List[List[Monomial]]
    planes: List[Tuple[float, float, float]]
    degree: int

    @property
    def vertices(self) -> List[Monomial]:
        return sorted({p for cell in self.cells for p in cell})

    def negated_cells(self) -> List[List[Monomial]]:
        """Cells drawn in the reflected polygon -Newt(f)"""
        return [[(-i, -j) for i, j in cell] for cell in self.cells]

    def edges(self) -> Dict[Tuple[Monomial, Monomial], List[int]]:
        out: Dict[Tuple[Monomial, Monomial], List[int]] = {}
        for idx, cell in enumerate(self.cells):
            for a, b in zip(cell, cell[1:] + cell[:1]):
                out.setdefault(tuple(sorted((a, b))), []).append(idx)
        return out


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _ccw_corners(points: Sequence[Monomial]) -> List[Monomial]:
    hull = ConvexHull(np.asarray(points, dtype=float))
    corners = [tuple(int(v) for v in points[k]) for k in hull.vertices]
    start = corners.index(min(corners))
    return corners[start:] + corners[:start]


def _refine(corners: List[Monomial], marks: Iterable[Monomial]) -> List[Monomial]:
    """Insert subdivision vertices lying inside the cell's edges"""
    marks = list(marks)
    loop: List[Monomial] = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        loop.append(a)
        ab = (b[0] - a[0], b[1] - a[1])
        between = []
        for m in marks:
            am = (m[0] - a[0], m[1] - a[1])
            if m in (a, b) or ab[0] * am[1] - ab[1] * am[0] != 0:
                continue
            t = (am[0] * ab[0] + am[1] * ab[1]) / float(ab[0] ** 2 + ab[1] ** 2)
            if 0.0 < t < 1.0:
                between.append((t, m))
        loop.extend(m for _, m in sorted(between))
    return loop


def regular_subdivision(f: TropPoly) -> Subdivision:
    """Project the lower faces of the lifted support {(i, j, c_ij)} back to the plane"""
    if not f.is_standard:
        raise ValueError(f"Only standard tropical polynomials are supported (degree {f.degree})")
    d = f.degree
    monomials = sorted(f.coeffs)
    lifted = np.array([(i, j, f.coeffs[(i, j)]) for i, j in monomials], dtype=float)
    # a point far above closes the hull so that coplanar supports still form a solid
    sky = np.array([[d / 3.0, d / 3.0, lifted[:, 2].max() + 10.0 * (f.spread + d + 1.0)]])
    hull = ConvexHull(np.vstack([lifted, sky]))
    n_pts = len(monomials)

    lower = [k for k, eq in enumerate(hull.equations)
             if eq[2] < -PLANE_TOL and all(v < n_pts for v in hull.simplices[k])]
    lower_set = set(lower)
    uf = _UnionFind(len(hull.simplices))
    for k in lower:
        for nb in hull.neighbors[k]:
            if nb in lower_set and np.allclose(hull.equations[k], hull.equations[nb], atol=PLANE_TOL):
                uf.union(k, nb)
    groups: Dict[int, set] = {}
    for k in lower:
        groups.setdefault(uf.find(k), set()).update(int(v) for v in hull.simplices[k])

    corner_sets = []
    for root in sorted(groups):
        pts = [monomials[v] for v in sorted(groups[root])]
        corner_sets.append(_ccw_corners(pts))
    marks = sorted({p for corners in corner_sets for p in corners})
    cells = [_refine(corners, marks) for corners in corner_sets]
    cells.sort(key=lambda cell: min(cell))

    planes = []
    for cell in cells:
        a = np.array([[i, j, 1.0] for i, j in cell])
        c = np.array([f.coeffs[m] for m in cell])
        sol, *_ = np.linalg.lstsq(a, c, rcond=None)
        planes.append((float(sol[0]), float(sol[1]), float(sol[2])))
    return Subdivision(cells, planes, d)


@dataclass
class CurveEdge:
    start: int
    end: int
    multiplicity: int
    dual: Tuple[Monomial, Monomial]


@dataclass
class Arm:
    apex: Point
    direction: ArmDirection
    multiplicity: int
    dual: Tuple[Monomial, Monomial]


@dataclass
class TropCurve:
    vertices: List[Point]
    bounded_edges: List[CurveEdge]
    arms: List[Arm]
    subdivision: Subdivision
    poly: TropPoly

    @property
    def degree(self) -> int:
        return self.subdivision.degree

    def edge_segment(self, edge: CurveEdge) -> Segment:
        return Segment(self.vertices[edge.start], self.vertices[edge.end])

    def body_segments(self) -> List[Segment]:
        return [self.edge_segment(e) for e in self.bounded_edges]

    def arm_count(self, direction: ArmDirection, weighted: bool = True) -> int:
        return sum(a.multiplicity if weighted else 1 for a in self.arms if a.direction == direction)

    def translated(self, dx: float, dy: float) -> 'TropCurve':
        shift = lambda p: (p[0] + dx, p[1] + dy)
        return TropCurve([shift(v) for v in self.vertices], list(self.bounded_edges),
                         [Arm(shift(a.apex), a.direction, a.multiplicity, a.dual) for a in self.arms],
                         self.subdivision, self.poly.shifted(dx, dy))

    def body_lengths(self) -> Dict[float, float]:
        """Total body length per orientation in [0, pi)"""
        out: Dict[float, float] = {}
        for seg in self.body_segments():
            dx = seg.end[0] - seg.start[0]
            dy = seg.end[1] - seg.start[1]
            key = round(math.fmod(math.atan2(dy, dx) + math.pi, math.pi), 12)
            out[key] = out.get(key, 0.0) + seg.length
        return out


def _lattice_length(a: Monomial, b: Monomial) -> int:
    return math.gcd(abs(b[0] - a[0]), abs(b[1] - a[1]))


def _boundary_arm(a: Monomial, b: Monomial, d: int) -> Optional[ArmDirection]:
    if a[1] == 0 and b[1] == 0:
        return ArmDirection.NORTH
    if a[0] == 0 and b[0] == 0:
        return ArmDirection.EAST
    if a[0] + a[1] == d and b[0] + b[1] == d:
        return ArmDirection.SOUTHWEST
    return None


def curve(f: TropPoly) -> TropCurve:
    """Tropical plane curve dual to the regular subdivision of Newt(f)"""
    sub = regular_subdivision(f)
    d = sub.degree
    vertices = [(-alpha, -beta) for alpha, beta, _ in sub.planes]
    bounded: List[CurveEdge] = []
    arms: List[Arm] = []
    for edge, owners in sorted(sub.edges().items()):
        mult = _lattice_length(*edge)
        if len(owners) == 2:
            bounded.append(CurveEdge(owners[0], owners[1], mult, edge))
        elif len(owners) == 1:
            side = _boundary_arm(edge[0], edge[1], d)
            if side is None:
                raise ValueError(f"Subdivision edge {edge} has one cell but is not on the Newton polygon boundary")
            arms.append(Arm(vertices[owners[0]], side, mult, edge))
        else:
            raise ValueError(f"Subdivision edge {edge} shared by {len(owners)} cells")
    return TropCurve(vertices, bounded, arms, sub, f)


def body_radius(c: TropCurve) -> float:
    """Radius of the smallest ball containing the body"""
    _, radius = smallest_enclosing_ball(c.vertices)
    return radius


def centroid(c: TropCurve, kind: CentroidKind = CentroidKind.MASS_CENTER) -> Point:
    """Translation-equivariant reference point of a curve"""
    kind = CentroidKind(kind)
    if kind == CentroidKind.C1_MIN_Y_HORIZONTAL_APEX:
        apexes = [a.apex for a in c.arms if a.direction == ArmDirection.EAST]
        return min(apexes, key=lambda p: (p[1], p[0]))
    if kind == CentroidKind.C2_MIN_X_VERTICAL_APEX:
        apexes = [a.apex for a in c.arms if a.direction == ArmDirection.NORTH]
        return min(apexes, key=lambda p: (p[0], p[1]))
    pts = np.asarray(c.vertices, dtype=float)
    m = pts.mean(axis=0)
    return (float(m[0]), float(m[1]))


@dataclass
class _Piece:
    """A bounded edge (segment) or an arm (ray) with its dual lattice edge vector"""
    origin: np.ndarray
    direction: np.ndarray
    length: float
    dual_vector: Tuple[int, int]


def _pieces(c: TropCurve, offset=(0.0, 0.0)) -> List[_Piece]:
    off = np.asarray(offset, dtype=float)
    out = []
    for e in c.bounded_edges:
        a = np.asarray(c.vertices[e.start]) + off
        b = np.asarray(c.vertices[e.end]) + off
        length = float(np.linalg.norm(b - a))
        if length <= 0.0:
            continue
        dv = (e.dual[1][0] - e.dual[0][0], e.dual[1][1] - e.dual[0][1])
        out.append(_Piece(a, (b - a) / length, length, dv))
    for arm in c.arms:
        dv = (arm.dual[1][0] - arm.dual[0][0], arm.dual[1][1] - arm.dual[0][1])
        out.append(_Piece(np.asarray(arm.apex) + off, arm.direction.vector, math.inf, dv))
    return out


def _crossings(c1: TropCurve, c2: TropCurve, offset, tol: float) -> Optional[List[Tuple[Point, int]]]:
    """Transversal crossings with multiplicity |det| of the dual edges; None on degeneracy"""
    out = []
    for p in _pieces(c1):
        for q in _pieces(c2, offset):
            den = cross2(p.direction, q.direction)
            diff = q.origin - p.origin
            if abs(den) < 1e-12:
                # parallel: degenerate only if they overlap on a common line
                if abs(cross2(diff, p.direction)) < tol:
                    s0 = float(diff @ p.direction)
                    s1 = s0 + (q.length if math.isfinite(q.length) else math.inf) * float(q.direction @ p.direction)
                    lo, hi = min(s0, s1), max(s0, s1)
                    if hi > -tol and lo < p.length + tol:
                        return None
                continue
            s = cross2(diff, q.direction) / den
            t = cross2(diff, p.direction) / den
            if s < -tol or t < -tol or s > p.length + tol or t > q.length + tol:
                continue
            if abs(s) <= tol or abs(t) <= tol or abs(s - p.length) <= tol or abs(t - q.length) <= tol:
                return None
            point = p.origin + s * p.direction
            mult = abs(p.dual_vector[0] * q.dual_vector[1] - p.dual_vector[1] * q.dual_vector[0])
            out.append(((float(point[0]), float(point[1])), int(mult)))
    return out


def stable_intersection(c1: TropCurve, c2: TropCurve, seed: int = 0) -> List[Tuple[Point, int]]:
    """
    Crossings of c1 with a generically translated c2, merged into stable points.
    Multiplicity of a transversal crossing is m1 * m2 * |det(u1, u2)| for primitive
    edge directions, i.e. the absolute determinant of the two dual lattice edges.
    """
    rng = make_rng(seed)
    scale = 1.0 + max(body_radius(c1), body_radius(c2))
    magnitude = 1e-6 * scale
    tol = 1e-10 * scale
    for attempt in range(MAX_REDRAWS + 1):
        angle = rng.uniform(0.0, 2.0 * math.pi)
        offset = magnitude * np.array([math.cos(angle), math.sin(angle)])
        found = _crossings(c1, c2, offset, tol)
        if found is not None:
            return _merge_points(found, 100.0 * magnitude)
        if attempt < MAX_REDRAWS:
            print(f"⚠️ stable intersection hit a degenerate perturbation, re-drawing ({attempt + 1}/{MAX_REDRAWS})")
    raise DegeneracyError(f"Intersection stayed degenerate after {MAX_REDRAWS} re-draws")


def _merge_points(found: List[Tuple[Point, int]], radius: float) -> List[Tuple[Point, int]]:
    merged: List[Tuple[np.ndarray, int, int]] = []
    for point, mult in sorted(found):
        p = np.asarray(point)
        for k, (q, m, n) in enumerate(merged):
            if float(np.linalg.norm(p - q / n)) <= radius:
                merged[k] = (q + p, m + mult, n + 1)
                break
        else:
            merged.append((p.copy(), mult, 1))
    return [((float(q[0] / n), float(q[1] / n)), m) for q, m, n in merged]


@dataclass
class CurveLaw:
    """
    Random standard polynomials: degree uniform on 1..degree_max, coefficients
    i.i.d. uniform on [0, spread] over the full triangle of monomials.
    A fixed polynomial can be supplied instead.
    """
    degree_max: int = 3
    spread: float = 1.0
    fixed: Optional[TropPoly] = None

    def __post_init__(self):
        if self.degree_max < 1:
            raise ValueError(f"degree_max must be >= 1, got {self.degree_max}")
        if self.spread < 0.0:
            raise ValueError(f"Coefficient spread bound must be non-negative, got {self.spread}")
        if self.fixed is not None:
            if not self.fixed.is_standard:
                raise ValueError("Fixed curve law needs a standard polynomial")
            if self.fixed.spread > self.spread + 1e-12:
                raise ValueError(f"Fixed polynomial spread {self.fixed.spread} exceeds bound {self.spread}")

    @classmethod
    def deterministic(cls, poly: TropPoly) -> 'CurveLaw':
        return cls(degree_max=poly.degree, spread=poly.spread, fixed=poly)

    @property
    def mean_degree(self) -> float:
        if self.fixed is not None:
            return float(self.fixed.degree)
        return (self.degree_max + 1) / 2.0

    def sample(self, rng: np.random.Generator) -> TropPoly:
        if self.fixed is not None:
            return self.fixed
        d = int(rng.integers(1, self.degree_max + 1))
        monomials = [(i, j) for i in range(d + 1) for j in range(d + 1 - i)]
        values = rng.uniform(0.0, self.spread, len(monomials))
        return TropPoly({m: float(v) for m, v in zip(monomials, values)})


def random_standard_poly(rng: np.random.Generator, degree: int, spread: float = 1.0) -> TropPoly:
    monomials = [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]
    values = rng.uniform(0.0, spread, len(monomials))
    return TropPoly({m: float(v) for m, v in zip(monomials, values)})


@dataclass
class GermGrain:
    obstacles: List[Obstacle]
    motorcycles: List[Motorcycle]
    curves: List[TropCurve] = field(default_factory=list)


def curve_complex(c: TropCurve, complex_id: int, first_id: int, k: int) -> Tuple[Obstacle, List[Motorcycle]]:
    """Body as an obstacle; arms merged by apex and direction into weighted motorcycles"""
    if c.bounded_edges:
        segments = c.body_segments()
    else:
        segments = [Segment(c.vertices[0], c.vertices[0], degenerate=True)]
    merged: Dict[Tuple[Point, ArmDirection], int] = {}
    order: List[Tuple[Point, ArmDirection]] = []
    for arm in c.arms:
        key = (arm.apex, arm.direction)
        if key not in merged:
            merged[key] = 0
            order.append(key)
        merged[key] += arm.multiplicity
    motorcycles = [Motorcycle(first_id + n, apex, direction.radians, k, complex_id, weight=merged[(apex, direction)])
                   for n, (apex, direction) in enumerate(order)]
    return Obstacle(complex_id, segments), motorcycles


def germ_grain(law: CurveLaw, lam: float, window: Rectangle, seed: int, k: int = 1) -> GermGrain:
    """Poisson germs, each carrying an i.i.d. curve whose mass centre sits on the germ"""
    if lam <= 0.0:
        raise ValueError(f"Germ intensity must be positive, got {lam}")
    rng = make_rng(seed)
    n = int(rng.poisson(lam * window.area))
    xs = rng.uniform(window.xmin, window.xmax, n)
    ys = rng.uniform(window.ymin, window.ymax, n)
    obstacles: List[Obstacle] = []
    motorcycles: List[Motorcycle] = []
    curves: List[TropCurve] = []
    for g in range(n):
        poly = law.sample(rng)
        if poly.spread > law.spread + 1e-12:
            raise ValueError(f"Sampled polynomial spread {poly.spread} exceeds the law's bound {law.spread}")
        base = curve(poly)
        cx, cy = centroid(base, CentroidKind.MASS_CENTER)
        placed = base.translated(float(xs[g]) - cx, float(ys[g]) - cy)
        obstacle, arms = curve_complex(placed, g, len(motorcycles), k)
        obstacles.append(obstacle)
        motorcycles.extend(arms)
        curves.append(placed)
    if VERBOSE:
        print(f"📊 germ_grain: {n} germs, {len(motorcycles)} arm motorcycles")
    return GermGrain(obstacles, motorcycles, curves)


@dataclass
class ArmStatistics:
    D_horizontal: float
    D_vertical: float
    D_diagonal: float
    D: float
    samples: int


def arm_multiplicity_means(law: CurveLaw, n: int, seed: int) -> ArmStatistics:
    """Mean number of distinct east, north and southwest arms, and the mean degree"""
    rng = make_rng(seed)
    totals = {ArmDirection.EAST: 0, ArmDirection.NORTH: 0, ArmDirection.SOUTHWEST: 0}
    degree = 0
    for _ in range(n):
        c = curve(law.sample(rng))
        degree += c.degree
        for direction in totals:
            totals[direction] += len({a.apex for a in c.arms if a.direction == direction})
    return ArmStatistics(totals[ArmDirection.EAST] / n, totals[ArmDirection.NORTH] / n,
                         totals[ArmDirection.SOUTHWEST] / n, degree / n, n)
