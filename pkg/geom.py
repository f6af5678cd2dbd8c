"""
GilbertLab Planar Geometry
Angles, segments, rectangles, convex polygons and the kill regions behind E(w, phi)
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi

# Absolute tolerance on coordinates; general position makes exact ties measure-zero.
COORD_TOL = 1e-9
# Below this |sin| two directions are treated as parallel.
PARALLEL_TOL = 1e-12

Point = Tuple[float, float]


class GeometryError(ValueError):
    """Raised when a geometric construction is undefined for its inputs"""


def normalize_angle(radians: float) -> float:
    """Map any real angle to [0, 2*pi)"""
    value = math.fmod(float(radians), TWO_PI)
    if value < 0.0:
        value += TWO_PI
    # fmod of a value just below 2*pi can round up to 2*pi
    if value >= TWO_PI:
        value = 0.0
    return value


@dataclass(frozen=True)
class Angle:
    """Direction in the plane, canonicalized to [0, 2*pi) at construction"""
    radians: float

    def __post_init__(self):
        object.__setattr__(self, 'radians', normalize_angle(self.radians))

    def vec(self) -> np.ndarray:
        return np.array([math.cos(self.radians), math.sin(self.radians)])

    def perp(self) -> 'Angle':
        return Angle(self.radians + math.pi / 2.0)

    def opposite(self) -> 'Angle':
        return Angle(self.radians + math.pi)

    def is_parallel_to(self, other: 'Angle') -> bool:
        return abs(math.sin(self.radians - other.radians)) < PARALLEL_TOL

    def __float__(self) -> float:
        return self.radians

    def __lt__(self, other: 'Angle') -> bool:
        return self.radians < other.radians


def as_angle(value) -> Angle:
    """Accept an Angle or a float in radians"""
    if isinstance(value, Angle):
        return value
    return Angle(float(value))


def unit_vector(radians: float) -> np.ndarray:
    return np.array([math.cos(radians), math.sin(radians)])


def cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


@dataclass(frozen=True)
class Segment:
    """Straight segment carrying a motorcycle trail, an obstacle edge or a mosaic edge"""
    start: Point
    end: Point
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'start', (float(self.start[0]), float(self.start[1])))
        object.__setattr__(self, 'end', (float(self.end[0]), float(self.end[1])))
        if self.length <= 0.0 and not self.degenerate:
            raise GeometryError(f"Zero-length segment at {self.start} must be flagged degenerate")

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    @property
    def midpoint(self) -> Point:
        return ((self.start[0] + self.end[0]) / 2.0, (self.start[1] + self.end[1]) / 2.0)

    def distance_to(self, p: Point) -> float:
        """Euclidean distance from p to the closed segment"""
        a = np.asarray(self.start)
        b = np.asarray(self.end)
        q = np.asarray(p, dtype=float)
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0.0:
            return float(np.linalg.norm(q - a))
        t = min(1.0, max(0.0, float((q - a) @ ab) / denom))
        return float(np.linalg.norm(q - (a + t * ab)))

    def contains(self, p: Point, tol: float = COORD_TOL) -> bool:
        return self.distance_to(p) <= tol


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned window [xmin, xmax] x [ymin, ymax]"""
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @classmethod
    def square(cls, side: float, origin: Point = (0.0, 0.0)) -> 'Rectangle':
        return cls(origin[0], origin[1], origin[0] + side, origin[1] + side)

    @classmethod
    def centered(cls, width: float, height: float) -> 'Rectangle':
        return cls(-width / 2.0, -height / 2.0, width / 2.0, height / 2.0)

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)

    def is_empty(self) -> bool:
        return self.width <= 0.0 or self.height <= 0.0

    def expand(self, margin: float) -> 'Rectangle':
        return Rectangle(self.xmin - margin, self.ymin - margin, self.xmax + margin, self.ymax + margin)

    def shrink(self, margin: float) -> 'Rectangle':
        return self.expand(-margin)

    def contains(self, p: Point) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return ((pts[:, 0] >= self.xmin) & (pts[:, 0] <= self.xmax)
                & (pts[:, 1] >= self.ymin) & (pts[:, 1] <= self.ymax))

    def vertices(self) -> List[Point]:
        return [(self.xmin, self.ymin), (self.xmax, self.ymin), (self.xmax, self.ymax), (self.xmin, self.ymax)]


class KillRegionKind(Enum):
    TRIANGLE = "triangle"
    TRAPEZIUM = "trapezium"


@dataclass(frozen=True)
class KillRegion:
    """
    Start positions (relative to the far end of a phi-path of length w_phi)
    from which a psi-motorcycle crosses that path first, travelling at most w_psi.
    """
    kind: KillRegionKind
    vertices: Tuple[Point, ...]
    w_phi: float
    w_psi: float
    phi: Angle
    psi: Angle

    @property
    def sin_gap(self) -> float:
        return abs(math.sin(self.psi.radians - self.phi.radians))

    @property
    def degenerate(self) -> bool:
        return self.sin_gap < PARALLEL_TOL or min(self.w_phi, self.w_psi) == 0.0

    def translated(self, offset) -> List[Point]:
        return [(v[0] + float(offset[0]), v[1] + float(offset[1])) for v in self.vertices]


def kill_region(phi, psi, w_phi: float, w_psi: float) -> KillRegion:
    """
    Build the triangle (w_psi >= w_phi) or truncated trapezium (w_psi < w_phi)
    for a phi-motorcycle threatened by psi-motorcycles.
    """
    phi = as_angle(phi)
    psi = as_angle(psi)
    if phi == psi:
        raise GeometryError(f"Kill region undefined for identical directions {phi.radians}")
    if w_phi < 0.0 or w_psi < 0.0:
        raise GeometryError(f"Path lengths must be non-negative, got w_phi={w_phi}, w_psi={w_psi}")

    u_phi = phi.vec()
    u_psi = psi.vec()
    origin = (0.0, 0.0)
    if w_psi >= w_phi:
        a = -w_phi * u_psi
        b = -w_phi * u_phi
        verts = (origin, (float(a[0]), float(a[1])), (float(b[0]), float(b[1])))
        kind = KillRegionKind.TRIANGLE
    else:
        a = -w_psi * u_psi
        cut = (w_psi - w_phi) * u_phi - w_psi * u_psi
        b = -w_phi * u_phi
        verts = (origin, (float(a[0]), float(a[1])), (float(cut[0]), float(cut[1])), (float(b[0]), float(b[1])))
        kind = KillRegionKind.TRAPEZIUM
    return KillRegion(kind=kind, vertices=verts, w_phi=float(w_phi), w_psi=float(w_psi), phi=phi, psi=psi)


def region_area(region: KillRegion) -> float:
    """Closed-form area of a kill region"""
    half_sin = region.sin_gap / 2.0
    if region.sin_gap < PARALLEL_TOL:
        return 0.0
    if region.kind == KillRegionKind.TRIANGLE:
        return half_sin * region.w_phi ** 2
    return half_sin * (2.0 * region.w_phi * region.w_psi - region.w_psi ** 2)


def signed_area(pts: Sequence[Point]) -> float:
    """Signed shoelace area, positive for counter-clockwise loops"""
    arr = np.asarray(pts, dtype=float).reshape(-1, 2)
    x = arr[:, 0]
    y = arr[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def shoelace_area(pts: Sequence[Point]) -> float:
    if len(pts) < 3:
        raise GeometryError(f"Polygon area needs at least 3 points, got {len(pts)}")
    return abs(signed_area(pts))


def polygon_centroid(pts: Sequence[Point]) -> Point:
    """Area centroid of a simple polygon; vertex mean for degenerate loops"""
    arr = np.asarray(pts, dtype=float).reshape(-1, 2)
    a = signed_area(arr)
    if abs(a) < 1e-15:
        m = arr.mean(axis=0)
        return (float(m[0]), float(m[1]))
    x = arr[:, 0]
    y = arr[:, 1]
    xn = np.roll(x, -1)
    yn = np.roll(y, -1)
    w = x * yn - xn * y
    cx = float(np.sum((x + xn) * w)) / (6.0 * a)
    cy = float(np.sum((y + yn) * w)) / (6.0 * a)
    return (cx, cy)


def ray_intersection(o1, phi1, o2, phi2) -> Optional[Tuple[Point, float, float]]:
    """
    Crossing of the open rays o_i + t*vec(phi_i), t > 0.

    Returns (point, t1, t2) or None for parallel rays and crossings at or
    behind either origin.
    """
    d1 = as_angle(phi1).vec()
    d2 = as_angle(phi2).vec()
    den = cross2(d1, d2)
    if abs(den) < PARALLEL_TOL:
        return None
    diff = np.asarray(o2, dtype=float) - np.asarray(o1, dtype=float)
    t1 = cross2(diff, d2) / den
    t2 = cross2(diff, d1) / den
    if t1 <= COORD_TOL or t2 <= COORD_TOL:
        return None
    p = np.asarray(o1, dtype=float) + t1 * d1
    return (float(p[0]), float(p[1])), float(t1), float(t2)


def ray_segment_intersection(origin, direction: np.ndarray, a: Point, b: Point) -> Optional[Tuple[float, Point]]:
    """First crossing (t > 0) of a ray with a closed segment [a, b]; None if parallel or missed"""
    o = np.asarray(origin, dtype=float)
    pa = np.asarray(a, dtype=float)
    pb = np.asarray(b, dtype=float)
    e = pb - pa
    den = cross2(direction, e)
    if abs(den) < PARALLEL_TOL:
        return None
    diff = pa - o
    t = cross2(diff, e) / den
    s = cross2(diff, direction) / den
    if t <= COORD_TOL or s < -COORD_TOL or s > 1.0 + COORD_TOL:
        return None
    p = o + t * direction
    return float(t), (float(p[0]), float(p[1]))


def ray_exit_distance(origin, direction: np.ndarray, box: Rectangle) -> float:
    """Distance along a ray from an interior origin to the boundary of box"""
    best = math.inf
    for k, (lo, hi) in enumerate(((box.xmin, box.xmax), (box.ymin, box.ymax))):
        d = float(direction[k])
        if d > PARALLEL_TOL:
            best = min(best, (hi - float(origin[k])) / d)
        elif d < -PARALLEL_TOL:
            best = min(best, (lo - float(origin[k])) / d)
    return max(0.0, best)


def point_in_convex_polygon(p, vertices: Sequence[Point], tol: float = COORD_TOL) -> bool:
    """Membership in a convex polygon given in either orientation; boundary counts as inside"""
    arr = np.asarray(vertices, dtype=float).reshape(-1, 2)
    q = np.asarray(p, dtype=float)
    edges = np.roll(arr, -1, axis=0) - arr
    rel = q - arr
    crosses = edges[:, 0] * rel[:, 1] - edges[:, 1] * rel[:, 0]
    scale = max(1.0, float(np.abs(arr).max()))
    return bool(np.all(crosses >= -tol * scale) or np.all(crosses <= tol * scale))


def points_in_convex_polygon(pts: np.ndarray, vertices: Sequence[Point], tol: float = COORD_TOL) -> np.ndarray:
    """Vectorized point_in_convex_polygon over an (n, 2) array"""
    arr = np.asarray(vertices, dtype=float).reshape(-1, 2)
    q = np.asarray(pts, dtype=float).reshape(-1, 2)
    if signed_area(arr) < 0:
        arr = arr[::-1]
    inside = np.ones(len(q), dtype=bool)
    for i in range(len(arr)):
        a = arr[i]
        e = arr[(i + 1) % len(arr)] - a
        rel = q - a
        inside &= e[0] * rel[:, 1] - e[1] * rel[:, 0] >= -tol
    return inside


def projection_interval(vertices: Sequence[Point], normal: np.ndarray) -> Tuple[float, float]:
    """Range of <v, normal> over the polygon vertices"""
    arr = np.asarray(vertices, dtype=float).reshape(-1, 2)
    proj = arr @ np.asarray(normal, dtype=float)
    return float(proj.min()), float(proj.max())


def clip_line_to_convex_polygon(direction: float, offset: float, vertices: Sequence[Point]) -> Optional[Segment]:
    """
    Clip the line {x : <x, vec(direction + pi/2)> = offset} to a convex polygon.
    Returns None when the line misses the polygon or only touches it.
    """
    d = unit_vector(direction)
    n = unit_vector(direction + math.pi / 2.0)
    base = offset * n
    arr = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if signed_area(arr) < 0:
        arr = arr[::-1]
    t_lo, t_hi = -math.inf, math.inf
    for i in range(len(arr)):
        a = arr[i]
        b = arr[(i + 1) % len(arr)]
        e = b - a
        # inward normal of a CCW edge
        inward = np.array([-e[1], e[0]])
        num = float(inward @ (base - a))
        den = float(inward @ d)
        if abs(den) < PARALLEL_TOL:
            if num < 0.0:
                return None
            continue
        t = -num / den
        if den > 0:
            t_lo = max(t_lo, t)
        else:
            t_hi = min(t_hi, t)
    if t_hi - t_lo <= COORD_TOL:
        return None
    p0 = base + t_lo * d
    p1 = base + t_hi * d
    return Segment((float(p0[0]), float(p0[1])), (float(p1[0]), float(p1[1])))


def _circle_two(p, q) -> Tuple[np.ndarray, float]:
    c = (p + q) / 2.0
    return c, float(np.linalg.norm(p - c))


def _circle_three(p, q, s) -> Tuple[np.ndarray, float]:
    ax, ay = p
    bx, by = q
    cx, cy = s
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-14:
        # collinear: the farthest pair spans the ball
        pairs = [(p, q), (p, s), (q, s)]
        far = max(pairs, key=lambda pr: float(np.linalg.norm(pr[0] - pr[1])))
        return _circle_two(*far)
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    c = np.array([ux, uy])
    return c, float(np.linalg.norm(p - c))


def smallest_enclosing_ball(points: Sequence[Point]) -> Tuple[Point, float]:
    """Minimum enclosing circle (Welzl, iterative move-to-front form)"""
    arr = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(arr) == 0:
        raise GeometryError("Enclosing ball of an empty point set is undefined")
    order = np.random.default_rng(0).permutation(len(arr))
    pts = [arr[i] for i in order]
    tol = 1e-12

    def outside(q, c, r):
        return float(np.linalg.norm(q - c)) > r + tol * max(1.0, r)

    c, r = pts[0].copy(), 0.0
    for i in range(1, len(pts)):
        if not outside(pts[i], c, r):
            continue
        c, r = pts[i].copy(), 0.0
        for j in range(i):
            if not outside(pts[j], c, r):
                continue
            c, r = _circle_two(pts[i], pts[j])
            for m in range(j):
                if outside(pts[m], c, r):
                    c, r = _circle_three(pts[i], pts[j], pts[m])
    return (float(c[0]), float(c[1])), float(r)



def clip_segment_to_rectangle(seg: Segment, box: Rectangle) -> Optional[Segment]:
    """Liang-Barsky clip; None when the segment misses the box"""
    p0 = np.asarray(seg.start, dtype=float)
    d = np.asarray(seg.end, dtype=float) - p0
    t_lo, t_hi = 0.0, 1.0
    for p, q in ((-d[0], p0[0] - box.xmin), (d[0], box.xmax - p0[0]),
                 (-d[1], p0[1] - box.ymin), (d[1], box.ymax - p0[1])):
        if abs(p) < PARALLEL_TOL:
            if q < 0.0:
                return None
            continue
        t = q / p
        if p < 0.0:
            t_lo = max(t_lo, t)
        else:
            t_hi = min(t_hi, t)
        if t_lo > t_hi:
            return None
    a = p0 + t_lo * d
    b = p0 + t_hi * d
    return Segment((float(a[0]), float(a[1])), (float(b[0]), float(b[1])), degenerate=bool(np.array_equal(a, b)))
