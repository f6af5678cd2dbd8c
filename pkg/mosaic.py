"""
GilbertLab Mosaic
Face-to-face planar arrangements of trails and lines, with vertex, edge, face and polytrope census
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from geom import Point, Rectangle, Segment, clip_line_to_convex_polygon, polygon_centroid, signed_area
from limits import PolytropeDensities, line_orientation
from motorsim import EventLogError, KillerKind, SimResult
from procs import Line, window_vertices

# Event locations must lie this close to both trails.
INCIDENCE_TOL = 1e-7
# Turn angles below this are flat (radians).
FLAT_TOL = 1e-9
# Loops with smaller signed area are outer boundaries or degenerate walks.
AREA_TOL = 1e-14


class VertexKind(Enum):
    SITE = "site"
    GRAVE_DEG3 = "grave_deg3"
    CROSSING_DEG4 = "crossing_deg4"
    FLAT = "flat"
    COMPLEX_VERTEX = "complex_vertex"
    HORIZON = "horizon"


# when two constructions land on one point the stronger kind wins
_KIND_PRIORITY = {
    VertexKind.HORIZON: 0,
    VertexKind.FLAT: 1,
    VertexKind.COMPLEX_VERTEX: 2,
    VertexKind.SITE: 3,
    VertexKind.CROSSING_DEG4: 4,
    VertexKind.GRAVE_DEG3: 5,
}


@dataclass
class MosaicVertex:
    point: Point
    kind: VertexKind
    degree: int = 0
    directions: Tuple[float, ...] = ()
    weight: int = 0


@dataclass
class FaceRecord:
    face_id: int
    area: float
    proper_vertex_count: int
    polytrope_class: Optional[int]
    centroid: Point
    loop: List[int] = field(default_factory=list)
    convex: bool = True


@dataclass
class MosaicGraph:
    vertices: List[MosaicVertex]
    edges: List[Tuple[int, int]]
    he_origin: List[int]
    he_twin: List[int]
    he_next: List[int]
    faces: List[FaceRecord]
    components: int

    @property
    def euler_characteristic(self) -> int:
        """V - E + F over bounded faces; equals the number of components"""
        return len(self.vertices) - len(self.edges) + len(self.faces)

    def degree_sum(self) -> int:
        return sum(v.degree for v in self.vertices)

    def edge_segment(self, e: int) -> Segment:
        a, b = self.edges[e]
        return Segment(self.vertices[a].point, self.vertices[b].point)

    def vertices_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame({
            'x': [v.point[0] for v in self.vertices],
            'y': [v.point[1] for v in self.vertices],
            'kind': [v.kind.value for v in self.vertices],
            'degree': [v.degree for v in self.vertices],
        }, columns=['x', 'y', 'kind', 'degree'])

    def faces_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame({
            'face_id': [f.face_id for f in self.faces],
            'class': [f.polytrope_class if f.polytrope_class is not None else '' for f in self.faces],
            'area': [f.area for f in self.faces],
            'centroid_x': [f.centroid[0] for f in self.faces],
            'centroid_y': [f.centroid[1] for f in self.faces],
        }, columns=['face_id', 'class', 'area', 'centroid_x', 'centroid_y'])


class MosaicBuilder:
    """Collects carriers (trails, obstacle edges, clipped lines) with their split points, then sweeps faces"""

    def __init__(self):
        self._index: Dict[Point, int] = {}
        self.vertices: List[MosaicVertex] = []
        self._edges: Dict[Tuple[int, int], int] = {}

    def vertex(self, p: Point, kind: VertexKind, directions: Tuple[float, ...] = (), weight: int = 0) -> int:
        key = (float(p[0]), float(p[1]))
        idx = self._index.get(key)
        if idx is None:
            idx = len(self.vertices)
            self._index[key] = idx
            self.vertices.append(MosaicVertex(key, kind, 0, tuple(directions), weight))
            return idx
        v = self.vertices[idx]
        if _KIND_PRIORITY[kind] > _KIND_PRIORITY[v.kind]:
            v.kind = kind
            if directions:
                v.directions = tuple(directions)
        v.weight += weight
        return idx

    def carrier(self, stops: Sequence[Tuple[float, int]]) -> None:
        """Chain consecutive split points (parameter, vertex) into edges"""
        ordered = sorted(stops)
        chain: List[int] = []
        for _, v in ordered:
            if not chain or chain[-1] != v:
                chain.append(v)
        for a, b in zip(chain, chain[1:]):
            key = (min(a, b), max(a, b))
            if key not in self._edges:
                self._edges[key] = len(self._edges)

    def build(self) -> MosaicGraph:
        edges = sorted(self._edges, key=self._edges.get)
        n = len(self.vertices)
        pts = np.array([v.point for v in self.vertices], dtype=float).reshape(-1, 2)

        he_origin: List[int] = []
        he_twin: List[int] = []
        for a, b in edges:
            he_origin.extend((a, b))
            he_twin.extend((len(he_twin) + 1, len(he_twin)))
        outgoing: List[List[int]] = [[] for _ in range(n)]
        for h, o in enumerate(he_origin):
            outgoing[o].append(h)
        angle = {}
        for h, o in enumerate(he_origin):
            d = pts[he_origin[he_twin[h]]] - pts[o]
            angle[h] = math.atan2(d[1], d[0])
        position = {}
        for v in range(n):
            outgoing[v].sort(key=lambda h: angle[h])
            for k, h in enumerate(outgoing[v]):
                position[h] = k
            self.vertices[v].degree = len(outgoing[v])

        # next(u->v) is the outgoing edge at v just clockwise of v->u
        he_next = [0] * len(he_origin)
        for h in range(len(he_origin)):
            t = he_twin[h]
            ring = outgoing[he_origin[t]]
            he_next[h] = ring[position[t] - 1]

        self._mark_flat(pts, outgoing, he_origin, he_twin)
        faces = self._faces(pts, he_origin, he_next)

        if edges:
            rows = np.array([a for a, _ in edges])
            cols = np.array([b for _, b in edges])
            adj = coo_matrix((np.ones(len(edges)), (rows, cols)), shape=(n, n))
            components, _ = connected_components(adj, directed=False)
        else:
            components = n
        return MosaicGraph(self.vertices, edges, he_origin, he_twin, he_next, faces, int(components))

    def _mark_flat(self, pts: np.ndarray, outgoing: List[List[int]], he_origin: List[int],
                   he_twin: List[int]) -> None:
        for v, ring in enumerate(outgoing):
            vert = self.vertices[v]
            if len(ring) != 2 or vert.kind in (VertexKind.SITE, VertexKind.HORIZON):
                continue
            d1 = pts[he_origin[he_twin[ring[0]]]] - pts[v]
            d2 = pts[he_origin[he_twin[ring[1]]]] - pts[v]
            norm = float(np.linalg.norm(d1) * np.linalg.norm(d2))
            sin = (d1[0] * d2[1] - d1[1] * d2[0]) / norm
            if abs(sin) < FLAT_TOL and float(d1 @ d2) < 0.0:
                vert.kind = VertexKind.FLAT

    def _faces(self, pts: np.ndarray, he_origin: List[int], he_next: List[int]) -> List[FaceRecord]:
        seen = [False] * len(he_origin)
        faces: List[FaceRecord] = []
        for start in range(len(he_origin)):
            if seen[start]:
                continue
            loop = []
            h = start
            while not seen[h]:
                seen[h] = True
                loop.append(he_origin[h])
                h = he_next[h]
            coords = pts[loop]
            area = signed_area(coords)
            if area <= AREA_TOL:
                continue
            proper, convex = _turns(coords)
            cls = proper if 3 <= proper <= 6 else None
            faces.append(FaceRecord(len(faces), float(area), proper, cls, polygon_centroid(coords), loop, convex))
        return faces


def _turns(coords: np.ndarray) -> Tuple[int, bool]:
    """Number of proper (non-flat) vertices of a CCW loop and whether every turn is left"""
    proper = 0
    convex = True
    m = len(coords)
    for i in range(m):
        u = coords[i - 1]
        v = coords[i]
        w = coords[(i + 1) % m]
        a = v - u
        b = w - v
        na = float(np.linalg.norm(a))
        nb = float(np.linalg.norm(b))
        if na == 0.0 or nb == 0.0:
            continue
        sin = (a[0] * b[1] - a[1] * b[0]) / (na * nb)
        if abs(sin) > FLAT_TOL:
            proper += 1
            if sin < 0.0:
                convex = False
        elif float(a @ b) < 0.0:
            # a dead end walked out and back
            convex = False
    return proper, convex


def _orientation(radians: float) -> float:
    return round(line_orientation(radians), 12)


def build_mosaic(result: SimResult) -> MosaicGraph:
    """
    Face-to-face arrangement of trails and obstacle complexes, built from the
    event log: every event splits the victim's trail and the killer's trail or
    obstacle segment at the recorded location.
    """
    builder = MosaicBuilder()
    motorcycles = result.motorcycles
    stops: Dict[int, List[Tuple[float, int]]] = {m.id: [] for m in motorcycles}
    obstacle_stops: Dict[Tuple[int, int], List[Tuple[float, int]]] = {}
    obstacle_by_id = {obs.complex_id: obs for obs in result.obstacles}
    complex_ids = {obs.complex_id for obs in result.obstacles if any(s.length > 0 for s in obs.segments)}

    for obs in result.obstacles:
        for j, seg in enumerate(obs.segments):
            a = builder.vertex(seg.start, VertexKind.COMPLEX_VERTEX)
            b = builder.vertex(seg.end, VertexKind.COMPLEX_VERTEX)
            obstacle_stops[(obs.complex_id, j)] = [(0.0, a), (max(seg.length, 0.0), b)]

    for m in motorcycles:
        kind = VertexKind.COMPLEX_VERTEX if m.source_id in complex_ids else VertexKind.SITE
        v = builder.vertex(m.origin, kind, weight=1)
        stops[m.id].append((0.0, v))

    for n, e in enumerate(result.events):
        victim = motorcycles[e.victim_id]
        if result.trails[e.victim_id].segment.distance_to(e.location) > INCIDENCE_TOL:
            raise EventLogError(f"Event {n} (victim {e.victim_id}) at {e.location} is not on the victim's trail")
        kind = VertexKind.GRAVE_DEG3 if e.fatal else VertexKind.CROSSING_DEG4
        if e.killer_kind == KillerKind.MOTORCYCLE:
            killer = motorcycles[e.killer_id]
            if result.trails[e.killer_id].segment.distance_to(e.location) > INCIDENCE_TOL:
                raise EventLogError(f"Event {n}: location {e.location} is not on killer {e.killer_id}'s trail")
            dirs = (_orientation(victim.angle.radians), _orientation(killer.angle.radians))
            v = builder.vertex(e.location, kind, dirs)
            stops[e.killer_id].append((e.killer_age, v))
        else:
            obs = obstacle_by_id.get(e.killer_id)
            if obs is None or not 0 <= e.killer_segment < len(obs.segments):
                raise EventLogError(f"Event {n}: unknown obstacle {e.killer_id} segment {e.killer_segment}")
            seg = obs.segments[e.killer_segment]
            if seg.distance_to(e.location) > INCIDENCE_TOL:
                raise EventLogError(f"Event {n}: location {e.location} is not on obstacle {e.killer_id}")
            seg_dir = math.atan2(seg.end[1] - seg.start[1], seg.end[0] - seg.start[0])
            v = builder.vertex(e.location, kind, (_orientation(victim.angle.radians), _orientation(seg_dir)))
            along = math.hypot(e.location[0] - seg.start[0], e.location[1] - seg.start[1])
            obstacle_stops[(e.killer_id, e.killer_segment)].append((along, v))
        stops[e.victim_id].append((e.victim_age, v))

    for m, trail in zip(motorcycles, result.trails):
        if trail.censored:
            end = builder.vertex(trail.segment.end, VertexKind.HORIZON)
            stops[m.id].append((trail.segment.length, end))
        builder.carrier(stops[m.id])
    for chain in obstacle_stops.values():
        builder.carrier(chain)
    return builder.build()


def build_line_mosaic(lines: Sequence[Line], window) -> MosaicGraph:
    """Arrangement of Poisson lines clipped to a convex window"""
    verts = window_vertices(window)
    builder = MosaicBuilder()
    chords = []
    for line in lines:
        seg = clip_line_to_convex_polygon(line.direction, line.offset, verts)
        if seg is not None:
            chords.append((line, seg))
    stops: List[List[Tuple[float, int]]] = []
    for line, seg in chords:
        a = builder.vertex(seg.start, VertexKind.HORIZON)
        b = builder.vertex(seg.end, VertexKind.HORIZON)
        stops.append([(0.0, a), (seg.length, b)])

    if len(chords) > 1:
        starts = np.array([seg.start for _, seg in chords])
        ends = np.array([seg.end for _, seg in chords])
        d = ends - starts
        for i in range(len(chords) - 1):
            dj = d[i + 1:]
            den = d[i, 0] * dj[:, 1] - d[i, 1] * dj[:, 0]
            diff = starts[i + 1:] - starts[i]
            with np.errstate(divide='ignore', invalid='ignore'):
                s = (diff[:, 0] * dj[:, 1] - diff[:, 1] * dj[:, 0]) / den
                t = (diff[:, 0] * d[i, 1] - diff[:, 1] * d[i, 0]) / den
            hit = (np.abs(den) > 1e-12) & (s > 0.0) & (s < 1.0) & (t > 0.0) & (t < 1.0)
            for k in np.flatnonzero(hit):
                j = i + 1 + int(k)
                p = starts[i] + s[k] * d[i]
                dirs = (_orientation(chords[i][0].direction), _orientation(chords[j][0].direction))
                v = builder.vertex((float(p[0]), float(p[1])), VertexKind.CROSSING_DEG4, dirs)
                stops[i].append((float(s[k]) * chords[i][1].length, v))
                stops[j].append((float(t[k]) * chords[j][1].length, v))
    for chain in stops:
        builder.carrier(chain)
    return builder.build()


@dataclass
class CensusResult:
    lambda0: float
    lambda1: float
    lambda2: float
    vertex_kinds: Dict[str, float]
    lambda0_weighted: float
    mean_vertices_per_face: float
    euler_gap: float
    area: float


def census(g: MosaicGraph, core_window: Rectangle) -> CensusResult:
    """Intensities per unit area: vertices by location, edges by midpoint, bounded faces by centroid"""
    if core_window.is_empty():
        raise ValueError(f"Core window must have positive area, got {core_window}")
    area = core_window.area
    inside = [v for v in g.vertices if core_window.contains(v.point)]
    kinds = {kind.value: 0.0 for kind in VertexKind}
    weighted = 0
    for v in inside:
        kinds[v.kind.value] += 1.0 / area
        weighted += max(v.weight, 1) if v.kind in (VertexKind.SITE, VertexKind.COMPLEX_VERTEX) else 1
    n_edges = 0
    for a, b in g.edges:
        pa = g.vertices[a].point
        pb = g.vertices[b].point
        if core_window.contains(((pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0)):
            n_edges += 1
    n_faces = sum(1 for f in g.faces if core_window.contains(f.centroid))
    l0 = len(inside) / area
    l1 = n_edges / area
    l2 = n_faces / area
    return CensusResult(
        lambda0=l0,
        lambda1=l1,
        lambda2=l2,
        vertex_kinds=kinds,
        lambda0_weighted=weighted / area,
        mean_vertices_per_face=2.0 * l1 / l2 if l2 > 0 else float('nan'),
        euler_gap=l2 - (l1 - l0),
        area=area,
    )


@dataclass
class PolytropeCensus:
    p: Dict[int, float]
    flagged: int
    faces: int
    area: float

    @property
    def total(self) -> float:
        return sum(self.p.values())

    @property
    def weighted_total(self) -> float:
        return sum(i * v for i, v in self.p.items())

    def to_densities(self) -> PolytropeDensities:
        return PolytropeDensities(dict(self.p), 'monte_carlo')


def classify_polytropes(g: MosaicGraph, core_window: Rectangle) -> PolytropeCensus:
    """Face intensities by proper vertex count 3..6; other counts are flagged, not classified"""
    if core_window.is_empty():
        raise ValueError(f"Core window must have positive area, got {core_window}")
    area = core_window.area
    counts = {3: 0, 4: 0, 5: 0, 6: 0}
    flagged = 0
    faces = 0
    for f in g.faces:
        if not core_window.contains(f.centroid):
            continue
        faces += 1
        if f.polytrope_class is None:
            flagged += 1
        else:
            counts[f.polytrope_class] += 1
    if flagged:
        print(f"⚠️ {flagged} faces with a proper vertex count outside 3..6")
    return PolytropeCensus({i: c / area for i, c in counts.items()}, flagged, faces, area)


def intersection_type_census(g: MosaicGraph, core_window: Rectangle) -> Dict[Tuple[float, float], float]:
    """Intensity of two-direction vertices per unordered pair of line orientations"""
    if core_window.is_empty():
        raise ValueError(f"Core window must have positive area, got {core_window}")
    area = core_window.area
    out: Dict[Tuple[float, float], float] = {}
    for v in g.vertices:
        if v.kind not in (VertexKind.CROSSING_DEG4, VertexKind.GRAVE_DEG3) or len(v.directions) != 2:
            continue
        if not core_window.contains(v.point):
            continue
        key = tuple(sorted(v.directions))
        out[key] = out.get(key, 0.0) + 1.0 / area
    return out
