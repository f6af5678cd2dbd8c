"""
GilbertLab Motorcycle Simulator
Event-driven iterated Gilbert dynamics: motorcycles with k lives, obstacle complexes, graves and event logs
"""

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from geom import (
    Angle, COORD_TOL, PARALLEL_TOL, Point, Rectangle, Segment, as_angle, kill_region,
    point_in_convex_polygon, ray_exit_distance, smallest_enclosing_ball,
)
from limits import default_margin
from procs import ModelSpec, SitePattern
from run_config import VERBOSE

# Killer must arrive strictly earlier than the victim by more than this.
TIE_TOL = 1e-12


class NonTerminationError(ValueError):
    """Raised when the input violates the no-parallel-line assumption"""


class EventLogError(RuntimeError):
    """Raised when an event log is internally inconsistent"""


class KillerKind(Enum):
    MOTORCYCLE = "motorcycle"
    OBSTACLE = "obstacle"


@dataclass(frozen=True)
class Motorcycle:
    id: int
    origin: Point
    angle: Angle
    lives_initial: int
    source_id: int
    weight: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'origin', (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, 'angle', as_angle(self.angle))
        if self.lives_initial < 1:
            raise ValueError(f"Motorcycle {self.id} needs at least one life, got {self.lives_initial}")
        if self.weight < 1:
            raise ValueError(f"Motorcycle {self.id} weight must be >= 1, got {self.weight}")

    @property
    def direction(self) -> np.ndarray:
        return self.angle.vec()

    def position(self, age: float) -> Point:
        d = self.direction
        return (self.origin[0] + age * float(d[0]), self.origin[1] + age * float(d[1]))


@dataclass
class Obstacle:
    """Static polyhedral complex present from time zero"""
    complex_id: int
    segments: List[Segment]

    def points(self) -> List[Point]:
        pts = []
        for seg in self.segments:
            pts.append(seg.start)
            pts.append(seg.end)
        return pts

    def enclosing_ball(self) -> Tuple[Point, float]:
        return smallest_enclosing_ball(self.points())

    def check_radius(self, bound: float) -> None:
        _, radius = self.enclosing_ball()
        if radius > bound + COORD_TOL:
            raise ValueError(f"Obstacle {self.complex_id} radius {radius:.6f} exceeds bound {bound}")


@dataclass(frozen=True)
class CollisionEvent:
    victim_id: int
    killer_kind: KillerKind
    killer_id: int
    location: Point
    victim_age: float
    killer_age: float
    fatal: bool
    order_index: int
    # index of the obstacle segment hit, -1 for motorcycle killers
    killer_segment: int = -1


@dataclass
class Trail:
    motorcycle_id: int
    segment: Segment
    censored: bool


@dataclass
class SimOptions:
    """Horizon and chunking controls for one run; spec only feeds the default margin"""
    margin: Optional[float] = None
    horizon: Optional[Rectangle] = None
    spec: Optional[ModelSpec] = None
    initial_reach: Optional[float] = None
    censor_warn_fraction: float = 0.05


@dataclass
class SimResult:
    motorcycles: List[Motorcycle]
    events: List[CollisionEvent]
    trails: List[Trail]
    obstacles: List[Obstacle]
    k: int
    horizon: Rectangle
    sites: Optional[SitePattern] = None
    _death: Dict[int, float] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._death:
            self._death = {t.motorcycle_id: t.segment.length for t in self.trails}

    def motorcycle(self, mid: int) -> Motorcycle:
        return self.motorcycles[mid]

    def death_distance(self, mid: int) -> float:
        return self._death[mid]

    def trail(self, mid: int) -> Trail:
        return self.trails[mid]

    def is_censored(self, mid: int) -> bool:
        return self.trails[mid].censored

    def events_for(self, victim_id: int) -> List[CollisionEvent]:
        return [e for e in self.events if e.victim_id == victim_id]

    @property
    def censored_count(self) -> int:
        return sum(1 for t in self.trails if t.censored)

    @property
    def dead_count(self) -> int:
        return sum(1 for t in self.trails if not t.censored)

    def covers(self, p: Point, tol: float = COORD_TOL) -> bool:
        """Membership of p in the union of recorded trails"""
        return any(t.segment.contains(p, tol) for t in self.trails)

    def events_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([{
            'victim_id': e.victim_id,
            'killer_kind': e.killer_kind.value,
            'killer_id': e.killer_id,
            'x': e.location[0],
            'y': e.location[1],
            'victim_age': e.victim_age,
            'killer_age': e.killer_age,
            'order_index': e.order_index,
            'fatal': e.fatal,
        } for e in self.events], columns=['victim_id', 'killer_kind', 'killer_id', 'x', 'y', 'victim_age',
                                          'killer_age', 'order_index', 'fatal'])

    def trails_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([{
            'id': t.motorcycle_id,
            'x0': t.segment.start[0],
            'y0': t.segment.start[1],
            'x1': t.segment.end[0],
            'y1': t.segment.end[1],
            'angle': self.motorcycles[t.motorcycle_id].angle.radians,
            'censored': t.censored,
        } for t in self.trails], columns=['id', 'x0', 'y0', 'x1', 'y1', 'angle', 'censored'])


def motorcycles_from_sites(sites: SitePattern, k: int) -> List[Motorcycle]:
    """One motorcycle per (site, direction); source_id is the site index"""
    motorcycles: List[Motorcycle] = []
    for site_id, (loc, key) in enumerate(zip(sites.locations, sites.angle_sets)):
        for idx in key:
            motorcycles.append(Motorcycle(len(motorcycles), (float(loc[0]), float(loc[1])),
                                          Angle(sites.angles[idx]), k, site_id))
    return motorcycles


# heap entry kinds; crossings at time t are applied before the reach extension at t
_CROSSING = 0
_EXTEND = 1
_KILLER_MOTOR = 0
_KILLER_OBSTACLE = 1


class GilbertLabSimulator:
    """
    Event-driven simulation with a min-heap keyed by victim age.

    Candidates for each victim are generated lazily in reach chunks (a, b],
    pruned by a KD-tree over origins; every popped event is re-validated
    against the current death distances.
    """

    def __init__(self, motorcycles: Sequence[Motorcycle], k: int, obstacles: Sequence[Obstacle],
                 horizon: Rectangle, initial_reach: float):
        self.motorcycles = list(motorcycles)
        self.k = k
        self.obstacles = list(obstacles)
        self.horizon = horizon
        self.initial_reach = initial_reach

        n = len(self.motorcycles)
        self.origins = np.array([m.origin for m in self.motorcycles], dtype=float).reshape(-1, 2)
        self.dirs = np.array([m.direction for m in self.motorcycles], dtype=float).reshape(-1, 2)
        self.sources = np.array([m.source_id for m in self.motorcycles], dtype=np.int64)
        self.exit = np.array([ray_exit_distance(m.origin, d, horizon) for m, d in zip(self.motorcycles, self.dirs)])
        self.death = self.exit.copy()
        self.lives = np.array([m.lives_initial for m in self.motorcycles], dtype=np.int64)
        self.dead = np.zeros(n, dtype=bool)
        self.tree = cKDTree(self.origins) if n else None
        self._index_obstacles()
        self.events: List[CollisionEvent] = []
        self._heap: List[tuple] = []

    def _index_obstacles(self) -> None:
        starts, ends, owners, local = [], [], [], []
        for obs in self.obstacles:
            for j, seg in enumerate(obs.segments):
                if seg.length <= 0.0:
                    continue
                starts.append(seg.start)
                ends.append(seg.end)
                owners.append(obs.complex_id)
                local.append(j)
        self.seg_start = np.array(starts, dtype=float).reshape(-1, 2)
        self.seg_end = np.array(ends, dtype=float).reshape(-1, 2)
        self.seg_owner = np.array(owners, dtype=np.int64)
        self.seg_local = np.array(local, dtype=np.int64)
        mids = (self.seg_start + self.seg_end) / 2.0
        self.seg_half = np.linalg.norm(self.seg_end - self.seg_start, axis=1) / 2.0 if len(mids) else np.zeros(0)
        self.seg_tree = cKDTree(mids) if len(mids) else None
        self.seg_reach = float(self.seg_half.max()) if len(mids) else 0.0

    def run(self) -> List[CollisionEvent]:
        for i in range(len(self.motorcycles)):
            self._schedule_chunk(i, 0.0, min(self.initial_reach, self.exit[i]))
        while self._heap:
            t, kind, victim, kcode, kid, seg, s, x, y = heapq.heappop(self._heap)
            if kind == _EXTEND:
                if not self.dead[victim]:
                    self._schedule_chunk(victim, t, min(2.0 * t, self.exit[victim]))
                continue
            if self.dead[victim]:
                continue
            if kcode == _KILLER_MOTOR and self.death[kid] < s:
                continue
            self._apply(victim, kcode, kid, seg, t, s, (x, y))
        return self.events

    def _apply(self, victim: int, kcode: int, kid: int, seg: int, t: float, s: float, location: Point) -> None:
        self.lives[victim] -= 1
        order_index = int(self.motorcycles[victim].lives_initial - self.lives[victim])
        fatal = self.lives[victim] == 0
        self.events.append(CollisionEvent(
            victim_id=victim,
            killer_kind=KillerKind.MOTORCYCLE if kcode == _KILLER_MOTOR else KillerKind.OBSTACLE,
            killer_id=kid,
            location=location,
            victim_age=t,
            killer_age=s,
            fatal=bool(fatal),
            order_index=order_index,
            killer_segment=seg,
        ))
        if fatal:
            self.dead[victim] = True
            self.death[victim] = t

    def _schedule_chunk(self, i: int, a: float, b: float) -> None:
        if b <= a:
            return
        for entry in self._motor_candidates(i, a, b):
            heapq.heappush(self._heap, entry)
        for entry in self._obstacle_candidates(i, a, b):
            heapq.heappush(self._heap, entry)
        if b < self.exit[i]:
            heapq.heappush(self._heap, (b, _EXTEND, i, -1, -1, -1, 0.0, 0.0, 0.0))

    def _motor_candidates(self, i: int, a: float, b: float) -> List[tuple]:
        # any killer j meeting i at age t <= b arrived first, so |o_j - o_i| < 2b
        near = np.asarray(self.tree.query_ball_point(self.origins[i], 2.0 * b + COORD_TOL), dtype=np.int64)
        near = near[self.sources[near] != self.sources[i]]
        if len(near) == 0:
            return []
        oi = self.origins[i]
        di = self.dirs[i]
        dj = self.dirs[near]
        den = di[0] * dj[:, 1] - di[1] * dj[:, 0]
        ok = np.abs(den) > PARALLEL_TOL
        near, dj, den = near[ok], dj[ok], den[ok]
        diff = self.origins[near] - oi
        t = (diff[:, 0] * dj[:, 1] - diff[:, 1] * dj[:, 0]) / den
        s = (diff[:, 0] * di[1] - diff[:, 1] * di[0]) / den
        keep = ((t > a) & (t <= b) & (t <= self.exit[i]) & (s > TIE_TOL) & (s < t - TIE_TOL)
                & (s <= self.exit[near]))
        out = []
        for j, tj, sj in zip(near[keep], t[keep], s[keep]):
            x = float(oi[0] + tj * di[0])
            y = float(oi[1] + tj * di[1])
            out.append((float(tj), _CROSSING, i, _KILLER_MOTOR, int(j), -1, float(sj), x, y))
        return out

    def _obstacle_candidates(self, i: int, a: float, b: float) -> List[tuple]:
        if self.seg_tree is None:
            return []
        near = np.asarray(self.seg_tree.query_ball_point(self.origins[i], b + self.seg_reach + COORD_TOL),
                          dtype=np.int64)
        near = near[self.seg_owner[near] != self.sources[i]]
        if len(near) == 0:
            return []
        oi = self.origins[i]
        di = self.dirs[i]
        pa = self.seg_start[near]
        e = self.seg_end[near] - pa
        den = di[0] * e[:, 1] - di[1] * e[:, 0]
        ok = np.abs(den) > PARALLEL_TOL
        near, pa, e, den = near[ok], pa[ok], e[ok], den[ok]
        diff = pa - oi
        t = (diff[:, 0] * e[:, 1] - diff[:, 1] * e[:, 0]) / den
        u = (diff[:, 0] * di[1] - diff[:, 1] * di[0]) / den
        keep = (t > a) & (t <= b) & (t <= self.exit[i]) & (t > COORD_TOL) & (u >= -COORD_TOL) & (u <= 1.0 + COORD_TOL)
        hits = sorted(zip(t[keep], near[keep]), key=lambda h: (float(h[0]), int(h[1])))
        out = []
        seen: List[Tuple[int, float]] = []
        for tj, sid in hits:
            owner = int(self.seg_owner[sid])
            # a shared vertex of two segments of one complex is a single crossing
            if any(o == owner and abs(float(tj) - ts) <= COORD_TOL for o, ts in seen):
                continue
            seen.append((owner, float(tj)))
            x = float(oi[0] + tj * di[0])
            y = float(oi[1] + tj * di[1])
            out.append((float(tj), _CROSSING, i, _KILLER_OBSTACLE, owner, int(self.seg_local[sid]), 0.0, x, y))
        return out


def _check_termination(motorcycles: Sequence[Motorcycle], obstacles: Sequence[Obstacle]) -> None:
    if len(motorcycles) < 2 or any(obs.segments for obs in obstacles):
        return
    first = motorcycles[0].angle
    if all(m.angle.is_parallel_to(first) for m in motorcycles):
        raise NonTerminationError("All motorcycles travel on parallel lines: the dynamics may not terminate "
                                  "(no-parallel-line assumption violated)")


def _resolve_horizon(opts: SimOptions, k: int, window: Optional[Rectangle], sampled: Optional[Rectangle]) -> Rectangle:
    """
    Explicit horizon, else window + 2 * margin. Sites fill window + margin, so a
    SitePattern without an observation window is frozen at its sampling box + margin.
    """
    if opts.horizon is not None:
        return opts.horizon
    if opts.margin is not None:
        margin = opts.margin
    elif opts.spec is not None:
        margin = default_margin(opts.spec, k)
    else:
        raise ValueError("No horizon, margin or model spec given; the default margin 4 * max w* * sqrt(k) "
                         "needs the model spec")
    if margin < 0.0:
        raise ValueError(f"Margin must be non-negative, got {margin}")
    if window is not None:
        return window.expand(2.0 * margin)
    if sampled is not None:
        return sampled.expand(margin)
    raise ValueError("A window or an explicit horizon is required for a motorcycle list")


def simulate(sites: Union[SitePattern, Sequence[Motorcycle]], k: int, obstacles: Optional[Sequence[Obstacle]] = None,
             opts: Optional[SimOptions] = None, window: Optional[Rectangle] = None) -> SimResult:
    """
    Run the k-lives dynamics to completion inside the horizon box.

    sites is a SitePattern (one motorcycle per site direction) or an explicit
    motorcycle list, e.g. from a germ-grain ensemble. window is the observation
    window; sources are expected on window + margin.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    opts = opts or SimOptions()
    obstacles = list(obstacles or [])
    if isinstance(sites, SitePattern):
        motorcycles = motorcycles_from_sites(sites, k)
        sampled = sites.window
        pattern = sites
    else:
        motorcycles = list(sites)
        sampled = None
        pattern = None
    for expected, m in enumerate(motorcycles):
        if m.id != expected:
            raise ValueError(f"Motorcycle ids must be 0..n-1 in order, got {m.id} at position {expected}")
    _check_termination(motorcycles, obstacles)

    horizon = _resolve_horizon(opts, k, window, sampled)
    area = max(horizon.area, 1e-12)
    reach = opts.initial_reach or math.sqrt(k * area / max(1, len(motorcycles)))

    engine = GilbertLabSimulator(motorcycles, k, obstacles, horizon, reach)
    events = engine.run()

    trails = []
    for m in motorcycles:
        length = float(engine.death[m.id])
        end = m.position(length)
        trails.append(Trail(m.id, Segment(m.origin, end, degenerate=length <= 0.0), censored=not engine.dead[m.id]))
    result = SimResult(motorcycles, events, trails, obstacles, k, horizon, pattern,
                       _death={m.id: float(engine.death[m.id]) for m in motorcycles})

    if len(motorcycles) >= 50:
        fraction = result.censored_count / len(motorcycles)
        if fraction > opts.censor_warn_fraction:
            print(f"⚠️ {result.censored_count} of {len(motorcycles)} motorcycles reached the horizon "
                  f"({fraction:.1%}); consider a larger margin")
    if VERBOSE:
        print(f"📊 simulate: {len(motorcycles)} motorcycles, {len(events)} events, k={k}")
    return result


def _valid_crossings(motorcycles: Sequence[Motorcycle], obstacles: Sequence[Obstacle], exit_d: np.ndarray,
                     death: np.ndarray, i: int) -> List[tuple]:
    """All (t, killer_kind, killer_id, segment, s, point) that can cost motorcycle i a life"""
    mi = motorcycles[i]
    di = mi.direction
    out = []
    for mj in motorcycles:
        if mj.source_id == mi.source_id:
            continue
        dj = mj.direction
        den = di[0] * dj[1] - di[1] * dj[0]
        if abs(den) <= PARALLEL_TOL:
            continue
        diff = np.asarray(mj.origin) - np.asarray(mi.origin)
        t = (diff[0] * dj[1] - diff[1] * dj[0]) / den
        s = (diff[0] * di[1] - diff[1] * di[0]) / den
        if 0.0 < t <= exit_d[i] and TIE_TOL < s < t - TIE_TOL and s <= death[mj.id]:
            out.append((float(t), KillerKind.MOTORCYCLE, mj.id, -1, float(s), mi.position(float(t))))
    for obs in obstacles:
        if obs.complex_id == mi.source_id:
            continue
        seen: List[float] = []
        for j, seg in enumerate(obs.segments):
            if seg.length <= 0.0:
                continue
            e = np.asarray(seg.end) - np.asarray(seg.start)
            den = di[0] * e[1] - di[1] * e[0]
            if abs(den) <= PARALLEL_TOL:
                continue
            diff = np.asarray(seg.start) - np.asarray(mi.origin)
            t = (diff[0] * e[1] - diff[1] * e[0]) / den
            u = (diff[0] * di[1] - diff[1] * di[0]) / den
            if COORD_TOL < t <= exit_d[i] and -COORD_TOL <= u <= 1.0 + COORD_TOL:
                if any(abs(t - ts) <= COORD_TOL for ts in seen):
                    continue
                seen.append(float(t))
                out.append((float(t), KillerKind.OBSTACLE, obs.complex_id, j, 0.0, mi.position(float(t))))
    out.sort(key=lambda c: c[0])
    return out


def simulate_bruteforce(motorcycles: Sequence[Motorcycle], k: int, horizon: Rectangle,
                        obstacles: Optional[Sequence[Obstacle]] = None, max_rounds: Optional[int] = None
                        ) -> List[CollisionEvent]:
    """
    Fixed-point oracle: recompute every pairwise crossing against the current
    death distances until they stop changing. Quadratic per round; small inputs only.
    """
    obstacles = list(obstacles or [])
    n = len(motorcycles)
    exit_d = np.array([ray_exit_distance(m.origin, m.direction, horizon) for m in motorcycles])
    death = exit_d.copy()
    rounds = max_rounds or (n * max(k, 1) + 5)
    for _ in range(rounds):
        updated = exit_d.copy()
        for i, m in enumerate(motorcycles):
            hits = _valid_crossings(motorcycles, obstacles, exit_d, death, i)
            if len(hits) >= m.lives_initial:
                updated[i] = hits[m.lives_initial - 1][0]
        if np.array_equal(updated, death):
            break
        death = updated
    else:
        raise EventLogError(f"Brute-force oracle did not stabilise within {rounds} rounds")

    events: List[CollisionEvent] = []
    for i, m in enumerate(motorcycles):
        hits = _valid_crossings(motorcycles, obstacles, exit_d, death, i)[:m.lives_initial]
        for order, (t, kind, kid, seg, s, p) in enumerate(hits, start=1):
            events.append(CollisionEvent(i, kind, kid, p, t, s, order == m.lives_initial, order, seg))
    events.sort(key=lambda e: (e.victim_age, e.victim_id))
    return events


def event_signature(events: Sequence[CollisionEvent], digits: int = 9) -> List[tuple]:
    """Order-free comparable form of an event multiset"""
    return sorted((e.victim_id, e.killer_kind.value, e.killer_id, round(e.location[0], digits),
                   round(e.location[1], digits), e.order_index, e.fatal) for e in events)


def random_motorcycles(rng: np.random.Generator, n: int, k: int, box: Rectangle) -> List[Motorcycle]:
    """n single-motorcycle sources with uniform origins in box and uniform directions"""
    xs = rng.uniform(box.xmin, box.xmax, n)
    ys = rng.uniform(box.ymin, box.ymax, n)
    angles = rng.uniform(0.0, 2.0 * math.pi, n)
    return [Motorcycle(i, (float(xs[i]), float(ys[i])), float(angles[i]), k, i) for i in range(n)]


def count_potential_killers(sim_inputs: Union[SitePattern, Sequence[Motorcycle]], b: Motorcycle, y: float,
                            phi=None) -> int:
    """
    Motorcycles of other sources, of every direction psi != phi, whose origin lies in
    the kill region for the first y of b's path (pass y * sqrt(k) for the scaled form).
    """
    if y <= 0.0:
        raise ValueError(f"y must be positive, got {y}")
    phi = as_angle(phi) if phi is not None else b.angle
    if isinstance(sim_inputs, SitePattern):
        motorcycles = motorcycles_from_sites(sim_inputs, 1)
    else:
        motorcycles = list(sim_inputs)
    if not motorcycles:
        return 0
    far_end = np.asarray(b.origin) + y * phi.vec()
    regions: Dict[Angle, List[Point]] = {}
    total = 0
    for m in motorcycles:
        if m.source_id == b.source_id or m.angle == phi or m.angle.is_parallel_to(phi):
            continue
        if m.angle not in regions:
            regions[m.angle] = kill_region(phi, m.angle, y, y).translated(far_end)
        if point_in_convex_polygon(m.origin, regions[m.angle]):
            total += 1
    return total


@dataclass
class PathLengthStats:
    mean: float
    variance: float
    count: int
    censored: int


def path_length_stats(result: SimResult, by, core_window: Rectangle) -> PathLengthStats:
    """L^k over dead motorcycles of direction `by` whose origin lies in core_window"""
    by = as_angle(by)
    lengths = []
    censored = 0
    for m, trail in zip(result.motorcycles, result.trails):
        if m.angle != by or not core_window.contains(m.origin):
            continue
        if trail.censored:
            censored += 1
        else:
            lengths.append(trail.segment.length)
    if not lengths:
        return PathLengthStats(float('nan'), float('nan'), 0, censored)
    arr = np.asarray(lengths)
    variance = float(arr.var(ddof=1)) if len(arr) > 1 else 0.0
    return PathLengthStats(float(arr.mean()), variance, len(arr), censored)


@dataclass
class WitnessConfiguration:
    """Three sites whose union of trails covers `point` for k=1 and k=3 but not k=2"""
    sites: SitePattern
    point: Point
    horizon: Rectangle

    def membership(self, k: int) -> bool:
        result = simulate(self.sites, k, opts=SimOptions(horizon=self.horizon))
        return result.covers(self.point)


def non_monotonicity_witness() -> WitnessConfiguration:
    """
    An eastbound motorcycle from the origin, two diagonal motorcycles from (5, -2)
    that cross its path at (3, 0) and (7, 0), and two blockers along y = -1
    that take one life from each diagonal first.
    """
    sites = SitePattern.from_points(
        [(0.0, 0.0), (5.0, -2.0), (5.0, -1.0)],
        [[0.0], [3.0 * math.pi / 4.0, math.pi / 4.0], [0.0, math.pi]],
        window=Rectangle(-5.0, -5.0, 15.0, 5.0),
    )
    return WitnessConfiguration(sites, (10.0, 0.0), Rectangle(-5.0, -5.0, 15.0, 5.0))
