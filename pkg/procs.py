"""
GilbertLab Point Processes
Compound Poisson sites with angle marks, the sub-processes P_Q, and Poisson line processes
"""

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from geom import Angle, PARALLEL_TOL, Point, Rectangle, as_angle, projection_interval, unit_vector

PROB_TOL = 1e-9

AngleKey = Tuple[int, ...]


class ModelSpecError(ValueError):
    """Raised for an ill-formed or unsupported model specification"""


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator, reproducible across platforms"""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def split_seeds(seed: int, count: int) -> List[int]:
    """Independent 64-bit child seeds for replicate-level parallelism"""
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


@dataclass
class ModelSpec:
    """
    Compound Poisson model: site intensity, direction list, multiplicity law and
    per-multiplicity laws over angle subsets (stored as sorted index tuples).
    """
    lam: float
    angles: List[Angle]
    multiplicity_probs: Dict[int, float]
    angle_set_law: Dict[int, Dict[AngleKey, float]]
    name: str = "custom"
    mosaic_grade: bool = False

    def __post_init__(self):
        self.angles = [as_angle(a) for a in self.angles]
        self.multiplicity_probs = {int(m): float(p) for m, p in self.multiplicity_probs.items()}
        self.angle_set_law = {
            int(m): {tuple(sorted(int(i) for i in key)): float(p) for key, p in law.items()}
            for m, law in self.angle_set_law.items()
        }
        self.validate()

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        if not self.lam > 0.0:
            raise ModelSpecError(f"Site intensity must be positive, got {self.lam}")
        radians = [a.radians for a in self.angles]
        if len(set(radians)) != len(radians):
            raise ModelSpecError(f"Model angles must be distinct, got {radians}")
        size = len(self.angles)
        total = sum(self.multiplicity_probs.values())
        if abs(total - 1.0) > PROB_TOL:
            raise ModelSpecError(f"Multiplicity probabilities sum to {total}, expected 1")
        for m, p in self.multiplicity_probs.items():
            if p < 0.0 or m < 1 or m > size:
                raise ModelSpecError(f"Invalid multiplicity entry m={m}, p={p} for {size} angles")
            if p == 0.0:
                continue
            law = self.angle_set_law.get(m)
            if not law:
                raise ModelSpecError(f"Multiplicity {m} has positive probability but no angle-set law")
            mass = sum(law.values())
            if abs(mass - 1.0) > PROB_TOL:
                raise ModelSpecError(f"Angle-set law for m={m} sums to {mass}, expected 1")
            for key, q in law.items():
                if len(key) != m or len(set(key)) != m or min(key) < 0 or max(key) >= size or q < 0.0:
                    raise ModelSpecError(f"Invalid angle set {key} (p={q}) for multiplicity {m}")

        active = [self.angles[i] for i in range(size) if self.nu_index(i) > 0.0]
        if not any(abs(math.sin(a.radians - b.radians)) > PARALLEL_TOL
                   for a, b in itertools.combinations(active, 2)):
            raise ModelSpecError("no-parallel-line assumption violated: all motorcycles travel on parallel lines, "
                                 "the dynamics may not terminate")
        if self.mosaic_grade:
            self._check_mosaic_grade()

    def _check_mosaic_grade(self) -> None:
        if self.multiplicity_probs.get(1, 0.0) > 0.0:
            raise ModelSpecError("Mosaic-grade model needs no isolated sites (multiplicity 1 has positive mass)")
        for m, law in self.angle_set_law.items():
            if self.multiplicity_probs.get(m, 0.0) == 0.0:
                continue
            for key, q in law.items():
                if q > 0.0 and largest_angular_gap([self.angles[i].radians for i in key]) > math.pi + 1e-12:
                    raise ModelSpecError(f"Angle set {key} is not convex (a gap exceeds pi)")

    # -- derived intensities -------------------------------------------------

    def key_of(self, angle_subset: Iterable) -> AngleKey:
        """Sorted index tuple for a subset given as angles or radians"""
        lookup = {a.radians: i for i, a in enumerate(self.angles)}
        key = []
        for a in angle_subset:
            r = as_angle(a).radians
            if r not in lookup:
                raise ModelSpecError(f"Unknown angle {r} not in model angles {[x.radians for x in self.angles]}")
            key.append(lookup[r])
        return tuple(sorted(set(key)))

    def index_of(self, angle) -> int:
        return self.key_of([angle])[0]

    def mu_key(self, key: AngleKey) -> float:
        m = len(key)
        return self.lam * self.multiplicity_probs.get(m, 0.0) * self.angle_set_law.get(m, {}).get(tuple(key), 0.0)

    def mu(self) -> Dict[AngleKey, float]:
        """mu_Q for every nonempty subset Q with positive law mass"""
        out: Dict[AngleKey, float] = {}
        for m, law in self.angle_set_law.items():
            for key in law:
                value = self.mu_key(key)
                if value > 0.0:
                    out[key] = value
        return out

    def nu_index(self, i: int) -> float:
        return sum(v for key, v in self.mu().items() if i in key)

    def nu(self, angle) -> float:
        """Intensity of motorcycles travelling in direction angle"""
        return self.nu_index(self.index_of(angle))

    @property
    def mean_multiplicity(self) -> float:
        return sum(m * p for m, p in self.multiplicity_probs.items())

    def scaled(self, factor: float) -> 'ModelSpec':
        """Same angle law at site intensity factor * lam"""
        return ModelSpec(self.lam * factor, list(self.angles), dict(self.multiplicity_probs),
                         {m: dict(law) for m, law in self.angle_set_law.items()},
                         name=self.name, mosaic_grade=self.mosaic_grade)

    def to_dict(self) -> Dict:
        return {
            'name': self.name,
            'lambda': self.lam,
            'angles': [a.radians for a in self.angles],
            'multiplicity': {str(m): p for m, p in self.multiplicity_probs.items()},
            'angle_sets': {str(m): [[list(key), p] for key, p in law.items()]
                           for m, law in self.angle_set_law.items()},
            'mosaic_grade': self.mosaic_grade,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ModelSpec':
        try:
            if 'angles_deg' in data:
                angles = [math.radians(float(a)) for a in data['angles_deg']]
            else:
                angles = [float(a) for a in data['angles']]
            law = {int(m): {tuple(entry[0]): float(entry[1]) for entry in entries}
                   for m, entries in data['angle_sets'].items()}
            return cls(float(data['lambda']), angles,
                       {int(m): float(p) for m, p in data['multiplicity'].items()}, law,
                       name=data.get('name', 'custom'), mosaic_grade=bool(data.get('mosaic_grade', False)))
        except (KeyError, TypeError, IndexError) as e:
            raise ModelSpecError(f"Malformed model spec: missing or invalid field {e}")

    @classmethod
    def from_json_file(cls, path: str, lam: Optional[float] = None) -> 'ModelSpec':
        with open(path) as f:
            data = json.load(f)
        if lam is not None:
            data['lambda'] = lam
        return cls.from_dict(data)


def largest_angular_gap(radians: Sequence[float]) -> float:
    """Largest cyclic gap between consecutive directions"""
    ordered = sorted(radians)
    if len(ordered) < 2:
        return 2.0 * math.pi
    gaps = [b - a for a, b in zip(ordered, ordered[1:])]
    gaps.append(2.0 * math.pi - ordered[-1] + ordered[0])
    return max(gaps)


def tropical_lines_spec(lam: float = 1.0) -> ModelSpec:
    """Three motorcycles per site: east, north and southwest"""
    return ModelSpec(lam, [0.0, math.pi / 2.0, 5.0 * math.pi / 4.0], {3: 1.0}, {3: {(0, 1, 2): 1.0}},
                     name="tropical-lines", mosaic_grade=True)


def rectangular_spec(lam: float = 1.0) -> ModelSpec:
    """Four motorcycles per site: east, north, west and south"""
    return ModelSpec(lam, [0.0, math.pi / 2.0, math.pi, 3.0 * math.pi / 2.0], {4: 1.0},
                     {4: {(0, 1, 2, 3): 1.0}}, name="rectangular", mosaic_grade=True)


def mu_of(spec: ModelSpec, subset: Iterable) -> float:
    """mu_Q = lam * pi_|Q| * A^|Q|(Q)"""
    key = spec.key_of(subset)
    if not key:
        raise ModelSpecError("mu_Q is defined for nonempty subsets only")
    return spec.mu_key(key)


@dataclass
class SitePattern:
    """Sampled sites: locations, their angle-index sets and the sampling window"""
    locations: np.ndarray
    angle_sets: List[AngleKey]
    window: Rectangle
    angles: List[float]

    def __post_init__(self):
        self.locations = np.asarray(self.locations, dtype=float).reshape(-1, 2)
        self.angle_sets = [tuple(sorted(int(i) for i in key)) for key in self.angle_sets]
        self.angles = [float(a) for a in self.angles]
        if len(self.angle_sets) != len(self.locations):
            raise ModelSpecError("Every site needs exactly one angle set")
        for key in self.angle_sets:
            if not key or min(key) < 0 or max(key) >= len(self.angles):
                raise ModelSpecError(f"Site angle set {key} is empty or refers to unknown angles")

    def __len__(self) -> int:
        return len(self.locations)

    @classmethod
    def from_points(cls, points: Sequence[Point], directions: Sequence[Sequence[float]],
                    window: Optional[Rectangle] = None) -> 'SitePattern':
        """Hand-built pattern; directions are given per site in radians"""
        angles: List[float] = []
        keys: List[AngleKey] = []
        for dirs in directions:
            key = []
            for d in dirs:
                r = Angle(d).radians
                if r not in angles:
                    angles.append(r)
                key.append(angles.index(r))
            keys.append(tuple(key))
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if window is None:
            lo = pts.min(axis=0) - 1.0
            hi = pts.max(axis=0) + 1.0
            window = Rectangle(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))
        return cls(pts, keys, window, angles)

    def motorcycle_count(self, angle_index: Optional[int] = None) -> int:
        if angle_index is None:
            return sum(len(k) for k in self.angle_sets)
        return sum(1 for k in self.angle_sets if angle_index in k)

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame({
            'x': self.locations[:, 0] if len(self) else [],
            'y': self.locations[:, 1] if len(self) else [],
            'angle_indices': [';'.join(str(i) for i in key) for key in self.angle_sets],
        })

    def to_csv(self, path: str) -> None:
        self.to_dataframe().to_csv(path, index=False)


def sample_sites(spec: ModelSpec, window: Rectangle, seed: int) -> SitePattern:
    """Poisson(lam * |window|) sites, uniform locations, i.i.d. angle sets"""
    if window.is_empty():
        raise ModelSpecError(f"Sampling window must have positive area, got {window}")
    rng = make_rng(seed)
    n = int(rng.poisson(spec.lam * window.area))
    xs = rng.uniform(window.xmin, window.xmax, n)
    ys = rng.uniform(window.ymin, window.ymax, n)

    mults = sorted(m for m, p in spec.multiplicity_probs.items() if p > 0.0)
    mprobs = np.array([spec.multiplicity_probs[m] for m in mults])
    ms = rng.choice(np.array(mults), size=n, p=mprobs / mprobs.sum())

    keys: List[AngleKey] = [()] * n
    for m in mults:
        idx = np.flatnonzero(ms == m)
        law = sorted(spec.angle_set_law[m].items())
        probs = np.array([p for _, p in law])
        picks = rng.choice(len(law), size=len(idx), p=probs / probs.sum())
        for site, pick in zip(idx, picks):
            keys[site] = law[pick][0]
    return SitePattern(np.column_stack([xs, ys]), keys, window, [a.radians for a in spec.angles])


@dataclass(frozen=True)
class Line:
    """Line with direction phi, at signed offset r along vec(phi + pi/2)"""
    direction: float
    offset: float

    @property
    def normal(self) -> np.ndarray:
        return unit_vector(self.direction + math.pi / 2.0)


@dataclass
class LineProcessSpec:
    """Poisson line process with an atomic direction law"""
    Lambda: float
    theta: Dict[Angle, float]
    per_direction_intensity: Dict[Angle, float] = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.theta.values())
        if self.Lambda > 0.0 and abs(total - 1.0) > 1e-12:
            raise ModelSpecError(f"Direction law masses sum to {total}, expected 1")
        if abs(self.Lambda - sum(self.per_direction_intensity.values())) > 1e-9 * max(1.0, self.Lambda):
            raise ModelSpecError("Lambda must equal the sum of per-direction intensities")

    @classmethod
    def from_intensities(cls, intensities: Dict) -> 'LineProcessSpec':
        per = {as_angle(a): float(v) for a, v in intensities.items()}
        total = sum(per.values())
        if total <= 0.0:
            raise ModelSpecError("Line process needs positive total intensity")
        theta = {a.perp(): v / total for a, v in per.items()}
        return cls(total, theta, per)

    def intensity(self, direction) -> float:
        return self.per_direction_intensity.get(as_angle(direction), 0.0)


def window_vertices(window: Union[Rectangle, Sequence[Point]]) -> List[Point]:
    if isinstance(window, Rectangle):
        return window.vertices()
    return [tuple(map(float, v)) for v in window]


def expected_line_count(lp: LineProcessSpec, window, direction=None) -> float:
    """Mean number of lines hitting a convex window, optionally for one direction"""
    verts = window_vertices(window)
    total = 0.0
    for angle, rate in lp.per_direction_intensity.items():
        if direction is not None and angle != as_angle(direction):
            continue
        lo, hi = projection_interval(verts, unit_vector(angle.radians + math.pi / 2.0))
        total += rate * (hi - lo)
    return total


def sample_line_process(lp: LineProcessSpec, window, seed: int) -> List[Line]:
    """Independent 1-D Poisson offsets per direction over the window's projection"""
    rng = make_rng(seed)
    verts = window_vertices(window)
    lines: List[Line] = []
    for angle in sorted(lp.per_direction_intensity):
        rate = lp.per_direction_intensity[angle]
        lo, hi = projection_interval(verts, unit_vector(angle.radians + math.pi / 2.0))
        n = int(rng.poisson(max(rate, 0.0) * (hi - lo)))
        offsets = rng.uniform(lo, hi, n)
        lines.extend(Line(angle.radians, float(r)) for r in offsets)
    return lines
