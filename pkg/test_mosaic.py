#!/usr/bin/env python3
"""
Tests for mosaic construction from event logs and from line arrangements,
the Euler identity and the face and vertex censuses
"""

import dataclasses
import functools
import math
import sys

import numpy as np

from geom import Rectangle
from limits import (
    REFERENCE_POLYTROPE_DENSITIES, default_margin, intersection_intensities, limit_measure,
    polytrope_densities_integral, solve_wstar,
)
from mosaic import (
    VertexKind, build_line_mosaic, build_mosaic, census, classify_polytropes, intersection_type_census,
)
from motorsim import EventLogError, Motorcycle, SimOptions, simulate
from procs import Line, rectangular_spec, sample_line_process, sample_sites, split_seeds, tropical_lines_spec

BOX = Rectangle(-5.0, -5.0, 5.0, 5.0)


def _triangle_lines():
    # y = 0, x = 0 and x - y = 1
    return [Line(0.0, 0.0), Line(math.pi / 2.0, 0.0), Line(5.0 * math.pi / 4.0, math.sqrt(2.0) / 2.0)]


def _pair_result():
    motorcycles = [Motorcycle(0, (0.0, 0.0), 0.0, 1, 0), Motorcycle(1, (1.0, -0.5), math.pi / 2.0, 1, 1)]
    return simulate(motorcycles, 1, opts=SimOptions(horizon=BOX))


def test_line_arrangement_triangle():
    g = build_line_mosaic(_triangle_lines(), BOX)
    assert len(g.vertices) == 9 and len(g.edges) == 9
    assert len(g.faces) == 1
    face = g.faces[0]
    assert abs(face.area - 0.5) < 1e-12
    assert face.polytrope_class == 3 and face.convex
    assert np.allclose(face.centroid, (1.0 / 3.0, -1.0 / 3.0))
    assert g.euler_characteristic == g.components == 1
    assert g.degree_sum() == 2 * len(g.edges)
    assert sum(1 for v in g.vertices if v.kind == VertexKind.CROSSING_DEG4) == 3


def test_line_arrangement_censuses():
    g = build_line_mosaic(_triangle_lines(), BOX)
    poly = classify_polytropes(g, BOX)
    assert abs(poly.p[3] - 0.01) < 1e-15 and poly.flagged == 0
    types = intersection_type_census(g, BOX)
    assert len(types) == 3 and all(abs(v - 0.01) < 1e-15 for v in types.values())
    c = census(g, BOX)
    assert abs(c.lambda0 - 0.09) < 1e-12
    assert abs(c.lambda2 - 0.01) < 1e-12


def test_two_motorcycle_mosaic():
    g = build_mosaic(_pair_result())
    kinds = sorted(v.kind.value for v in g.vertices)
    assert kinds == ['grave_deg3', 'horizon', 'site', 'site']
    grave = next(v for v in g.vertices if v.kind == VertexKind.GRAVE_DEG3)
    assert np.allclose(grave.point, (1.0, 0.0)) and grave.degree == 3
    assert len(g.edges) == 3 and g.faces == []
    assert g.euler_characteristic == g.components == 1


def test_event_off_the_trail_is_rejected():
    result = _pair_result()
    result.events = [dataclasses.replace(result.events[0], location=(3.0, 3.0))]
    try:
        build_mosaic(result)
    except EventLogError:
        return
    assert False, "expected EventLogError"


def test_simulated_mosaic_satisfies_euler_identity():
    box = Rectangle.square(5.0)
    for k in (1, 2):
        result = simulate(sample_sites(tropical_lines_spec(2.0), box, 21), k, opts=SimOptions(horizon=box))
        g = build_mosaic(result)
        assert g.euler_characteristic == g.components
        assert g.degree_sum() == 2 * len(g.edges)
        assert all(f.area > 0.0 for f in g.faces)
        df = g.faces_dataframe()
        assert list(df.columns) == ['face_id', 'class', 'area', 'centroid_x', 'centroid_y']
        assert len(g.vertices_dataframe()) == len(g.vertices)


@functools.lru_cache(maxsize=None)
def _limit_line_censuses(replicates: int = 12, seed: int = 5):
    """Polytrope and crossing-type censuses of the tropical-line limit process, 28x28 core"""
    spec = tropical_lines_spec(1.0)
    lp = limit_measure(spec, solve_wstar(spec))
    box = Rectangle.square(40.0)
    core = box.shrink(6.0)
    out = []
    for s in split_seeds(seed, replicates):
        g = build_line_mosaic(sample_line_process(lp, box, s), box)
        out.append((classify_polytropes(g, core), intersection_type_census(g, core)))
    return lp, out


def _mean_and_stderr(values):
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


def test_limit_polytropes_match_the_integral():
    _, censuses = _limit_line_censuses()
    dens = polytrope_densities_integral()
    assert all(pc.flagged == 0 for pc, _ in censuses)
    for i in (3, 4, 5, 6):
        mean, se = _mean_and_stderr([pc.p[i] for pc, _ in censuses])
        assert abs(mean - dens.p[i]) < 3.0 * se, f"p{i}: {mean:.4f} +- {se:.4f} vs {dens.p[i]:.4f}"
    # the printed pentagon density comes from a census row with a missing pentagon
    mean, se = _mean_and_stderr([pc.p[5] for pc, _ in censuses])
    assert abs(mean - REFERENCE_POLYTROPE_DENSITIES[5]) > 3.0 * se
    totals = [pc.total for pc, _ in censuses]
    mean, se = _mean_and_stderr(totals)
    assert abs(mean - 3.0) < 3.0 * se + 0.05


def _rate(table, key) -> float:
    for (a, b), value in table.items():
        if abs(a - key[0]) < 1e-9 and abs(b - key[1]) < 1e-9:
            return value
    return 0.0


def test_limit_crossing_types_match_line_intensities():
    lp, censuses = _limit_line_censuses()
    expected = intersection_intensities(lp)
    assert len(expected) == 3
    for key, rate in expected.items():
        mean, se = _mean_and_stderr([_rate(types, key) for _, types in censuses])
        assert abs(mean - rate) < 3.0 * se, f"{key}: {mean:.4f} +- {se:.4f} vs {rate:.4f}"
    # the diagonal crosses the horizontal and vertical families at the same rate
    rates = sorted(expected.values())
    assert min(rates[1] - rates[0], rates[2] - rates[1]) < 1e-9
    mean, se = _mean_and_stderr([sum(types.values()) for _, types in censuses])
    assert abs(mean - sum(expected.values())) < 3.0 * se


def _site_normalized_census(spec, k: int, side: float, seed: int):
    window = Rectangle.square(side)
    margin = default_margin(spec, k)
    sites = sample_sites(spec, window.expand(margin), seed)
    g = build_mosaic(simulate(sites, k, window=window, opts=SimOptions(margin=margin)))
    site_rate = float(window.contains_many(sites.locations).sum()) / window.area
    return census(g, window), site_rate, g


def _check_census(spec, k: int, per_site, seed: int):
    cen, site_rate, g = _site_normalized_census(spec, k, 30.0, seed)
    assert g.euler_characteristic == g.components
    for name, value, target in zip(('lambda0', 'lambda1', 'lambda2'), (cen.lambda0, cen.lambda1, cen.lambda2),
                                   per_site):
        # per realized site, which removes the Poisson noise of the site count
        assert abs(value / site_rate - target) < 0.03 * target, f"k={k} {name}: {value / site_rate:.3f} vs {target}"
        assert abs(value - target * spec.lam) < 0.12 * target * spec.lam


def test_tropical_line_mosaic_census():
    spec = tropical_lines_spec(1.0)
    for k in (1, 2, 3):
        _check_census(spec, k, (3 * k + 1, 6 * k, 3 * k - 1), 40 + k)


def test_rectangular_mosaic_census():
    spec = rectangular_spec(1.0)
    for k in (1, 2):
        _check_census(spec, k, (4 * k + 1, 8 * k, 4 * k - 1), 50 + k)


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith('test_') and callable(v)]
    failed = 0
    print("🔬 Testing mosaic construction")
    print("=" * 60)
    for test in tests:
        try:
            test()
            print(f"✅ {test.__name__}")
        except Exception as e:
            failed += 1
            print(f"❌ {test.__name__}: {e}")
    print("=" * 60)
    print(f"{len(tests) - failed}/{len(tests)} passed")
    sys.exit(1 if failed else 0)
