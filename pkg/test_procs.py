#!/usr/bin/env python3
"""
Tests for model specifications, site sampling and Poisson line processes
"""

import json
import math
import os
import sys
import tempfile

import numpy as np

from geom import Angle, Rectangle
from procs import (
    LineProcessSpec, ModelSpec, ModelSpecError, SitePattern, expected_line_count, make_rng, mu_of,
    rectangular_spec, sample_line_process, sample_sites, split_seeds, tropical_lines_spec,
)


def _raises(fn, *args, match: str = ''):
    try:
        fn(*args)
    except ModelSpecError as e:
        assert match in str(e), f"unexpected message: {e}"
        return
    assert False, "expected ModelSpecError"


def test_tropical_lines_intensities():
    spec = tropical_lines_spec(2.5)
    for angle in spec.angles:
        assert spec.nu(angle) == 2.5
    assert spec.mean_multiplicity == 3
    assert mu_of(spec, [0.0, math.pi / 2.0, 5.0 * math.pi / 4.0]) == 2.5
    assert mu_of(spec, [0.0]) == 0.0


def test_mixed_multiplicity_intensities():
    spec = ModelSpec(2.0, [0.0, math.pi / 2.0, math.pi], {1: 0.5, 2: 0.5},
                     {1: {(0,): 0.5, (1,): 0.5}, 2: {(0, 2): 1.0}})
    assert abs(spec.nu(0.0) - (2.0 * 0.25 + 2.0 * 0.5)) < 1e-12
    assert abs(spec.nu(math.pi / 2.0) - 0.5) < 1e-12
    assert abs(spec.nu(math.pi) - 1.0) < 1e-12
    assert spec.mean_multiplicity == 1.5
    assert abs(sum(spec.mu().values()) - spec.lam) < 1e-12


def test_parallel_directions_rejected():
    _raises(ModelSpec, 1.0, [0.0, math.pi], {2: 1.0}, {2: {(0, 1): 1.0}}, match='no-parallel-line')


def test_probability_mass_checked():
    _raises(ModelSpec, 1.0, [0.0, math.pi / 2.0], {1: 0.7, 2: 0.2}, {1: {(0,): 1.0}, 2: {(0, 1): 1.0}})
    _raises(ModelSpec, 1.0, [0.0, math.pi / 2.0], {2: 1.0}, {2: {(0, 1): 0.5}})
    _raises(ModelSpec, 1.0, [0.0, math.pi / 2.0], {2: 1.0}, {2: {(0, 0): 1.0}})
    _raises(ModelSpec, -1.0, [0.0, math.pi / 2.0], {2: 1.0}, {2: {(0, 1): 1.0}})


def test_mosaic_grade_checks():
    _raises(ModelSpec, 1.0, [0.0, math.pi / 2.0], {1: 0.5, 2: 0.5}, {1: {(0,): 1.0}, 2: {(0, 1): 1.0}},
            'custom', True, match='isolated')
    # east + north leaves a 3*pi/2 gap
    _raises(ModelSpec, 1.0, [0.0, math.pi / 2.0], {2: 1.0}, {2: {(0, 1): 1.0}}, 'custom', True,
            match='not convex')
    assert rectangular_spec(1.0).mosaic_grade


def test_spec_json_round_trip_and_overrides():
    tmp = tempfile.mkdtemp()
    path = os.path.join(tmp, 'model.json')
    with open(path, 'w') as f:
        json.dump({'name': 'quarter', 'lambda': 1.0, 'angles_deg': [0, 90, 180, 270],
                   'multiplicity': {'4': 1.0}, 'angle_sets': {'4': [[[0, 1, 2, 3], 1.0]]}}, f)
    spec = ModelSpec.from_json_file(path, lam=3.0)
    assert spec.lam == 3.0
    assert spec.name == 'quarter'
    assert abs(spec.angles[1].radians - math.pi / 2.0) < 1e-15
    again = ModelSpec.from_dict(spec.to_dict())
    assert again.mu() == spec.mu()

    with open(path, 'w') as f:
        json.dump({'lambda': 1.0, 'angles': [0.0]}, f)
    _raises(ModelSpec.from_json_file, path, match='Malformed')


def test_site_sampling_is_reproducible():
    spec = tropical_lines_spec(5.0)
    box = Rectangle.square(4.0)
    a = sample_sites(spec, box, 11)
    b = sample_sites(spec, box, 11)
    assert np.array_equal(a.locations, b.locations)
    assert a.angle_sets == b.angle_sets
    assert box.contains_many(a.locations).all()
    assert all(key == (0, 1, 2) for key in a.angle_sets)
    assert a.motorcycle_count() == 3 * len(a)


def test_site_count_matches_intensity():
    spec = tropical_lines_spec(3.0)
    box = Rectangle.square(5.0)
    counts = [len(sample_sites(spec, box, seed)) for seed in split_seeds(3, 40)]
    mean = float(np.mean(counts))
    # Poisson(75): standard error of the mean over 40 draws is about 1.4
    assert abs(mean - 75.0) < 7.0


def test_angle_set_law_frequencies():
    spec = ModelSpec(1.0, [0.0, math.pi / 2.0, math.pi], {2: 1.0}, {2: {(0, 1): 0.25, (1, 2): 0.75}})
    sites = sample_sites(spec, Rectangle.square(30.0), 5)
    share = sum(1 for key in sites.angle_sets if key == (1, 2)) / len(sites)
    assert abs(share - 0.75) < 0.05


def test_site_pattern_from_points():
    sites = SitePattern.from_points([(0.0, 0.0), (1.0, -1.0)], [[0.0], [math.pi / 2.0, 0.0]])
    assert sites.angles == [0.0, math.pi / 2.0]
    assert sites.angle_sets == [(0,), (0, 1)]
    assert sites.window.contains((1.0, -1.0))
    df = sites.to_dataframe()
    assert list(df.columns) == ['x', 'y', 'angle_indices']
    assert df['angle_indices'].tolist() == ['0', '0;1']


def test_line_process_counts():
    lp = LineProcessSpec.from_intensities({0.0: 2.0, math.pi / 2.0: 1.0})
    assert lp.Lambda == 3.0
    assert abs(lp.theta[Angle(math.pi / 2.0)] - 2.0 / 3.0) < 1e-12
    box = Rectangle.square(10.0)
    assert abs(expected_line_count(lp, box) - 30.0) < 1e-12
    assert abs(expected_line_count(lp, box, 0.0) - 20.0) < 1e-12
    totals = [len(sample_line_process(lp, box, seed)) for seed in range(30)]
    assert abs(float(np.mean(totals)) - 30.0) < 4.0
    lines = sample_line_process(lp, box, 1)
    assert all(0.0 <= line.offset <= 10.0 or line.direction == math.pi / 2.0 for line in lines)


def test_rng_helpers():
    assert make_rng(4).random() == make_rng(4).random()
    seeds = split_seeds(9, 5)
    assert len(set(seeds)) == 5
    assert seeds == split_seeds(9, 5)


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith('test_') and callable(v)]
    failed = 0
    print("🔬 Testing model specifications and point processes")
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
