#!/usr/bin/env python3
"""
Tests for the limit theory: expected crossings, the w* fixed point, line-process
intensities, mosaic census formulas and the polytrope densities
"""

import itertools
import math
import sys

import numpy as np
from scipy.stats import poisson

from limits import (
    TROPICAL_MU, TROPICAL_MU_DIAG, LimitSolver, WeightVector, arm_body_mean, default_margin, expected_crossings,
    expected_crossings_disjoint, expected_crossings_double_sum, face_expectations, intersection_intensities,
    limit_measure, mosaic_intensities, polytrope_constraints, polytrope_densities_integral, rectangle_face_census,
    solve_wstar, tropical_line_constants,
)
from procs import ModelSpec, rectangular_spec, tropical_lines_spec

EAST, NORTH, SOUTHWEST = 0.0, math.pi / 2.0, 5.0 * math.pi / 4.0


def _mixed_spec() -> ModelSpec:
    return ModelSpec(2.0, [0.0, math.pi / 2.0, math.pi], {1: 0.5, 2: 0.5},
                     {1: {(0,): 0.5, (1,): 0.5}, 2: {(0, 2): 1.0}})


def test_tropical_constants_closed_form():
    assert abs(TROPICAL_MU - 1.0823922) < 1e-7
    assert abs(TROPICAL_MU_DIAG - 1.1944776) < 1e-7
    consts = tropical_line_constants(1.0)
    assert abs(consts.Lambda - 3.359262) < 1e-6
    assert abs(tropical_line_constants(4.0).mu_diagonal - 2.0 * TROPICAL_MU_DIAG) < 1e-12


def test_wstar_for_tropical_lines():
    w = solve_wstar(tropical_lines_spec(1.0))
    assert abs(w[EAST] - TROPICAL_MU) < 1e-9
    assert abs(w[NORTH] - TROPICAL_MU) < 1e-9
    assert abs(w[SOUTHWEST] - TROPICAL_MU_DIAG) < 1e-9
    for angle in (EAST, NORTH, SOUTHWEST):
        assert abs(expected_crossings(tropical_lines_spec(1.0), w, angle) - 1.0) < 1e-9


def test_wstar_for_rectangular_model():
    w = solve_wstar(rectangular_spec(4.0))
    for angle in rectangular_spec(4.0).angles:
        assert abs(w[angle] - 0.5) < 1e-9


def test_wstar_scales_with_intensity():
    base = solve_wstar(tropical_lines_spec(1.0))
    scaled = solve_wstar(tropical_lines_spec(9.0))
    for angle in (EAST, NORTH, SOUTHWEST):
        assert abs(scaled[angle] - base[angle] / 3.0) < 1e-9


def test_solver_on_mixed_multiplicities():
    spec = _mixed_spec()
    solver = LimitSolver(spec)
    w = solver.solve()
    assert solver.residual(w) < 1e-9
    assert all(v > 0.0 for v in w.w.values())


def test_collapsed_and_double_sum_agree():
    spec = _mixed_spec()
    w = WeightVector({0.0: 1.0, math.pi / 2.0: 0.5, math.pi: 2.0})
    for angle in spec.angles:
        assert abs(expected_crossings(spec, w, angle) - expected_crossings_double_sum(spec, w, angle)) < 1e-12


def test_disjoint_decomposition_matches_collapsed_form():
    spec = tropical_lines_spec(1.0)
    w = solve_wstar(spec)
    mean, se = expected_crossings_disjoint(spec, w, EAST, samples=100000, seed=3)
    assert abs(mean - 1.0) < 5.0 * se + 1e-9


def test_weight_vector_validation():
    try:
        WeightVector({0.0: -1.0})
    except ValueError:
        pass
    else:
        assert False, "expected ValueError"
    w = WeightVector({0.0: 1.0})
    try:
        w[math.pi]
    except ValueError:
        return
    assert False, "expected ValueError for unknown angle"


def test_limit_measure_and_crossings():
    spec = tropical_lines_spec(1.0)
    lp = limit_measure(spec, solve_wstar(spec))
    assert abs(lp.Lambda - tropical_line_constants(1.0).Lambda) < 1e-9
    pairs = intersection_intensities(lp)
    values = sorted(pairs.values())
    small = (math.sqrt(2.0) + 3.0) / (2.0 * (math.sqrt(2.0) + 1.0))
    assert abs(values[0] - small) < 1e-8 and abs(values[1] - small) < 1e-8
    assert abs(values[2] - 2.0 * math.sqrt(2.0) / (math.sqrt(2.0) + 1.0)) < 1e-8
    assert abs(sum(values) - 3.0) < 1e-8


def test_default_margin():
    spec = tropical_lines_spec(1.0)
    assert abs(default_margin(spec, 4) - 8.0 * TROPICAL_MU_DIAG) < 1e-8


def test_mosaic_intensity_formulas():
    for k in (1, 2, 5):
        shared = mosaic_intensities(tropical_lines_spec(1.0), k)['shared_origin']
        assert np.allclose((shared.lambda0, shared.lambda1, shared.lambda2), (3 * k + 1, 6 * k, 3 * k - 1))
        rect = mosaic_intensities(rectangular_spec(2.0), k)['shared_origin']
        assert np.allclose((rect.lambda0, rect.lambda1, rect.lambda2), (2 * (4 * k + 1), 16 * k, 2 * (4 * k - 1)))
        for values in mosaic_intensities(tropical_lines_spec(1.0), k).values():
            assert abs(values.lambda0 - values.lambda1 + values.lambda2) < 1e-12


def _split(face, c):
    """Cut a convex polygon by the line x - y = c; returns the pieces with positive area"""
    values = [x - y - c for x, y in face]
    if min(values) > -1e-12 or max(values) < 1e-12:
        return [face]
    lower, upper = [], []
    for i, (p, v) in enumerate(zip(face, values)):
        q, w = face[(i + 1) % len(face)], values[(i + 1) % len(face)]
        (lower if v < 0 else upper).append(p)
        if (v < 0) != (w < 0):
            t = v / (v - w)
            cut = (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))
            lower.append(cut)
            upper.append(cut)
    return [lower, upper]


def _clipped_census(chords):
    faces = [[(0.0, 0.0), (3.0, 0.0), (3.0, 1.0), (0.0, 1.0)]]
    for c in chords:
        faces = [piece for face in faces for piece in _split(face, c)]
    counts = {3: 0, 4: 0, 5: 0, 6: 0}
    for face in faces:
        counts[len(face)] += 1
    return counts[3], counts[4], counts[5], counts[6]


def test_rectangle_face_census_against_polygon_clipping():
    a_block, b_block, c_block = [-0.7, -0.3], [0.5, 1.2], [2.4, 2.8]
    for na, nb, nc in itertools.product(range(3), repeat=3):
        chords = a_block[:na] + b_block[:nb] + c_block[:nc]
        assert rectangle_face_census(na, nb, nc) == _clipped_census(chords), (na, nb, nc)


def test_rectangle_face_census_closed_cases():
    assert rectangle_face_census(0, 0, 0) == (0, 1, 0, 0)
    for na, nc in [(1, 1), (2, 3), (4, 1)]:
        assert rectangle_face_census(na, 0, nc) == (2, na + nc - 2, 0, 1)
    for nb in (1, 2, 5):
        assert rectangle_face_census(1, nb, 0) == (1, nb, 1, 0)


def test_face_expectations_match_poisson_average():
    a, b, c = 0.7, 1.3, 0.4
    n = np.arange(30)
    pa, pb, pc = poisson.pmf(n, a), poisson.pmf(n, b), poisson.pmf(n, c)
    totals = np.zeros(4)
    for i, j, m in itertools.product(range(12), range(14), range(10)):
        totals += pa[i] * pb[j] * pc[m] * np.array(rectangle_face_census(i, j, m))
    expected = face_expectations(np.array(a), np.array(b), np.array(c))
    for idx, sides in enumerate((3, 4, 5, 6)):
        assert abs(float(expected[sides]) - totals[idx]) < 1e-6


def test_polytrope_densities_satisfy_constraints():
    dens = polytrope_densities_integral()
    total, weighted = polytrope_constraints(TROPICAL_MU, TROPICAL_MU_DIAG)
    assert abs(total - 3.0) < 1e-9
    assert abs(dens.total - 3.0) < 1e-9
    assert abs(dens.weighted_total - weighted) < 1e-9
    assert all(v > 0.0 for v in dens.p.values())


def test_triangle_density_closed_form():
    dens = polytrope_densities_integral()
    kappa = TROPICAL_MU_DIAG / math.sqrt(2.0)
    closed = 2.0 * TROPICAL_MU ** 2 * kappa / (2.0 * TROPICAL_MU + kappa)
    assert abs(dens.p[3] - closed) < 1e-8
    assert abs(dens.p[3] - 0.65763) < 1e-4


def test_rectangles_only_without_diagonals():
    dens = polytrope_densities_integral(TROPICAL_MU, 0.0)
    assert abs(dens.p[4] - TROPICAL_MU ** 2) < 1e-10
    assert dens.p[3] == 0.0 and dens.p[5] == 0.0 and dens.p[6] == 0.0


def test_arm_body_mean_for_unit_horizontal_body():
    consts = tropical_line_constants(1.0)
    value = arm_body_mean({0.0: 1.0}, (1.0, 1.0, 1.0), consts.as_tuple())
    assert abs(value - (TROPICAL_MU + TROPICAL_MU_DIAG / math.sqrt(2.0))) < 1e-12
    assert abs(value - 1.9270154) < 1e-6
    assert arm_body_mean({}, (1.0, 1.0, 1.0), consts.as_tuple()) == 0.0


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith('test_') and callable(v)]
    failed = 0
    print("🔬 Testing limit theory")
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
