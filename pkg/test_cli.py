#!/usr/bin/env python3
"""
End-to-end tests of the command line: exit codes, written artifacts and the
numbers reported for models with closed forms
"""

import json
import math
import os
import sys
import tempfile

import numpy as np
import pandas as pd

from cli import (
    ConvergeTask, converge_replicate, count_line_crossings, germ_limit, germ_margin, limit_comparison, main,
    run_replicates, strip_polygon,
)
from geom import Rectangle, shoelace_area
from limits import TROPICAL_MU, default_margin, limit_measure, solve_wstar
from procs import Line, expected_line_count, split_seeds, tropical_lines_spec
from tropical import CurveLaw


def _read(out: str, name: str) -> str:
    with open(os.path.join(out, name)) as f:
        return f.read()


def _hashes(out: str):
    with open(os.path.join(out, 'manifest.json')) as f:
        return {a['path']: a['sha256'] for a in json.load(f)['artifacts']}


def test_missing_lambda_is_a_usage_error():
    out = tempfile.mkdtemp()
    assert main(['simulate', '--model', 'tropical-lines', '--k', '1', '--output-dir', out]) == 2
    assert main(['limit', '--model', 'hexagonal', '--lambda', '1']) == 2


def test_parallel_custom_model_is_rejected():
    out = tempfile.mkdtemp()
    spec_path = os.path.join(out, 'parallel.json')
    with open(spec_path, 'w') as f:
        json.dump({'lambda': 1.0, 'angles': [0.0, math.pi], 'multiplicity': {'2': 1.0},
                   'angle_sets': {'2': [[[0, 1], 1.0]]}}, f)
    assert main(['limit', '--model', 'custom', '--spec-file', spec_path, '--output-dir', out]) == 2


def test_limit_for_rectangular_model():
    out = tempfile.mkdtemp()
    assert main(['limit', '--model', 'rectangular', '--lambda', '4', '--output-dir', out]) == 0
    text = _read(out, 'limit.txt')
    assert '[fixed_point]' in text and '[closed_form]' in text
    assert 'w*_east\t0.5' in text
    assert 'limit.txt' in _hashes(out)


def test_limit_from_config_file():
    out = tempfile.mkdtemp()
    path = os.path.join(out, 'run.env')
    with open(path, 'w') as f:
        f.write(f"model=rectangular\nlambda=1\noutput_dir={out}\n")
    assert main(['limit', '--config', path]) == 0
    with open(os.path.join(out, 'manifest.json')) as f:
        assert json.load(f)['config']['model'] == 'rectangular'


def test_tropical_closed_forms_match_solver():
    spec = tropical_lines_spec(2.0)
    w = solve_wstar(spec)
    rows = limit_comparison(spec, w, limit_measure(spec, w))
    assert [r[0] for r in rows][:3] == ['w*_east', 'w*_north', 'w*_southwest']
    assert all(r[3] < 1e-9 for r in rows)
    assert abs(rows[0][1] - TROPICAL_MU / math.sqrt(2.0)) < 1e-9


def test_simulate_writes_reproducible_artifacts():
    runs = []
    for _ in range(2):
        out = tempfile.mkdtemp()
        argv = ['simulate', '--model', 'tropical-lines', '--lambda', '10', '--k', '1', '--window', '1',
                '--seed', '7', '--output-dir', out]
        assert main(argv) == 0
        runs.append(out)
    first, second = _hashes(runs[0]), _hashes(runs[1])
    for name in ('sites.csv', 'events.csv', 'trails.csv', 'faces.csv', 'mosaic.svg', 'census.txt'):
        assert name in first
        assert first[name] == second[name], name
    census_text = _read(runs[0], 'census.txt')
    assert '[intensities]' in census_text and 'lambda0' in census_text
    events = pd.read_csv(os.path.join(runs[0], 'events.csv'))
    assert set(events['killer_kind']) <= {'motorcycle'}


def test_simulate_germ_grain():
    out = tempfile.mkdtemp()
    argv = ['simulate', '--model', 'germ-grain', '--lambda', '0.3', '--window', '3', '--degree-max', '2',
            '--seed', '2', '--output-dir', out]
    assert main(argv) == 0
    sites = pd.read_csv(os.path.join(out, 'sites.csv'))
    assert list(sites.columns) == ['x', 'y', 'angle', 'weight', 'complex_id']
    assert (sites['weight'] >= 1).all()


def test_converge_reports_every_direction():
    out = tempfile.mkdtemp()
    argv = ['converge', '--model', 'tropical-lines', '--lambda', '1', '--ks', '1,2', '--window', '3',
            '--replicates', '2', '--output-dir', out]
    assert main(argv) == 0
    table = pd.read_csv(os.path.join(out, 'converge.csv'))
    assert len(table) == 6
    assert sorted(set(table['k'])) == [1, 2]
    assert (table['expected'] > 0).all()
    assert 'directions_improving' in _read(out, 'converge.txt')


def test_polytropes_without_diagonals():
    out = tempfile.mkdtemp()
    argv = ['polytropes', '--mu-diag', '0', '--window', '4', '--replicates', '2', '--output-dir', out]
    assert main(argv) == 0
    table = pd.read_csv(os.path.join(out, 'polytropes.csv')).set_index('class')
    assert abs(table.loc[4, 'integral'] - TROPICAL_MU ** 2) < 1e-9
    assert table.loc[3, 'integral'] == 0.0
    assert table.loc[3, 'monte_carlo'] == 0.0
    assert os.path.exists(os.path.join(out, 'lines.svg'))


def test_tropical_export_of_the_figure_cubic():
    out = tempfile.mkdtemp()
    assert main(['tropical', '--output-dir', out]) == 0
    text = _read(out, 'tropical.txt')
    assert 'skipped_lattice_points = (0,1) (2,0)' in text
    assert 'intersection_with_line = 3' in text
    arms = pd.read_csv(os.path.join(out, 'curve_arms.csv'))
    assert arms.groupby('direction')['multiplicity'].sum().to_dict() == {'east': 3, 'north': 3, 'southwest': 3}
    for name in ('curve_vertices.csv', 'curve_edges.csv', 'subdivision.csv', 'curve.svg', 'subdivision.svg'):
        assert os.path.exists(os.path.join(out, name))


def test_tropical_rejects_malformed_polynomial_file():
    out = tempfile.mkdtemp()
    path = os.path.join(out, 'bad.txt')
    with open(path, 'w') as f:
        f.write("1 0\n")
    assert main(['tropical', '--poly-file', path, '--output-dir', out]) == 2


def test_armbody_runs():
    out = tempfile.mkdtemp()
    assert main(['armbody', '--replicates', '10', '--seed', '1', '--output-dir', out]) == 0
    text = _read(out, 'armbody.txt')
    assert '[comparison]' in text and 'predicted' in text


def test_count_line_crossings():
    lines = [Line(0.0, 0.5), Line(math.pi / 2.0, -2.0)]
    segments = np.array([[[0.0, 0.0], [0.0, 1.0]], [[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [3.0, 0.0]]])
    # y = 0.5 cuts the first segment, x = 2 cuts the third
    assert count_line_crossings(lines, segments) == 2
    assert count_line_crossings([], segments) == 0


def test_strip_polygon():
    poly = strip_polygon(Rectangle.square(1.0), 0.0, 2.0)
    assert abs(shoelace_area(poly) - 3.0) < 1e-12


def _crossing_errors(lp, tasks_for_k, ks, window, directions):
    """Mean relative count error per k and its standard error, pooled over directions"""
    out = {}
    for k in ks:
        results = run_replicates(converge_replicate, tasks_for_k(k), 1)
        errs, ses = [], []
        for d in directions:
            counts = np.asarray([r.counts[d] for r in results], dtype=float)
            expected = expected_line_count(lp, window, d)
            errs.append(abs(counts.mean() - expected) / expected)
            ses.append(counts.std(ddof=1) / math.sqrt(len(counts)) / expected)
        out[k] = (float(np.mean(errs)), float(np.mean(ses)))
    return out


def test_site_model_crossings_approach_the_limit():
    spec = tropical_lines_spec(1.0)
    lp = limit_measure(spec, solve_wstar(spec))
    directions = sorted(a.radians for a, rate in lp.per_direction_intensity.items() if rate > 0.0)
    window = Rectangle.square(10.0)

    def tasks(k):
        scaled = spec.scaled(1.0 / k)
        margin = default_margin(scaled, k)
        return [ConvergeTask(r, k, s, window, margin, directions, spec=scaled)
                for r, s in enumerate(split_seeds(70 + k, 6))]

    errors = _crossing_errors(lp, tasks, (1, 5), window, directions)
    (err_lo, se_lo), (err_hi, se_hi) = errors[1], errors[5]
    assert err_hi <= 0.1 + 3.0 * se_hi, f"k=5 error {err_hi:.3f} +- {se_hi:.3f}"
    assert err_hi <= err_lo + 3.0 * (se_lo + se_hi)


def test_germ_grain_crossings_approach_the_limit():
    law = CurveLaw(degree_max=3, spread=1.0)
    lam = 1.0
    lp, _ = germ_limit(law, lam, 3)
    directions = sorted(a.radians for a, rate in lp.per_direction_intensity.items() if rate > 0.0)
    window = Rectangle.square(10.0)

    def tasks(k):
        margin = germ_margin(law, lam / k, k)
        return [ConvergeTask(r, k, s, window, margin, directions, law=law, germ_lam=lam / k)
                for r, s in enumerate(split_seeds(80 + k, 5))]

    errors = _crossing_errors(lp, tasks, (1, 4), window, directions)
    (err_lo, se_lo), (err_hi, se_hi) = errors[1], errors[4]
    assert err_hi <= 0.25 + 3.0 * se_hi, f"k=4 error {err_hi:.3f} +- {se_hi:.3f}"
    assert err_hi <= err_lo + 3.0 * (se_lo + se_hi)


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith('test_') and callable(v)]
    failed = 0
    print("🔬 Testing the command line")
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
