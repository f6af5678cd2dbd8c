#!/usr/bin/env python3
"""
GilbertLab Command Line
Run simulations, solve scaling limits and compare empirical against theoretical statistics
"""

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import ConvexHull
from scipy.stats import kstest

import reports
from geom import Rectangle, clip_segment_to_rectangle, points_in_convex_polygon, projection_interval, unit_vector
from health_check import CheckStatus, GilbertLabHealthCheck, print_report
from limits import (
    SQRT2, TROPICAL_MU, TROPICAL_MU_DIAG, REFERENCE_POLYTROPE_DENSITIES, LimitSolver, arm_body_mean,
    default_margin, intersection_intensities, limit_measure, mosaic_intensities, polytrope_constraints,
    polytrope_densities_integral, solve_wstar, tropical_line_constants,
)
from mosaic import build_line_mosaic, build_mosaic, census, classify_polytropes
from motorsim import SimOptions, SimResult, path_length_stats, simulate
from procs import (
    LineProcessSpec, ModelSpec, expected_line_count, rectangular_spec, sample_line_process, sample_sites,
    split_seeds, tropical_lines_spec,
)
from run_config import MODELS, VERBOSE, ConfigError, RunConfig, RunManifest, resolve_config
from tropical import (
    ArmDirection, ArmStatistics, CentroidKind, CurveLaw, GermGrain, TropPoly, arm_multiplicity_means, body_radius,
    centroid, curve, figure_cubic, germ_grain, stable_intersection, tropical_line,
)

# commands whose model needs a site intensity
LAMBDA_COMMANDS = ('simulate', 'limit', 'converge')

# crossing origins are tested against the window swept back by this multiple of sqrt(k) * w*
STRIP_SLACK = 1.25

ARM_SAMPLES = 2000

TROPICAL_DIRECTIONS = (0.0, math.pi / 2.0, 5.0 * math.pi / 4.0)


# -- model plumbing ---------------------------------------------------------

def build_spec(config: RunConfig) -> ModelSpec:
    """Site model for the configured name; germ-grain runs use the degree-one reference"""
    if config.model == 'custom':
        if not config.spec_file:
            raise ConfigError("Model 'custom' needs --spec-file")
        return ModelSpec.from_json_file(config.spec_file, config.lam)
    if config.lam is None:
        raise ConfigError(f"--lambda is required for model {config.model}")
    if config.model == 'rectangular':
        return rectangular_spec(config.lam)
    return tropical_lines_spec(config.lam)


def curve_law(config: RunConfig) -> CurveLaw:
    return CurveLaw(degree_max=config.degree_max, spread=config.spread)


def load_poly(config: RunConfig) -> TropPoly:
    return TropPoly.from_file(config.poly_file) if config.poly_file else figure_cubic()


def germ_margin(law: CurveLaw, lam: float, k: int) -> float:
    # sites margin of the degree-one reference plus room for the largest body
    return default_margin(tropical_lines_spec(lam), k) + 2.0 * law.spread * law.degree_max


def germ_limit(law: CurveLaw, lam: float, seed: int) -> Tuple[LineProcessSpec, ArmStatistics]:
    """Distinct-arm counts D_phi times the tropical-line constants, per direction"""
    stats = arm_multiplicity_means(law, ARM_SAMPLES, seed)
    mu = tropical_line_constants(lam)
    lp = LineProcessSpec.from_intensities({
        0.0: stats.D_horizontal * mu.mu_horizontal,
        math.pi / 2.0: stats.D_vertical * mu.mu_vertical,
        5.0 * math.pi / 4.0: stats.D_diagonal * mu.mu_diagonal,
    })
    return lp, stats


def run_site_model(spec: ModelSpec, k: int, window: Rectangle, margin: float, seed: int) -> SimResult:
    """Sites sampled over window + margin; paths frozen at window + 2 * margin"""
    sites = sample_sites(spec, window.expand(margin), seed)
    return simulate(sites, k, window=window, opts=SimOptions(margin=margin))


def run_germ_grain(law: CurveLaw, lam: float, k: int, window: Rectangle, margin: float,
                   seed: int) -> Tuple[SimResult, GermGrain]:
    ensemble = germ_grain(law, lam, window.expand(margin), seed, k)
    result = simulate(ensemble.motorcycles, k, ensemble.obstacles, opts=SimOptions(margin=margin), window=window)
    return result, ensemble


def run_replicates(fn: Callable, tasks: Sequence, threads: int) -> List:
    """Worker pool over replicate tasks; results come back sorted by replicate index"""
    if threads <= 1 or len(tasks) <= 1:
        results = [fn(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(fn, tasks))
    return sorted(results, key=lambda r: r.index)


def write_csv(manifest: RunManifest, name: str, df: pd.DataFrame) -> str:
    df.to_csv(manifest.path(name), index=False)
    return manifest.register(name)


def _stderr(values: Sequence[float]) -> float:
    arr = np.asarray(values, dtype=float)
    if len(arr) < 2:
        return float('nan')
    return float(arr.std(ddof=1) / math.sqrt(len(arr)))


# -- simulate ---------------------------------------------------------------

def cmd_simulate(config: RunConfig) -> int:
    manifest = RunManifest(config)
    window = Rectangle.square(config.window)
    print(f"🔬 simulate: model={config.model} k={config.k} window={config.window} seed={config.seed}")

    predictions = {}
    if config.model == 'germ-grain':
        law = curve_law(config)
        margin = config.margin if config.margin is not None else germ_margin(law, config.lam, config.k)
        result, ensemble = run_germ_grain(law, config.lam, config.k, window, margin, config.seed)
        write_csv(manifest, 'sites.csv', pd.DataFrame({
            'x': [m.origin[0] for m in result.motorcycles],
            'y': [m.origin[1] for m in result.motorcycles],
            'angle': [m.angle.radians for m in result.motorcycles],
            'weight': [m.weight for m in result.motorcycles],
            'complex_id': [m.source_id for m in result.motorcycles],
        }, columns=['x', 'y', 'angle', 'weight', 'complex_id']))
        source_count = len(ensemble.obstacles)
    else:
        spec = build_spec(config)
        margin = config.margin if config.margin is not None else default_margin(spec, config.k)
        result = run_site_model(spec, config.k, window, margin, config.seed)
        result.sites.to_csv(manifest.path('sites.csv'))
        manifest.register('sites.csv')
        predictions = mosaic_intensities(spec, config.k)
        source_count = len(result.sites)

    write_csv(manifest, 'events.csv', result.events_dataframe())
    write_csv(manifest, 'trails.csv', result.trails_dataframe())

    g = build_mosaic(result)
    manifest.write_text('mosaic.svg', reports.mosaic_svg(g, window, title=f"{config.model} k={config.k}"))
    write_csv(manifest, 'faces.csv', g.faces_dataframe())

    cen = census(g, window)
    shared = predictions.get('shared_origin')
    weighted = predictions.get('multiplicity')
    rows = []
    for name, value in (('lambda0', cen.lambda0), ('lambda1', cen.lambda1), ('lambda2', cen.lambda2)):
        rows.append([name, value,
                     getattr(shared, name) if shared else float('nan'),
                     getattr(weighted, name) if weighted else float('nan')])
    sections = [
        reports.fields_section('run', [
            ('model', config.model), ('lambda', config.lam), ('k', config.k), ('window', config.window),
            ('margin', margin), ('seed', config.seed),
        ]),
        reports.fields_section('realization', [
            ('sources', source_count), ('motorcycles', len(result.motorcycles)), ('events', len(result.events)),
            ('censored', result.censored_count), ('vertices', len(g.vertices)), ('edges', len(g.edges)),
            ('bounded_faces', len(g.faces)), ('components', g.components),
            ('euler_characteristic', g.euler_characteristic),
        ]),
        reports.table_section('intensities', ['quantity', 'empirical', 'shared_origin', 'multiplicity'], rows, [
            ('lambda0_weighted', cen.lambda0_weighted),
            ('mean_vertices_per_face', cen.mean_vertices_per_face),
            ('euler_gap', cen.euler_gap),
            ('core_area', cen.area),
        ]),
        reports.table_section('vertex_kinds', ['kind', 'intensity'], sorted(cen.vertex_kinds.items())),
    ]
    manifest.write_text('census.txt', reports.render_report('census', sections))
    manifest.write()
    if g.euler_characteristic != g.components:
        print(f"⚠️ Euler characteristic {g.euler_characteristic} differs from {g.components} components")
    print(f"✅ simulate: {len(result.events)} events, census lambda0={cen.lambda0:.4f} "
          f"lambda1={cen.lambda1:.4f} lambda2={cen.lambda2:.4f}")
    return 0


# -- limit ------------------------------------------------------------------

def _pair_value(table: Dict[Tuple[float, float], float], a: float, b: float) -> float:
    lo, hi = sorted((a, b))
    for (x, y), value in table.items():
        if abs(x - lo) < 1e-9 and abs(y - hi) < 1e-9:
            return value
    return 0.0


def limit_comparison(spec: ModelSpec, w, lp: LineProcessSpec) -> List[List]:
    """(quantity, solver, closed form, |diff|) rows for models with known constants"""
    lam = spec.lam
    rows = []
    if spec.name == 'tropical-lines':
        consts = tropical_line_constants(lam)
        closed_w = (TROPICAL_MU / math.sqrt(lam), TROPICAL_MU / math.sqrt(lam), TROPICAL_MU_DIAG / math.sqrt(lam))
        for label, angle, value in zip(('w*_east', 'w*_north', 'w*_southwest'), TROPICAL_DIRECTIONS, closed_w):
            rows.append([label, w[angle], value])
        for label, angle, value in zip(('mu_-', 'mu_|', 'mu_/'), TROPICAL_DIRECTIONS, consts.as_tuple()):
            rows.append([label, lp.intensity(angle), value])
        ii = intersection_intensities(lp)
        h, v, d = 0.0, math.pi / 2.0, math.pi / 4.0
        rows.append(['p_-|', _pair_value(ii, h, v), 2.0 * SQRT2 / (SQRT2 + 1.0) * lam])
        rows.append(['p_-/', _pair_value(ii, h, d), (SQRT2 + 3.0) / (2.0 * (SQRT2 + 1.0)) * lam])
        rows.append(['p_|/', _pair_value(ii, v, d), (SQRT2 + 3.0) / (2.0 * (SQRT2 + 1.0)) * lam])
        rows.append(['p_sum', sum(ii.values()), 3.0 * lam])
    elif spec.name == 'rectangular':
        for label, angle in zip(('w*_east', 'w*_north', 'w*_west', 'w*_south'), (0.0, math.pi / 2.0, math.pi,
                                                                               3.0 * math.pi / 2.0)):
            rows.append([label, w[angle], 1.0 / math.sqrt(lam)])
    return [r + [abs(r[1] - r[2])] for r in rows]


def cmd_limit(config: RunConfig) -> int:
    manifest = RunManifest(config)
    spec = build_spec(config)
    print(f"🔬 limit: model={config.model} lambda={spec.lam}")
    solver = LimitSolver(spec)
    w = solver.solve()
    lp = limit_measure(spec, w)
    weights = [[a.radians, math.degrees(a.radians), w[a], spec.nu_index(i), lp.intensity(a)]
               for i, a in enumerate(spec.angles)]
    sections = [
        reports.fields_section('model', [('name', spec.name), ('lambda', spec.lam),
                                         ('mean_multiplicity', spec.mean_multiplicity)]),
        reports.table_section('fixed_point', ['direction', 'degrees', 'w*', 'nu', 'line_intensity'], weights,
                              [('residual', solver.residual(w))]),
        reports.table_section('line_process', ['normal', 'theta'],
                              [[a.radians, mass] for a, mass in sorted(lp.theta.items())], [('Lambda', lp.Lambda)]),
        reports.table_section('intersections', ['orientation_a', 'orientation_b', 'intensity'],
                              [[a, b, v] for (a, b), v in sorted(intersection_intensities(lp).items())]),
    ]
    comparison = limit_comparison(spec, w, lp)
    if comparison:
        sections.append(reports.table_section('closed_form', ['quantity', 'solver', 'closed_form', 'abs_diff'],
                                              comparison))
        worst = max(r[3] for r in comparison)
        if worst > 1e-9:
            print(f"⚠️ Largest deviation from closed forms is {worst:.3e}")
    if config.model == 'germ-grain':
        law = curve_law(config)
        glp, stats = germ_limit(law, spec.lam, config.seed)
        sections.append(reports.table_section(
            'germ_grain', ['direction', 'D_phi', 'line_intensity'],
            [[ArmDirection.EAST.radians, stats.D_horizontal, glp.intensity(0.0)],
             [ArmDirection.NORTH.radians, stats.D_vertical, glp.intensity(math.pi / 2.0)],
             [ArmDirection.SOUTHWEST.radians, stats.D_diagonal, glp.intensity(5.0 * math.pi / 4.0)]],
            [('mean_degree', stats.D), ('curves_sampled', stats.samples)]))
    text = reports.render_report('limit', sections)
    print(text)
    manifest.write_text('limit.txt', text)
    manifest.write()
    print(f"✅ limit: Lambda={lp.Lambda:.10f}")
    return 0


# -- converge ---------------------------------------------------------------

@dataclass
class ConvergeTask:
    index: int
    k: int
    seed: int
    window: Rectangle
    margin: float
    directions: List[float]
    spec: Optional[ModelSpec] = None
    law: Optional[CurveLaw] = None
    germ_lam: float = 0.0
    strip: Dict[float, float] = field(default_factory=dict)


@dataclass
class ReplicateStats:
    index: int
    counts: Dict[float, int]
    offsets: Dict[float, List[float]]
    path_means: Dict[float, Tuple[float, int]]
    strip_hits: Dict[float, int]


def strip_polygon(window: Rectangle, direction: float, length: float) -> np.ndarray:
    """Window swept backwards along direction by length, as a convex polygon"""
    corners = np.asarray(window.vertices(), dtype=float)
    back = corners - length * unit_vector(direction)
    pts = np.vstack([corners, back])
    return pts[ConvexHull(pts).vertices]


def converge_replicate(task: ConvergeTask) -> ReplicateStats:
    if task.law is not None:
        result, _ = run_germ_grain(task.law, task.germ_lam, task.k, task.window, task.margin, task.seed)
    else:
        result = run_site_model(task.spec, task.k, task.window, task.margin, task.seed)
    counts = {d: 0 for d in task.directions}
    offsets: Dict[float, List[float]] = {d: [] for d in task.directions}
    strip_hits = {d: 0 for d in task.directions}
    strips = {d: strip_polygon(task.window, d, length) for d, length in task.strip.items()}
    for m, trail in zip(result.motorcycles, result.trails):
        key = m.angle.radians
        if key not in counts:
            continue
        clipped = clip_segment_to_rectangle(trail.segment, task.window)
        if clipped is None or clipped.length <= 0.0:
            continue
        counts[key] += 1
        offsets[key].append(float(np.dot(m.origin, unit_vector(key + math.pi / 2.0))))
        if key in strips and points_in_convex_polygon(np.asarray([m.origin]), strips[key])[0]:
            strip_hits[key] += 1
    path_means = {}
    for d in task.directions:
        stats = path_length_stats(result, d, task.window)
        path_means[d] = (stats.mean if stats.count else 0.0, stats.count)
    if VERBOSE:
        print(f"📊 replicate {task.index}: k={task.k}, {len(result.motorcycles)} motorcycles")
    return ReplicateStats(task.index, counts, offsets, path_means, strip_hits)


def cmd_converge(config: RunConfig) -> int:
    manifest = RunManifest(config)
    window = Rectangle.square(config.window)
    germ = config.model == 'germ-grain'
    print(f"🔬 converge: model={config.model} k in {config.k_list} replicates={config.replicates}")

    if germ:
        law = curve_law(config)
        lp, _ = germ_limit(law, config.lam, config.seed)
        spec = None
    else:
        law = None
        spec = build_spec(config)
        lp = limit_measure(spec, solve_wstar(spec))
    directions = sorted(a.radians for a, rate in lp.per_direction_intensity.items() if rate > 0.0)

    rows = []
    errors: Dict[int, Dict[float, float]] = {}
    for k in config.k_list:
        if germ:
            margin = config.margin if config.margin is not None else germ_margin(law, config.lam / k, k)
            scaled, strip, w_scaled = None, {}, None
        else:
            scaled = spec.scaled(1.0 / k)
            w_scaled = solve_wstar(scaled)
            margin = config.margin if config.margin is not None else default_margin(scaled, k, w_scaled)
            strip = {d: STRIP_SLACK * math.sqrt(k) * w_scaled[d] for d in directions}
        seeds = split_seeds(config.seed + k, config.replicates)
        tasks = [ConvergeTask(r, k, s, window, margin, directions, spec=scaled, law=law,
                              germ_lam=config.lam / k if germ else 0.0, strip=strip)
                 for r, s in enumerate(seeds)]
        results = run_replicates(converge_replicate, tasks, config.threads)

        errors[k] = {}
        for d in directions:
            counts = [r.counts[d] for r in results]
            offsets = [o for r in results for o in r.offsets[d]]
            expected = expected_line_count(lp, window, d)
            mean_count = float(np.mean(counts))
            error = abs(mean_count - expected) / expected
            errors[k][d] = error
            lo, hi = projection_interval(window.vertices(), unit_vector(d + math.pi / 2.0))
            if offsets:
                ks = kstest(offsets, 'uniform', args=(lo, hi - lo))
                ks_stat, ks_p = float(ks.statistic), float(ks.pvalue)
            else:
                ks_stat, ks_p = float('nan'), float('nan')
            path_n = sum(r.path_means[d][1] for r in results)
            path_mean = (sum(r.path_means[d][0] * r.path_means[d][1] for r in results) / path_n
                         if path_n else float('nan'))
            total_cross = sum(counts)
            strip_rate = (sum(r.strip_hits[d] for r in results) / total_cross
                          if strip and total_cross else float('nan'))
            rows.append([k, d, mean_count, _stderr(counts), expected, error, ks_stat, ks_p,
                         path_mean / math.sqrt(k), w_scaled[d] if w_scaled else float('nan'), strip_rate])
        print(f"   k={k}: " + ", ".join(f"{math.degrees(d):.0f}° err={errors[k][d]:.3f}" for d in directions))

    header = ['k', 'direction', 'mean_crossings', 'stderr', 'expected', 'rel_error', 'ks_statistic', 'ks_pvalue',
              'path_mean_over_sqrt_k', 'w_star', 'strip_rate']
    write_csv(manifest, 'converge.csv', pd.DataFrame(rows, columns=header))
    k_lo, k_hi = min(config.k_list), max(config.k_list)
    improving = sum(1 for d in directions if errors[k_hi][d] < errors[k_lo][d]) if k_hi != k_lo else 0
    sections = [
        reports.fields_section('run', [('model', config.model), ('lambda', config.lam), ('window', config.window),
                                       ('replicates', config.replicates), ('seed', config.seed)]),
        reports.table_section('per_direction', header, rows),
        reports.fields_section('trend', [('k_min', k_lo), ('k_max', k_hi),
                                         ('directions_improving', f"{improving} of {len(directions)}")]),
    ]
    manifest.write_text('converge.txt', reports.render_report('converge', sections))
    manifest.write()
    print(f"✅ converge: error decreases from k={k_lo} to k={k_hi} in {improving} of {len(directions)} directions")
    return 0


# -- polytropes -------------------------------------------------------------

@dataclass
class PolytropeTask:
    index: int
    seed: int
    mu_rect: float
    mu_diag: float
    side: float


@dataclass
class PolytropeSample:
    index: int
    p: Dict[int, float]
    flagged: int


def polytrope_lines(task: PolytropeTask) -> Tuple[List, Rectangle, Rectangle]:
    """Limit lines over the core window plus a margin of a few mean face diameters"""
    core = Rectangle.square(task.side)
    box = core.expand(6.0 / task.mu_rect)
    lp = LineProcessSpec.from_intensities({0.0: task.mu_rect, math.pi / 2.0: task.mu_rect,
                                           5.0 * math.pi / 4.0: task.mu_diag})
    return sample_line_process(lp, box, task.seed), core, box


def polytrope_replicate(task: PolytropeTask) -> PolytropeSample:
    lines, core, box = polytrope_lines(task)
    pc = classify_polytropes(build_line_mosaic(lines, box), core)
    return PolytropeSample(task.index, pc.p, pc.flagged)


def cmd_polytropes(config: RunConfig) -> int:
    manifest = RunManifest(config)
    consts = tropical_line_constants(config.lam if config.lam is not None else 1.0)
    mu_rect = config.mu_rect if config.mu_rect is not None else consts.mu_horizontal
    mu_diag = config.mu_diag if config.mu_diag is not None else consts.mu_diagonal
    print(f"🔬 polytropes: mu_rect={mu_rect:.10f} mu_diag={mu_diag:.10f} replicates={config.replicates}")

    dens = polytrope_densities_integral(mu_rect, mu_diag, nodes=config.nodes, check_nodes=config.nodes + 64)
    total, weighted = polytrope_constraints(mu_rect, mu_diag)

    tasks = [PolytropeTask(r, s, mu_rect, mu_diag, config.window)
             for r, s in enumerate(split_seeds(config.seed, config.replicates))]
    samples = run_replicates(polytrope_replicate, tasks, config.threads)
    area = config.window ** 2
    rows = []
    for i in (3, 4, 5, 6):
        values = [s.p[i] for s in samples]
        mc = float(np.mean(values))
        err = _stderr(values) if len(values) > 1 else math.sqrt(mc / area)
        z = (mc - dens.p[i]) / err if err > 0 else float('nan')
        ref = REFERENCE_POLYTROPE_DENSITIES[i]
        rows.append([i, dens.p[i], dens.error[i], mc, err, z, ref, dens.p[i] - ref])
    mc_totals = [sum(s.p.values()) for s in samples]
    mc_total_err = _stderr(mc_totals) if len(mc_totals) > 1 else math.sqrt(float(np.mean(mc_totals)) / area)
    mc_residual = (float(np.mean(mc_totals)) - total) / mc_total_err if mc_total_err > 0 else float('nan')
    kappa = mu_diag / SQRT2
    p3_closed = 2.0 * mu_rect ** 2 * kappa / (2.0 * mu_rect + kappa)

    header = ['class', 'integral', 'quadrature_error', 'monte_carlo', 'stderr', 'z_score', 'reference',
              'integral_minus_reference']
    write_csv(manifest, 'polytropes.csv', pd.DataFrame(rows, columns=header))
    sections = [
        reports.fields_section('intensities', [('mu_rect', mu_rect), ('mu_diag', mu_diag), ('nodes', config.nodes),
                                               ('window', config.window), ('replicates', config.replicates)]),
        reports.table_section('densities', header, rows),
        reports.fields_section('constraints', [
            ('sum_expected', total),
            ('integral_sum_residual', dens.total - total),
            ('integral_weighted_residual', dens.weighted_total - weighted),
            ('monte_carlo_sum_residual_sigma', mc_residual),
            ('p3_closed_form', p3_closed),
            ('flagged_faces', sum(s.flagged for s in samples)),
        ]),
    ]
    manifest.write_text('polytropes.txt', reports.render_report('polytropes', sections))
    lines, core, _ = polytrope_lines(tasks[0])
    manifest.write_text('lines.svg', reports.lines_svg(lines, core, title='limit line process'))
    manifest.write()
    worst = max(abs(dens.total - total), abs(dens.weighted_total - weighted))
    marker = '✅' if worst < 1e-9 else '⚠️'
    print(f"{marker} polytropes: integral constraint residual {worst:.2e}, "
          f"Monte Carlo sum off by {mc_residual:.2f} sigma")
    return 0


# -- tropical ---------------------------------------------------------------

def cmd_tropical(config: RunConfig) -> int:
    manifest = RunManifest(config)
    poly = load_poly(config)
    c = curve(poly)
    print(f"🔬 tropical: degree {c.degree}, {len(c.vertices)} vertices, {len(c.arms)} arms")

    write_csv(manifest, 'curve_vertices.csv', pd.DataFrame(c.vertices, columns=['x', 'y']))
    edges = [[e.start, e.end, c.vertices[e.start][0], c.vertices[e.start][1], c.vertices[e.end][0],
              c.vertices[e.end][1], e.multiplicity] for e in c.bounded_edges]
    write_csv(manifest, 'curve_edges.csv', pd.DataFrame(edges, columns=['start', 'end', 'x0', 'y0', 'x1', 'y1',
                                                                        'multiplicity']))
    arms = [[a.apex[0], a.apex[1], a.direction.value, a.multiplicity] for a in c.arms]
    write_csv(manifest, 'curve_arms.csv', pd.DataFrame(arms, columns=['x', 'y', 'direction', 'multiplicity']))
    cells = [[n, i, j] for n, cell in enumerate(c.subdivision.cells) for i, j in cell]
    write_csv(manifest, 'subdivision.csv', pd.DataFrame(cells, columns=['cell', 'i', 'j']))
    manifest.write_text('curve.svg', reports.curve_svg(c))
    manifest.write_text('subdivision.svg', reports.subdivision_svg(c.subdivision))

    d = c.degree
    used = set(c.subdivision.vertices)
    skipped = [(i, j) for i in range(d + 1) for j in range(d + 1 - i) if (i, j) not in used]
    line_hits = sum(m for _, m in stable_intersection(c, curve(tropical_line()), seed=config.seed))
    arm_rows = [[direction.value, c.arm_count(direction, weighted=False), c.arm_count(direction)]
                for direction in ArmDirection]
    sections = [
        reports.fields_section('polynomial', [('degree', d), ('monomials', len(poly.coeffs)),
                                              ('spread', poly.spread)]),
        reports.fields_section('curve', [
            ('vertices', len(c.vertices)), ('bounded_edges', len(c.bounded_edges)),
            ('body_radius', body_radius(c)),
            ('skipped_lattice_points', ' '.join(f"({i},{j})" for i, j in skipped) or 'none'),
            ('intersection_with_line', line_hits),
        ]),
        reports.table_section('arms', ['direction', 'arms', 'with_multiplicity'], arm_rows),
        reports.table_section('centroids', ['kind', 'x', 'y'],
                              [[kind.value, *centroid(c, kind)] for kind in CentroidKind]),
        reports.table_section('body_lengths', ['orientation', 'length'], sorted(c.body_lengths().items())),
    ]
    manifest.write_text('tropical.txt', reports.render_report('tropical', sections))
    manifest.write()
    if line_hits != d:
        print(f"⚠️ intersection with a tropical line has total multiplicity {line_hits}, expected {d}")
    print(f"✅ tropical: skipped lattice points {skipped or 'none'}")
    return 0


# -- armbody ----------------------------------------------------------------

@dataclass
class ArmBodyTask:
    index: int
    seed: int
    lp: LineProcessSpec
    box: Rectangle
    segments: np.ndarray


@dataclass
class ArmBodySample:
    index: int
    crossings: int


def count_line_crossings(lines, segments: np.ndarray) -> int:
    """Transversal crossings between lines and an (m, 2, 2) array of segments"""
    if not lines or len(segments) == 0:
        return 0
    directions = np.array([line.direction for line in lines])
    offsets = np.array([line.offset for line in lines])
    normals = np.column_stack([-np.sin(directions), np.cos(directions)])
    sa = segments[:, 0, :] @ normals.T - offsets
    sb = segments[:, 1, :] @ normals.T - offsets
    return int(np.count_nonzero(sa * sb < 0.0))


def armbody_replicate(task: ArmBodyTask) -> ArmBodySample:
    lines = sample_line_process(task.lp, task.box, task.seed)
    return ArmBodySample(task.index, count_line_crossings(lines, task.segments))


def cmd_armbody(config: RunConfig) -> int:
    manifest = RunManifest(config)
    lam = config.lam if config.lam is not None else 1.0
    c = curve(load_poly(config))
    law = curve_law(config)
    lp, stats = germ_limit(law, lam, config.seed)
    D = (stats.D_horizontal, stats.D_vertical, stats.D_diagonal)
    mu = tropical_line_constants(lam).as_tuple()
    predicted = arm_body_mean(c.body_lengths(), D, mu, lam=1.0)
    print(f"🔬 armbody: degree {c.degree} body, D={stats.D:.3f}, predicted mean {predicted:.6f}")

    segments = np.array([[s.start, s.end] for s in c.body_segments()], dtype=float).reshape(-1, 2, 2)
    box = reports.curve_box(c)
    tasks = [ArmBodyTask(r, s, lp, box, segments) for r, s in enumerate(split_seeds(config.seed, config.replicates))]
    samples = run_replicates(armbody_replicate, tasks, config.threads)
    counts = [s.crossings for s in samples]
    mean = float(np.mean(counts))
    err = _stderr(counts) if len(counts) > 1 else math.sqrt(max(mean, 1e-12))
    z = (mean - predicted) / err if err > 0 else float('nan')

    sections = [
        reports.fields_section('law', [('degree_max', law.degree_max), ('spread', law.spread),
                                       ('mean_degree', stats.D), ('curves_sampled', stats.samples)]),
        reports.table_section('arms', ['direction', 'D_phi', 'mu_phi', 'line_intensity'],
                              [[dn.value, dv, m, dv * m] for dn, dv, m in zip(ArmDirection, D, mu)]),
        reports.table_section('body_lengths', ['orientation', 'length'], sorted(c.body_lengths().items())),
        reports.fields_section('comparison', [('predicted', predicted), ('monte_carlo', mean), ('stderr', err),
                                              ('z_score', z), ('replicates', len(counts))]),
    ]
    manifest.write_text('armbody.txt', reports.render_report('armbody', sections))
    manifest.write()
    marker = '✅' if not abs(z) > 3.0 else '⚠️'
    print(f"{marker} armbody: Monte Carlo {mean:.6f} ± {err:.6f} against {predicted:.6f}")
    return 0


# -- check ------------------------------------------------------------------

def cmd_check(config: RunConfig) -> int:
    manifest = RunManifest(config)
    report = GilbertLabHealthCheck(seed=config.seed).run_comprehensive_check()
    print_report(report)
    manifest.write_text('health.json', json.dumps(report, indent=2, default=str))
    manifest.write()
    return 1 if report['overall_status'] == CheckStatus.CRITICAL.value else 0


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    'simulate': cmd_simulate,
    'limit': cmd_limit,
    'converge': cmd_converge,
    'polytropes': cmd_polytropes,
    'tropical': cmd_tropical,
    'armbody': cmd_armbody,
    'check': cmd_check,
}


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.replace(';', ',').split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', dest='config_file', help='plain key=value config file')
    common.add_argument('--model', choices=MODELS)
    common.add_argument('--spec-file', help='JSON model spec for --model custom')
    common.add_argument('--lambda', dest='lam', type=float, help='site (or germ) intensity')
    common.add_argument('--k', type=int, help='lives per motorcycle')
    common.add_argument('--ks', dest='k_list', type=_int_list, help='comma-separated k values for converge')
    common.add_argument('--window', type=float, help='side of the square observation window')
    common.add_argument('--margin', type=float, help='sampling margin around the window')
    common.add_argument('--replicates', type=int)
    common.add_argument('--seed', type=int)
    common.add_argument('--threads', type=int)
    common.add_argument('--output-dir')
    common.add_argument('--mu-rect', type=float, help='horizontal/vertical line intensity for polytropes')
    common.add_argument('--mu-diag', type=float, help='diagonal line intensity for polytropes')
    common.add_argument('--nodes', type=int, help='Gauss-Laguerre nodes per axis')
    common.add_argument('--degree-max', type=int, help='largest degree of random tropical polynomials')
    common.add_argument('--spread', type=float, help='coefficient spread of random tropical polynomials')
    common.add_argument('--poly-file', help="tropical polynomial, one 'i j c' term per line")

    parser = argparse.ArgumentParser(prog='gilbertlab', description='Iterated Gilbert mosaics and tropical curves')
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('simulate', parents=[common], help='simulate one mosaic and write its census')
    sub.add_parser('limit', parents=[common], help='solve the fixed point and print the limit line process')
    sub.add_parser('converge', parents=[common], help='compare rescaled mosaics with the limit process')
    sub.add_parser('polytropes', parents=[common], help='polytrope densities: quadrature against Monte Carlo')
    sub.add_parser('tropical', parents=[common], help='export a tropical curve and its subdivision')
    sub.add_parser('armbody', parents=[common], help='arm-body crossing mean against Monte Carlo')
    sub.add_parser('check', parents=[common], help='run the self-diagnostics')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        flags = {k: v for k, v in vars(args).items() if k not in ('command', 'config_file')}
        config = resolve_config(args.command, flags, args.config_file)
        if (args.command in LAMBDA_COMMANDS and config.lam is None
                and not (config.model == 'custom' and config.spec_file)):
            parser.error(f"--lambda is required for '{args.command}' with model {config.model}")
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    except ValueError as e:
        print(f"❌ {e}")
        return 2

    try:
        return COMMANDS[config.command](config)
    except ValueError as e:
        print(f"❌ {e}")
        return 2
    except RuntimeError as e:
        print(f"❌ {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
