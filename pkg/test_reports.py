#!/usr/bin/env python3
"""
Tests for the text report layout and the SVG figures
"""

import math
import sys

from geom import Rectangle
from mosaic import build_line_mosaic
from procs import Line
from reports import (
    curve_svg, fields_section, lines_svg, mosaic_svg, render_report, subdivision_svg, table_section,
)
from tropical import curve, figure_cubic, tropical_line


def test_report_layout_is_fixed():
    text = render_report('limit', [
        fields_section('model', [('name', 'rectangular'), ('lambda', 4.0), ('flag', True)]),
        table_section('fixed_point', ['direction', 'w*'], [[0.0, 0.5], [math.pi, float('nan')]], [('residual', 0.0)]),
    ])
    lines = text.splitlines()
    assert lines[0] == '# limit'
    assert '[model]' in lines and '[fixed_point]' in lines
    assert 'name = rectangular' in lines and 'lambda = 4' in lines and 'flag = True' in lines
    assert 'direction\tw*' in lines
    assert '0\t0.5' in lines
    assert '3.141592654\tnan' in lines
    assert lines.index('[model]') < lines.index('[fixed_point]')


def test_mosaic_svg_marks_crossings():
    lines = [Line(0.0, 0.0), Line(math.pi / 2.0, 0.0), Line(5.0 * math.pi / 4.0, math.sqrt(2.0) / 2.0)]
    box = Rectangle(-5.0, -5.0, 5.0, 5.0)
    svg = mosaic_svg(build_line_mosaic(lines, box), box)
    assert svg.startswith('<svg')
    assert svg.count('<line') == 9
    assert svg.count('<circle') == 3


def test_lines_svg_skips_missing_lines():
    box = Rectangle.square(1.0)
    svg = lines_svg([Line(0.0, 0.5), Line(0.0, 3.0)], box)
    assert svg.count('<line') == 1


def test_curve_svg_draws_body_and_arms():
    c = curve(figure_cubic())
    svg = curve_svg(c)
    assert svg.count('<line') == len(c.bounded_edges) + len(c.arms)
    assert svg.count('<circle') == len(c.vertices)
    plain = curve_svg(curve(tropical_line()))
    assert plain.count('<text') == 0


def test_subdivision_svg_greys_skipped_points():
    c = curve(figure_cubic())
    svg = subdivision_svg(c.subdivision)
    assert svg.count('<polygon') == len(c.subdivision.cells)
    assert svg.count('<circle') == 10
    assert svg.count('fill="#bbbbbb"') == 2


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith('test_') and callable(v)]
    failed = 0
    print("🔬 Testing reports and figures")
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
