"""
GilbertLab Reports
Fixed-order text reports and self-contained SVG figures rendered from jinja2 templates
"""

import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from jinja2 import BaseLoader, Environment

from geom import Rectangle, Segment, clip_line_to_convex_polygon
from mosaic import MosaicGraph, VertexKind
from procs import Line, window_vertices
from tropical import Subdivision, TropCurve

SVG_SIZE = 800


def _num(value) -> str:
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        return f"{value:.10g}"
    return str(value)


_env = Environment(loader=BaseLoader(), trim_blocks=True, lstrip_blocks=True, keep_trailing_newline=True)
_env.filters['num'] = _num

REPORT_TEMPLATE = """# {{ title }}
{% for section in sections %}

[{{ section.name }}]
{% for key, value in section.fields %}
{{ key }} = {{ value | num }}
{% endfor %}
{% if section.header %}
{{ section.header | join('\t') }}
{% for row in section.rows %}
{{ row | map('num') | join('\t') }}
{% endfor %}
{% endif %}
{% endfor %}
"""

SVG_TEMPLATE = """<svg xmlns="http://www.w3.org/2000/svg" width="{{ width }}" height="{{ height }}" viewBox="0 0 {{ width }} {{ height }}">
<title>{{ title }}</title>
<rect x="0" y="0" width="{{ width }}" height="{{ height }}" fill="white"/>
<defs><clipPath id="view"><rect x="{{ box.xmin }}" y="{{ box.ymin }}" width="{{ box.width }}" height="{{ box.height }}"/></clipPath></defs>
<g transform="translate(0,{{ height }}) scale({{ scale }},{{ -scale }}) translate({{ -box.xmin }},{{ -box.ymin }})" clip-path="url(#view)">
{% for p in polygons %}
<polygon points="{% for x, y in p.points %}{{ x | num }},{{ y | num }} {% endfor %}" fill="{{ p.fill }}" stroke="{{ p.stroke }}" stroke-width="1" vector-effect="non-scaling-stroke"/>
{% endfor %}
{% for s in segments %}
<line x1="{{ s.x0 | num }}" y1="{{ s.y0 | num }}" x2="{{ s.x1 | num }}" y2="{{ s.y1 | num }}" stroke="{{ s.stroke }}" stroke-width="{{ s.width }}" vector-effect="non-scaling-stroke"/>
{% endfor %}
{% for c in circles %}
<circle cx="{{ c.x | num }}" cy="{{ c.y | num }}" r="{{ radius | num }}" fill="{{ c.fill }}"/>
{% endfor %}
</g>
{% for label in labels %}
<text x="{{ label.px | num }}" y="{{ label.py | num }}" font-family="sans-serif" font-size="12" fill="{{ label.fill }}">{{ label.text }}</text>
{% endfor %}
</svg>
"""

VERTEX_STYLE = {
    VertexKind.SITE: '#000000',
    VertexKind.GRAVE_DEG3: '#c0392b',
    VertexKind.CROSSING_DEG4: '#2c7fb8',
    VertexKind.COMPLEX_VERTEX: '#238b45',
}


def render_report(title: str, sections: Sequence[Dict]) -> str:
    """
    Each section is a dict with 'name', optional 'fields' (ordered key/value
    pairs) and optional 'header' + 'rows' for a tab-separated table.
    """
    prepared = [{
        'name': s['name'],
        'fields': list(s.get('fields', [])),
        'header': list(s.get('header', [])),
        'rows': [list(r) for r in s.get('rows', [])],
    } for s in sections]
    return _env.from_string(REPORT_TEMPLATE).render(title=title, sections=prepared)


def _svg(title: str, box: Rectangle, segments: Iterable[Dict] = (), circles: Iterable[Dict] = (),
         polygons: Iterable[Dict] = (), labels: Iterable[Dict] = ()) -> str:
    span = max(box.width, box.height)
    scale = SVG_SIZE / span
    width = int(round(box.width * scale))
    height = int(round(box.height * scale))
    placed = []
    for label in labels:
        placed.append(dict(label, px=(label['x'] - box.xmin) * scale, py=height - (label['y'] - box.ymin) * scale))
    return _env.from_string(SVG_TEMPLATE).render(
        title=title, width=width, height=height, scale=scale, box=box, radius=0.004 * span,
        segments=list(segments), circles=list(circles), polygons=list(polygons), labels=placed,
    )


def _seg(seg: Segment, stroke: str = '#333333', width: float = 1.0) -> Dict:
    return {'x0': seg.start[0], 'y0': seg.start[1], 'x1': seg.end[0], 'y1': seg.end[1],
            'stroke': stroke, 'width': width}


def mosaic_svg(g: MosaicGraph, window: Rectangle, title: str = 'mosaic') -> str:
    """Edges clipped to the window; vertices coloured by kind, flat and horizon vertices hidden"""
    segments = [_seg(g.edge_segment(e)) for e in range(len(g.edges))]
    circles = [{'x': v.point[0], 'y': v.point[1], 'fill': VERTEX_STYLE[v.kind]}
               for v in g.vertices if v.kind in VERTEX_STYLE and window.contains(v.point)]
    return _svg(title, window, segments, circles)


def lines_svg(lines: Sequence[Line], window: Rectangle, title: str = 'line process') -> str:
    verts = window_vertices(window)
    segments = []
    for line in lines:
        seg = clip_line_to_convex_polygon(line.direction, line.offset, verts)
        if seg is not None:
            segments.append(_seg(seg))
    return _svg(title, window, segments)


def curve_box(c: TropCurve, pad: float = 1.0) -> Rectangle:
    xs = [p[0] for p in c.vertices]
    ys = [p[1] for p in c.vertices]
    side = max(max(xs) - min(xs), max(ys) - min(ys)) + 2.0 * pad
    cx = (max(xs) + min(xs)) / 2.0
    cy = (max(ys) + min(ys)) / 2.0
    return Rectangle(cx - side / 2.0, cy - side / 2.0, cx + side / 2.0, cy + side / 2.0)


def curve_svg(c: TropCurve, title: str = 'tropical curve') -> str:
    """Body in bold, arms thin and running out of the frame, multiplicities above 1 labelled"""
    box = curve_box(c)
    reach = 2.0 * max(box.width, box.height)
    segments = []
    labels = []
    for edge in c.bounded_edges:
        seg = c.edge_segment(edge)
        segments.append(_seg(seg, '#000000', 3.0))
        if edge.multiplicity > 1:
            mx, my = seg.midpoint
            labels.append({'x': mx, 'y': my, 'text': str(edge.multiplicity), 'fill': '#c0392b'})
    for arm in c.arms:
        end = (arm.apex[0] + reach * arm.direction.vector[0], arm.apex[1] + reach * arm.direction.vector[1])
        segments.append(_seg(Segment(arm.apex, end), '#555555', 1.0))
        if arm.multiplicity > 1:
            labels.append({'x': arm.apex[0] + 0.3 * arm.direction.vector[0],
                           'y': arm.apex[1] + 0.3 * arm.direction.vector[1],
                           'text': str(arm.multiplicity), 'fill': '#c0392b'})
    circles = [{'x': p[0], 'y': p[1], 'fill': '#000000'} for p in c.vertices]
    return _svg(title, box, segments, circles, labels=labels)


def subdivision_svg(sub: Subdivision, title: str = 'regular subdivision') -> str:
    d = sub.degree
    box = Rectangle(-0.5, -0.5, d + 0.5, d + 0.5)
    polygons = [{'points': [(float(i), float(j)) for i, j in cell], 'fill': '#f0f0f0', 'stroke': '#000000'}
                for cell in sub.cells]
    used = set(sub.vertices)
    circles = [{'x': float(i), 'y': float(j), 'fill': '#000000' if (i, j) in used else '#bbbbbb'}
               for i in range(d + 1) for j in range(d + 1 - i)]
    return _svg(title, box, polygons=polygons, circles=circles)


def table_section(name: str, header: Sequence[str], rows: Iterable[Sequence],
                  fields: Optional[List[Tuple]] = None) -> Dict:
    return {'name': name, 'header': list(header), 'rows': [list(r) for r in rows], 'fields': fields or []}


def fields_section(name: str, fields: Iterable[Tuple]) -> Dict:
    return {'name': name, 'fields': list(fields)}
