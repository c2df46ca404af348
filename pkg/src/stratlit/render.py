"""Static SVG 1.1 pictures of a scenario and its result.

Output is byte-deterministic: every coordinate is printed with a fixed
number of decimals and elements are emitted in a fixed order.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from stratlit.core import Label, LinearSeparator, Piecewise1DFn
from stratlit.errors import InvalidInputError
from stratlit.scenario import Scenario, rule_from_dict

POS_COLOR = "#2b6cb0"
NEG_COLOR = "#c53030"
WIDTH, MARGIN = 800, 60


def _f(x: float) -> str:
    return f"{x:.3f}"


def _color(label) -> str:
    return POS_COLOR if Label.parse(label) is Label.POSITIVE else NEG_COLOR


class _Svg:
    def __init__(self, width: int, height: int, title: str):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f"<title>{escape(title)}</title>",
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        ]

    def add(self, element: str) -> None:
        self.parts.append(element)

    def text(self, x, y, s, size=12, anchor="start") -> None:
        self.add(
            f'<text x="{_f(x)}" y="{_f(y)}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}">{escape(s)}</text>'
        )

    def finish(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


# ---------------------------------------------------------------------------
# One dimension


def _render_1d(s: Scenario, result: dict, upto: int | None) -> str:
    lo, hi = s.domain
    steps = result["steps"] if upto is None else result["steps"][: upto + 1]
    learned = _learned(steps, 1)
    sx = lambda x: MARGIN + (x - lo) / (hi - lo) * (WIDTH - 2 * MARGIN)
    svg = _Svg(WIDTH, 300, f"{s.name}: {s.solver.name}")
    svg.text(MARGIN, 24, f"{s.name} ({s.solver.name})", 14)
    for row, (label, fn) in enumerate((("f*", s.f_star), ("g", s.g), ("f", learned))):
        y = 50 + 40 * row
        svg.text(MARGIN - 10, y + 14, label, 13, "end")
        if fn is None:
            continue
        if isinstance(fn, Piecewise1DFn):
            segs = list(fn.segments())
        else:
            segs = [(lo, hi, fn.label)]
        for a, b, lab in segs:
            svg.add(
                f'<rect x="{_f(sx(a))}" y="{_f(y)}" width="{_f(sx(b) - sx(a))}" height="20" '
                f'fill="{_color(lab)}" fill-opacity="0.75"/>'
            )
    axis_y = 200
    svg.add(f'<line x1="{_f(sx(lo))}" y1="{axis_y}" x2="{_f(sx(hi))}" y2="{axis_y}" stroke="#000000"/>')
    for v in (lo, hi):
        svg.text(sx(v), axis_y + 18, f"{v:g}", 11, "middle")
    for p in s.pool:
        x = sx(p[0])
        svg.add(f'<line x1="{_f(x)}" y1="{axis_y - 5}" x2="{_f(x)}" y2="{axis_y + 5}" stroke="#888888"/>')
    removed = {tuple(c["point"]) for st in steps for c in st["removed"]}
    for c in s.history:
        x = sx(c.point[0])
        fill = "none" if c.era.value == "stale" else _color(c.label)
        svg.add(
            f'<circle cx="{_f(x)}" cy="{axis_y}" r="5" fill="{fill}" stroke="{_color(c.label)}" stroke-width="2"/>'
        )
        if tuple(c.point) in removed:
            svg.add(_strike(x, axis_y))
    for st in steps[1:]:
        x = sx(st["filed"][0])
        col = _color(st["label"])
        svg.add(
            f'<polygon points="{_f(x)},{axis_y - 8} {_f(x - 6)},{axis_y - 20} {_f(x + 6)},{axis_y - 20}" fill="{col}"/>'
        )
        svg.add(f'<line x1="{_f(x)}" y1="{axis_y - 40}" x2="{_f(x)}" y2="{axis_y - 22}" stroke="{col}"/>')
    err = steps[-1]["error"]
    if err is not None:
        svg.text(MARGIN, 270, f"error = {err:.6g}", 12)
    return svg.finish()


def _learned(steps: list, dim: int):
    rule = steps[-1]["rule"]
    return None if rule is None else rule_from_dict(rule, "rule", dim)


def _strike(x: float, y: float, r: float = 8.0) -> str:
    return (
        f'<path d="M {_f(x - r)} {_f(y - r)} L {_f(x + r)} {_f(y + r)} '
        f'M {_f(x - r)} {_f(y + r)} L {_f(x + r)} {_f(y - r)}" stroke="#000000" stroke-width="2"/>'
    )


# ---------------------------------------------------------------------------
# Two dimensions


def _box(s: Scenario, result: dict) -> tuple:
    pts = [c.point for c in s.history] + [tuple(p) for p in result["chosen"]]
    if not pts:
        return (-1.0, 1.0, -1.0, 1.0)
    base = [c.point for c in s.history] or pts
    ext = max(1.0, max(max(abs(v) for v in p) for p in base))
    near = [p for p in pts if max(abs(v) for v in p) <= 10 * ext]
    xs = [p[0] for p in near] or [-1.0, 1.0]
    ys = [p[1] for p in near] or [-1.0, 1.0]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1e-9)
    pad = 0.15 * span
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    half = 0.5 * span + pad
    return (cx - half, cx + half, cy - half, cy + half)


def _clip_line(rule: LinearSeparator, box) -> list:
    """End points of ``w . x + b = 0`` inside the box, if any."""
    x0, x1, y0, y1 = box
    (a, c), b = rule.normal, rule.offset
    hits = []
    if abs(c) > 1e-15:
        for x in (x0, x1):
            y = -(a * x + b) / c
            if y0 <= y <= y1:
                hits.append((x, y))
    if abs(a) > 1e-15:
        for y in (y0, y1):
            x = -(c * y + b) / a
            if x0 <= x <= x1:
                hits.append((x, y))
    uniq = sorted(set((round(px, 12), round(py, 12)) for px, py in hits))
    return uniq[:1] + uniq[-1:] if len(uniq) >= 2 else []


def _render_2d(s: Scenario, result: dict, upto: int | None) -> str:
    steps = result["steps"] if upto is None else result["steps"][: upto + 1]
    box = _box(s, result)
    size = WIDTH - 2 * MARGIN
    sx = lambda x: MARGIN + (x - box[0]) / (box[1] - box[0]) * size
    sy = lambda y: MARGIN + (box[3] - y) / (box[3] - box[2]) * size
    svg = _Svg(WIDTH, WIDTH, f"{s.name}: {s.solver.name}")
    svg.text(MARGIN, 24, f"{s.name} ({s.solver.name}), step {len(steps) - 1}", 14)
    svg.add(f'<rect x="{MARGIN}" y="{MARGIN}" width="{size}" height="{size}" fill="none" stroke="#000000"/>')
    learned = _learned(steps, 2)
    styles = (
        ("f*", s.f_star, "#000000", "6,4"),
        ("g", s.g, "#2f855a", "2,3"),
        ("f", learned, "#805ad5", ""),
    )
    for row, (name, rule, color, dash) in enumerate(styles):
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        if isinstance(rule, LinearSeparator):
            ends = _clip_line(rule, box)
            if ends:
                (ax, ay), (bx, by) = ends
                svg.add(
                    f'<line x1="{_f(sx(ax))}" y1="{_f(sy(ay))}" x2="{_f(sx(bx))}" y2="{_f(sy(by))}" '
                    f'stroke="{color}" stroke-width="2"{dash_attr}/>'
                )
        svg.add(
            f'<line x1="{WIDTH - 150}" y1="{30 + 14 * row}" x2="{WIDTH - 120}" y2="{30 + 14 * row}" '
            f'stroke="{color}" stroke-width="2"{dash_attr}/>'
        )
        svg.text(WIDTH - 112, 34 + 14 * row, name, 11)
    inside = lambda p: box[0] <= p[0] <= box[1] and box[2] <= p[1] <= box[3]
    removed = {tuple(c["point"]) for st in steps for c in st["removed"]}
    for c in s.history:
        if not inside(c.point):
            continue
        x, y = sx(c.point[0]), sy(c.point[1])
        fill = "none" if c.era.value == "stale" else _color(c.label)
        svg.add(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="6" fill="{fill}" stroke="{_color(c.label)}" stroke-width="2"/>')
        if tuple(c.point) in removed:
            svg.add(_strike(x, y, 9.0))
    for st in steps[1:]:
        p = st["filed"]
        if not inside(p):
            continue
        x, y = sx(p[0]), sy(p[1])
        svg.add(
            f'<rect x="{_f(x - 6)}" y="{_f(y - 6)}" width="12" height="12" fill="{_color(st["label"])}" '
            f'stroke="#000000" stroke-width="2"/>'
        )
    err = steps[-1]["error"]
    if err is not None:
        svg.text(MARGIN, WIDTH - 20, f"error = {err:.6g}", 12)
    return svg.finish()


def render_svg(s: Scenario, result: dict, upto: int | None = None) -> str:
    """SVG for the state after step ``upto`` (the final state by default)."""
    if s.dimension == 1:
        return _render_1d(s, result, upto)
    if s.dimension == 2:
        return _render_2d(s, result, upto)
    raise InvalidInputError(f"rendering supports dimensions 1 and 2, not {s.dimension}")


def render_frames(s: Scenario, result: dict) -> list:
    """One SVG per session step, starting with the initial state."""
    return [render_svg(s, result, i) for i in range(len(result["steps"]))]
