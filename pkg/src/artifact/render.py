"""Minimal SVG writers: time on x, level on y (pointing up), instability elements in red."""

from __future__ import annotations

from xml.sax.saxutils import escape

SHOCK_COLORS = {"only_a": "#1f77b4", "only_b": "#2ca02c", "both": "#9467bd"}


class Canvas:
    def __init__(self, t_lo, t_hi, lv_lo, lv_hi, width=900, height=600, pad=30):
        self.t_lo, self.t_hi = float(t_lo), float(t_hi)
        self.lv_lo, self.lv_hi = float(lv_lo), float(max(lv_hi, lv_lo + 1))
        self.w, self.h, self.pad = width, height, pad
        self.items = []

    def x(self, t):
        return self.pad + (float(t) - self.t_lo) / max(self.t_hi - self.t_lo, 1e-12) * (self.w - 2 * self.pad)

    def y(self, level):
        return self.h - self.pad - (float(level) - self.lv_lo) / (self.lv_hi - self.lv_lo) * (self.h - 2 * self.pad)

    def line(self, t0, l0, t1, l1, color="black", width=1.0):
        self.items.append(f'<line x1="{self.x(t0):.2f}" y1="{self.y(l0):.2f}" x2="{self.x(t1):.2f}" '
                          f'y2="{self.y(l1):.2f}" stroke="{color}" stroke-width="{width}"/>')

    def polyline(self, pts, color="black", width=1.0):
        s = " ".join(f"{self.x(t):.2f},{self.y(l):.2f}" for t, l in pts)
        self.items.append(f'<polyline points="{s}" fill="none" stroke="{color}" stroke-width="{width}"/>')

    def dot(self, t, level, color="black", r=1.5):
        self.items.append(f'<circle cx="{self.x(t):.2f}" cy="{self.y(level):.2f}" r="{r}" fill="{color}"/>')

    def text(self, s, t, level):
        self.items.append(f'<text x="{self.x(t):.2f}" y="{self.y(level):.2f}" font-size="11">{escape(s)}</text>')

    def svg(self, title="") -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h}" '
                f'viewBox="0 0 {self.w} {self.h}">')
        t = f"<title>{escape(title)}</title>" if title else ""
        axes = (f'<line x1="{self.pad}" y1="{self.h - self.pad}" x2="{self.w - self.pad}" y2="{self.h - self.pad}" stroke="#888"/>'
                f'<line x1="{self.pad}" y1="{self.pad}" x2="{self.pad}" y2="{self.h - self.pad}" stroke="#888"/>')
        return "\n".join([head, t, axes, *self.items, "</svg>"]) + "\n"


def path_points(path, spec):
    """Corner points (time, level) of an up-right path."""
    pts = []
    for k, level in enumerate(range(path.start_level, path.end_level + 1)):
        a, b = path.jumps[k], path.jumps[k + 1]
        pts.append((spec.time_of(a), level))
        pts.append((spec.time_of(b), level))
    return pts


def svg_fan(paths, spec, title="geodesic fan") -> str:
    lv_lo = min(p.start_level for p in paths)
    lv_hi = max(p.end_level for p in paths)
    t_lo = min(spec.time_of(p.jumps[0]) for p in paths)
    t_hi = max(spec.time_of(p.jumps[-1]) for p in paths)
    c = Canvas(t_lo, t_hi, lv_lo, lv_hi)
    for p in paths:
        c.polyline(path_points(p, spec), color="#333", width=0.8)
    return c.svg(title)


def svg_graph(graph, spec, title="instability graph", extra=None) -> str:
    w = graph.window
    c = Canvas(spec.time_of(w.i_lo), spec.time_of(w.i_hi), w.level_lo - 0.5, w.level_hi + 1.5)
    half = 0.5 * spec.delta
    for iv in graph.intervals:
        lv = iv.level + 0.5
        c.line(spec.time_of(iv.start) + half, lv, spec.time_of(iv.end) - half, lv, color="red", width=1.5)
    for e in graph.edges():
        t = spec.time_of(e.index) + half
        c.line(t, e.level - 0.5, t, e.level + 0.5, color="red", width=0.8)
    if extra:
        extra(c)
    return c.svg(title)


def svg_shocks(classification, spec, lv_lo, lv_hi, t_lo, t_hi, tree=None, title="shocks") -> str:
    c = Canvas(t_lo, t_hi, lv_lo - 0.5, lv_hi + 0.5)
    half = 0.5 * spec.delta
    if tree is not None:
        for (m, i), ch in tree.child_of.items():
            if ch is not None:
                c.line(spec.time_of(i) + half, m, spec.time_of(ch[1]) + half, ch[0], color="#bbb", width=0.6)
    for name, color in SHOCK_COLORS.items():
        for s in getattr(classification, name):
            c.dot(spec.time_of(s.index) + half, s.level, color=color)
    return c.svg(title)


def svg_skeleton_overlay(skeleton, graph, spec, title="skeleton vs graph") -> str:
    def draw(c):
        for iv in skeleton.closed:
            c.line(iv.left, iv.level + 0.5, iv.right, iv.level + 0.5, color="#1f77b4", width=0.8)
        for e in skeleton.edges:
            c.dot(e.time, e.level, color="#1f77b4", r=1.2)
    return svg_graph(graph, spec, title, extra=draw)
