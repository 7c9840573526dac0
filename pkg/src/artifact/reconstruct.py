"""Rebuild a skeleton of the instability graph from the two one-sided shock sets and score it.

Positions are times. A grid shock in cell [i, i+1] sits at the cell midpoint, and so do graph
edges and interval endpoints (a closed run [a-1, b+1] has continuum ends at a-1/2 and b+1/2).
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field as dc_field

import numpy as np

from .instability import InstabilityGraph


def cell_time(spec, index):
    return float(spec.time_of(index)) + 0.5 * spec.delta


def as_points(shocks, spec) -> list[tuple[int, float]]:
    """(level, time) of each shock, placed at its cell midpoint."""
    return [(int(s.level), cell_time(spec, s.index)) for s in shocks]


@dataclass
class SkeletonInterval:
    level: int  # dual level level + 1/2
    left: float
    right: float | None
    provenance: tuple = ("step1", "step2")

    @property
    def truncated(self) -> bool:
        return self.right is None


@dataclass(frozen=True)
class SkeletonEdge:
    level: int  # spans dual levels level - 1/2 .. level + 1/2
    time: float
    provenance: str = "step3"


@dataclass
class Skeleton:
    intervals: list = dc_field(default_factory=list)
    edges: list = dc_field(default_factory=list)

    @property
    def closed(self) -> list:
        return [iv for iv in self.intervals if not iv.truncated]

    def to_json(self) -> str:
        return json.dumps({
            "intervals": [{"dual_level": iv.level + 0.5, "left": iv.left, "right": iv.right,
                           "provenance": list(iv.provenance)} for iv in self.intervals],
            "edges": [{"level": e.level, "time": e.time, "provenance": e.provenance} for e in self.edges],
        })


def reconstruct_skeleton(only_plus, only_minus, window_end: float = np.inf) -> Skeleton:
    """Marks from only-plus shocks, closures from only-minus shocks a level up, the rest as edges.

    only_plus, only_minus: iterables of (level, time). The window end acts as a final mark on
    every dual level; a mark with no closing shock before the next mark is left open.
    """
    marks = {}
    for m, s in only_plus:
        marks.setdefault(int(m), []).append(float(s))
    minus_by_level = {}
    for m, t in only_minus:
        minus_by_level.setdefault(int(m), []).append(float(t))
    for v in list(marks.values()) + list(minus_by_level.values()):
        v.sort()

    sk = Skeleton()
    used = set()
    for m in sorted(marks):
        ms = marks[m]
        ups = minus_by_level.get(m + 1, [])
        for k, s in enumerate(ms):
            nxt = ms[k + 1] if k + 1 < len(ms) else window_end
            j = bisect_right(ups, nxt) - 1
            # rightmost closing shock strictly between this mark and the next one
            while j >= 0 and ups[j] >= nxt:
                j -= 1
            if j >= 0 and ups[j] > s:
                t = ups[j]
                used.add((m + 1, t))
                sk.intervals.append(SkeletonInterval(m, s, t))
                sk.edges.append(SkeletonEdge(m + 1, t, "step2"))
            else:
                sk.intervals.append(SkeletonInterval(m, s, None, ("step1",)))
    for m in sorted(minus_by_level):
        for r in minus_by_level[m]:
            if (m, r) not in used:
                sk.edges.append(SkeletonEdge(m, r))
    return sk


def graph_geometry(graph: InstabilityGraph, spec):
    """Closed intervals as (dual level, left, right) times and right-isolated / all edges as (level, time)."""
    ivs = [(iv.level, cell_time(spec, iv.start), cell_time(spec, iv.end - 1))
           for iv in graph.intervals if iv.closed]
    w = graph.window
    ri = graph.right_isolated()
    iso = [(w.level_lo + a, cell_time(spec, w.i_lo + b)) for a, b in zip(*np.nonzero(ri))]
    bulk = int(np.count_nonzero(graph.edge_mask & ~ri))
    return ivs, iso, bulk


@dataclass
class ScoreReport:
    interval_recall: float
    interval_precision: float
    edge_recall: float
    edge_precision: float
    n_graph_intervals: int
    n_skeleton_intervals: int
    n_right_isolated: int
    n_bulk_edges_excluded: int
    tol: float

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["note"] = "edges that are not right-isolated carry no shock and are excluded from recall"
        return d


def _match_frac(src, dst, tol, key):
    if not src:
        return 1.0
    by = {}
    for d in dst:
        by.setdefault(d[0], []).append(d)
    hit = 0
    for s in src:
        if any(key(s, d) <= tol for d in by.get(s[0], [])):
            hit += 1
    return hit / len(src)


def compare_graphs(skeleton: Skeleton, graph: InstabilityGraph, spec, tol: float | None = None,
                   t_max: float | None = None) -> ScoreReport:
    """Score a skeleton against a graph: endpoints within tol (default 2 delta), right-isolated edge recall.

    Skeleton elements right of t_max (default: window right end) are ignored.
    """
    tol = 2 * spec.delta if tol is None else tol
    g_iv, g_iso, bulk = graph_geometry(graph, spec)
    w = graph.window
    lo_t, hi_t = float(spec.time_of(w.i_lo)), float(spec.time_of(w.i_hi)) if t_max is None else t_max
    in_win = lambda m, t: w.level_lo <= m <= w.level_hi and lo_t <= t <= hi_t
    s_iv = [(iv.level, iv.left, iv.right) for iv in skeleton.closed if in_win(iv.level, iv.left) and iv.right <= hi_t]
    s_ed = [(e.level, e.time) for e in skeleton.edges if in_win(e.level, e.time)]
    g_iso = [e for e in g_iso if in_win(*e)]
    iv_key = lambda a, b: max(abs(a[1] - b[1]), abs(a[2] - b[2]))
    ed_key = lambda a, b: abs(a[1] - b[1])
    return ScoreReport(
        _match_frac(g_iv, s_iv, tol, iv_key), _match_frac(s_iv, g_iv, tol, iv_key),
        _match_frac(g_iso, s_ed, tol, ed_key), _match_frac(s_ed, g_iso, tol, ed_key),
        len(g_iv), len(s_iv), len(g_iso), bulk, tol)


def shock_graph_correspondence(graph: InstabilityGraph, cls, match_radius: int = 2) -> dict:
    """Agreement of shock classes with graph features on the grid.

    cls: Classification with a = lower-direction shocks, b = upper-direction shocks.
    (i) each closed-left interval has an only-upper shock in its left cell;
    (ii) each only-lower shock lies on an edge cell;
    (iii) each shock whose dual point above is off the graph is common to both sets.
    """
    w = graph.window
    E = graph.edge_mask
    mem = graph.membership()
    r = match_radius

    def inside(m, i, top):
        return w.level_lo <= m <= top and w.i_lo + r <= i <= w.i_hi - r - 1

    plus = {}
    for s in cls.only_b:
        plus.setdefault(s.level, set()).add(s.index)
    ivs = [iv for iv in graph.intervals if not iv.truncated_left and w.i_lo + r <= iv.start <= w.i_hi - r]
    a1 = [any(iv.start + k in plus.get(iv.level, ()) for k in range(-r, r + 1)) for iv in ivs]

    minus = [s for s in cls.only_a if inside(s.level, s.index, w.level_lo + E.shape[0] - 1)]
    a2 = [bool(E[s.level - w.level_lo, max(s.index - r - w.i_lo, 0):s.index + r + 1 - w.i_lo].any()) for s in minus]

    both = {s.key for s in cls.both}
    a3 = []
    for s in list(cls.only_a) + list(cls.only_b) + list(cls.both):
        if not inside(s.level, s.index, w.level_hi):
            continue
        row = mem[s.level - w.level_lo]
        c = s.index - w.i_lo
        if row[max(c - r, 0):c + r + 2].any():
            continue
        a3.append(s.key in both)

    frac = lambda v: float(np.mean(v)) if v else 1.0
    return {"left_endpoints": frac(a1), "n_left_endpoints": len(a1),
            "minus_on_edges": frac(a2), "n_minus": len(a2),
            "outside_common": frac(a3), "n_outside": len(a3)}
