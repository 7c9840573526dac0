"""Interval instability graphs from two reverse profiles, plus geometric cross-checks.

Grid conventions: an edge at (m, t) is the cell [t, t+1] on level m where the profile gap
Delta_m = W_hi - W_lo increases; it spans dual levels m-1/2..m+1/2. Dual level m+1/2 is stored
under key m. A run of proper nodes a..b on a dual level closes to the grid interval [a-1, b+1].
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .busemann import ProbeWindow, ReverseProfile
from .geodesics import ArgmaxMaps

TOL = 1e-9


@dataclass(frozen=True)
class InstabilityEdge:
    level: int
    index: int
    magnitude: float


@dataclass
class InstabilityInterval:
    level: int  # dual level level + 1/2
    start: int
    end: int
    proper: np.ndarray = dc_field(repr=False)
    truncated_left: bool = False
    truncated_right: bool = False
    left_edges: list = dc_field(default_factory=list)   # edge cells on `level` at the left end
    right_edges: list = dc_field(default_factory=list)  # edge cells on `level + 1` at the right end

    @property
    def closed(self) -> bool:
        return not (self.truncated_left or self.truncated_right)


def _check_pair(Wlo: ReverseProfile, Whi: ReverseProfile):
    if Wlo.K != Whi.K or Wlo.level_min != Whi.level_min or Wlo.W.shape[0] != Whi.W.shape[0]:
        raise ValueError("profiles must come from one field and share the horizon")
    if Wlo.target.index > Whi.target.index:
        raise ValueError("first profile must be the lower direction")


def default_window(Wlo: ReverseProfile, level_frac=0.25, time_frac=0.5) -> ProbeWindow:
    n = Wlo.target.index + 1
    pad = int(n * (1 - time_frac) / 2)
    top = Wlo.level_min + max(2, int((Wlo.K - Wlo.level_min) * level_frac))
    return ProbeWindow(Wlo.level_min, min(top, Wlo.K - 2), pad, n - 1 - pad)


def profile_gap(Wlo, Whi, window: ProbeWindow) -> np.ndarray:
    """Delta_m(t) on window levels level_lo..level_hi+1 (one extra for vertical increments)."""
    r0 = window.level_lo - Wlo.level_min
    r1 = window.level_hi + 1 - Wlo.level_min
    sl = slice(window.i_lo, window.i_hi + 1)
    return Whi.W[r0:r1 + 1, sl] - Wlo.W[r0:r1 + 1, sl]


@dataclass
class EdgeSet:
    window: ProbeWindow
    increments: np.ndarray  # (levels, cells)
    tol: float

    @property
    def mask(self) -> np.ndarray:
        return self.increments > self.tol

    @property
    def monotonicity_violations(self) -> int:
        return int(np.count_nonzero(self.increments < -self.tol))

    def edges(self) -> list:
        ml, il = np.nonzero(self.mask)
        return [InstabilityEdge(int(self.window.level_lo + a), int(self.window.i_lo + b), float(self.increments[a, b]))
                for a, b in zip(ml, il)]


def detect_edges(Wlo: ReverseProfile, Whi: ReverseProfile, window: ProbeWindow | None = None, tol=TOL) -> EdgeSet:
    _check_pair(Wlo, Whi)
    window = default_window(Wlo) if window is None else window
    # one level above the window too, so the top dual level sees its up-edges
    D = profile_gap(Wlo, Whi, window)
    return EdgeSet(window, np.diff(D, axis=1), tol)


def detect_proper_points(Wlo: ReverseProfile, Whi: ReverseProfile, window: ProbeWindow | None = None, tol=TOL):
    """(mask, gaps) per dual level level_lo+1/2 .. level_hi+1/2."""
    _check_pair(Wlo, Whi)
    window = default_window(Wlo) if window is None else window
    D = profile_gap(Wlo, Whi, window)
    gaps = D[:-1] - D[1:]
    return gaps > tol, gaps


@dataclass
class InstabilityGraph:
    window: ProbeWindow
    edge_mask: np.ndarray     # (levels, cells): cell [t, t+1] on level m
    edge_size: np.ndarray
    proper: np.ndarray        # (levels, nodes): dual level m+1/2
    intervals: list
    params: dict = dc_field(default_factory=dict)

    # indexing helpers
    def _m(self, level):
        return level - self.window.level_lo

    def _i(self, index):
        return index - self.window.i_lo

    @property
    def n_levels(self):
        return self.proper.shape[0]

    @property
    def n_nodes(self):
        return self.proper.shape[1]

    def has_edge(self, level, cell) -> bool:
        m, c = self._m(level), self._i(cell)
        return 0 <= m < self.edge_mask.shape[0] and 0 <= c < self.edge_mask.shape[1] and bool(self.edge_mask[m, c])

    def edges(self) -> list:
        ml, il = np.nonzero(self.edge_mask)
        lo, i0 = self.window.level_lo, self.window.i_lo
        return [InstabilityEdge(int(lo + a), int(i0 + b), float(self.edge_size[a, b])) for a, b in zip(ml, il)]

    def membership(self) -> np.ndarray:
        """Dual nodes (levels, nodes) on an interval or touched by an edge from below or above."""
        nm, ni = self.proper.shape
        mem = np.zeros((nm, ni), dtype=bool)
        for iv in self.intervals:
            mem[self._m(iv.level), self._i(iv.start):self._i(iv.end) + 1] = True
        E = self.edge_mask
        touch = np.zeros((E.shape[0], ni), dtype=bool)
        touch[:, :-1] |= E
        touch[:, 1:] |= E
        mem |= touch[:nm]
        mem[:-1] |= touch[1:nm]
        if E.shape[0] > nm:
            mem[-1] |= touch[nm]
        return mem

    def right_isolated(self) -> np.ndarray:
        """Edge cells whose right neighbour cell carries no edge."""
        E = self.edge_mask
        nxt = np.zeros_like(E)
        nxt[:, :-1] = E[:, 1:]
        return E & ~nxt

    def double_edges(self) -> int:
        """Dual nodes met by an edge from below and an edge from above at the same cell."""
        E = self.edge_mask
        return int(np.count_nonzero(E[:-1] & E[1:]))

    def to_dict(self, spec=None) -> dict:
        tm = (lambda i: float(spec.time_of(i))) if spec is not None else (lambda i: int(i))
        return {
            "params": self.params,
            "window": [self.window.level_lo, self.window.level_hi, self.window.i_lo, self.window.i_hi],
            "intervals": [{"dual_level": iv.level + 0.5, "start": tm(iv.start), "end": tm(iv.end),
                           "truncated": [bool(iv.truncated_left), bool(iv.truncated_right)]} for iv in self.intervals],
            "edges": [{"level": e.level, "time": tm(e.index), "size": e.magnitude} for e in self.edges()],
        }

    def to_json(self, spec=None) -> str:
        return json.dumps(self.to_dict(spec))


def assemble_graph(edges: EdgeSet, proper: np.ndarray, params=None) -> InstabilityGraph:
    w = edges.window
    E = edges.mask
    nm, ni = proper.shape
    intervals = []
    for mm in range(nm):
        p = proper[mm]
        if not p.any():
            continue
        padded = np.concatenate(([False], p, [False])).astype(np.int8)
        starts = np.flatnonzero(np.diff(padded) == 1)
        stops = np.flatnonzero(np.diff(padded) == -1) - 1
        for a, b in zip(starts, stops):
            s, t = max(a - 1, 0), min(b + 1, ni - 1)
            iv = InstabilityInterval(w.level_lo + mm, w.i_lo + s, w.i_lo + t, p[s:t + 1].copy(),
                                     truncated_left=a == 0, truncated_right=b == ni - 1)
            # down-edges at the left end live on level m, up-edges at the right end on level m+1
            iv.left_edges = [w.i_lo + c for c in (s - 1, s) if 0 <= c < E.shape[1] and E[mm, c]]
            if mm + 1 < E.shape[0]:
                iv.right_edges = [w.i_lo + c for c in (t - 1, t) if 0 <= c < E.shape[1] and E[mm + 1, c]]
            intervals.append(iv)
    return InstabilityGraph(w, E, edges.increments, proper, intervals, dict(params or {}, tol=edges.tol))


def build_graph(Wlo: ReverseProfile, Whi: ReverseProfile, window=None, tol=TOL, params=None) -> InstabilityGraph:
    window = default_window(Wlo) if window is None else window
    es = detect_edges(Wlo, Whi, window, tol)
    pm, _ = detect_proper_points(Wlo, Whi, window, tol)
    return assemble_graph(es, pm, params)


# geometric characterizations ---------------------------------------------------

@dataclass
class AgreementReport:
    name: str
    analytic: np.ndarray
    geometric: np.ndarray

    @property
    def agreement(self) -> float:
        return float(np.mean(self.analytic == self.geometric)) if self.analytic.size else 1.0

    @property
    def jaccard(self) -> float:
        union = np.count_nonzero(self.analytic | self.geometric)
        return float(np.count_nonzero(self.analytic & self.geometric) / union) if union else 1.0

    def summary(self) -> dict:
        return {"check": self.name, "agreement": self.agreement, "jaccard": self.jaccard,
                "analytic": int(self.analytic.sum()), "geometric": int(self.geometric.sum()),
                "nodes": int(self.analytic.size)}


def _geometric(graph: InstabilityGraph, maps_lo: ArgmaxMaps, maps_hi: ArgmaxMaps, top=None):
    if maps_lo.K != maps_hi.K or maps_lo.level_min != maps_hi.level_min:
        raise ValueError("maps must share the horizon")
    w = graph.window
    top = maps_lo.probe_horizon() if top is None else top
    top = min(top, maps_lo.top_level)
    return _kernels.geometric_flags(maps_lo.tauL, maps_hi.tauR, maps_lo.level_min,
                                    w.level_lo, w.level_hi, w.i_lo, w.i_hi, top)


def geometric_edge_check(graph: InstabilityGraph, maps_lo: ArgmaxMaps, maps_hi: ArgmaxMaps, top=None) -> AgreementReport:
    edge, _ = _geometric(graph, maps_lo, maps_hi, top)
    analytic = np.zeros_like(edge)
    analytic[:, :-1] = graph.edge_mask[:edge.shape[0]]
    return AgreementReport("edge", analytic[:, :-1], edge[:, :-1])


def geometric_point_check(graph: InstabilityGraph, maps_lo: ArgmaxMaps, maps_hi: ArgmaxMaps, top=None) -> AgreementReport:
    _, point = _geometric(graph, maps_lo, maps_hi, top)
    mem = graph.membership()
    return AgreementReport("point", mem[:, 1:-1], point[:, 1:-1])


def instability_equivalence_check(Wlo: ReverseProfile, Whi: ReverseProfile, graph: InstabilityGraph,
                                  tol=TOL, sample=None, rng=None) -> dict:
    """Three inequality characterizations of a dual instability point at r' = t-1, r'' = t+1."""
    w = graph.window
    D = profile_gap(Wlo, Whi, w)  # rows level_lo..level_hi+1
    nm, ni = graph.proper.shape
    lo_, mid, hi_ = slice(0, ni - 2), slice(1, ni - 1), slice(2, ni)
    Dm, Dm1 = D[:nm], D[1:nm + 1]
    # (ii): B_lo((m+1,r'),(m,r'')) > B_hi(same)
    c2 = Dm[:, hi_] - Dm1[:, lo_] > tol
    # (iii): horizontal on level m+1, or vertical at r''
    c3 = (Dm1[:, hi_] - Dm1[:, lo_] > tol) | (Dm[:, hi_] - Dm1[:, hi_] > tol)
    # (iv): horizontal on level m, or vertical at r'
    c4 = (Dm[:, hi_] - Dm[:, lo_] > tol) | (Dm[:, lo_] - Dm1[:, lo_] > tol)
    mem = graph.membership()[:, mid]
    idx = np.ones(c2.shape, dtype=bool)
    if sample is not None:
        rng = np.random.default_rng(rng)
        flat = rng.choice(c2.size, size=min(sample, c2.size), replace=False)
        idx = np.zeros(c2.size, dtype=bool)
        idx[flat] = True
        idx = idx.reshape(c2.shape)
    n = int(idx.sum())

    def agree(a, b):
        return float(np.mean(a[idx] == b[idx])) if n else 1.0

    return {"points": n, "ii_vs_graph": agree(c2, mem), "iii_vs_graph": agree(c3, mem),
            "iv_vs_graph": agree(c4, mem), "ii_vs_iii": agree(c2, c3), "ii_vs_iv": agree(c2, c4),
            "iii_or_iv_vs_ii": agree(c2, c3 | c4)}


# graph search ------------------------------------------------------------------

def _neighbors(graph: InstabilityGraph, mem, interval_id, node, up=True):
    m, t = node
    nm, ni = mem.shape
    out = []
    step = 1 if up else -1
    # horizontal along an interval
    tt = t + step
    if 0 <= tt < ni and interval_id[m, t] >= 0 and interval_id[m, tt] == interval_id[m, t]:
        out.append((m, tt))
    # vertical along an edge cell: level m+1 edges join dual m and m+1 (rows of edge_mask offset by one)
    E = graph.edge_mask
    if up:
        if m + 1 < nm and m + 1 < E.shape[0]:
            for c in (t - 1, t):
                if 0 <= c < E.shape[1] and E[m + 1, c]:
                    for t2 in (c, c + 1):
                        if t2 >= t and mem[m + 1, t2]:
                            out.append((m + 1, t2))
    else:
        if m - 1 >= 0:
            for c in (t - 1, t):
                if 0 <= c < E.shape[1] and E[m, c]:
                    for t2 in (c, c + 1):
                        if t2 <= t and mem[m - 1, t2]:
                            out.append((m - 1, t2))
    return out


def _interval_ids(graph: InstabilityGraph):
    ids = np.full(graph.proper.shape, -1, dtype=np.int64)
    for k, iv in enumerate(graph.intervals):
        ids[graph._m(iv.level), graph._i(iv.start):graph._i(iv.end) + 1] = k
    return ids


def _reach(graph, mem, ids, start, up):
    seen = {start}
    q = deque([start])
    while q:
        node = q.popleft()
        for nb in _neighbors(graph, mem, ids, node, up):
            if nb not in seen:
                seen.add(nb)
                q.append(nb)
    return seen


def _common(graph: InstabilityGraph, x, y, up: bool):
    mem = graph.membership()
    ids = _interval_ids(graph)
    xs = (graph._m(x[0]), graph._i(x[1]))
    ys = (graph._m(y[0]), graph._i(y[1]))
    for p in (xs, ys):
        if not (0 <= p[0] < mem.shape[0] and 0 <= p[1] < mem.shape[1]) or not mem[p]:
            raise ValueError(f"dual point {p} not on the graph")
    common = _reach(graph, mem, ids, xs, up) & _reach(graph, mem, ids, ys, up)
    if not common:
        return None
    best = min(common) if up else max(common)
    return (best[0] + graph.window.level_lo, best[1] + graph.window.i_lo)


def find_common_ancestor(graph: InstabilityGraph, x, y):
    """Lowest-then-leftmost dual node reachable from both along up-right graph moves; None if truncated."""
    return _common(graph, x, y, up=True)


def find_common_descendant(graph: InstabilityGraph, x, y):
    return _common(graph, x, y, up=False)


def path_slopes(graph: InstabilityGraph, start, delta: float, levels_min=5) -> tuple:
    """Slopes of the up-first and right-first greedy up-right graph paths from a dual node."""
    mem = graph.membership()
    ids = _interval_ids(graph)
    s0 = (graph._m(start[0]), graph._i(start[1]))
    out = []
    for prefer_up in (True, False):
        node = s0
        while True:
            nbs = _neighbors(graph, mem, ids, node, True)
            if not nbs:
                break
            ups = [n for n in nbs if n[0] > node[0]]
            rights = [n for n in nbs if n[0] == node[0]]
            node = (ups[0] if ups else rights[0]) if prefer_up else (rights[0] if rights else ups[0])
        dl = node[0] - s0[0]
        out.append((node[1] - s0[1]) * delta / dl if dl >= levels_min else np.nan)
    return tuple(out)


def graph_nesting_check(inner: InstabilityGraph, outer: InstabilityGraph) -> dict:
    if inner.window != outer.window:
        raise ValueError("graphs must share the window")
    e = int(np.count_nonzero(inner.edge_mask & ~outer.edge_mask))
    p = int(np.count_nonzero(inner.proper & ~outer.proper))
    return {"edge_violations": e, "proper_violations": p, "violations": e + p}


def boxcount_dimension(times, delta: float, span: float | None = None, lo: float | None = None) -> float:
    """Least-squares slope of log N(r) against log(1/r) over dyadic r in [4 delta, span/8]."""
    t = np.asarray(times, dtype=float)
    if t.size == 0:
        return float("nan")
    lo = t.min() if lo is None else lo
    span = (t.max() - lo) if span is None else span
    rs = []
    r = 4.0 * delta
    while r <= span / 8 + 1e-12:
        rs.append(r)
        r *= 2
    if len(rs) < 2:
        raise ValueError("window too small for two dyadic scales")
    rs = np.array(rs)
    counts = np.array([np.unique(np.floor((t - lo) / r)).size for r in rs])
    slope, _ = np.polyfit(np.log(1 / rs), np.log(counts), 1)
    return float(slope)


def brownian_zero_set(n_steps: int, rng=None) -> np.ndarray:
    """Zero set (sign-change cells) of a Gaussian random walk started at 0, in step units."""
    rng = np.random.default_rng(rng)
    x = np.concatenate(([0.0], np.cumsum(rng.standard_normal(n_steps))))
    cross = np.flatnonzero(np.sign(x[2:]) != np.sign(x[1:-1])) + 1
    return np.concatenate(([0.0], cross.astype(float)))
