"""Shock points as branch points of the argmax maps, their ancestry trees, and side classification.

A branch at node i of level n means tauL_n(i) = i and tauL_n(i+1) > i+1. For the piecewise-linear
field the exact tie sits inside the cell (t_i, t_{i+1}); ancestry treats it as the half-node i + 1/2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .geodesics import ArgmaxMaps

TRUNCATED = "truncated"
SUBGRID = "subgrid"


@dataclass(frozen=True, order=True)
class BranchPoint:
    level: int
    index: int
    arm: int = dc_field(compare=False)
    gap: float = dc_field(compare=False)
    subgrid: bool = dc_field(default=False, compare=False)

    @property
    def key(self):
        return (self.level, self.index)


def detect_branches(maps: ArgmaxMaps, levels=None, lo: int = 0, hi: int | None = None) -> list[BranchPoint]:
    hi = maps.end - 1 if hi is None else min(hi, maps.end - 1)
    levels = range(maps.level_min, maps.top_level + 1) if levels is None else levels
    out = []
    for n in levels:
        tau = maps.tau("L", n)
        g = maps.g_row(n)
        i = np.arange(lo, hi + 1)
        hit = i[(tau[i] == i) & (tau[i + 1] > i + 1)]
        arms = tau[hit + 1]
        gaps = g[hit] - g[arms]
        out.extend(BranchPoint(int(n), int(a), int(b), float(c)) for a, b, c in zip(hit, arms, gaps))
    return out


def default_eps(maps: ArgmaxMaps, level: int | None = None) -> float:
    """3 sqrt(delta) times the empirical per-unit-time scale of g increments."""
    g = maps.g if level is None else maps.g_row(level)[None]
    inc = np.diff(g, axis=1)
    scale = np.sqrt(np.mean(inc**2) / maps.delta)
    return 3.0 * np.sqrt(maps.delta) * scale


@dataclass
class ShockSet:
    tag: tuple
    eps: float
    shocks: list
    histogram: tuple = ()

    def __post_init__(self):
        self.shocks = sorted(self.shocks)
        self._keys = {s.key for s in self.shocks}
        if len(self._keys) != len(self.shocks):
            raise ValueError("two shocks at one grid node")

    def __len__(self):
        return len(self.shocks)

    def __iter__(self):
        return iter(self.shocks)

    def __contains__(self, key):
        return tuple(key) in self._keys

    def on_level(self, level: int) -> list:
        return [s for s in self.shocks if s.level == level]

    def to_json(self, spec=None) -> str:
        rows = [{"level": s.level, "index": s.index,
                 "time": float(spec.time_of(s.index)) if spec else s.index,
                 "gap": s.gap, "side": list(self.tag)} for s in self.shocks]
        return json.dumps(rows)


def shock_set(branches, eps: float, tag=(), bins=20) -> ShockSet:
    kept = [b for b in branches if b.gap <= eps]
    gaps = np.array([b.gap for b in branches])
    hist = np.histogram(gaps, bins=bins) if gaps.size else (np.zeros(0), np.zeros(0))
    return ShockSet(tag, float(eps), kept, (hist[0].tolist(), hist[1].tolist()))


def shock_count_curve(branches, eps_values) -> list[tuple[float, int]]:
    gaps = np.sort([b.gap for b in branches])
    return [(float(e), int(np.searchsorted(gaps, e, side="right"))) for e in eps_values]


# ancestry -----------------------------------------------------------------

def _arms(maps: ArgmaxMaps, x, top: int):
    """Per level k in [n, top]: (entry of up-arm, exit of right-arm) in half-node units (2*index).

    An up-arm entering a level at a half-node whose left node climbs at once (a branch, or a
    vertical run through the cell) climbs straight on, as the leftmost geodesic from a shock does.
    """
    n, i = x.level, x.index
    M = x.arm if hasattr(x, "arm") else int(maps.tau("L", n)[i + 1])
    entry = {n: 2 * i + 1}
    exit_ = {n: 2 * M}
    pos = 2 * i + 1
    b = M
    for k in range(n + 1, top + 1):
        entry[k] = pos
        exit_[k] = 2 * int(maps.tau("L", k)[b]) if k > n else 2 * b
        b = exit_[k] // 2
        if k == top:
            break
        tau = maps.tau("L", k)
        if pos % 2:
            j = pos // 2
            if tau[j] != j:
                pos = 2 * int(tau[j + 1])
        else:
            pos = 2 * int(tau[pos // 2])
    return entry, exit_


def is_ancestor(x, y, maps: ArgmaxMaps):
    """Whether y lies weakly between the up-arm and right-arm of x; None when y is beyond the maps."""
    if y.level < x.level:
        return False
    if y.level > maps.top_level:
        return None
    entry, exit_ = _arms(maps, x, y.level)
    pos = 2 * y.index + 1
    return entry[y.level] <= pos <= exit_[y.level]


@dataclass(frozen=True)
class ChildResult:
    child: BranchPoint | None
    status: str = "ok"


def child(x, maps: ArgmaxMaps, lo: int = 0) -> ChildResult:
    """The unique branch on the level below whose arms bracket x, by a leftward scan of tauL.

    When tauL on level m-1 sends the cell under x straight up (a vertical run through two
    levels at one node), the child is the unresolved split inside that same cell, flagged subgrid.
    """
    m, i = x.level, x.index
    if m - 1 < maps.level_min:
        return ChildResult(None, TRUNCATED)
    tau = maps.tau("L", m - 1)
    # smallest r with tauL(r) >= i + 1 (tauL is nondecreasing)
    r0 = int(np.searchsorted(tau[:i + 2], i + 1, side="left"))
    if r0 <= lo:
        return ChildResult(None, TRUNCATED)
    c = r0 - 1
    g = maps.g_row(m - 1)
    M = int(tau[c + 1])
    if M == c + 1:
        # the whole cell climbs straight through level m - 1: its split is below grid resolution
        return ChildResult(BranchPoint(m - 1, c, M, float(g[c] - g[M]), subgrid=True), SUBGRID)
    return ChildResult(BranchPoint(m - 1, c, M, float(g[c] - g[M])))


def child_candidates(x, branches_below, maps: ArgmaxMaps) -> list:
    return [c for c in branches_below if is_ancestor(c, x, maps)]


@dataclass
class ShockTree:
    nodes: list
    child_of: dict
    status: dict
    maps: ArgmaxMaps = dc_field(repr=False)

    @property
    def n_edges(self) -> int:
        return sum(1 for v in self.child_of.values() if v is not None)

    def descendants(self, x, depth=None):
        """Child chain below x (the SW descendants), stopping at truncation or degeneracy."""
        out = []
        cur = x
        while depth is None or len(out) < depth:
            r = child(cur, self.maps)
            if r.child is None:
                return out, r.status
            out.append(r.child)
            cur = r.child
        return out, "ok"

    def common_descendant(self, x, y, max_steps=None):
        """First common node of the two child chains; returns (node or None, status)."""
        a, b = x, y
        steps = 0
        while a.key != b.key:
            if max_steps is not None and steps > max_steps:
                return None, TRUNCATED
            if a.level > b.level or (a.level == b.level and a.index > b.index):
                r = child(a, self.maps)
                if r.child is None:
                    return None, r.status
                a = r.child
            else:
                r = child(b, self.maps)
                if r.child is None:
                    return None, r.status
                b = r.child
            steps += 1
        return a, "ok"

    def to_json(self) -> str:
        return json.dumps({
            "nodes": [[s.level, s.index, s.gap] for s in self.nodes],
            "edges": [[k[0], k[1], v[0], v[1]] for k, v in self.child_of.items() if v is not None],
        })


def build_tree(shocks, maps: ArgmaxMaps) -> ShockTree:
    nodes = list(shocks)
    child_of, status = {}, {}
    for s in nodes:
        r = child(s, maps)
        child_of[s.key] = r.child.key if r.child is not None else None
        status[s.key] = r.status
    return ShockTree(nodes, child_of, status, maps)


# classification across two sides --------------------------------------------

@dataclass
class Classification:
    only_a: list
    only_b: list
    both: list
    radius: int

    def sizes(self) -> dict:
        return {"only_a": len(self.only_a), "only_b": len(self.only_b), "both": len(self.both)}


def _matched(src, other, radius):
    by_level = {}
    for s in other:
        by_level.setdefault(s.level, []).append(s.index)
    idx = {k: np.sort(v) for k, v in by_level.items()}
    out = []
    for s in src:
        arr = idx.get(s.level)
        if arr is None or arr.size == 0:
            out.append(False)
            continue
        j = np.searchsorted(arr, s.index)
        near = [arr[q] for q in (j - 1, j) if 0 <= q < arr.size]
        out.append(min(abs(v - s.index) for v in near) <= radius)
    return out


def _same_tie(src, other, tol):
    by_key = {s.key: s for s in other}
    out = []
    for s in src:
        o = by_key.get(s.key)
        out.append(o is not None and abs(o.gap - s.gap) <= tol)
    return out


def classify(set_a, set_b, match_radius: int = 2, tol: float | None = 1e-9) -> Classification:
    """Split two shock sets into only-a, only-b and both.

    With tol set, a shock is common when both sets hold a branch at the same node with equal gap
    (the same tie of the two landscapes, which then differ by a constant across the arm).
    With tol=None, shocks are matched by position within match_radius nodes.
    """
    a, b = list(set_a), list(set_b)
    if tol is None:
        ma = _matched(a, b, match_radius)
        mb = _matched(b, a, match_radius)
    else:
        ma = _same_tie(a, b, tol)
        mb = _same_tie(b, a, tol)
    return Classification([s for s, f in zip(a, ma) if not f], [s for s, f in zip(b, mb) if not f],
                          [s for s, f in zip(a, ma) if f], match_radius)


# tree laws -------------------------------------------------------------------

def tree_law_report(maps: ArgmaxMaps, levels, lo: int = 0, hi: int | None = None, chain_depth=8) -> dict:
    """Exhaustive child uniqueness / monotonicity / same-level / chain-order counts on the given levels.

    For a branch x on level m and c on level m-1, c is an ancestor-candidate of x iff
    c <= x < tauL_m(arm of c); candidates are scanned over the whole level below.
    """
    levels = [n for n in levels if n - 1 >= maps.level_min]
    by_level = {}
    for n in set(levels) | {n - 1 for n in levels}:
        by_level[n] = detect_branches(maps, levels=[n], lo=lo, hi=hi)
    uniq = mono = same = chain = checked = subgrid = trunc = 0
    for n in levels:
        xs = by_level[n]
        if not xs:
            continue
        below = by_level[n - 1]
        ci = np.array([b.index for b in below], dtype=np.int64)
        reach = maps.tau("L", n)[np.array([b.arm for b in below], dtype=np.int64)] if below else ci
        prev = -1
        for x in xs:
            r = child(x, maps, lo)
            if r.child is None:
                trunc += 1
                continue
            checked += 1
            cand = ci[(ci <= x.index) & (x.index < reach)] if below else ci
            if r.status == SUBGRID:
                subgrid += 1
                uniq += int(cand.size != 0)
            else:
                uniq += int(cand.size != 1 or cand[0] != r.child.index)
            mono += int(r.child.index < prev)
            prev = r.child.index
        # a branch is never an ancestor of another branch on its own level
        idx = np.array([x.index for x in xs])
        for x in xs:
            entry, exit_ = _arms(maps, x, n)
            pos = 2 * idx + 1
            same += int(np.count_nonzero((entry[n] <= pos) & (pos <= exit_[n]))) - 1
    # descendant chains are totally ordered by ancestry
    for n in levels[-1:]:
        for x in by_level[n][:: max(1, len(by_level[n]) // 20)]:
            cur, seq = x, [x]
            for _ in range(chain_depth):
                r = child(cur, maps, lo)
                if r.child is None:
                    break
                seq.append(r.child)
                cur = r.child
            for a in range(len(seq)):
                for b in range(a + 1, len(seq)):
                    if not is_ancestor(seq[b], seq[a], maps):
                        chain += 1
    return {"checked": checked, "truncated": trunc, "subgrid": subgrid, "child_not_unique": uniq,
            "child_not_monotone": mono, "same_level_descendant": same, "chain_order": chain,
            "violations": uniq + mono + same + chain}
