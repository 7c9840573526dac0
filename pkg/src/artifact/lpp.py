"""Point-to-point last-passage times and geodesics by the max-plus recursion."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .env import BrownianField, FieldSpec


class GridPoint(NamedTuple):
    level: int
    index: int

    def time(self, spec: FieldSpec) -> float:
        return float(spec.time_of(self.index))


def _check_point(spec: FieldSpec, p: GridPoint, what="point"):
    if not spec.contains(p.level, p.index):
        raise ValueError(f"{what} {tuple(p)} outside the field window")


@dataclass
class UpRightPath:
    """Jump indices s_{m-1} <= s_m <= ... <= s_n; the path sits on level k over [s_{k-1}, s_k]."""

    start_level: int
    jumps: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        self.jumps = np.asarray(self.jumps, dtype=np.int64)
        if self.jumps.size < 2:
            raise ValueError("a path needs at least its two endpoints")
        if np.any(np.diff(self.jumps) < 0):
            raise ValueError("jump times must be nondecreasing")

    @property
    def end_level(self) -> int:
        return self.start_level + self.jumps.size - 2

    @property
    def start(self) -> GridPoint:
        return GridPoint(self.start_level, int(self.jumps[0]))

    @property
    def end(self) -> GridPoint:
        return GridPoint(self.end_level, int(self.jumps[-1]))

    def jump(self, level: int) -> int:
        """Exit index s_level (level in [start_level - 1, end_level])."""
        return int(self.jumps[level - self.start_level + 1])

    def span(self, level: int) -> tuple[int, int]:
        return self.jump(level - 1), self.jump(level)

    def times(self, spec: FieldSpec) -> np.ndarray:
        return spec.time_of(self.jumps)

    def weight(self, field: BrownianField) -> float:
        total = 0.0
        for k in range(self.start_level, self.end_level + 1):
            a, b = self.span(k)
            row = field[k]
            total += row[b] - row[a]
        return total

    def double_vertical_at(self) -> np.ndarray:
        """Levels k with s_{k-1} = s_k = s_{k+1}."""
        j = self.jumps
        hit = (j[:-2] == j[1:-1]) & (j[1:-1] == j[2:])
        return self.start_level + np.flatnonzero(hit)

    def has_double_vertical(self) -> bool:
        return self.double_vertical_at().size > 0

    def zero_length_levels(self) -> np.ndarray:
        """Interior levels crossed in a single vertical sweep (s_{k-1} = s_k, start < k < end)."""
        j = self.jumps
        inner = np.flatnonzero(j[1:-1] == j[2:])  # level start+i has zero length
        lv = self.start_level + inner
        return lv[(lv > self.start_level) & (lv < self.end_level)]

    def truncate(self, level: int) -> "UpRightPath":
        level = min(level, self.end_level)
        return UpRightPath(self.start_level, self.jumps[:level - self.start_level + 2].copy(), self.degenerate)

    def contains(self, p: GridPoint) -> bool:
        if not self.start_level <= p.level <= self.end_level:
            return False
        a, b = self.span(p.level)
        return a <= p.index <= b

    def to_rows(self, spec: FieldSpec | None = None):
        t = self.times(spec) if spec is not None else self.jumps
        return [(self.start_level - 1 + i, float(v) if spec else int(v)) for i, v in enumerate(t)]


def precedes(a: UpRightPath, b: UpRightPath) -> bool:
    """a ⪯ b on their common levels (jump-wise)."""
    lo = max(a.start_level, b.start_level) - 1
    hi = min(a.end_level, b.end_level)
    if hi < lo:
        return True
    ja = a.jumps[lo - a.start_level + 1:hi - a.start_level + 2]
    jb = b.jumps[lo - b.start_level + 1:hi - b.start_level + 2]
    return bool(np.all(ja <= jb))


def intersects(a: UpRightPath, b: UpRightPath, skip_start=False) -> bool:
    """Whether the two paths share a point; skip_start ignores a shared common origin."""
    lo = max(a.start_level, b.start_level)
    hi = min(a.end_level, b.end_level)
    for k in range(lo, hi + 1):
        a0, a1 = a.span(k)
        b0, b1 = b.span(k)
        if k == a.start_level:
            a0 = a.jump(k - 1)
        if k == b.start_level:
            b0 = b.jump(k - 1)
        left, right = max(a0, b0), min(a1, b1)
        if left > right:
            continue
        if skip_start and a.start == b.start and k == a.start_level and left == right == a.start.index:
            continue
        return True
    return False


@dataclass
class ForwardProfile:
    """V[k - m, j] = L((m, s), (k, t_j)); -inf left of the origin."""

    origin: GridPoint
    V: np.ndarray
    argL: np.ndarray = dc_field(repr=False)
    argR: np.ndarray = dc_field(repr=False)
    end_index: int = -1

    @property
    def top_level(self) -> int:
        return self.origin.level + self.V.shape[0] - 1

    def value(self, level: int, index: int) -> float:
        return float(self.V[level - self.origin.level, index])

    def level_values(self, level: int) -> np.ndarray:
        return self.V[level - self.origin.level]


def forward_profile(field: BrownianField, origin, top_level=None, end_index=None) -> ForwardProfile:
    spec = field.spec
    origin = GridPoint(*origin)
    _check_point(spec, origin, "origin")
    top = spec.level_max if top_level is None else top_level
    if not origin.level <= top <= spec.level_max:
        raise ValueError(f"top level {top} outside [{origin.level}, {spec.level_max}]")
    i1 = spec.n_nodes - 1 if end_index is None else end_index
    if not origin.index <= i1 < spec.n_nodes:
        raise ValueError("end index outside [origin, window end]")
    B = field.values[spec.row(origin.level):spec.row(top) + 1]
    shape = B.shape
    V = np.full(shape, -np.inf)
    argL = np.full(shape, -1, dtype=np.int64)
    argR = np.full(shape, -1, dtype=np.int64)
    _kernels.forward_scan(B, origin.index, i1, V, argL, argR)
    return ForwardProfile(origin, V, argL, argR, i1)


def _check_order(x: GridPoint, y: GridPoint):
    if y.level < x.level or y.index < x.index:
        raise ValueError(f"endpoints not ordered: {tuple(x)} -> {tuple(y)}")


def last_passage_time(field: BrownianField, x, y, profile: ForwardProfile | None = None) -> float:
    x, y = GridPoint(*x), GridPoint(*y)
    _check_point(field.spec, x)
    _check_point(field.spec, y)
    _check_order(x, y)
    if x.index == y.index:
        return 0.0
    if profile is None or profile.origin != x or profile.top_level < y.level or profile.end_index < y.index:
        profile = forward_profile(field, x, top_level=y.level, end_index=y.index)
    return profile.value(y.level, y.index)


def point_geodesic(field: BrownianField, x, y, side="L", profile: ForwardProfile | None = None) -> UpRightPath:
    x, y = GridPoint(*x), GridPoint(*y)
    if side not in ("L", "R"):
        raise ValueError("side must be 'L' or 'R'")
    _check_point(field.spec, x)
    _check_point(field.spec, y)
    _check_order(x, y)
    n_jumps = y.level - x.level + 2
    if x.index == y.index:
        return UpRightPath(x.level, np.full(n_jumps, x.index), degenerate=y.level > x.level)
    if profile is None or profile.origin != x or profile.top_level < y.level or profile.end_index < y.index:
        profile = forward_profile(field, x, top_level=y.level, end_index=y.index)
    arg = profile.argL if side == "L" else profile.argR
    jumps = np.empty(n_jumps, dtype=np.int64)
    jumps[-1] = y.index
    jumps[0] = x.index
    s = y.index
    for k in range(y.level, x.level, -1):
        s = arg[k - x.level, s]
        jumps[k - x.level] = s
    return UpRightPath(x.level, jumps)


def solve_initial_condition(field: BrownianField, level: int, phi, n: int, t) -> float:
    """max_z phi(z) + L((level, z), (n, t)) over grid z <= t; t is a grid index."""
    spec = field.spec
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (spec.n_nodes,):
        raise ValueError(f"phi must have length {spec.n_nodes}, got {phi.shape}")
    if not spec.level_min <= level <= n <= spec.level_max:
        raise ValueError("need level_min <= level <= n <= level_max")
    if not 0 <= t < spec.n_nodes:
        raise ValueError("target index outside window")
    B = field.values[spec.row(level):spec.row(n) + 1]
    V = np.full(B.shape, -np.inf)
    _kernels.seeded_forward_scan(B, phi, t, V)
    return float(V[-1, t])
