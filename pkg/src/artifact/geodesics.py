"""Busemann geodesics at finite horizon through per-level argmax maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .busemann import ReverseProfile, Target
from .env import BrownianField
from .lpp import GridPoint, UpRightPath


@dataclass
class ArgmaxMaps:
    """tauL/tauR[n - level_min, i]: left/rightmost maximizer of g_n = B_n + W_{n+1} over [i, target]."""

    level_min: int
    target: Target
    g: np.ndarray
    tauL: np.ndarray
    tauR: np.ndarray
    tag: tuple
    delta: float = 1.0
    zero_index: int = 0

    @property
    def K(self) -> int:
        return self.target.K

    @property
    def top_level(self) -> int:
        """Highest level with a map (K - 1)."""
        return self.level_min + self.g.shape[0] - 1

    @property
    def end(self) -> int:
        return self.g.shape[1] - 1

    def tau(self, side: str, level: int) -> np.ndarray:
        arr = self.tauL if side == "L" else self.tauR
        return arr[level - self.level_min]

    def g_row(self, level: int) -> np.ndarray:
        return self.g[level - self.level_min]

    def probe_horizon(self, margin=None) -> int:
        margin = self.K // 4 if margin is None else margin
        return self.K - margin

    def time_of(self, index):
        return (np.asarray(index) - self.zero_index) * self.delta

    def geodesic(self, origin, side="L", stop_level=None) -> "SemiGeodesic":
        origin = GridPoint(*origin)
        if side not in ("L", "R"):
            raise ValueError("side must be 'L' or 'R'")
        if not (self.level_min <= origin.level <= self.top_level and 0 <= origin.index <= self.end):
            raise ValueError(f"origin {tuple(origin)} outside the cone")
        top = self.K if stop_level is None else min(stop_level, self.K)
        arr = self.tauL if side == "L" else self.tauR
        jumps = np.empty(top - origin.level + 2, dtype=np.int64)
        jumps[0] = s = origin.index
        for n in range(origin.level, min(top, self.K - 1) + 1):
            s = arr[n - self.level_min, s]
            jumps[n - origin.level + 1] = s
        if top == self.K:
            jumps[-1] = self.end
        degenerate = jumps.size >= 3 and jumps[0] == jumps[1] == jumps[2]
        return SemiGeodesic(origin.level, jumps, bool(degenerate), side=side, tag=self.tag, delta=self.delta)


@dataclass
class SemiGeodesic(UpRightPath):
    side: str = "L"
    tag: tuple = ()
    delta: float = 1.0


def argmax_maps_from_g(g, level_min=0, target=None, tag=(), delta=1.0, zero_index=0) -> ArgmaxMaps:
    g = np.atleast_2d(np.asarray(g, dtype=np.float64))
    tauL = np.empty(g.shape, dtype=np.int64)
    tauR = np.empty(g.shape, dtype=np.int64)
    for r in range(g.shape[0]):
        _kernels.suffix_argmax(g[r], tauL[r], tauR[r])
    if target is None:
        end = g.shape[1] - 1
        target = Target(level_min + g.shape[0], 1.0, end, float(end - zero_index) * delta)
    return ArgmaxMaps(level_min, target, g, tauL, tauR, tag, delta, zero_index)


def argmax_maps(field: BrownianField, W: ReverseProfile) -> ArgmaxMaps:
    spec = field.spec
    iT = W.target.index
    lo, K = W.level_min, W.K
    g = field.values[spec.row(lo):spec.row(K), :iT + 1] + W.W[1:K - lo + 1, :iT + 1]
    return argmax_maps_from_g(g, lo, W.target, W.tag, spec.delta, spec.zero_index)


def busemann_geodesic(field: BrownianField, W: ReverseProfile, origin, side="L", maps=None) -> SemiGeodesic:
    maps = argmax_maps(field, W) if maps is None else maps
    return maps.geodesic(origin, side)


def coalescence_point(g1: SemiGeodesic, g2: SemiGeodesic, horizon: int | None = None):
    """First grid point after which both jump sequences agree up to the horizon; None otherwise."""
    if g1.tag != g2.tag:
        raise ValueError(f"geodesics from different profiles: {g1.tag} vs {g2.tag}")
    lo = max(g1.start_level, g2.start_level)
    hi = min(g1.end_level, g2.end_level) if horizon is None else min(horizon, g1.end_level, g2.end_level)
    if hi < lo:
        return None
    a = np.array([g1.jump(k) for k in range(lo, hi + 1)])
    b = np.array([g2.jump(k) for k in range(lo, hi + 1)])
    if a[-1] != b[-1]:
        return None
    diff = np.flatnonzero(a != b)
    k0 = lo if diff.size == 0 else lo + int(diff[-1]) + 1
    return GridPoint(k0, max(g1.jump(k0 - 1), g2.jump(k0 - 1)))


def direction_estimate(geo: UpRightPath, level: int | None = None):
    """(displacement in time) / (levels climbed) up to `level`; returns (estimate, flagged)."""
    level = geo.end_level if level is None else level
    delta = getattr(geo, "delta", 1.0)
    if level <= geo.start_level:
        raise ValueError("need at least one level of climb")
    shift = geo.jump(level) - geo.jumps[0]
    if shift == 0:
        return 0.0, True
    return shift * delta / (level - geo.start_level), bool(geo.degenerate)
