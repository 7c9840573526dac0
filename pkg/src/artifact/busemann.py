"""Finite-horizon Busemann estimates from reverse passage profiles to a far target."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .env import BrownianField, FieldSpec
from .lpp import GridPoint

ETA_SWEEP = (0.1, 0.05, 0.02)


@dataclass(frozen=True)
class Target:
    K: int
    theta: float
    index: int
    time: float

    @property
    def theta_eff(self) -> float:
        return self.time / self.K

    def relative_direction(self, level: int, time: float) -> float:
        """Slope from (level, time) to the target."""
        return (self.time - time) / (self.K - level)


def make_target(spec: FieldSpec, K: int, theta: float) -> Target:
    if theta <= 0:
        raise ValueError("direction must be positive")
    if not spec.level_min < K <= spec.level_max:
        raise ValueError(f"horizon level {K} outside the field levels")
    idx = spec.index_of(theta * K)
    if not 0 <= idx < spec.n_nodes:
        raise ValueError(f"target time {theta * K} outside the field window")
    return Target(K, float(theta), idx, float(spec.time_of(idx)))


def surrogate_directions(theta: float, eta: float = 0.05) -> tuple[float, float]:
    """(theta-, theta+) stand-ins: directions theta(1 - eta) and theta(1 + eta)."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return theta * (1 - eta), theta * (1 + eta)


@dataclass
class ReverseProfile:
    """W[m - level_min, j] = L((m, t_j), target); -inf right of the target."""

    target: Target
    level_min: int
    W: np.ndarray
    tag: tuple = ()

    @property
    def K(self) -> int:
        return self.target.K

    def in_cone(self, p) -> bool:
        return self.level_min <= p[0] <= self.K and 0 <= p[1] <= self.target.index

    def value(self, level: int, index: int) -> float:
        return float(self.W[level - self.level_min, index])

    def row(self, level: int) -> np.ndarray:
        return self.W[level - self.level_min]


def reverse_profile(field: BrownianField, target: Target, tag=()) -> ReverseProfile:
    spec = field.spec
    if not (spec.level_min < target.K <= spec.level_max and 0 <= target.index < spec.n_nodes):
        raise ValueError("target outside window")
    B = field.values[:spec.row(target.K) + 1]
    W = np.full(B.shape, -np.inf)
    _kernels.reverse_scan(B, target.index, W)
    return ReverseProfile(target, spec.level_min, W, tag or (target.theta,))


@dataclass(frozen=True)
class BusemannEstimate:
    value: float
    target: Target
    x: GridPoint
    y: GridPoint


def busemann_estimate(W: ReverseProfile, x, y) -> BusemannEstimate:
    x, y = GridPoint(*x), GridPoint(*y)
    for p in (x, y):
        if not W.in_cone(p):
            raise ValueError(f"probe {tuple(p)} outside the cone of the target")
    return BusemannEstimate(W.value(*x) - W.value(*y), W.target, x, y)


@dataclass(frozen=True)
class ProbeWindow:
    level_lo: int
    level_hi: int
    i_lo: int
    i_hi: int

    def levels(self):
        return range(self.level_lo, self.level_hi + 1)

    def indices(self):
        return np.arange(self.i_lo, self.i_hi + 1)


def default_probe_window(spec: FieldSpec, target: Target, time_frac=0.5, level_frac=0.25) -> ProbeWindow:
    """Middle time fraction of [t_min, target time], lowest level fraction of [level_min, K]."""
    n = target.index + 1
    pad = int(n * (1 - time_frac) / 2)
    top = spec.level_min + max(1, int((target.K - spec.level_min) * level_frac))
    return ProbeWindow(spec.level_min, min(top, target.K - 1), pad, n - 1 - pad)


def horizontal_profile(W: ReverseProfile, m: int, window: ProbeWindow | None = None) -> np.ndarray:
    """D(t) = W_m(t_lo) - W_m(t) on the probe window (t_lo its left end)."""
    lo, hi = (0, W.target.index) if window is None else (window.i_lo, window.i_hi)
    if not W.in_cone((m, lo)) or not W.in_cone((m, hi)):
        raise ValueError("probe window outside the cone")
    r = W.row(m)
    return r[lo] - r[lo:hi + 1]


def vertical_increment(W: ReverseProfile, m: int, t) -> float | np.ndarray:
    if m + 1 > W.K:
        raise ValueError("need m + 1 <= K")
    return W.row(m)[t] - W.row(m + 1)[t]


def monotonicity_violations(W_lo: ReverseProfile, W_hi: ReverseProfile, window: ProbeWindow, tol=1e-9) -> dict:
    """Count probe pairs breaking the crossing inequality for directions lo < hi at one horizon.

    Horizontal: for s < t on a level, W_hi(s)-W_hi(t) <= W_lo(s)-W_lo(t), i.e. W_hi - W_lo is
    nondecreasing; checked over all pairs through a running maximum. Vertical: the increment
    W(m) - W(m+1) must not decrease from lo to hi.
    """
    if W_lo.K != W_hi.K:
        raise ValueError("profiles must share the horizon level")
    idx = window.indices()
    horiz = vert = 0
    worst = 0.0
    for m in window.levels():
        d = W_hi.row(m)[idx] - W_lo.row(m)[idx]
        excess = np.maximum.accumulate(d) - d
        horiz += int(np.count_nonzero(excess > tol))
        worst = max(worst, float(excess.max()))
        if m + 1 <= W_lo.K:
            gap = vertical_increment(W_lo, m, idx) - vertical_increment(W_hi, m, idx)
            vert += int(np.count_nonzero(gap > tol))
            worst = max(worst, float(gap.max()))
    return {"horizontal": horiz, "vertical": vert, "worst": worst}


@dataclass
class StabilizationReport:
    theta: float
    horizons: list
    probes: list
    values: np.ndarray  # (n_horizons, n_probes)
    eta: float | None = None

    @property
    def drift(self) -> np.ndarray:
        return np.max(np.abs(self.values - self.values[-1]), axis=0)

    @property
    def max_drift(self) -> float:
        return float(self.drift.max()) if self.drift.size else 0.0

    def fraction_stable(self, threshold=1e-3) -> float:
        return float(np.mean(self.drift < threshold)) if self.drift.size else 1.0

    def to_json(self) -> str:
        return json.dumps({
            "theta": self.theta, "eta": self.eta, "horizons": list(self.horizons),
            "probes": [[list(map(int, x)), list(map(int, y))] for x, y in self.probes],
            "values": self.values.tolist(), "drift": self.drift.tolist(), "max_drift": self.max_drift,
        }, indent=1)


def stabilization_report(field: BrownianField, theta: float, probes, horizons, eta=None) -> StabilizationReport:
    probes = [(GridPoint(*x), GridPoint(*y)) for x, y in probes]
    vals = np.empty((len(horizons), len(probes)))
    for h, K in enumerate(horizons):
        W = reverse_profile(field, make_target(field.spec, K, theta))
        for p, (x, y) in enumerate(probes):
            vals[h, p] = busemann_estimate(W, x, y).value
    return StabilizationReport(theta, list(horizons), probes, vals, eta)
