"""Competition interfaces from a dual root and their direction estimates.

From (m, s) every later point is reached either through (m+1, s) (up first) or through
(m, s+1) (right first). F0, F1 and FR are the passage times from (m, s), (m+1, s) and the
right-first restriction; F0 = max(F1, FR). Side L bounds the points whose leftmost geodesic
goes up first (F1 = F0), side R those whose rightmost geodesic does (FR < F0), so sigma_R <= sigma_L.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .env import BrownianField
from .lpp import GridPoint, forward_profile

TOL = 1e-9


@dataclass
class CompetitionInterface:
    root: GridPoint  # dual root (root.level + 1/2, root time)
    sigma: np.ndarray  # sigma[k] = jump index on level root.level + k
    side: str

    @property
    def top_level(self) -> int:
        return self.root.level + self.sigma.size - 1

    def jump(self, level: int) -> int:
        return int(self.sigma[level - self.root.level])

    def to_rows(self, spec=None):
        lv = self.root.level + np.arange(self.sigma.size)
        t = spec.time_of(self.sigma) if spec is not None else self.sigma
        return list(zip(lv.tolist(), np.asarray(t).tolist()))


@dataclass
class CifPair:
    """Both sides from one pair of profile sweeps."""

    L: CompetitionInterface
    R: CompetitionInterface
    at_edge: bool  # sigma hit the window right edge on some level


def _profiles(field: BrownianField, root: GridPoint, N: int):
    spec = field.spec
    m, s = root
    if not (spec.level_min <= m and m + 1 <= N <= spec.level_max):
        raise ValueError(f"cif from level {m} to {N} does not fit the field levels")
    if not 0 <= s < spec.n_nodes - 1:
        raise ValueError("root at the window edge")
    F0 = forward_profile(field, (m, s), top_level=N).V
    F1 = forward_profile(field, (m + 1, s), top_level=N).V
    step = field.values[spec.row(m), s + 1] - field.values[spec.row(m), s]
    FR = forward_profile(field, (m, s + 1), top_level=N).V + step
    return F0, F1, FR


def trace_both(field: BrownianField, root, N: int, tol=TOL) -> CifPair:
    root = GridPoint(*root)
    F0, F1, FR = _profiles(field, root, N)
    m, s = root
    n_lv = N - m + 1
    sL = np.empty(n_lv, dtype=np.int64)
    sR = np.empty(n_lv, dtype=np.int64)
    sL[0] = sR[0] = s
    last = F0.shape[1] - 1
    for k in range(1, n_lv):
        f0, f1, fr = F0[k], F1[k - 1], FR[k]
        up = np.abs(f1[s:] - f0[s:]) <= tol
        up_strict = fr[s:] < f0[s:] - tol
        sL[k] = s + np.flatnonzero(up)[-1]
        sR[k] = s + np.flatnonzero(up_strict)[-1]
    edge = bool(sL.max() == last)
    return CifPair(CompetitionInterface(root, sL, "L"), CompetitionInterface(root, sR, "R"), edge)


def trace_cif(field: BrownianField, root, side: str, N: int, tol=TOL) -> CompetitionInterface:
    if side not in ("L", "R"):
        raise ValueError("side must be 'L' or 'R'")
    pair = trace_both(field, root, N, tol)
    return pair.L if side == "L" else pair.R


@dataclass(frozen=True)
class DirectionEstimate:
    root: GridPoint
    N: int
    theta_L: float
    theta_R: float
    band: float = 0.0
    degenerate: bool = False

    def bracket(self, band=None) -> tuple[float, float]:
        b = self.band if band is None else band
        return self.theta_R - b, self.theta_L + b


def estimate_directions(field: BrownianField, root, N: int, band=0.0, tol=TOL) -> DirectionEstimate:
    """Slopes of both interfaces, measured from the root: (t(sigma_N) - t(s)) / (N - m)."""
    root = GridPoint(*root)
    pair = trace_both(field, root, N, tol)
    return directions_from(pair, field.spec.delta, band)


def directions_from(pair: CifPair, delta: float, band=0.0) -> DirectionEstimate:
    root = pair.L.root
    N = pair.L.top_level
    dl = N - root.level
    tL = (pair.L.sigma[-1] - root.index) * delta / dl
    tR = (pair.R.sigma[-1] - root.index) * delta / dl
    return DirectionEstimate(root, N, float(tL), float(tR), band, pair.at_edge)


def default_band(gamma_eff: float, delta_eff: float) -> float:
    return 0.5 * (delta_eff - gamma_eff)


def directions_table(estimates) -> str:
    return json.dumps([{"level": e.root.level + 0.5, "index": e.root.index, "N": e.N,
                        "theta_L": e.theta_L, "theta_R": e.theta_R, "degenerate": e.degenerate}
                       for e in estimates])


def cif_shock_consistency(shocks, others, estimates: dict, theta_of, band: float) -> dict:
    """Shocks should see their direction inside [thR - band, thL + band]; non-shocks outside it.

    shocks/others: grid points; estimates maps (level, index) to DirectionEstimate; theta_of(p)
    gives the direction seen from p (the target's relative direction).
    """
    def inside(p):
        e = estimates[tuple(p)]
        lo, hi = e.bracket(band)
        return lo <= theta_of(p) <= hi

    a = [inside(p) for p in shocks if tuple(p) in estimates]
    b = [not inside(p) for p in others if tuple(p) in estimates]
    frac = lambda v: float(np.mean(v)) if v else 1.0
    return {"shock_inside": frac(a), "n_shocks": len(a), "nonshock_outside": frac(b), "n_nonshocks": len(b)}


def cif_edge_correspondence(graph, estimates: dict, dir_lo, dir_hi, band: float, shock_class=None) -> dict:
    """Edge at (m, t) iff [dir_lo, dir_hi] meets [thR - band, thL + band] at root (m, t).

    dir_lo/dir_hi: callables of the root giving the relative directions of the two targets.
    shock_class: optional map (level, index) -> 'plus' | 'minus' | 'both' for the trichotomy.
    """
    agree = []
    tri = {"left_endpoint_R_split": [], "minus_L_split": [], "no_shock_match": []}
    starts = {(iv.level, iv.start) for iv in graph.intervals if not iv.truncated_left}
    for p, e in estimates.items():
        m, t = p
        lo, hi = e.bracket(band)
        a, b = dir_lo(p), dir_hi(p)
        predicted = hi >= a and lo <= b
        agree.append(predicted == graph.has_edge(m, t))
        if (m, t) in starts:
            # only the right interface falls into the band
            tri["left_endpoint_R_split"].append(e.theta_R <= b + band and e.theta_L > b - band)
        cls = None if shock_class is None else shock_class.get(p)
        if graph.has_edge(m, t):
            if cls == "minus":
                tri["minus_L_split"].append(e.theta_L >= a - band and e.theta_R < a + band)
            elif cls is None:
                tri["no_shock_match"].append(abs(e.theta_L - e.theta_R) <= band)
    frac = lambda v: float(np.mean(v)) if v else 1.0
    out = {"edge_agreement": frac(agree), "n_roots": len(agree)}
    out.update({k: frac(v) for k, v in tri.items()})
    out.update({"n_" + k: len(v) for k, v in tri.items()})
    return out
