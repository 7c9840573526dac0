"""Named invariant checks over one seeded field, shared by the command line verify runner."""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field, replace
from itertools import combinations_with_replacement

import numpy as np

from . import busemann as bz
from . import cif as cf
from . import geodesics as gd
from . import instability as ig
from . import reconstruct as rc
from . import shocks as sh
from .env import FieldSpec, generate_field, inject_field
from .lpp import forward_profile

PASS, FAIL, REPORTED = "pass", "fail", "reported"


@dataclass
class CheckResult:
    name: str
    anchor: str
    status: str
    stats: dict = dc_field(default_factory=dict)
    seconds: float = 0.0

    @property
    def hard(self) -> bool:
        return self.status != REPORTED

    def to_dict(self) -> dict:
        return {"name": self.name, "anchor": self.anchor, "status": self.status,
                "stats": self.stats, "seconds": round(self.seconds, 3)}


@dataclass
class Params:
    thetas: tuple = (0.6, 1.0, 1.6)
    horizon: int = 200
    horizon_doubled: int = 400
    eta: float = 0.05
    gamma: float = 0.8
    delta_dir: float = 1.2
    tol: float = 1e-9
    match_radius: int = 2
    cif_roots: int = 12
    cif_levels: int = 100
    probes: int = 200
    inject: str = ""


class Context:
    """Lazily built shared objects for one field."""

    def __init__(self, field, p: Params):
        self.field, self.p, self.spec = field, p, field.spec
        self._cache = {}

    def profile(self, theta, K=None):
        K = self.p.horizon if K is None else K
        key = ("W", round(theta, 12), K)
        if key not in self._cache:
            self._cache[key] = bz.reverse_profile(self.field, bz.make_target(self.spec, K, theta))
        return self._cache[key]

    def maps(self, theta, K=None):
        key = ("M", round(theta, 12), K)
        if key not in self._cache:
            self._cache[key] = gd.argmax_maps(self.field, self.profile(theta, K))
        return self._cache[key]

    def surrogates(self, gamma=None, delta=None, eta=None):
        p = self.p
        gamma = p.gamma if gamma is None else gamma
        delta = p.delta_dir if delta is None else delta
        eta = p.eta if eta is None else eta
        return bz.surrogate_directions(gamma, eta)[0], bz.surrogate_directions(delta, eta)[1]

    def window(self):
        W = self.profile(self.surrogates()[0])
        return bz.default_probe_window(self.spec, W.target)


def _timed(fn):
    def run(ctx, *a, **k):
        t0 = time.perf_counter()
        r = fn(ctx, *a, **k)
        r.seconds = time.perf_counter() - t0
        return r
    run.__name__ = fn.__name__
    return run


def _brute(values, m, s, n, t):
    best = -np.inf
    for mid in combinations_with_replacement(range(s, t + 1), n - m):
        j = (s, *mid, t)
        best = max(best, sum(values[m + k, j[k + 1]] - values[m + k, j[k]] for k in range(n - m + 1)))
    return best


@_timed
def check_dp_oracle(ctx, instances=30):
    rng = np.random.default_rng(ctx.spec.seed)
    bad = 0
    for _ in range(instances):
        n_lv, n_nd = int(rng.integers(1, 5)), int(rng.integers(3, 9))
        spec = FieldSpec(0, n_lv - 1, -1.0, float(n_nd - 2), 1.0)
        vals = np.cumsum(rng.standard_normal((n_lv, n_nd)), axis=1)
        vals -= vals[:, [spec.zero_index]]
        f = inject_field(spec, vals)
        P = forward_profile(f, (0, 0))
        for k in range(n_lv):
            for t in range(n_nd):
                bad += abs(P.value(k, t) - _brute(vals, 0, 0, k, t)) > 1e-9
    return CheckResult("dp_oracle", "The last-passage time from", PASS if bad == 0 else FAIL,
                       {"instances": instances, "mismatches": int(bad)})


@_timed
def check_cocycle(ctx, triples=1000):
    W = ctx.profile(ctx.p.thetas[len(ctx.p.thetas) // 2])
    w = bz.default_probe_window(ctx.spec, W.target)
    rng = np.random.default_rng(ctx.spec.seed + 1)
    worst = 0.0
    for _ in range(triples):
        pts = [(int(rng.integers(w.level_lo, w.level_hi + 1)), int(rng.integers(w.i_lo, w.i_hi + 1))) for _ in range(3)]
        a = bz.busemann_estimate(W, pts[0], pts[1]).value + bz.busemann_estimate(W, pts[1], pts[2]).value
        worst = max(worst, abs(a - bz.busemann_estimate(W, pts[0], pts[2]).value))
    return CheckResult("cocycle", "Cocycle", PASS if worst <= 1e-9 else FAIL, {"triples": triples, "worst": worst})


@_timed
def check_monotonicity(ctx):
    th = sorted(ctx.p.thetas)
    total, worst = 0, 0.0
    for a, b in zip(th, th[1:]):
        Wa, Wb = ctx.profile(a), ctx.profile(b)
        if ctx.p.inject == "monotonicity":
            Wb = bz.ReverseProfile(Wb.target, Wb.level_min, Wb.W.copy(), Wb.tag)
            w0 = bz.default_probe_window(ctx.spec, Wa.target)
            Wb.W[w0.level_lo - Wb.level_min, (w0.i_lo + w0.i_hi) // 2] += 1.0
        win = bz.default_probe_window(ctx.spec, Wa.target)
        r = bz.monotonicity_violations(Wa, Wb, win, ctx.p.tol)
        total += r["horizontal"] + r["vertical"]
        worst = max(worst, r["worst"])
    return CheckResult("busemann_monotonicity", "(Monotonicity) For any", PASS if total == 0 else FAIL,
                       {"violations": total, "worst": worst})


def _origins(ctx, M, n, rng):
    w = bz.default_probe_window(ctx.spec, M.target)
    return [(int(rng.integers(w.level_lo, w.level_hi + 1)), int(rng.integers(w.i_lo, w.i_hi + 1))) for _ in range(n)]


@_timed
def check_double_vertical(ctx, n=2000):
    M = ctx.maps(1.0)
    rng = np.random.default_rng(ctx.spec.seed + 2)
    top = M.probe_horizon()
    bad = 0
    for o in _origins(ctx, M, n, rng):
        bad += M.geodesic(o, "L", top).has_double_vertical()
    return CheckResult("no_double_vertical", "neither of the following occurs", REPORTED,
                       {"geodesics": n, "violations": int(bad), "note": "grid vertical runs; rate falls with delta"})


@_timed
def check_geodesic_ordering(ctx, pairs=1000):
    lo_t, hi_t = ctx.surrogates(1.0, 1.0)
    Ml, Mh = ctx.maps(lo_t), ctx.maps(hi_t)
    M = ctx.maps(1.0)
    top = M.probe_horizon()
    rng = np.random.default_rng(ctx.spec.seed + 3)
    order = split = 0
    for o in _origins(ctx, M, pairs, rng):
        q = (o[0], o[1] + int(rng.integers(1, 20)))
        gL, gR = M.geodesic(o, "L", top), M.geodesic(o, "R", top)
        qL = M.geodesic(q, "L", top)
        order += int(np.any(gL.jumps > gR.jumps)) + int(np.any(gR.jumps > qL.jumps))
        order += int(np.any(Ml.geodesic(o, "L", top).jumps > Mh.geodesic(o, "L", top).jumps))
        d = np.flatnonzero(gL.jumps != gR.jumps)
        split += int(d.size > 0 and d[0] != 1)
    st = PASS if order + split == 0 else FAIL
    return CheckResult("geodesic_ordering", "either separate immediately or are equal", st,
                       {"pairs": pairs, "order_violations": order, "split_violations": split})


@_timed
def check_shock_tree(ctx, pairs=200):
    M = ctx.maps(1.0)
    hi_lv = M.probe_horizon()
    rep = sh.tree_law_report(M, range(M.level_min + 1, hi_lv + 1, max(1, hi_lv // 50)))
    tree = sh.build_tree([], M)
    rng = np.random.default_rng(ctx.spec.seed + 4)
    br = sh.detect_branches(M, levels=[hi_lv])
    ok = trunc = 0
    if br:
        idx = np.array([b.index for b in br])
        for _ in range(pairs):
            a = int(rng.integers(len(br)))
            near = np.flatnonzero((np.abs(idx - idx[a]) * ctx.spec.delta <= 5.0) & (idx != idx[a]))
            if near.size == 0:
                continue
            node, status = tree.common_descendant(br[a], br[int(rng.choice(near))])
            ok += node is not None
            trunc += node is None
    frac = ok / max(ok + trunc, 1)
    rep.update({"common_descendant_resolved": frac, "pairs": ok + trunc})
    st = PASS if rep["violations"] == 0 else FAIL
    return CheckResult("shock_tree", "there exists a unique $t<s$", st, rep)


def _graph_bundle(ctx, gamma=None, delta=None):
    lo_t, hi_t = ctx.surrogates(gamma, delta)
    Wl, Wh = ctx.profile(lo_t), ctx.profile(hi_t)
    win = ig.default_window(Wl)
    g = ig.build_graph(Wl, Wh, win, ctx.p.tol, {"gamma": gamma or ctx.p.gamma, "delta": delta or ctx.p.delta_dir,
                                                 "eta": ctx.p.eta})
    return Wl, Wh, win, g


def _classes(ctx, win):
    lo_t, hi_t = ctx.surrogates()
    Ml, Mh = ctx.maps(lo_t), ctx.maps(hi_t)
    lv = range(win.level_lo, win.level_hi + 2)
    bl = sh.detect_branches(Ml, levels=lv, lo=win.i_lo, hi=win.i_hi)
    bh = sh.detect_branches(Mh, levels=lv, lo=win.i_lo, hi=win.i_hi)
    return sh.classify(sh.shock_set(bl, np.inf, ("lo",)), sh.shock_set(bh, np.inf, ("hi",)), ctx.p.match_radius)


@_timed
def check_shock_ig(ctx):
    _, _, win, g = _graph_bundle(ctx)
    c = _classes(ctx, win)
    r = rc.shock_graph_correspondence(g, c, ctx.p.match_radius)
    ok = min(r["left_endpoints"], r["minus_on_edges"], r["outside_common"]) >= 0.9
    return CheckResult("shock_ig_correspondence", "right-isolated among", PASS if ok else FAIL, r)


@_timed
def check_ig_geometric(ctx):
    _, _, _, g = _graph_bundle(ctx)
    lo_t, hi_t = ctx.surrogates()
    Ml, Mh = ctx.maps(lo_t), ctx.maps(hi_t)
    e = ig.geometric_edge_check(g, Ml, Mh).summary()
    p = ig.geometric_point_check(g, Ml, Mh).summary()
    ok = min(e["agreement"], p["agreement"]) >= 0.9
    return CheckResult("ig_geometric", "separate immediately and never touch again", PASS if ok else FAIL,
                       {"edge": e, "point": p})


@_timed
def check_reconstruction(ctx):
    _, _, win, g = _graph_bundle(ctx)
    c = _classes(ctx, win)
    sk = rc.reconstruct_skeleton(rc.as_points(c.only_b, ctx.spec), rc.as_points(c.only_a, ctx.spec),
                                 window_end=float(ctx.spec.time_of(win.i_hi)))
    s = rc.compare_graphs(sk, g, ctx.spec).to_dict()
    minus = {(m, t) for m, t in rc.as_points(c.only_a, ctx.spec)}
    s["edges_on_minus_shocks"] = all((e.level, e.time) in minus for e in sk.edges)
    return CheckResult("reconstruction", "sketch a skeleton of the instability graph", REPORTED, s)


@_timed
def check_boxcount(ctx):
    Wl, Wh, win, _ = _graph_bundle(ctx)
    es = ig.detect_edges(Wl, Wh, win, ctx.p.tol)
    d = ctx.spec.delta
    span = (win.i_hi - win.i_lo) * d
    slopes = []
    for row in es.mask[:-1]:
        idx = np.flatnonzero(row)
        if idx.size >= 2:
            slopes.append(ig.boxcount_dimension(idx * d, d, span=span, lo=0.0))
    return CheckResult("boxcount", "has a Hausdorff dimension of $\\frac{1}{2}$", REPORTED,
                       {"levels": len(slopes), "slope": float(np.mean(slopes)) if slopes else float("nan")})


@_timed
def check_nesting(ctx):
    gs, ds = (0.7, 0.8, 0.9), (1.1, 1.2, 1.3)
    graphs = {}
    for a in gs:
        for b in ds:
            lo_t, hi_t = ctx.surrogates(a, b)
            Wl, Wh = ctx.profile(lo_t), ctx.profile(hi_t)
            graphs[a, b] = ig.build_graph(Wl, Wh, ig.default_window(ctx.profile(ctx.surrogates(gs[0], ds[-1])[0])), ctx.p.tol)
    bad = 0
    for (a, b), g in graphs.items():
        for (a2, b2), g2 in graphs.items():
            if a2 <= a and b <= b2:
                bad += ig.graph_nesting_check(g, g2)["violations"]
    return CheckResult("nesting", "natural order relation on $\\{-,+\\}$", PASS if bad == 0 else FAIL,
                       {"lattice": "3x3", "violations": bad})


@_timed
def check_directedness(ctx):
    M = ctx.maps(1.0)
    N = ctx.p.horizon // 2
    rng = np.random.default_rng(ctx.spec.seed + 5)
    errs = []
    for o in _origins(ctx, M, 50, rng):
        g = M.geodesic(o, "L", o[0] + N)
        est, _ = gd.direction_estimate(g, o[0] + N)
        errs.append(est - M.target.relative_direction(o[0], float(ctx.spec.time_of(o[1]))))
    frac = float(np.mean(np.abs(errs) <= 0.1))
    # cif bracket: sigma_R <= sigma_L by construction, checked on sampled roots
    bad = 0
    w = ctx.window()
    for _ in range(ctx.p.cif_roots):
        root = (int(rng.integers(w.level_lo, w.level_hi + 1)), int(rng.integers(w.i_lo, w.i_hi + 1)))
        top = min(root[0] + ctx.p.cif_levels, ctx.spec.level_max)
        e = cf.estimate_directions(ctx.field, root, top)
        bad += e.theta_R > e.theta_L + 1e-12
    st = PASS if bad == 0 else FAIL
    return CheckResult("directedness", "has direction $\\theta$", st,
                       {"within_0.1": frac, "geodesics": len(errs), "cif_bracket_violations": int(bad),
                        "note": "direction fraction reported; cif bracket is the hard check"})


@_timed
def check_stabilization(ctx):
    K, K2 = ctx.p.horizon, ctx.p.horizon_doubled
    if K2 > ctx.spec.level_max or 1.0 * K2 > ctx.spec.t_max:
        return CheckResult("stabilization", "horizon doubling", REPORTED, {"skipped": "field too small"})
    r = stabilization_diagnostic(ctx.field, 1.0, K, K2, ctx.p.probes, ctx.spec.seed)
    return CheckResult("stabilization", "horizon doubling", REPORTED, r)


def stabilization_diagnostic(field, theta, K, K2, n_probes, seed, margins=(0.25, 0.125, 0.0625), threshold=1e-3,
                             target=0.9) -> dict:
    """Fraction of probe pairs whose estimate moves < threshold when the horizon doubles.

    If the default level margin falls short, the probe band is pushed further from the horizon.
    """
    spec = field.spec
    tgt = bz.make_target(spec, K, theta)
    rows = []
    for lf in margins:
        w = bz.default_probe_window(spec, tgt, level_frac=lf)
        rng = np.random.default_rng(seed)
        span = max(1, int(round(1.0 / spec.delta)))
        probes = []
        for _ in range(n_probes):
            m = int(rng.integers(w.level_lo, w.level_hi + 1))
            i = int(rng.integers(w.i_lo, w.i_hi - span))
            probes.append(((m, i), (m, i + int(rng.integers(1, span + 1)))))
        rep = bz.stabilization_report(field, theta, probes, [K, K2])
        rows.append({"level_frac": lf, "fraction_stable": rep.fraction_stable(threshold), "max_drift": rep.max_drift})
        if rows[-1]["fraction_stable"] >= target:
            break
    return {"threshold": threshold, "target": target, "margins": rows,
            "default_fraction": rows[0]["fraction_stable"], "met": rows[-1]["fraction_stable"] >= target}


CHECKS = [check_dp_oracle, check_cocycle, check_monotonicity, check_double_vertical, check_geodesic_ordering,
          check_shock_tree, check_shock_ig, check_ig_geometric, check_reconstruction, check_boxcount,
          check_nesting, check_directedness, check_stabilization]

SMOKE = {"check_dp_oracle", "check_cocycle", "check_monotonicity", "check_geodesic_ordering", "check_ig_geometric",
         "check_nesting", "check_shock_ig"}


def run_seed(spec: FieldSpec, p: Params, smoke=False) -> list[CheckResult]:
    ctx = Context(generate_field(spec), p)
    out = []
    for fn in CHECKS:
        if smoke and fn.__name__ not in SMOKE:
            continue
        out.append(fn(ctx))
    return out


def seed_spec(spec: FieldSpec, seed: int) -> FieldSpec:
    return replace(spec, seed=seed)
