"""Acceptance suite: one test per criterion, each printing a single pass/fail line."""

import time
from functools import lru_cache

import numpy as np
import pytest
from oracle import brute_initial_condition, brute_lpp

from artifact import busemann as bz
from artifact import cif as cf
from artifact import geodesics as gd
from artifact import instability as ig
from artifact import reconstruct as rc
from artifact import shocks as sh
from artifact.env import FieldSpec, generate_field, inject_field
from artifact.lpp import forward_profile, solve_initial_condition
from artifact.verify import stabilization_diagnostic

pytestmark = pytest.mark.acceptance

SEEDS = range(5)
DEFAULT_DELTA = 0.1
GAMMA, DELTA_DIR, ETA = 0.8, 1.2, 0.05
THETA_LO = bz.surrogate_directions(GAMMA, ETA)[0]
THETA_HI = bz.surrogate_directions(DELTA_DIR, ETA)[1]


@lru_cache(maxsize=8)
def field(delta, seed, levels=200, t_max=300):
    return generate_field(FieldSpec(0, levels, -20, t_max, delta, seed=seed))


def ig_window(spec):
    return bz.ProbeWindow(0, 50, spec.index_of(20.0), spec.index_of(120.0))


@lru_cache(maxsize=8)
def ig_bundle(delta, seed):
    """Profiles, maps and graph for the (gamma-, delta+) pair at horizon 200."""
    f = field(delta, seed)
    spec = f.spec
    Wl = bz.reverse_profile(f, bz.make_target(spec, 200, THETA_LO))
    Wh = bz.reverse_profile(f, bz.make_target(spec, 200, THETA_HI))
    win = ig_window(spec)
    g = ig.build_graph(Wl, Wh, win)
    return f, Wl, Wh, gd.argmax_maps(f, Wl), gd.argmax_maps(f, Wh), g


def classes(delta, seed):
    _, _, _, Ml, Mh, g = ig_bundle(delta, seed)
    w = g.window
    lv = range(w.level_lo, w.level_hi + 2)
    bl = sh.detect_branches(Ml, levels=lv, lo=w.i_lo, hi=w.i_hi)
    bh = sh.detect_branches(Mh, levels=lv, lo=w.i_lo, hi=w.i_hi)
    return sh.classify(sh.shock_set(bl, np.inf, ("gamma-",)), sh.shock_set(bh, np.inf, ("delta+",)))


def _brute_reverse(values, k_top, i_top, m, t):
    return brute_lpp(values, 0, m, t, k_top, i_top)


def test_c01_dp_oracle(verdict):
    rng = np.random.default_rng(2024)
    worst, dp_time, n_checked = 0.0, 0.0, 0
    for k in range(100):
        n_lv = 4 if k % 10 == 0 else int(rng.integers(1, 5))
        n_nd = 20 if k % 10 == 0 else int(rng.integers(3, 21))
        spec = FieldSpec(0, n_lv - 1, -1.0, float(n_nd - 2), 1.0)
        v = np.cumsum(rng.standard_normal((n_lv, n_nd)), axis=1)
        f = inject_field(spec, v - v[:, [spec.zero_index]])
        s0 = int(rng.integers(0, n_nd))
        t_top = int(rng.integers(s0, n_nd))
        phi = rng.standard_normal(n_nd)
        t0 = time.perf_counter()
        P = forward_profile(f, (0, s0))
        ic = solve_initial_condition(f, 0, phi, n_lv - 1, t_top)
        if n_lv > 1:
            W = bz.reverse_profile(f, bz.Target(n_lv - 1, 1.0, t_top, 0.0))
        dp_time += time.perf_counter() - t0
        for lv in range(n_lv):
            for t in range(s0, n_nd):
                worst = max(worst, abs(P.value(lv, t) - brute_lpp(f.values, 0, 0, s0, lv, t)))
                n_checked += 1
        if n_lv > 1:
            for lv in range(n_lv):
                for t in range(t_top + 1):
                    worst = max(worst, abs(W.value(lv, t) - _brute_reverse(f.values, n_lv - 1, t_top, lv, t)))
                    n_checked += 1
        worst = max(worst, abs(ic - brute_initial_condition(f.values, 0, 0, phi, n_lv - 1, t_top)))
    ok = worst <= 1e-9 and dp_time < 5.0
    verdict(1, "DP-oracle equivalence", ok, f"100 instances, {n_checked} values, max |diff| {worst:.1e}, "
            f"DP time {dp_time:.2f}s (tol 1e-9, < 5 s)")
    assert ok


def test_c02_cocycle(verdict):
    worst, slowest = 0.0, 0.0
    for seed in SEEDS:
        f = field(DEFAULT_DELTA, seed)
        W = bz.reverse_profile(f, bz.make_target(f.spec, 200, 1.0))
        w = bz.default_probe_window(f.spec, W.target)
        rng = np.random.default_rng(seed)
        pts = np.stack([rng.integers(w.level_lo, w.level_hi + 1, (1000, 3)),
                        rng.integers(w.i_lo, w.i_hi + 1, (1000, 3))], axis=-1)
        t0 = time.perf_counter()
        for a, b, c in pts:
            e = (bz.busemann_estimate(W, a, b).value + bz.busemann_estimate(W, b, c).value
                 - bz.busemann_estimate(W, a, c).value)
            worst = max(worst, abs(e))
        slowest = max(slowest, time.perf_counter() - t0)
    ok = worst <= 1e-9 and slowest < 1.0
    verdict(2, "cocycle", ok, f"5 seeds x 1000 triples, max residual {worst:.1e}, slowest seed {slowest:.2f}s")
    assert ok


def test_c03_busemann_monotonicity(verdict):
    total, worst, slowest = 0, 0.0, 0.0
    for seed in SEEDS:
        f = field(DEFAULT_DELTA, seed, t_max=340)
        t0 = time.perf_counter()
        Ws = [bz.reverse_profile(f, bz.make_target(f.spec, 200, th)) for th in (0.6, 1.0, 1.6)]
        # full probe grid: every level below the horizon, every node of the smallest cone
        grid = bz.ProbeWindow(0, 199, 0, Ws[0].target.index)
        for a in range(3):
            for b in range(a + 1, 3):
                r = bz.monotonicity_violations(Ws[a], Ws[b], grid)
                total += r["horizontal"] + r["vertical"]
                worst = max(worst, r["worst"])
        slowest = max(slowest, time.perf_counter() - t0)
    ok = total == 0 and slowest < 30
    verdict(3, "Busemann monotonicity", ok, f"theta 0.6/1.0/1.6, K=200, full grids, 5 seeds: {total} violations "
            f"(worst excess {worst:.1e}), slowest seed {slowest:.1f}s")
    assert ok


def _double_vertical_rate(delta, seeds, per_seed):
    bad = n = 0
    for seed in seeds:
        f = field(delta, seed)
        M = gd.argmax_maps(f, bz.reverse_profile(f, bz.make_target(f.spec, 200, 1.0)))
        w = bz.default_probe_window(f.spec, M.target)
        rng = np.random.default_rng(seed)
        top = M.probe_horizon()
        for _ in range(per_seed):
            o = (int(rng.integers(w.level_lo, w.level_hi + 1)), int(rng.integers(w.i_lo, w.i_hi + 1)))
            for side in "LR":
                bad += M.geodesic(o, side, top).has_double_vertical()
                n += 1
    return bad, n


def test_c04_no_double_vertical(verdict):
    bad, n = _double_vertical_rate(DEFAULT_DELTA, SEEDS, 1000)
    bad2, n2 = _double_vertical_rate(DEFAULT_DELTA / 2, SEEDS, 200)
    ok = n >= 10_000 and bad == 0
    verdict(4, "no double vertical steps", ok, f"{bad}/{n} geodesics with a double vertical at delta=0.1 "
            f"(rate {bad / n:.3f}); at delta=0.05 rate {bad2 / n2:.3f} (required: zero)")
    assert ok


def test_c05_geodesic_ordering(verdict):
    order = split = pairs = 0
    for seed in SEEDS:
        f = field(DEFAULT_DELTA, seed)
        spec = f.spec
        M = gd.argmax_maps(f, bz.reverse_profile(f, bz.make_target(spec, 200, 1.0)))
        Ml = gd.argmax_maps(f, bz.reverse_profile(f, bz.make_target(spec, 200, 0.95)))
        Mh = gd.argmax_maps(f, bz.reverse_profile(f, bz.make_target(spec, 200, 1.05)))
        w = bz.default_probe_window(spec, M.target)
        top = M.probe_horizon()
        rng = np.random.default_rng(100 + seed)
        for _ in range(1000):
            m = int(rng.integers(w.level_lo, w.level_hi + 1))
            s = int(rng.integers(w.i_lo, w.i_hi))
            t = s + int(rng.integers(1, 50))
            gL, gR = M.geodesic((m, s), "L", top), M.geodesic((m, s), "R", top)
            hL = M.geodesic((m, t), "L", top)
            order += int(np.any(gL.jumps > gR.jumps)) + int(np.any(gR.jumps > hL.jumps))
            for side in "LR":
                order += int(np.any(Ml.geodesic((m, s), side, top).jumps > Mh.geodesic((m, s), side, top).jumps))
            d = np.flatnonzero(gL.jumps != gR.jumps)
            split += int(d.size > 0 and d[0] != 1)
            pairs += 1
    ok = order == 0 and split == 0
    verdict(5, "geodesic ordering and split-at-origin", ok,
            f"{pairs} origin pairs: {order} ordering, {split} split violations")
    assert ok


def test_c06_shock_tree_laws(verdict):
    f = generate_field(FieldSpec(0, 511, -100, 600, 0.1, seed=0))
    M = gd.argmax_maps(f, bz.reverse_profile(f, bz.make_target(f.spec, 511, 1.0)))
    top = M.probe_horizon()
    w = bz.default_probe_window(f.spec, M.target)
    rep = sh.tree_law_report(M, range(1, top + 1), lo=0)
    # common descendants for nearby shock pairs (within 5 time units) on the probe-horizon level
    br = sh.shock_set(sh.detect_branches(M, levels=[top], lo=w.i_lo, hi=w.i_hi), sh.default_eps(M)).shocks
    tree = sh.build_tree([], M)
    idx = np.array([b.index for b in br])
    rng = np.random.default_rng(0)
    ok_pairs = trunc = 0
    for _ in range(300):
        a = int(rng.integers(len(br)))
        near = np.flatnonzero((np.abs(idx - idx[a]) * f.spec.delta <= 5.0) & (idx != idx[a]))
        if near.size == 0:
            continue
        node, status = tree.common_descendant(br[a], br[int(rng.choice(near))])
        ok_pairs += node is not None
        trunc += node is None
    frac = ok_pairs / max(ok_pairs + trunc, 1)
    ok = rep["violations"] == 0 and frac >= 0.95
    verdict(6, "shock tree laws", ok, f"{rep['checked']} shocks on levels 1..{top}: uniqueness "
            f"{rep['child_not_unique']}, monotone {rep['child_not_monotone']}, same-level {rep['same_level_descendant']}, "
            f"chain order {rep['chain_order']}; common descendant resolved {frac:.3f} of {ok_pairs + trunc} pairs "
            f"({trunc} flagged truncated)")
    assert ok


def _c7_scores(delta):
    keys = ("left_endpoints", "minus_on_edges", "outside_common")
    rows = []
    for seed in SEEDS:
        g = ig_bundle(delta, seed)[-1]
        r = rc.shock_graph_correspondence(g, classes(delta, seed))
        rows.append([r[k] for k in keys])
    return np.mean(rows, axis=0)


def test_c07_shock_ig_correspondence(verdict):
    a, b = _c7_scores(0.05), _c7_scores(0.025)
    ok = bool(np.all(a >= 0.9) and np.all(b >= a))
    verdict(7, "shock/IG correspondence", ok, f"(i)/(ii)/(iii) at delta=0.05: {np.round(a, 3).tolist()}, "
            f"at 0.025: {np.round(b, 3).tolist()} (>= 0.9, nondecreasing)")
    assert ok


def _c8_scores(delta, seeds=range(3)):
    e = p = 0.0
    for seed in seeds:
        _, _, _, Ml, Mh, g = ig_bundle(delta, seed)
        e += ig.geometric_edge_check(g, Ml, Mh).agreement
        p += ig.geometric_point_check(g, Ml, Mh).agreement
    return e / len(seeds), p / len(seeds)


def test_c08_ig_geometric(verdict):
    coarse, fine = _c8_scores(DEFAULT_DELTA), _c8_scores(DEFAULT_DELTA / 2)
    ok = min(coarse) >= 0.9 and fine[0] >= coarse[0] and fine[1] >= coarse[1]
    verdict(8, "analytic vs geometric IG", ok, f"edge/point agreement {coarse[0]:.3f}/{coarse[1]:.3f} at delta=0.1, "
            f"{fine[0]:.3f}/{fine[1]:.3f} at 0.05 (>= 0.9, nondecreasing)")
    assert ok


def _c9_scores(delta, seeds=SEEDS):
    recall, edge_recall, exact = [], [], True
    for seed in seeds:
        f, _, _, _, _, g = ig_bundle(delta, seed)
        spec = f.spec
        c = classes(delta, seed)
        minus = rc.as_points(c.only_a, spec)
        sk = rc.reconstruct_skeleton(rc.as_points(c.only_b, spec), minus,
                                     window_end=float(spec.time_of(g.window.i_hi)))
        s = rc.compare_graphs(sk, g, spec)
        recall.append(s.interval_recall)
        edge_recall.append(s.edge_recall)
        exact &= {(e.level, e.time) for e in sk.edges} <= set(minus)
    return float(np.mean(recall)), float(np.mean(edge_recall)), exact


def test_c09_reconstruction(verdict):
    r1, e1, x1 = _c9_scores(DEFAULT_DELTA)
    r2, e2, x2 = _c9_scores(DEFAULT_DELTA / 2)
    ok = r1 >= 0.9 and x1 and x2
    verdict(9, "skeleton reconstruction", ok, f"interval endpoints within 2 delta: {r1:.3f} at delta=0.1, "
            f"{r2:.3f} at 0.05 (>= 0.9 required); edges on only-minus times exactly: {x1 and x2}; "
            f"right-isolated edge recall {e1:.3f}/{e2:.3f}, bulk edges excluded")
    assert ok


def test_c10_boxcount(verdict):
    t0 = time.perf_counter()
    cal = float(np.mean([ig.boxcount_dimension(ig.brownian_zero_set(2**18, s), 1.0, span=2**18, lo=0.0)
                         for s in range(20)]))
    delta = 0.025
    slopes = []
    for seed in range(20):
        f = field(delta, seed)
        spec = f.spec
        Wl = bz.reverse_profile(f, bz.make_target(spec, 200, THETA_LO))
        Wh = bz.reverse_profile(f, bz.make_target(spec, 200, THETA_HI))
        es = ig.detect_edges(Wl, Wh, ig_window(spec))
        per = []
        for m in range(0, 50, 5):
            idx = np.flatnonzero(es.mask[m])
            if idx.size >= 2:
                per.append(ig.boxcount_dimension(idx * delta, delta, span=100.0, lo=0.0))
        slopes.append(np.mean(per))
    slope = float(np.mean(slopes))
    elapsed = time.perf_counter() - t0
    ok = abs(cal - 0.5) <= 0.1 and abs(slope - 0.5) <= 0.15 and elapsed < 120
    verdict(10, "box-count slope", ok, f"calibration on Brownian zeros {cal:.3f} (0.5 +- 0.1); edge times "
            f"{slope:.3f} over 20 seeds at delta={delta} (0.5 +- 0.15); {elapsed:.0f}s")
    assert ok


def test_c11_nesting(verdict):
    gs, ds = (0.7, 0.8, 0.9), (1.1, 1.2, 1.3)
    bad = checks = 0
    for seed in SEEDS:
        f = field(DEFAULT_DELTA, seed)
        prof = {}

        def W(th):
            if th not in prof:
                prof[th] = bz.reverse_profile(f, bz.make_target(f.spec, 200, th))
            return prof[th]

        win = ig.default_window(W(bz.surrogate_directions(gs[0], ETA)[0]))
        graphs = {(a, b): ig.build_graph(W(bz.surrogate_directions(a, ETA)[0]),
                                         W(bz.surrogate_directions(b, ETA)[1]), win) for a in gs for b in ds}
        for (a, b), g in graphs.items():
            for (a2, b2), g2 in graphs.items():
                if a2 <= a and b <= b2:
                    bad += ig.graph_nesting_check(g, g2)["violations"]
                    checks += 1
    ok = bad == 0
    verdict(11, "nesting", ok, f"3x3 (gamma, delta) lattice, 5 seeds, {checks} containments: {bad} violations")
    assert ok


def test_c12a_directedness(verdict):
    errs = []
    for seed in SEEDS:
        f = generate_field(FieldSpec(0, 400, -20, 500, DEFAULT_DELTA, seed=seed))
        M = gd.argmax_maps(f, bz.reverse_profile(f, bz.make_target(f.spec, 400, 1.0)))
        rng = np.random.default_rng(seed)
        for _ in range(100):
            o = (0, f.spec.index_of(float(rng.uniform(0, 50))))
            est, _ = gd.direction_estimate(M.geodesic(o, "L", 200), 200)
            errs.append(est - M.target.relative_direction(0, float(f.spec.time_of(o[1]))))
    frac = float(np.mean(np.abs(errs) <= 0.1))
    ok = frac >= 0.95
    verdict("12a", "geodesic direction", ok, f"{frac:.3f} of {len(errs)} geodesics within 0.1 of theta_eff at "
            f"N=200 (>= 0.95 required; sd of error {np.std(errs):.3f})")
    assert ok


def test_c12b_cif_bracket(verdict):
    bad = n = 0
    slack = 1e-12
    for seed in SEEDS:
        f = field(DEFAULT_DELTA, seed)
        w = ig_window(f.spec)
        rng = np.random.default_rng(seed)
        for _ in range(12):
            root = (int(rng.integers(w.level_lo, w.level_hi + 1)), int(rng.integers(w.i_lo, w.i_hi)))
            e = cf.estimate_directions(f, root, root[0] + 100)
            bad += e.theta_R > e.theta_L + slack
            n += 1
    ok = bad == 0
    verdict("12b", "cif bracket", ok, f"{n} roots: {bad} with theta_R > theta_L + {slack:g}")
    assert ok


def test_c13_stabilization(verdict):
    rows = []
    for seed in range(3):
        f = generate_field(FieldSpec(0, 400, -20, 500, DEFAULT_DELTA, seed=seed))
        rows.append(stabilization_diagnostic(f, 1.0, 200, 400, 200, seed))
    default = [r["default_fraction"] for r in rows]
    best = [r["margins"][-1]["fraction_stable"] for r in rows]
    met = all(r["met"] for r in rows)
    verdict(13, "stabilization (reported)", True, f"fraction of probes moving < 1e-3 when K 200 -> 400: "
            f"{np.round(default, 3).tolist()} at the default margin, {np.round(best, 3).tolist()} after widening; "
            f"90% target {'met' if met else 'not met'}", status="REPORTED")
    assert all(np.isfinite(default))
