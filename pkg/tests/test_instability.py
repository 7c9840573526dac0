import json

import numpy as np
import pytest

from artifact import busemann as bz
from artifact import geodesics as gd
from artifact import instability as ig
from artifact.busemann import ProbeWindow, ReverseProfile, Target


def _pair(delta_rows):
    """Profiles with W_lo = 0 and W_hi - W_lo = the given rows (levels 0..)."""
    D = np.asarray(delta_rows, dtype=float)
    n_lv, n = D.shape
    tg = Target(n_lv, 1.0, n - 1, float(n - 1))
    pad = np.zeros((1, n))
    return ReverseProfile(tg, 0, np.vstack([np.zeros_like(D), pad])), ReverseProfile(tg, 0, np.vstack([D, pad]))


@pytest.fixture(scope="module")
def seeded(field_mid):
    spec = field_mid.spec
    Wl = bz.reverse_profile(field_mid, bz.make_target(spec, 150, 0.76))
    Wh = bz.reverse_profile(field_mid, bz.make_target(spec, 150, 1.26))
    return Wl, Wh, ig.build_graph(Wl, Wh)


def test_same_direction_empty(field_mid):
    W = bz.reverse_profile(field_mid, bz.make_target(field_mid.spec, 150, 1.0))
    g = ig.build_graph(W, W)
    assert not g.edge_mask.any() and not g.proper.any() and g.intervals == []
    M = gd.argmax_maps(field_mid, W)
    # run to the target itself: geodesics to one target always meet there
    assert ig.geometric_edge_check(g, M, M, top=M.top_level).geometric.sum() == 0
    assert ig.geometric_point_check(g, M, M, top=M.top_level).geometric.sum() == 0


def test_injected_step_single_edge():
    n, t0 = 12, 5
    rows = np.zeros((4, n))
    rows[1, t0 + 1:] = 1.0  # Delta_1 steps up right after t0
    Wl, Wh = _pair(rows)
    es = ig.detect_edges(Wl, Wh, ProbeWindow(0, 2, 0, n - 1))
    assert [(e.level, e.index, e.magnitude) for e in es.edges()] == [(1, t0, 1.0)]


def test_interval_fixture():
    n, a, b = 14, 4, 8
    rows = np.zeros((3, n))
    rows[0, a:] = 1.0       # down-edge at the left end, on level 0
    rows[1, b + 1:] = 1.0   # up-edge at the right end, on level 1
    rows[2] = 1.0
    Wl, Wh = _pair(rows)
    g = ig.build_graph(Wl, Wh, ProbeWindow(0, 1, 0, n - 1))
    (iv,) = g.intervals
    assert (iv.level, iv.start, iv.end, iv.closed) == (0, a - 1, b + 1, True)
    assert iv.left_edges == [a - 1] and iv.right_edges == [b]
    assert iv.proper[1:-1].all()
    assert sorted((e.level, e.index) for e in g.edges()) == [(0, a - 1), (1, b)]
    assert ig.find_common_ancestor(g, (0, a), (0, a)) == (0, a)
    assert ig.find_common_ancestor(g, (0, a), (0, b)) == (0, b)
    d = json.loads(g.to_json())
    assert d["intervals"][0]["truncated"] == [False, False] and len(d["edges"]) == 2


def test_empty_inputs():
    Wl, Wh = _pair(np.zeros((3, 6)))
    g = ig.build_graph(Wl, Wh, ProbeWindow(0, 1, 0, 5))
    assert g.intervals == [] and g.edges() == []
    assert ig.graph_nesting_check(g, g)["violations"] == 0


def test_seeded_graph_laws(seeded, field_mid):
    Wl, Wh, g = seeded
    es = ig.detect_edges(Wl, Wh)
    assert es.monotonicity_violations == 0
    assert g.edge_mask.any() and g.intervals
    for iv in g.intervals:
        assert iv.start < iv.end and iv.proper[1:-1].all()
    eq = ig.instability_equivalence_check(Wl, Wh, g)
    assert min(eq["ii_vs_graph"], eq["iii_vs_graph"], eq["iv_vs_graph"]) == 1.0
    Ml, Mh = gd.argmax_maps(field_mid, Wl), gd.argmax_maps(field_mid, Wh)
    assert ig.geometric_edge_check(g, Ml, Mh).agreement >= 0.9
    assert ig.geometric_point_check(g, Ml, Mh).agreement >= 0.9


def test_nesting_widened(field_mid):
    spec = field_mid.spec
    prof = lambda th: bz.reverse_profile(field_mid, bz.make_target(spec, 150, th))
    outer_lo, inner_lo, inner_hi, outer_hi = (prof(x) for x in (0.7, 0.8, 1.2, 1.3))
    win = ig.default_window(outer_lo)
    inner = ig.build_graph(inner_lo, inner_hi, win)
    outer = ig.build_graph(outer_lo, outer_hi, win)
    assert ig.graph_nesting_check(inner, outer)["violations"] == 0
    assert ig.graph_nesting_check(inner, inner)["violations"] == 0


def test_common_ancestor_and_slopes(seeded, field_mid):
    _, _, g = seeded
    iv = max(g.intervals, key=lambda v: v.end - v.start)
    x, y = (iv.level, iv.start + 1), (iv.level, iv.end - 1)
    assert ig.find_common_ancestor(g, x, y) == y
    off = np.argwhere(~g.membership())[0]
    with pytest.raises(ValueError):
        ig.find_common_ancestor(g, (g.window.level_lo + off[0], g.window.i_lo + off[1]), x)
    a, b = ig.path_slopes(g, (iv.level, iv.start), field_mid.spec.delta, levels_min=1)
    assert all(np.isnan(v) or v >= 0 for v in (a, b))


def test_boxcount_fixtures():
    assert abs(ig.boxcount_dimension([3.0], 0.01, span=10.0, lo=0.0)) < 1e-9
    full = np.arange(0, 10, 0.01)
    assert ig.boxcount_dimension(full, 0.01) == pytest.approx(1.0, abs=0.05)
    slopes = [ig.boxcount_dimension(ig.brownian_zero_set(2**18, s), 1.0, span=2**18, lo=0.0) for s in range(5)]
    assert abs(np.mean(slopes) - 0.5) <= 0.15
    with pytest.raises(ValueError):
        ig.boxcount_dimension([0.0, 1.0], 1.0, span=4.0)
