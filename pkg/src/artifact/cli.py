"""blpp: generate fields, run the pipelines, export artifacts, and verify invariants.

Exit codes: 0 pass, 1 check failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import busemann as bz
from . import cif as cf
from . import geodesics as gd
from . import instability as ig
from . import reconstruct as rc
from . import render
from . import shocks as sh
from . import verify as vf
from .env import FieldFormatError, FieldSpec, generate_field, load_field, save_field

DEFAULTS = """\
[field]
seed = 0
level_min = 0
level_max = 400
t_min = -20
t_max = 500
delta = 0.1

[busemann]
thetas = 0.6, 1.0, 1.6
horizon = 200
horizon_doubled = 400
eta = 0.05

[instability]
gamma = 0.8
delta_dir = 1.2
tol = 1e-9

[shocks]
eps = auto
match_radius = 2

[cif]
band = auto
roots = 12
levels = 100

[verify]
seeds = 0, 1, 2, 3, 4
workers = 1

[output]
dir = blpp-out
"""


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    spec: FieldSpec
    thetas: tuple = (0.6, 1.0, 1.6)
    horizon: int = 200
    horizon_doubled: int = 400
    eta: float = 0.05
    gamma: float = 0.8
    delta_dir: float = 1.2
    tol: float = 1e-9
    eps: float | None = None
    match_radius: int = 2
    band: float | None = None
    cif_roots: int = 12
    cif_levels: int = 100
    seeds: tuple = (0, 1, 2, 3, 4)
    workers: int = 1
    out_dir: str = "blpp-out"
    extra: dict = dc_field(default_factory=dict)

    def validate(self):
        s = self.spec
        if self.eta <= 0:
            raise ConfigError(f"eta must be > 0, got {self.eta}")
        if not self.gamma < self.delta_dir:
            raise ConfigError(f"need gamma < delta_dir, got {self.gamma} >= {self.delta_dir}")
        if min(self.thetas) <= 0 or self.gamma <= 0:
            raise ConfigError("directions must be positive")
        if not s.level_min < self.horizon <= s.level_max:
            raise ConfigError(f"horizon {self.horizon} outside levels {s.level_min}..{s.level_max}")
        hi_dir = max(max(self.thetas), self.delta_dir * (1 + self.eta))
        if hi_dir * self.horizon > s.t_max:
            raise ConfigError(f"target time {hi_dir * self.horizon:g} beyond t_max = {s.t_max:g}")
        if self.match_radius < 0 or self.tol < 0:
            raise ConfigError("match_radius and tol must be nonnegative")
        return self

    def params(self, inject="") -> vf.Params:
        return vf.Params(tuple(self.thetas), self.horizon, self.horizon_doubled, self.eta, self.gamma,
                         self.delta_dir, self.tol, self.match_radius, self.cif_roots, self.cif_levels, inject=inject)


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _auto(s):
    return None if s.strip().lower() == "auto" else float(s)


def load_config(path=None, overrides=None) -> RunConfig:
    cp = configparser.ConfigParser()
    cp.read_string(DEFAULTS)
    if path:
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
    for (sec, key), val in (overrides or {}).items():
        if val is not None:
            cp.set(sec, key, str(val))
    try:
        f = cp["field"]
        spec = FieldSpec(f.getint("level_min"), f.getint("level_max"), f.getfloat("t_min"), f.getfloat("t_max"),
                         f.getfloat("delta"), f.getint("seed"))
        b, i, s, c, v = cp["busemann"], cp["instability"], cp["shocks"], cp["cif"], cp["verify"]
        cfg = RunConfig(
            spec, _floats(b["thetas"]), b.getint("horizon"), b.getint("horizon_doubled"), b.getfloat("eta"),
            i.getfloat("gamma"), i.getfloat("delta_dir"), i.getfloat("tol"), _auto(s["eps"]), s.getint("match_radius"),
            _auto(c["band"]), c.getint("roots"), c.getint("levels"),
            tuple(int(x) for x in v["seeds"].split(",") if x.strip()), v.getint("workers"), cp["output"]["dir"])
    except (ValueError, KeyError) as e:
        raise ConfigError(str(e)) from e
    return cfg.validate()


# exports -----------------------------------------------------------------------

def _atomic_write(path, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def write_json(path, obj):
    _atomic_write(path, json.dumps(obj, indent=1, default=_plain) + "\n")


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    _atomic_write(path, buf.getvalue())


def _range(s, cast):
    a, b = s.split("..")
    return cast(a), cast(b)


# commands ------------------------------------------------------------------------

def _field(args, cfg: RunConfig):
    if getattr(args, "field", None):
        try:
            return load_field(args.field)
        except FieldFormatError as e:
            raise ConfigError(f"bad field file: {e}") from e
        except OSError as e:
            raise ConfigError(f"cannot open field file: {e}") from e
    return generate_field(cfg.spec)


def cmd_gen(args, cfg):
    f = generate_field(cfg.spec)
    out = args.out or os.path.join(cfg.out_dir, f"field-{cfg.spec.seed}.blpp")
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    save_field(f, out)
    print(out)
    return 0


def cmd_profiles(args, cfg):
    f = _field(args, cfg)
    spec = f.spec
    os.makedirs(cfg.out_dir, exist_ok=True)
    theta = args.theta
    W = bz.reverse_profile(f, bz.make_target(spec, cfg.horizon, theta))
    win = bz.default_probe_window(spec, W.target)
    rows = []
    for m in win.levels():
        D = bz.horizontal_profile(W, m, win)
        rows.extend((m, float(t), float(d)) for t, d in zip(spec.time_of(win.indices()), D))
    write_csv(os.path.join(cfg.out_dir, f"profile-{theta:g}.csv"), ["level", "time", "D"], rows)
    rep = vf.stabilization_diagnostic(f, theta, cfg.horizon, cfg.horizon_doubled, 200, spec.seed) \
        if cfg.horizon_doubled <= spec.level_max and theta * cfg.horizon_doubled <= spec.t_max else {}
    write_json(os.path.join(cfg.out_dir, f"stabilization-{theta:g}.json"), rep)
    return 0


def cmd_geodesics(args, cfg):
    f = _field(args, cfg)
    spec = f.spec
    W = bz.reverse_profile(f, bz.make_target(spec, cfg.horizon, args.theta))
    M = gd.argmax_maps(f, W)
    win = bz.default_probe_window(spec, W.target)
    top = M.probe_horizon()
    origins = [(win.level_lo, int(i)) for i in np.linspace(win.i_lo, win.i_hi, args.count).astype(int)]
    paths = [M.geodesic(o, args.side, top) for o in origins]
    rows = [(k, o[0], o[1], lv, t) for k, (o, p) in enumerate(zip(origins, paths)) for lv, t in p.to_rows(spec)]
    write_csv(os.path.join(cfg.out_dir, "geodesics.csv"), ["path", "origin_level", "origin_index", "level", "time"], rows)
    _atomic_write(os.path.join(cfg.out_dir, "geodesics.svg"), render.svg_fan(paths, spec))
    return 0


def _pair(f, cfg):
    spec = f.spec
    lo_t = bz.surrogate_directions(cfg.gamma, cfg.eta)[0]
    hi_t = bz.surrogate_directions(cfg.delta_dir, cfg.eta)[1]
    Wl = bz.reverse_profile(f, bz.make_target(spec, cfg.horizon, lo_t))
    Wh = bz.reverse_profile(f, bz.make_target(spec, cfg.horizon, hi_t))
    return Wl, Wh


def _classified(f, cfg, Wl, Wh, win):
    Ml, Mh = gd.argmax_maps(f, Wl), gd.argmax_maps(f, Wh)
    lv = range(win.level_lo, win.level_hi + 2)
    bl = sh.detect_branches(Ml, levels=lv, lo=win.i_lo, hi=win.i_hi)
    bh = sh.detect_branches(Mh, levels=lv, lo=win.i_lo, hi=win.i_hi)
    # classification uses every branch unless an explicit eps is configured
    eps = np.inf if cfg.eps is None else cfg.eps
    sl, shh = sh.shock_set(bl, eps, ("gamma-",)), sh.shock_set(bh, eps, ("delta+",))
    return Ml, Mh, sl, shh, sh.classify(sl, shh, cfg.match_radius)


def cmd_shocks(args, cfg):
    f = _field(args, cfg)
    spec = f.spec
    W = bz.reverse_profile(f, bz.make_target(spec, cfg.horizon, args.theta))
    M = gd.argmax_maps(f, W)
    win = bz.default_probe_window(spec, W.target)
    br = sh.detect_branches(M, levels=win.levels(), lo=win.i_lo, hi=win.i_hi)
    eps = sh.default_eps(M) if cfg.eps is None else cfg.eps
    S = sh.shock_set(br, eps, (args.theta,))
    tree = sh.build_tree(S, M)
    _atomic_write(os.path.join(cfg.out_dir, "shocks.json"), S.to_json(spec))
    _atomic_write(os.path.join(cfg.out_dir, "shock-tree.json"), tree.to_json())
    curve = sh.shock_count_curve(br, np.geomspace(1e-3, max(eps, 1e-2) * 2, 12))
    write_csv(os.path.join(cfg.out_dir, "shock-count.csv"), ["eps", "count"], curve)
    cls = sh.Classification([], [], list(S), cfg.match_radius)
    _atomic_write(os.path.join(cfg.out_dir, "shock-tree.svg"),
                  render.svg_shocks(cls, spec, win.level_lo, win.level_hi, spec.time_of(win.i_lo),
                                    spec.time_of(win.i_hi), tree))
    return 0


def cmd_ig(args, cfg):
    f = _field(args, cfg)
    Wl, Wh = _pair(f, cfg)
    g = ig.build_graph(Wl, Wh, None, cfg.tol, {"gamma": cfg.gamma, "delta": cfg.delta_dir, "eta": cfg.eta})
    write_json(os.path.join(cfg.out_dir, "ig.json"), g.to_dict(f.spec))
    _atomic_write(os.path.join(cfg.out_dir, "ig.svg"), render.svg_graph(g, f.spec))
    print(f"{len(g.intervals)} intervals, {int(g.edge_mask.sum())} edges")
    return 0


def cmd_cif(args, cfg):
    f = _field(args, cfg)
    spec = f.spec
    m, t = args.root.split(",")
    root = (int(m), spec.index_of(float(t)))
    N = min(root[0] + (args.levels or cfg.cif_levels), spec.level_max)
    pair = cf.trace_both(f, root, N)
    rows = [(side, lv, tm) for side, c in (("L", pair.L), ("R", pair.R)) for lv, tm in c.to_rows(spec)]
    write_csv(os.path.join(cfg.out_dir, "cif.csv"), ["side", "level", "time"], rows)
    _atomic_write(os.path.join(cfg.out_dir, "cif-directions.json"),
                  cf.directions_table([cf.directions_from(pair, spec.delta)]))
    return 0


def cmd_reconstruct(args, cfg):
    f = _field(args, cfg)
    spec = f.spec
    Wl, Wh = _pair(f, cfg)
    g = ig.build_graph(Wl, Wh, None, cfg.tol)
    win = g.window
    *_, cls = _classified(f, cfg, Wl, Wh, win)
    sk = rc.reconstruct_skeleton(rc.as_points(cls.only_b, spec), rc.as_points(cls.only_a, spec),
                                 window_end=float(spec.time_of(win.i_hi)))
    score = rc.compare_graphs(sk, g, spec)
    _atomic_write(os.path.join(cfg.out_dir, "skeleton.json"), sk.to_json())
    write_json(os.path.join(cfg.out_dir, "skeleton-score.json"), score.to_dict())
    _atomic_write(os.path.join(cfg.out_dir, "skeleton.svg"), render.svg_skeleton_overlay(sk, g, spec))
    print(json.dumps(score.to_dict(), default=_plain))
    return 0


def _verify_one(args):
    spec, params, smoke = args
    return spec.seed, [r.to_dict() for r in vf.run_seed(spec, params, smoke)]


def cmd_verify(args, cfg):
    seeds = cfg.seeds[:1] if args.smoke else cfg.seeds
    params = cfg.params(args.inject or "")
    jobs = [(vf.seed_spec(cfg.spec, s), params, args.smoke) for s in seeds]
    t0 = time.perf_counter()
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            results = list(ex.map(_verify_one, jobs))
    else:
        results = [_verify_one(j) for j in jobs]
    failed = []
    lines = []
    report = {"seeds": {}, "failed": failed}
    for seed, checks in results:
        report["seeds"][seed] = checks
        for c in checks:
            lines.append(f"seed {seed:>3}  {c['name']:<26} {c['status']:<9} {c['anchor']}")
            if c["status"] == vf.FAIL:
                failed.append(f"{c['name']}@{seed}")
    report["seconds"] = time.perf_counter() - t0
    write_json(os.path.join(cfg.out_dir, "verify.json"), report)
    text = "\n".join(lines) + f"\n{'FAILED: ' + ', '.join(failed) if failed else 'all hard checks pass'}\n"
    _atomic_write(os.path.join(cfg.out_dir, "verify.txt"), text)
    sys.stdout.write(text)
    return 1 if failed else 0


COMMANDS = {"gen": cmd_gen, "profiles": cmd_profiles, "geodesics": cmd_geodesics, "shocks": cmd_shocks,
            "ig": cmd_ig, "cif": cmd_cif, "reconstruct": cmd_reconstruct, "verify": cmd_verify}


def build_parser():
    p = argparse.ArgumentParser(prog="blpp", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key = value config file with sections")
    p.add_argument("--dump-config", action="store_true", help="print the default config and exit")
    p.add_argument("--out", dest="out_dir", help="output directory")
    sub = p.add_subparsers(dest="cmd")

    def field_opts(q):
        q.add_argument("--field", help="field file from `gen` (otherwise generated from the config)")
        q.add_argument("--seed", type=int)
        q.add_argument("--levels", dest="level_range", help="LO..HI")
        q.add_argument("--window", help="TMIN..TMAX")
        q.add_argument("--delta", type=float)
        q.add_argument("--horizon", type=int)

    q = sub.add_parser("gen", help="generate and save a field")
    field_opts(q)
    q.add_argument("-o", "--output", dest="out", help="field file path")
    for name in ("profiles", "geodesics", "shocks"):
        q = sub.add_parser(name)
        field_opts(q)
        q.add_argument("--theta", type=float, default=1.0)
        if name == "geodesics":
            q.add_argument("--side", choices=("L", "R"), default="L")
            q.add_argument("--count", type=int, default=40)
    for name in ("ig", "reconstruct"):
        q = sub.add_parser(name)
        field_opts(q)
        q.add_argument("--gamma", type=float)
        q.add_argument("--delta-dir", type=float)
        q.add_argument("--eta", type=float)
    q = sub.add_parser("cif")
    field_opts(q)
    q.add_argument("--root", required=True, help="LEVEL,TIME")
    q.add_argument("--cif-levels", dest="levels", type=int)
    q = sub.add_parser("verify")
    field_opts(q)
    q.add_argument("--smoke", action="store_true", help="first seed only, reduced check set")
    q.add_argument("--seeds", help="comma-separated seeds")
    q.add_argument("--workers", type=int)
    q.add_argument("--inject-failure", dest="inject", choices=("monotonicity",), help="fault injection fixture")
    return p


def _overrides(a) -> dict:
    o = {}
    g = lambda k: getattr(a, k, None)
    o["field", "seed"] = g("seed")
    o["field", "delta"] = g("delta")
    if g("level_range"):
        lo, hi = _range(a.level_range, int)
        o["field", "level_min"], o["field", "level_max"] = lo, hi
    if g("window"):
        lo, hi = _range(a.window, float)
        o["field", "t_min"], o["field", "t_max"] = lo, hi
    o["busemann", "horizon"] = g("horizon")
    o["busemann", "eta"] = g("eta")
    o["instability", "gamma"] = g("gamma")
    o["instability", "delta_dir"] = g("delta_dir")
    o["verify", "seeds"] = g("seeds")
    o["verify", "workers"] = g("workers")
    o["output", "dir"] = g("out_dir")
    return o


def _join_ranges(argv):
    """Let `--window -50..300` through: argparse would take the value for an option."""
    out = []
    it = iter(argv)
    for a in it:
        if a in ("--window", "--levels"):
            out.append(f"{a}={next(it, '')}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_ranges(sys.argv[1:] if argv is None else list(argv)))
    if args.dump_config:
        sys.stdout.write(DEFAULTS)
        return 0
    if not args.cmd:
        parser.print_help()
        return 2
    try:
        ov = _overrides(args)
        if args.cmd == "gen" and args.level_range and not getattr(args, "horizon", None):
            # a bare field spec need not host the default pipeline horizon
            lo, hi = _range(args.level_range, int)
            ov["busemann", "horizon"] = max(lo + 1, min(200, hi))
        cfg = load_config(args.config, ov) if args.cmd != "gen" else _gen_config(args.config, ov)
        return COMMANDS[args.cmd](args, cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def _gen_config(path, ov) -> RunConfig:
    """Field-only validation for `gen`."""
    try:
        return load_config(path, ov)
    except ConfigError as e:
        if "horizon" in str(e) or "target time" in str(e):
            cp = configparser.ConfigParser()
            cp.read_string(DEFAULTS)
            if path:
                cp.read(path)
            for (sec, key), val in ov.items():
                if val is not None:
                    cp.set(sec, key, str(val))
            f = cp["field"]
            try:
                spec = FieldSpec(f.getint("level_min"), f.getint("level_max"), f.getfloat("t_min"),
                                 f.getfloat("t_max"), f.getfloat("delta"), f.getint("seed"))
            except ValueError as e2:
                raise ConfigError(str(e2)) from e2
            return RunConfig(spec, out_dir=cp["output"]["dir"])
        raise


if __name__ == "__main__":
    sys.exit(main())
