import json
import subprocess
import sys
import time

import pytest

from artifact import cli
from artifact.env import load_field

SMALL = ["--levels", "0..120", "--window", "-10..200", "--delta", "0.1", "--horizon", "100"]


def test_dump_config_round_trip(tmp_path, capsys):
    assert cli.main(["--dump-config"]) == 0
    text = capsys.readouterr().out
    p = tmp_path / "c.ini"
    p.write_text(text)
    cfg = cli.load_config(p)
    assert cfg.eta == 0.05 and cfg.gamma == 0.8 and cfg.spec.level_max == 400


def test_config_errors(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert cli.main(["--out", out, "ig", "--eta", "0"]) == 2
    assert cli.main(["--out", out, "ig", "--gamma", "1.3"]) == 2
    assert cli.main(["--out", out, "ig", "--horizon", "9999"]) == 2
    p = tmp_path / "bad.ini"
    p.write_text("[field]\ndelta = nope\n")
    assert cli.main(["--config", str(p), "--out", out, "ig"]) == 2
    assert cli.main(["--out", out, "geodesics", "--field", str(tmp_path / "missing.blpp")]) == 2
    assert "config error" in capsys.readouterr().err


def test_gen_example(tmp_path):
    out = tmp_path / "f.blpp"
    assert cli.main(["gen", "--seed", "7", "--levels", "0..256", "--window", "-50..300", "--delta", "0.05",
                     "-o", str(out)]) == 0
    f = load_field(out)
    assert (f.spec.seed, f.spec.level_max, f.spec.t_min, f.spec.delta) == (7, 256, -50.0, 0.05)


def test_pipelines_write_exports(tmp_path):
    out = str(tmp_path / "o")
    assert cli.main(["--out", out, "ig", "--gamma", "0.8", "--delta-dir", "1.2", "--eta", "0.05", *SMALL]) == 0
    g = json.loads((tmp_path / "o" / "ig.json").read_text())
    assert g["intervals"] and g["edges"]
    assert (tmp_path / "o" / "ig.svg").read_text().startswith("<svg")
    for cmd in (["profiles"], ["geodesics", "--count", "5"], ["shocks"], ["cif", "--root", "3,40"], ["reconstruct"]):
        assert cli.main(["--out", out, *cmd, *SMALL]) == 0
    names = {p.name for p in (tmp_path / "o").iterdir()}
    assert {"profile-1.csv", "geodesics.csv", "geodesics.svg", "shocks.json", "shock-tree.svg", "cif.csv",
            "skeleton.json", "skeleton-score.json", "skeleton.svg"} <= names
    assert not any(n.startswith(".tmp") for n in names)


def test_verify_smoke_and_injection(tmp_path, capsys):
    out = str(tmp_path / "o")
    t0 = time.perf_counter()
    assert cli.main(["--out", out, "verify", "--smoke"]) == 0
    assert time.perf_counter() - t0 < 60
    rep = json.loads((tmp_path / "o" / "verify.json").read_text())
    assert rep["failed"] == [] and all(c["anchor"] for c in rep["seeds"]["0"])
    capsys.readouterr()
    assert cli.main(["--out", out, "verify", "--smoke", "--inject-failure", "monotonicity"]) == 1
    assert "busemann_monotonicity" in capsys.readouterr().out


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "artifact.cli", "--dump-config"], capture_output=True, text=True)
    assert r.returncode == 0 and "[instability]" in r.stdout
