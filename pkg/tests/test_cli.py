import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from pwlandscape import config
from pwlandscape.cli import run
from pwlandscape.errors import ConfigError

SMALL = ["basis.W=20.0", "basis.L=50.0", "grid.hi=[20.0]", "weyl.hi=[20.0]",
         "weyl.energies={start=0.0, stop=20.0, num=81}", "analysis.K=3"]
CONST = ['potential1={type="modes", modes=[[0, 3.0, 0.0]]}', 'potential2={type="modes", modes=[[0, 2.0, 0.0]]}']


def read(path):
    return json.loads(path.read_text())


def test_landscape_constant_override(tmp_path):
    assert run("landscape", "example1", SMALL + CONST, out=str(tmp_path)) == 0
    veff = np.loadtxt(tmp_path / "veff.csv", delimiter=",", skiprows=1)
    assert np.all(veff[:, 1] == 5.0)
    u = np.loadtxt(tmp_path / "u.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(u[:, 1], 0.2, rtol=1e-14)
    assert (tmp_path / "veff.csv").read_text().splitlines()[0] == "x,value"


def test_idos_manifest(tmp_path):
    assert run("idos", "example1", SMALL, out=str(tmp_path), seed=3) == 0
    m = read(tmp_path / "manifest.json")
    assert m["config"]["seed"] == 3
    assert m["config"]["basis"]["W"] == 20.0
    assert set(m["versions"]) >= {"python", "numpy", "scipy", "pwlandscape"}
    fits = m["results"]["idos"]["fits"]
    assert set(fits) == {"full", "half"}
    assert set(fits["full"]) == {"standard", "effective"}
    for name, digest in m["outputs"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
    head = (tmp_path / "idos.csv").read_text().splitlines()[0]
    assert head == "E,N_counting,N_weyl_standard,N_weyl_effective,c_fit_applied"
    assert "incommensurability" in m["results"]


def test_deterministic_outputs(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run("example1", None, SMALL + ["weyl.mc_samples=20000"], out=str(d), seed=5) == 0
        outs.append(d)
    names = sorted(p.name for p in outs[0].iterdir() if p.suffix == ".csv")
    assert {"idos.csv", "veff_minima.csv", "density_maxima.csv", "bound.csv", "density.csv"} <= set(names)
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    assert read(outs[0] / "manifest.json")["results"]["idos"]["mc_check"] == \
        read(outs[1] / "manifest.json")["results"]["idos"]["mc_check"]


def test_missing_key_exit_2(tmp_path):
    code = run("landscape", "example1", ["basis={L=50.0}"], out=str(tmp_path))
    assert code == 2
    err = read(tmp_path / "error.json")
    assert "basis.W" in err["keys"]
    assert err["exit_code"] == 2
    assert not list(tmp_path.glob("*.csv"))
    assert not (tmp_path / "manifest.json").exists()


def test_unknown_key_exit_2(tmp_path):
    assert run("landscape", "example1", ["grid.spacing=0.1"], out=str(tmp_path)) == 2
    assert "grid.spacing" in read(tmp_path / "error.json")["keys"]


def test_numerical_failure_exit_1_removes_outputs(tmp_path):
    assert run("landscape", "example1", SMALL, out=str(tmp_path)) == 0
    assert (tmp_path / "u.csv").exists()
    code = run("spectrum", "example1", SMALL + ["landscape.max_iter=1", "landscape.tol=1e-14"],
               out=str(tmp_path))
    # spectrum does not touch the landscape solver
    assert code == 0
    code = run("landscape", "example1", SMALL + ["landscape.max_iter=1", "landscape.tol=1e-14"],
               out=str(tmp_path))
    assert code == 1
    err = read(tmp_path / "error.json")
    assert err["error"] == "NotConverged"
    assert not (tmp_path / "manifest.json").exists()
    assert not (tmp_path / "u.csv").exists()


def test_new_run_replaces_previous_outputs(tmp_path):
    assert run("landscape", "example1", SMALL, out=str(tmp_path)) == 0
    (tmp_path / "notes.txt").write_text("mine")
    assert run("spectrum", "example1", SMALL, out=str(tmp_path)) == 0
    assert not (tmp_path / "u.csv").exists()
    assert (tmp_path / "notes.txt").exists()
    assert list(read(tmp_path / "manifest.json")["outputs"]) == ["spectrum.csv"]


def test_config_file_with_expressions(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("""
dim = 1
[lattice]
a1 = "2 * 1"
a2 = "sqrt(5) - 1"
[potential1]
type = "gaussian"
s = 3
gamma = 0.05
[potential2]
type = "gaussian"
s = 2
gamma = "1/20"
[basis]
W = 10
L = 20
[grid]
lo = [0]
hi = [5]
""")
    out = tmp_path / "out"
    assert run("spectrum", str(cfg), out=str(out), dump_matrix=True) == 0
    m = read(out / "manifest.json")
    assert m["config"]["lattice"]["a2"] == pytest.approx(np.sqrt(5) - 1, rel=1e-15)
    assert "hamiltonian.coo" in m["outputs"]
    lam = np.loadtxt(out / "spectrum.csv", delimiter=",", skiprows=1)
    assert np.all(np.diff(lam[:, 1]) >= 0)


def test_bad_toml_and_missing_file(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("dim = = 1")
    assert run("landscape", str(bad), out=str(tmp_path / "o")) == 2
    assert run("landscape", str(tmp_path / "nope.toml"), out=str(tmp_path / "o")) == 2


def test_float_format(tmp_path):
    assert run("spectrum", "example1", SMALL + ['output.float_format=".3f"'], out=str(tmp_path)) == 0
    line = (tmp_path / "spectrum.csv").read_text().splitlines()[1]
    j, lam = line.split(",")
    assert j == "1" and len(lam.split(".")[1]) == 3


def test_expression_evaluator_is_restricted():
    assert config.parse_number("2*pi") == pytest.approx(2 * np.pi)
    with pytest.raises(ValueError):
        config.parse_number("__import__('os').getcwd()")
    with pytest.raises(ValueError):
        config.parse_number("(1).real")


def test_override_parsing():
    raw = config.apply_overrides({"a": {"b": 1}}, ["a.b=[1, 2]", "c.d=true", "e=word"])
    assert raw == {"a": {"b": [1, 2]}, "c": {"d": True}, "e": "word"}
    with pytest.raises(ConfigError):
        config.apply_overrides({}, ["novalue"])


def test_recipes_validate():
    for name in ("example1", "example2"):
        cfg = config.validate(config.recipe(name))
        assert cfg.dim == (1 if name == "example1" else 2)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pwlandscape.cli", "landscape", "--config", "example1",
                           "--out", str(tmp_path), "--threads", "1"] + sum((["--set", s] for s in SMALL), []),
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "manifest.json").exists()
