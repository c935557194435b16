import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgmvortex.cli import (
    ConfigError,
    RunConfig,
    format_config,
    main,
    parse_config,
    parse_sweep,
    read_field,
)
from kgmvortex.cylgrid import CylGrid
from kgmvortex.model import ModelParams
from kgmvortex.solver import SolverOptions

SMALL = """
# small, fast grid
params.omega = {omega}
params.k = {k}
params.p = 4.0
grid.r_max = 6.0
grid.z_half = 6.0
grid.nr = 16
grid.nz = 32
solver.grad_tol = 1e-7
{extra}
"""


def write_cfg(tmp_path, name="run.cfg", omega=0.0, k=1, extra=""):
    path = tmp_path / name
    path.write_text(SMALL.format(omega=omega, k=k, extra=extra))
    return path


def strip_time(doc):
    doc = dict(doc)
    doc.pop("timestamp")
    return doc


def test_config_roundtrip_idempotent(tmp_path):
    cfg = parse_config(write_cfg(tmp_path).read_text())
    text = format_config(cfg)
    assert parse_config(text) == cfg
    assert format_config(parse_config(text)) == text


@settings(max_examples=30, deadline=None)
@given(omega=st.floats(-0.99, 0.99), k=st.integers(-5, 5), nr=st.integers(4, 200),
       tol=st.floats(1e-12, 1e-2), out=st.text("abcxyz_/", min_size=1, max_size=10),
       mode=st.sampled_from(["gradient_flow", "mountain_pass"]))
def test_config_roundtrip_property(omega, k, nr, tol, out, mode):
    cfg = RunConfig(ModelParams(omega, k, 4.0), CylGrid(7.5, 3.25, nr, 8),
                    SolverOptions(grad_tol=tol, mode=mode), out, 5)
    text = format_config(cfg)
    assert parse_config(text) == cfg
    assert format_config(parse_config(text)) == text


@pytest.mark.parametrize("text", ["params.omega 0.1", "omega = 0.1", "params.spin = 1",
                                  "bogus.key = 1", "params.k = one", "grid.nr = 2",
                                  "params.k = 1\nparams.k = 2", "solver.mode = newton"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_sweep_parse():
    spec = parse_sweep("sweep.omega_values = 0, 0.3\nsweep.k_values = 0,1,2\nsweep.p = 4\n")
    assert len(spec.points()) == 6 and spec.resume
    assert {(c.params.omega, c.params.k) for c in spec.points()} == {
        (w, k) for w in (0.0, 0.3) for k in (0, 1, 2)}


def test_solve_outputs(tmp_path):
    out = tmp_path / "o"
    code = main(["solve", "--config", str(write_cfg(tmp_path)), "--out", str(out)])
    assert code == 0
    names = {"report.json", "u.csv", "b.csv", "phi.csv", "energy.csv"}
    assert names <= {p.name for p in out.iterdir()}
    doc = json.loads((out / "report.json").read_text())
    assert doc["result"]["converged"] and doc["result"]["energy"]["phi_field"] == 0.0
    g = CylGrid(6.0, 6.0, 16, 32)
    with open(out / "u.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "z", "value"] and len(rows) == g.size + 1
    rz = [(float(a), float(b)) for a, b, _ in rows[1:]]
    assert rz == sorted(rz)
    assert np.all(read_field(out / "phi.csv", g) == 0.0)
    u = read_field(out / "u.csv", g)
    assert u.max() > 0.1


def test_solve_deterministic(tmp_path):
    cfg = write_cfg(tmp_path)
    main(["solve", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["solve", "--config", str(cfg), "--out", str(tmp_path / "b")])
    a = json.loads((tmp_path / "a" / "report.json").read_text())
    b = json.loads((tmp_path / "b" / "report.json").read_text())
    assert strip_time(a) == strip_time(b)
    for f in ("u.csv", "b.csv", "phi.csv", "energy.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_solve_inadmissible(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("params.omega = 0.9\nparams.p = 3\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 1
    assert "ω² < min(1,(p−2)/2)" in capsys.readouterr().err


def test_solve_unreadable(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_solve_not_converged(tmp_path):
    cfg = write_cfg(tmp_path, extra="solver.max_iters = 2")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "nc")]) == 2
    doc = json.loads((tmp_path / "nc" / "report.json").read_text())
    assert doc["result"]["converged"] is False


def test_sweep_and_resume(tmp_path):
    sweep = tmp_path / "sweep.cfg"
    body = SMALL.format(omega=0.0, k=1, extra="sweep.omega_values = 0, 0.3\nsweep.k_values = 0, 1, 2")
    sweep.write_text(body)
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(sweep), "--out", str(out), "--workers", "2"]) == 0
    dirs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert dirs == ["w0.3_k0", "w0.3_k1", "w0.3_k2", "w0_k0", "w0_k1", "w0_k2"]
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    for row in rows:
        if float(row["omega"]) == 0.0:
            assert float(row["phi_field"]) == 0.0
    before = {d: (out / d / "report.json").read_bytes() for d in dirs}
    assert main(["sweep", "--config", str(sweep), "--out", str(out)]) == 0
    after = {d: (out / d / "report.json").read_bytes() for d in dirs}
    assert before == after


def test_sweep_rejects_inadmissible_point(tmp_path):
    sweep = tmp_path / "sweep.cfg"
    sweep.write_text("sweep.omega_values = 0, 0.9\nsweep.k_values = 1\nsweep.p = 3\n")
    assert main(["sweep", "--config", str(sweep), "--out", str(tmp_path / "s")]) == 1


def test_verify_suites(tmp_path, capsys):
    assert main(["verify", "--suite", "gauge", "--out", str(tmp_path / "v")]) == 0
    doc = json.loads((tmp_path / "v" / "gauge_inequivalence.json").read_text())
    assert all(r >= 2 for r in doc["measurements"]["ratios"])
    assert main(["verify", "--suite", "unknown"]) == 1
    assert "usage" in capsys.readouterr().err


def test_export(tmp_path):
    mag = tmp_path / "mag"
    main(["solve", "--config", str(write_cfg(tmp_path)), "--out", str(mag)])
    for what in ("fields", "hfield", "efield"):
        assert main(["export", str(mag), what]) == 0
    with open(mag / "export_efield.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert all(float(r["E_mag"]) == 0.0 for r in rows)
    with open(mag / "export_hfield.csv") as fh:
        H = np.array([float(r["H_mag"]) for r in csv.DictReader(fh)])
    assert np.all(np.isfinite(H)) and H.max() > 0

    el = tmp_path / "el"
    main(["solve", "--config", str(write_cfg(tmp_path, "e.cfg", omega=0.5, k=0)), "--out", str(el)])
    assert main(["export", str(el), "hfield"]) == 0
    with open(el / "export_hfield.csv") as fh:
        assert all(float(r["H_mag"]) == 0.0 for r in csv.DictReader(fh))
    assert main(["export", str(tmp_path / "nowhere"), "fields"]) == 1
    assert main(["export", str(mag), "bfield"]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "kgmvortex", "verify", "--suite", "nope"],
                         capture_output=True, text=True)
    assert res.returncode == 1
