from __future__ import annotations

import csv
import io
import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from oracles import square_well_bound_states, square_well_scattering_length

from besselkit import cli
from besselkit import jost_spectral as js
from besselkit.errors import ConfigError
from besselkit.model import Tabulated, write_tabulated


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


# ----------------------------------------------------------------- parsing


@pytest.mark.parametrize("text, z", [
    ("1.5", 1.5), ("2+3i", 2 + 3j), ("-1-0.5i", -1 - 0.5j), ("i", 1j), ("-i", -1j),
    ("1e-3+2e1j", 1e-3 + 20j), ("inf", complex(math.inf, 0)),
])
def test_parse_complex(text, z):
    assert cli.parse_complex(text) == z


@pytest.mark.parametrize("text", ["", "abc", "1+2k", "import os"])
def test_parse_complex_rejects(text):
    with pytest.raises(ConfigError):
        cli.parse_complex(text)


def test_config_text():
    assert cli.parse_config_text("# comment\nm = 0.3  # order\n\nk=1+i\n") == {"m": "0.3", "k": "1+i"}
    with pytest.raises(ConfigError):
        cli.parse_config_text("just words")


def test_config_file_and_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("command = jost\npotential = well\nm = 0.3\nxmax = 9\ngrid_n = 512\n")
    cfg = cli.build_config(["--config", str(path), "m=0.4", "--xmax", "7"])
    assert cfg.command == "jost"
    assert cfg.get_complex("m") == 0.4
    assert cfg.x_max == 7.0 and cfg.grid_n == 512 and cfg.x_min is None
    cfg = cli.build_config(["--config", str(path), "--grid-n", "256"])
    assert cfg.grid_n == 256 and cfg.x_max == 9.0


def test_bare_potential_token():
    assert cli.build_config(["jost", "coulomb"]).get_str("potential") == "coulomb"


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("BESSELKIT_THREADS", "3")
    assert cli.build_config(["selftest"]).threads == 3
    assert cli.build_config(["selftest", "--threads", "2"]).threads == 2


# ---------------------------------------------------------------- commands


def test_selftest_passes(capsys):
    code, out, _ = run_cli(capsys, "selftest")
    assert code == 0
    assert all(r["pass"] == "True" for r in csv_rows(out))


def test_jost_zero_potential(capsys):
    code, out, _ = run_cli(capsys, "jost", "zero", "k=1.5")
    rows = csv_rows(out)
    assert code == 0 and float(rows[0]["re_jost"]) == 1.0


def test_jost_sweep_order_with_threads(capsys):
    args = ("jost", "well", "V0=3", "k_list=0.5,1.0,2.0+1i", "--grid-n", "512")
    _, one, _ = run_cli(capsys, *args, "--threads", "1")
    _, many, _ = run_cli(capsys, *args, "--threads", "3")
    assert one == many
    assert [r["re_k"] for r in csv_rows(one)] == ["0.5", "1.0", "2.0"]


def test_spectrum_jsonl(capsys):
    code, out, _ = run_cli(capsys, "spectrum", "well", "V0=6", "re_min=0.2", "re_max=3", "im_min=-0.5",
                           "im_max=0.5")
    recs = [json.loads(ln) for ln in out.splitlines()]
    assert code == 0 and len(recs) == 1
    assert abs(recs[0]["re_k"] - square_well_bound_states(6.0)[0]) <= 1e-8
    assert recs[0]["multiplicity"] == 1


def test_scatlen(capsys):
    code, out, _ = run_cli(capsys, "scatlen", "well", "V0=1.5", "m=0.5")
    row = csv_rows(out)[0]
    assert code == 0
    assert abs(float(row["re_a"]) - square_well_scattering_length(1.5)) <= 1e-7


def test_solve_writes_file(tmp_path, capsys):
    path = tmp_path / "u.csv"
    code, out, _ = run_cli(capsys, "solve", "well", "solution=u", "m=0.3", "--grid-n", "256", "--out", str(path))
    assert code == 0 and out == ""
    rows = csv_rows(path.read_text())
    assert len(rows) == 256 and set(rows[0]) == {"x", "re_f", "im_f", "re_df", "im_df"}


def test_green_matches_api(capsys):
    code, out, _ = run_cli(capsys, "green", "well", "V0=2", "m=0.3", "k=1", "points=0.5,2")
    assert code == 0
    rows = csv_rows(out)
    got = {(float(r["x"]), float(r["y"])): complex(float(r["re_G"]), float(r["im_G"])) for r in rows}
    from besselkit.model import SquareWell

    ref = js.eval_perturbed_kernel(js.PerturbedKernelSpec("Pure", 0.3, 1.0), SquareWell(2.0, 0.0, 1.0), 0.5, 2.0)
    assert abs(got[(0.5, 2.0)] - ref) <= 1e-12 * abs(ref)
    assert got[(0.5, 2.0)] == got[(2.0, 0.5)]


def test_resolvent_reports_residual(capsys):
    code, out, _ = run_cli(capsys, "resolvent", "well", "V0=2", "m=0.3", "k=1")
    assert code == 0
    header = out.splitlines()[0]
    rel = float(header.split("relative_residual=")[1].split()[0])
    assert rel <= 1e-6


def test_boundary_basis_rows(capsys):
    code, out, _ = run_cli(capsys, "boundary", "coulomb", "m=0.7")
    rows = csv_rows(out)
    assert code == 0 and [r["case"] for r in rows] == ["partial_sum", "partial_sum"]


def test_tabulated_round_trip(tmp_path, capsys):
    x = np.geomspace(0.05, 2.0, 200)
    T = Tabulated(tuple(x), tuple(-3.0 * np.exp(-x)), sing_exponent=0.0)
    path = tmp_path / "q.txt"
    write_tabulated(T, path)
    code, out, _ = run_cli(capsys, "jost", "potential=tabulated", f"file={path}", "m=0.5", "k=1.2")
    assert code == 0
    row = csv_rows(out)[0]
    got = complex(float(row["re_jost"]), float(row["im_jost"]))
    ref = js.jost_value(0.5, 1.2, T)
    assert abs(got - ref) <= 1e-10 * abs(ref)


# -------------------------------------------------------------- exit codes


@pytest.mark.parametrize("argv", [
    ("nosuchcommand",),
    ("jost", "k=-1"),
    ("jost", "potential=bogus"),
    ("jost", "m=abc"),
    ("jost", "--grid-n", "10"),
    ("jost", "--config", "/nonexistent/file.cfg"),
    ("scatlen", "realization=Min"),
    ("boundary", "well", "m=1.5"),
])
def test_config_errors_exit_2(capsys, argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == 2 and out == ""
    assert json.loads(err)["exit_code"] == 2


def test_class_violation_exits_3(capsys):
    code, _, err = run_cli(capsys, "solve", "powerlaw", "alpha=2.5", "m=0.3")
    assert code == 3 and json.loads(err)["error"] == "class"


def test_numerical_failure_exits_4(capsys):
    # a very deep well makes the compressed Neumann series non-contractive at any given a
    code, _, err = run_cli(capsys, "solve", "well", "V0=500", "solution=u_bowtie", "m=0.3", "a=1")
    assert code == 4 and json.loads(err)["error"] == "numerical"


@pytest.mark.skipif(shutil.which("besselkit") is None, reason="console script not installed")
def test_console_script():
    p = subprocess.run(["besselkit", "jost", "zero", "--format", "jsonl"], capture_output=True, text=True)
    assert p.returncode == 0 and json.loads(p.stdout)["re_jost"] == 1.0
