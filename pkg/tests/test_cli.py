from __future__ import annotations

import textwrap

import pytest

from planetlab import cli


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text).lstrip(), encoding="utf-8")
    return path


@pytest.mark.parametrize(
    "text,line,message",
    [
        ("[experiment]\nid = birkhoff\n\n[system]\nn = 2\nbogus = 1\n", 6, "unknown key 'bogus'"),
        ("[experiment]\nid = birkhoff\n[weird]\nx = 1\n", 3, "unknown section [weird]"),
        ("[experiment]\nid = birkhoff\n[system]\nn = two\n", 4, "bad value for 'n'"),
        ("[experiment]\nseed = 1\nid = sideways\n", 3, "unknown experiment id"),
        ("[experiment]\nid = birkhoff\nid = resonances\n", 3, "id"),
    ],
)
def test_bad_config_exits_2_with_line(tmp_path, capsys, text, line, message):
    path = write(tmp_path, "bad.ini", text)
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert f"bad.ini:{line}:" in err and message in err


def test_missing_config_and_id(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "none.ini")]) == 2
    path = write(tmp_path, "noid.ini", "[experiment]\nseed = 1\n")
    assert cli.main(["run", str(path)]) == 2
    assert "missing [experiment] id" in capsys.readouterr().err


@pytest.mark.parametrize("flag", [["--seed", "-1"], ["--jobs", "0"]])
def test_bad_flags(tmp_path, flag):
    path = write(tmp_path, "k.ini", "[experiment]\nid = kam-budget\n")
    assert cli.main(["run", str(path), *flag]) == 2


ROUNDTRIP = """
[experiment]
id = charts-roundtrip
seed = 3
points = 12

[system]
n = 3
"""


def test_outputs_do_not_depend_on_jobs(tmp_path):
    path = write(tmp_path, "rt.ini", ROUNDTRIP)
    assert cli.main(["run", str(path), "--out", str(tmp_path / "a"), "--jobs", "1"]) == 0
    assert cli.main(["run", str(path), "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    a = (tmp_path / "a/charts-roundtrip/roundtrip.csv").read_bytes()
    assert a == (tmp_path / "b/charts-roundtrip/roundtrip.csv").read_bytes()
    assert a.splitlines()[0] == b"chart,index,error"
    assert cli.main(["run", str(path), "--out", str(tmp_path / "c"), "--seed", "4"]) == 0
    assert a != (tmp_path / "c/charts-roundtrip/roundtrip.csv").read_bytes()


def test_summary_lines(tmp_path, capsys):
    path = write(tmp_path, "s.ini", "[experiment]\nid = secular-identities\npoints = 10\n")
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "experiment secular-identities seed 0"
    assert all(line.startswith("PASS ") and "[secular_engine:" in line for line in out[1:])
    assert (tmp_path / "secular-identities/summary.txt").read_text().splitlines() == out


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    path = write(tmp_path, "k.ini", "[experiment]\nid = kam-budget\n")
    assert cli.main(["run", str(path)]) == 0
    assert (tmp_path / "env/kam-budget/kam_budget.csv").exists()


def test_failed_assertion_exits_1(tmp_path, capsys):
    text = """
    [experiment]
    id = integrate
    seed = 1

    [system]
    n = 2

    [integrator]
    periods = 5
    steps_per_period = 50
    stride = 50
    energy_tol = 1e-30
    """
    path = write(tmp_path, "i.ini", text)
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == cli.EXIT_FAIL
    assert "FAIL energy drift" in capsys.readouterr().out


def test_dio_measure_writes_csv_and_svg(tmp_path):
    text = """
    [experiment]
    id = dio-measure
    seed = 2

    [diophantine]
    samples = 3000
    K = 20
    sweep = 0.005 0.01 0.02 0.04
    """
    path = write(tmp_path, "d.ini", text)
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == 0
    out = tmp_path / "dio-measure"
    header = (out / "dio_measure.csv").read_text().splitlines()[0]
    assert header == "gammas,tau,K,density,ci_low,ci_high,samples,seed"
    assert (out / "dio_measure.svg").read_text().lstrip().startswith("<?xml")


def test_plot_phase_portrait(tmp_path):
    import numpy as np

    from planetlab.secular import PhasePortrait

    T = np.linspace(-1, 1, 9)
    V = np.pi + np.linspace(-1, 1, 9)
    PhasePortrait(T, V, np.add.outer(T**2, (V - np.pi) ** 2)).to_csv(tmp_path / "p.csv")
    assert cli.main(["plot", str(tmp_path / "p.csv"), "--kind", "phase-portrait", "--out", str(tmp_path / "svg")]) == 0
    assert (tmp_path / "svg/p.svg").exists()


def test_plot_rejects_empty_and_mismatched_csv(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("Theta,vartheta,value\n")
    assert cli.main(["plot", str(empty), "--kind", "phase-portrait", "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o/e.svg").exists()
    other = tmp_path / "x.csv"
    other.write_text("a,b\n1,2\n")
    assert cli.main(["plot", str(other), "--kind", "density", "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o/x.svg").exists()
