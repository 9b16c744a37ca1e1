"""CLI surface: subcommands, exit codes, report determinism."""

import json
import subprocess
import sys

import pytest

from finslerkit import cli, flow, metrics
from finslerkit.errors import StepFailure

FUNK = "funk_ball_berwald"


def run(args):
    return cli.main(args)


def _load(path):
    return json.loads(path.read_text())


def _strip_timestamp(text):
    return "\n".join(line for line in text.splitlines() if '"generated_at"' not in line)


# -- inspect -------------------------------------------------------------------

def test_inspect_packet_at_center(tmp_path):
    out = tmp_path / "center.json"
    code = run(["inspect", "--metric", FUNK, "--point", "0,0,0;1,0,0", "--out", str(out)])
    assert code == 0
    doc = _load(out)
    assert doc["schema_version"] == 1
    assert doc["metric"] == FUNK
    (pt,) = doc["points"]
    for key in ("g", "g_inv", "G", "N", "jacobi", "E", "chi", "I", "J", "f", "c", "flag"):
        assert key in pt, key
    assert pt["F"] == pytest.approx(1.0)
    assert pt["f"] == pytest.approx([8.0, 32.0])
    assert pt["c"] == pytest.approx([8.0, 16.0])
    assert pt["N"][0][0] == pytest.approx(2.0)
    assert pt["flag"]["is_scalar"] is True


def test_inspect_samples_are_seeded(tmp_path):
    a, b, c = (tmp_path / f"{k}.json" for k in "abc")
    assert run(["inspect", "--metric", FUNK, "--seed", "42", "--npoints", "2", "--out", str(a)]) == 0
    assert run(["inspect", "--metric", FUNK, "--seed", "42", "--npoints", "2", "--out", str(b)]) == 0
    assert run(["inspect", "--metric", FUNK, "--seed", "43", "--npoints", "2", "--out", str(c)]) == 0
    assert _strip_timestamp(a.read_text()) == _strip_timestamp(b.read_text())
    assert _strip_timestamp(a.read_text()) != _strip_timestamp(c.read_text())


def test_inspect_accepts_config_files(tmp_path):
    cfg = tmp_path / "flat.cfg"
    cfg.write_text("[metric]\nname = flat2\ndimension = 2\nfamily = euclidean\n")
    out = tmp_path / "flat.json"
    assert run(["inspect", "--metric", str(cfg), "--point", "0,0;1,1", "--out", str(out)]) == 0
    assert _load(out)["metric"] == "flat2"


# -- verify --------------------------------------------------------------------

def test_verify_passes_and_is_deterministic(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    argv = ["verify", "--metric", "euclidean", "--npoints", "25", "--seed", "5"]
    assert run(argv + ["--out", str(a)]) == 0
    assert run(argv + ["--out", str(b)]) == 0
    assert _strip_timestamp(a.read_text()) == _strip_timestamp(b.read_text())
    doc = _load(a)
    assert doc["passed"] is True
    names = [s["name"] for s in doc["suites"]]
    assert "three_route_E_agreement" in names
    assert all(s["passed"] for s in doc["suites"] if s["asserted"])


# -- flow ----------------------------------------------------------------------

def test_flow_writes_csv_and_drift(tmp_path, capsys):
    csv_path = tmp_path / "traj.csv"
    code = run(
        [
            "flow",
            "--metric",
            FUNK,
            "--x0",
            "0,0,0",
            "--y0",
            "1,0,0",
            "--tmax",
            "5",
            "--watch",
            "F,f1,c1",
            "--out",
            str(csv_path),
        ]
    )
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["status"] == "completed"
    assert report["drift"]["passed"] is True
    assert set(report["drift"]["fields"]) == {"F", "f1", "c1"}
    header = csv_path.read_text().splitlines()[0]
    assert header == "t,x1,x2,x3,y1,y2,y3,F,f1,c1"


def test_flow_exit_one_when_watched_field_drifts(capsys):
    # the first printed closed form is not constant along this geodesic;
    # watching it trips the drift tolerance
    code = run(
        ["flow", "--metric", FUNK, "--x0", "0,0,0", "--y0", "1,0,0", "--tmax", "5", "--watch", "g1_paper"]
    )
    assert code == 1
    report = json.loads(capsys.readouterr().out)
    assert report["drift"]["passed"] is False
    assert report["drift"]["fields"]["g1_paper"]["max_rel_drift"] > 1e-3


def test_flow_maps_step_failure_to_exit_three(monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise StepFailure("step size underflow at t = 0.5")

    monkeypatch.setattr(cli.flow, "integrate", boom)
    code = run(["flow", "--metric", FUNK, "--x0", "0,0,0", "--y0", "1,0,0", "--tmax", "1"])
    assert code == 3
    assert "underflow" in capsys.readouterr().err


# -- bracket ---------------------------------------------------------------------

def test_bracket_assert_zero_passes_for_involutive_pair(tmp_path):
    out = tmp_path / "b.json"
    code = run(
        ["bracket", "--metric", FUNK, "--fields", "f1,f2", "--npoints", "6", "--seed", "2",
         "--assert-zero", "--out", str(out)]
    )
    assert code == 0
    doc = _load(out)
    assert doc["passed"] is True
    assert doc["max_scaled"] < 1e-6
    assert len(doc["values"]) == 6


def test_bracket_assert_zero_fails_for_dependent_pair(tmp_path):
    out = tmp_path / "b.json"
    code = run(
        ["bracket", "--metric", FUNK, "--fields", "g1_paper,g2_paper", "--npoints", "6",
         "--seed", "2", "--assert-zero", "--out", str(out)]
    )
    assert code == 1
    assert _load(out)["passed"] is False


def test_bracket_without_assertion_reports_only(capsys):
    code = run(["bracket", "--metric", FUNK, "--fields", "g1_paper,g2_paper", "--npoints", "3"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["assert_zero"] is False


def test_bracket_csv_format(capsys):
    code = run(["bracket", "--metric", FUNK, "--fields", "f1,c1", "--npoints", "2", "--format", "csv"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "x1,x2,x3,y1,y2,y3,value,scale,scaled"
    assert len(lines) == 3


# -- error mapping ----------------------------------------------------------------

def test_setup_errors_exit_two(tmp_path, capsys):
    assert run(["inspect", "--metric", "/does/not/exist.cfg"]) == 2
    assert "neither a readable file" in capsys.readouterr().err

    bad = tmp_path / "bad.cfg"
    bad.write_text("[metric]\ndimension = 3\n")  # no family
    assert run(["inspect", "--metric", str(bad)]) == 2

    assert run(["bracket", "--metric", "euclidean", "--fields", "f1,zzz"]) == 2
    assert "zzz" in capsys.readouterr().err

    assert run(["bracket", "--metric", "euclidean", "--fields", "f1"]) == 2
    assert run(["inspect", "--metric", "euclidean", "--point", "0,0;1,0"]) == 2
    assert run(["inspect", "--metric", "euclidean", "--point", "0,0,0"]) == 2
    assert run(["flow", "--metric", "euclidean", "--x0", "0,0,0", "--y0", "1,0,0", "--tmax", "-1"]) == 2
    assert run(["inspect", "--metric", FUNK, "--point", "2,0,0;1,0,0"]) == 2  # outside the ball


def test_console_script_and_module_entry():
    proc = subprocess.run(
        ["finslerkit", "inspect", "--metric", "euclidean", "--point", "0,0,0;1,2,0"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["points"][0]["F"] == pytest.approx(5**0.5)

    proc = subprocess.run(
        [sys.executable, "-m", "finslerkit", "verify", "--metric", "euclidean", "--npoints", "3"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
