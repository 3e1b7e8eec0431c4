import json
import math
from pathlib import Path

import pytest

from hourglass import cli
from hourglass.manifold import DEFAULT_OMEGA, GOLDEN_OMEGA

NAMES = ["integrate", "tonelli", "audit", "limit", "alpha", "calibrate", "xyz"]


def test_no_args_lists_all_experiments(capsys):
    assert cli.main([]) == 0
    out = capsys.readouterr().out
    for name in NAMES:
        assert name in out


def test_list_command(capsys):
    assert cli.main(["list"]) == 0
    assert "--n-max" in capsys.readouterr().out


def test_unknown_experiment_suggests(capsys):
    assert cli.main(["audti"]) == 2
    assert "did you mean 'audit'" in capsys.readouterr().err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli._parser().parse_args(["--version"])
    assert exc.value.code == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("hourglass 0.1.0")


def test_alpha_range(tmp_path):
    out = tmp_path / "alpha"
    assert cli.main(["alpha", "--c", "-2:2:0.25", "--grid", "32", "--output-dir", str(out)]) == 0
    lines = (out / "alpha.csv").read_text().strip().splitlines()
    assert lines[0] == "c,analytic,grid_value,y0,vx,E2,grid_spacing"
    assert len(lines) == 18
    report = json.loads((out / "alpha_report.json").read_text())
    assert report["spec"]["params"]["c"] == "-2:2:0.25"
    assert report["payload"]["concave"] is True
    assert "build" in report and report["wall_time"] >= 0


def test_audit_report(tmp_path):
    out = tmp_path / "audit"
    code = cli.main(["audit", "--m", "1", "--omega", "0.15915494309", "--n-max", "200", "--workers", "1",
                     "--output-dir", str(out)])
    assert code == 0
    report = json.loads((out / "audit_report.json").read_text())
    assert report["payload"]["verdict"] == 4
    assert report["spec"]["tol"] == 1e-8
    assert (out / "audit_rows.csv").read_text().startswith("n,cover_length")


def test_malformed_config_writes_nothing(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[manifold]\nomega = not-a-number\n")
    out = tmp_path / "never"
    assert cli.main(["tonelli", "--config", str(cfg), "--output-dir", str(out)]) == 2
    assert not out.exists()
    cfg.write_text("this is not an ini file")
    assert cli.main(["tonelli", "--config", str(cfg), "--output-dir", str(out)]) == 2
    cfg.write_text("[tonelli]\nbogus = 1\n")
    assert cli.main(["tonelli", "--config", str(cfg), "--output-dir", str(out)]) == 2
    assert cli.main(["tonelli", "--tol", "-1", "--output-dir", str(out)]) == 2
    assert not out.exists()


def test_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[manifold]\nomega = golden\n[run]\ntol = 1e-7\noutput_dir = {tmp_path / 'from_config'}\n"
                   "[tonelli]\nm = 2\n")
    args = cli._parser().parse_args(["tonelli", "--config", str(cfg), "--m", "1"])
    spec = cli.resolve_spec(args, environ={})
    assert spec.manifold.omega == GOLDEN_OMEGA
    assert spec.tol == 1e-7
    assert spec.params["m"] == 1
    assert spec.output_dir == tmp_path / "from_config"
    spec = cli.resolve_spec(args, environ={cli.OUTPUT_ENV: str(tmp_path / "env")})
    assert spec.output_dir == tmp_path / "env"
    args = cli._parser().parse_args(["tonelli", "--config", str(cfg), "--output-dir", str(tmp_path / "flag")])
    assert cli.resolve_spec(args, environ={cli.OUTPUT_ENV: "x"}).output_dir == tmp_path / "flag"
    bare = cli.resolve_spec(cli._parser().parse_args(["tonelli"]), environ={})
    assert bare.manifold.omega == DEFAULT_OMEGA and bare.tol == 1e-8


def test_every_experiment_runs(tmp_path):
    cases = {
        "integrate": ["--t-end", "2"],
        "tonelli": ["--m", "2"],
        "limit": ["--n-max", "3"],
        "calibrate": ["--t-end", "5"],
        "xyz": ["--n-list", "1,2"],
    }
    for name, extra in cases.items():
        out = tmp_path / name
        assert cli.main([name, *extra, "--output-dir", str(out), "--workers", "1"]) == 0, name
        report = json.loads((out / f"{name}_report.json").read_text())
        assert report["spec"]["name"] == name
        for f in report["files"]:
            assert (out / f).exists()
    cal = json.loads((tmp_path / "calibrate" / "calibrate_report.json").read_text())
    assert cal["payload"]["residual"] < 1e-8
    ton = json.loads((tmp_path / "tonelli" / "tonelli_report.json").read_text())
    assert ton["payload"]["length"] == pytest.approx(2 * math.sqrt(2), abs=1e-8)


def test_reruns_are_bit_identical(tmp_path):
    texts = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.main(["tonelli", "--m", "2", "--output-dir", str(out)]) == 0
        texts.append(Path(out / "tonelli_m2.csv").read_text())
    assert texts[0] == texts[1]


def test_convergence_error_exit(tmp_path, monkeypatch):
    from hourglass.errors import ConvergenceError

    def boom(spec, out, files):
        raise ConvergenceError("no")

    monkeypatch.setitem(cli.RUNNERS, "tonelli", boom)
    assert cli.main(["tonelli", "--output-dir", str(tmp_path / "c")]) == 3

    def crash(spec, out, files):
        raise ZeroDivisionError

    monkeypatch.setitem(cli.RUNNERS, "tonelli", crash)
    assert cli.main(["tonelli", "--output-dir", str(tmp_path / "d")]) == 4
