import json

import pytest

from nesscurrent.cli import run


def _run(tmp_path, name, *args):
    out = tmp_path / name
    return run([*args, "--out", str(out)]), out


def test_verify_writes_report_and_manifest(tmp_path):
    code, out = _run(tmp_path, "v", "verify", "--ring", "6")
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["max_residual"] < 1e-12
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest) == {"config", "config_hash", "files", "versions"}
    assert "report.json" in manifest["files"]


def test_sumrule_small_row(tmp_path):
    code, out = _run(tmp_path, "s", "sumrule", "--ring", "128", "--L", "32", "--M", "8")
    assert code == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "L,M,value,target,rel_dev,status"
    assert lines[1].startswith("32,8,") and lines[1].endswith(",converged")


def test_failing_tolerance_exits_one(tmp_path):
    code, _ = _run(tmp_path, "f", "sumrule", "--ring", "128", "--L", "32", "--M", "8", "--tolerance", "1e-9")
    assert code == 1


@pytest.mark.parametrize(
    "args",
    [
        ("sumrule", "--model", "model=xxz"),
        ("sumrule", "--model", "no/such/file.toml"),
        ("sumrule", "--config", "no/such/config.toml"),
        ("sumrule", "--L", "3"),
        ("spectrum", "--dt", "0.5"),
    ],
)
def test_configuration_errors_exit_two(tmp_path, args, capsys):
    code, _ = _run(tmp_path, "e", *args)
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_corrupted_model_file_reports_position(tmp_path, capsys):
    bad = tmp_path / "m.toml"
    bad.write_text('[model]\nlocal_dim = 2\ncharge = [[[0.5, 0.0], [0.0, 0.0]],\n')
    code, _ = _run(tmp_path, "e", "verify", "--model", str(bad))
    assert code == 2
    assert "line" in capsys.readouterr().err


def test_spectrum_self_test(tmp_path):
    code, out = _run(tmp_path, "st", "spectrum", "--self-test")
    report = json.loads((out / "report.json").read_text())
    assert code == 0, report
    assert report["peak"]["passed"]


def test_spectrum_run_is_byte_identical(tmp_path):
    args = ("spectrum", "--ring", "128", "--zmax", "40", "--M", "8", "--T", "4", "--sigma", "1.0")
    code_a, a = _run(tmp_path, "a", *args)
    code_b, b = _run(tmp_path, "b", *args)
    assert code_a == code_b
    for name in ("correlation.csv", "spectral.csv", "theorem.csv", "terms.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_parallel_workers_do_not_change_output(tmp_path, monkeypatch):
    args = ("sumrule", "--ring", "128", "--L", "24", "--M", "8")
    _, a = _run(tmp_path, "serial", *args)
    monkeypatch.setenv("NESSCURRENT_WORKERS", "3")
    _, b = _run(tmp_path, "threads", *args)
    assert (a / "convergence.csv").read_bytes() == (b / "convergence.csv").read_bytes()
