import hashlib
import json
import os
import shutil
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from shiftdet import cli

SWEEP_HEADER = "x,ratio_re,ratio_im,limit_re,limit_im,err,conv_delta"
MVSM0_HEADER = "x,err,det_m_re,det_m_im,det_m0_re,det_m0_im,conv_delta"


def load_schema(name):
    blob = (resources.files("shiftdet") / "schemas" / name).read_text()
    return json.loads(blob)


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cfg_path(config_dir, name):
    return os.path.join(config_dir, name)


def write_config(tmp_path, base, **patch):
    blob = read_json(base)
    for dotted, value in patch.items():
        target = blob
        *parents, leaf = dotted.split(".")
        for key in parents:
            target = target.setdefault(key, {})
        target[leaf] = value
    out = tmp_path / "patched.json"
    out.write_text(json.dumps(blob), encoding="utf-8")
    return str(out)


class TestVerifyCommand:
    def test_trivial_passes(self, tmp_path, config_dir, capsys):
        rc = cli.main(["verify", cfg_path(config_dir, "trivial.json"),
                       "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 3
        report = read_json(tmp_path / "identity_report.json")
        jsonschema.validate(report, load_schema("identity_report.schema.json"))
        assert report["ok"] is True

    def test_strict_line_standard(self, tmp_path, config_dir):
        rc = cli.main(["verify", cfg_path(config_dir, "standard.json"),
                       "--out", str(tmp_path), "--strict-line"])
        assert rc == 0
        report = read_json(tmp_path / "identity_report.json")
        assert report["strict_line"] is True
        assert report["residuals"]["r3"] < 1e-4

    def test_manifest_contents(self, tmp_path, config_dir):
        config = cfg_path(config_dir, "trivial.json")
        assert cli.main(["verify", config, "--out", str(tmp_path)]) == 0
        manifest = read_json(tmp_path / "run_manifest.json")
        jsonschema.validate(manifest, load_schema("run_manifest.schema.json"))
        with open(config, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        assert manifest["config_sha256"] == digest
        assert manifest["command"] == "verify"
        for name in manifest["outputs"]:
            assert (tmp_path / name).exists()
        assert "run_manifest.json" in manifest["outputs"]

    def test_failed_tolerance_exits_one(self, tmp_path, config_dir, capsys):
        config = write_config(tmp_path,
                              cfg_path(config_dir, "standard.json"),
                              **{"tolerances.r1": 1e-20})
        rc = cli.main(["verify", config, "--out", str(tmp_path)])
        assert rc == 1
        assert "[FAIL]" in capsys.readouterr().out

    def test_report_is_deterministic(self, tmp_path, config_dir):
        a, b = tmp_path / "a", tmp_path / "b"
        config = cfg_path(config_dir, "standard.json")
        assert cli.main(["verify", config, "--out", str(a)]) == 0
        assert cli.main(["verify", config, "--out", str(b)]) == 0
        assert (a / "identity_report.json").read_bytes() \
            == (b / "identity_report.json").read_bytes()


class TestConfigErrors:
    def test_missing_file(self, tmp_path, capsys):
        rc = cli.main(["verify", str(tmp_path / "nope.json"),
                       "--out", str(tmp_path)])
        assert rc == 2

    def test_unparseable_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        rc = cli.main(["verify", str(bad), "--out", str(tmp_path)])
        assert rc == 2

    def test_strip_violation(self, tmp_path, config_dir, capsys):
        config = write_config(tmp_path,
                              cfg_path(config_dir, "standard.json"),
                              **{"numerics.h": 0.9})
        rc = cli.main(["verify", config, "--out", str(tmp_path)])
        assert rc == 2
        err = capsys.readouterr().err
        assert "strip" in err

    def test_unknown_field(self, tmp_path, config_dir):
        config = write_config(tmp_path,
                              cfg_path(config_dir, "standard.json"),
                              mystery_knob=3)
        assert cli.main(["verify", config, "--out", str(tmp_path)]) == 2

    def test_amplitude_at_one(self, tmp_path, config_dir):
        config = write_config(tmp_path,
                              cfg_path(config_dir, "standard.json"),
                              **{"F.value": 1.0})
        assert cli.main(["verify", config, "--out", str(tmp_path)]) == 2


class TestSweepCommand:
    def test_standard_sweep(self, tmp_path, config_dir):
        rc = cli.main(["sweep", cfg_path(config_dir, "standard.json"),
                       "--out", str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == SWEEP_HEADER
        assert len(lines) == 6   # default grid has five x values
        summary = read_json(tmp_path / "sweep_summary.json")
        jsonschema.validate(summary, load_schema("sweep_summary.schema.json"))
        assert summary["ok"] is True
        assert -1.3 < summary["slope"] < -0.7

    def test_trivial_sweep_skips_slope(self, tmp_path, config_dir):
        rc = cli.main(["sweep", cfg_path(config_dir, "trivial.json"),
                       "--out", str(tmp_path)])
        assert rc == 0
        summary = read_json(tmp_path / "sweep_summary.json")
        jsonschema.validate(summary, load_schema("sweep_summary.schema.json"))
        assert summary["slope_skipped"] is True
        assert summary["reason"] == "trivial limit"

    def test_single_x_rejected(self, tmp_path, config_dir, capsys):
        rc = cli.main(["sweep", cfg_path(config_dir, "standard.json"),
                       "--out", str(tmp_path), "--x", "50"])
        assert rc == 2
        assert "insufficient points for slope" in capsys.readouterr().err

    def test_outputs_are_deterministic(self, tmp_path, config_dir):
        a, b = tmp_path / "a", tmp_path / "b"
        config = cfg_path(config_dir, "standard.json")
        assert cli.main(["sweep", config, "--out", str(a)]) == 0
        assert cli.main(["sweep", config, "--out", str(b)]) == 0
        for name in ("sweep.csv", "sweep_summary.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestDetCommand:
    def test_trivial_base_determinant(self, config_dir, capsys):
        rc = cli.main(["det", cfg_path(config_dir, "trivial.json"),
                       "--which", "Vtilde"])
        assert rc == 0
        blob = json.loads(capsys.readouterr().out)
        jsonschema.validate(blob, load_schema("det_result.schema.json"))
        assert blob["which"] == "Vtilde"
        assert blob["value_re"] == 1.0
        assert blob["value_im"] == 0.0

    def test_limit_factorization(self, config_dir, capsys):
        vals = {}
        for which in ("M0", "Uplus", "Uminus"):
            assert cli.main(["det", cfg_path(config_dir, "standard.json"),
                             "--which", which]) == 0
            blob = json.loads(capsys.readouterr().out)
            vals[which] = complex(blob["value_re"], blob["value_im"])
        prod = vals["Uplus"] * vals["Uminus"]
        assert abs(vals["M0"] - prod) < 1e-12 * abs(prod)

    def test_unknown_kind_is_usage_error(self, config_dir):
        with pytest.raises(SystemExit) as exc:
            cli.main(["det", cfg_path(config_dir, "standard.json"),
                      "--which", "Q"])
        assert exc.value.code == 2


class TestMVsM0Command:
    def test_standard_run(self, tmp_path, config_dir):
        rc = cli.main(["m-vs-m0", cfg_path(config_dir, "standard.json"),
                       "--out", str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "m_vs_m0.csv").read_text().splitlines()
        assert lines[0] == MVSM0_HEADER
        summary = read_json(tmp_path / "m_vs_m0_summary.json")
        jsonschema.validate(summary,
                            load_schema("m_vs_m0_summary.schema.json"))
        assert summary["ok"] is True
        assert all(1.5 < r["ratio"] < 3.0 for r in summary["ratios"])

    def test_grid_without_large_pair_rejected(self, tmp_path, config_dir,
                                              capsys):
        rc = cli.main(["m-vs-m0", cfg_path(config_dir, "standard.json"),
                       "--out", str(tmp_path), "--x", "50,100"])
        assert rc == 2
        assert "doubling pair" in capsys.readouterr().err


def test_console_script_runs(tmp_path, config_dir):
    exe = shutil.which("shiftdet")
    if exe is None:
        pytest.skip("console script not on PATH")
    proc = subprocess.run(
        [exe, "verify", cfg_path(config_dir, "trivial.json"),
         "--out", str(tmp_path)],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    assert "[PASS]" in proc.stdout
    assert (tmp_path / "identity_report.json").exists()
