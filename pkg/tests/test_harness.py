import json
import math

import numpy as np
import pytest

from squeezetrack import ConfigError, io
from squeezetrack.harness import cli, config, manifest as mf, scenarios

SMALL_BEADS = """\
scenario = beads
replicate_count = 2
seeds.trajectory = 11
seeds.noise = 12
record.duration = 0.02
estimation.lag_max = 0.001
"""

SMALL_YEAST = """\
scenario = yeast
replicate_count = 2
seeds.trajectory = 21
seeds.noise = 22
record.duration = 0.1
"""


def errors_of(text):
    with pytest.raises(ConfigError) as info:
        config.validate_config(text)
    return info.value.errors


class TestConfig:
    def test_empty_reports_required_fields(self):
        errs = errors_of("")
        assert any(e.startswith("scenario: required") for e in errs)
        assert any(e.startswith("seeds: required") for e in errs)

    def test_bad_efficiency_is_located(self):
        errs = errors_of(SMALL_BEADS + "detection.efficiency = 1.2\n")
        assert len(errs) == 1
        assert errs[0].startswith("line 7: detection.efficiency:")

    def test_collects_every_error(self):
        errs = errors_of("scenario = nope\nseeds.trajectory = -1\nseeds.noise = 0\nchain.bogus = 3\n")
        joined = "\n".join(errs)
        assert "line 1: scenario" in joined
        assert "line 2: seeds.trajectory" in joined
        assert "line 4: chain.bogus: unknown field" in joined

    def test_duplicate_and_conflict(self):
        errs = errors_of(SMALL_BEADS + "seeds.noise = 3\nseeds = 4\n")
        assert any("duplicate (first set on line 4)" in e for e in errs)
        assert any("seeds: conflicts" in e for e in errs)

    def test_malformed_line(self):
        assert errors_of(SMALL_BEADS + "just words\n") == ["line 7: expected 'key = value', got 'just words'"]

    def test_values_and_comments(self):
        cfg = config.validate_config(SMALL_BEADS + 'chain.window = "hann"  # quoted\noutput_dir = runs/x # c\n')
        assert cfg.chain.window == "hann"
        assert cfg.output_dir == "runs/x"

    def test_unbuildable_chain(self):
        errs = errors_of(SMALL_BEADS + "chain.raw_rate = 5e6\n")
        assert any("chain" in e and "twice" in e for e in errs)

    def test_record_shorter_than_lags(self):
        errs = errors_of(SMALL_BEADS.replace("lag_max = 0.001", "lag_max = 0.05"))
        assert any("lag_max" in e for e in errs)

    def test_hash_ignores_output_dir_and_layout(self):
        a = config.validate_config(SMALL_BEADS)
        b = config.validate_config("# reordered\n" + "\n".join(reversed(SMALL_BEADS.splitlines()))
                                   + "\noutput_dir = elsewhere\n")
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != a.with_overrides({"seeds.noise": 13}).config_hash()

    def test_canonical_text_round_trips(self):
        cfg = config.validate_config(SMALL_YEAST)
        assert config.validate_config(cfg.canonical_text()) == cfg

    @pytest.mark.parametrize("name", ["budget", "beads", "yeast", "spectra"])
    def test_presets_validate(self, name):
        cfg = config.validate_config(cli.read_config_text(f"preset:{name}"))
        assert cfg.scenario == name


class TestBudget:
    def test_report_values(self):
        cfg = config.validate_config(cli.read_config_text("preset:budget"))
        out = scenarios.run(cfg)
        rep = out.report
        assert rep["detected_variance"] == pytest.approx(10 ** -0.28, rel=1e-12)
        assert rep["detected_percent"] == 52
        assert rep["power_reduction_percent"] == 42
        assert rep["rate_gain_percent"] == 64
        assert rep["stringent_margin_db"] == pytest.approx(2.4 + 10 * math.log10(0.85), rel=1e-12)
        # 0.5248 at 100 uW mixed with 11.9 uW of shot-noise-limited leak light
        assert rep["effective_variance"] == pytest.approx((10 ** -0.28 * 100 + 11.9) / 111.9, rel=1e-12)
        assert all(c.passed for c in out.checks)


class TestPipeline:
    def test_noiseless_free_diffusion_is_linear(self):
        text = SMALL_YEAST + "detection.noiseless = true\ndiffusion.alpha_min = 1.0\ndiffusion.alpha_max = 1.0\n" \
                             "diffusion.alpha_mean = 1.0\ndiffusion.alpha_sd = 0\n"
        out = scenarios.run(config.validate_config(text))
        for arm in scenarios.ARMS:
            assert abs(out.report[f"alpha_mean_{arm}"] - 1.0) < 0.03
        assert out.report["effective_alpha_mean"] == pytest.approx(1.0, abs=1e-9)

    def test_mixture_alpha_below_mean(self):
        lags = np.geomspace(1e-5, 1e-2, 31)
        mixed = scenarios.mixture_alpha([0.6, 1.0], [0.5, 0.5], 1e-14, lags)
        assert 0.6 < mixed < 0.8
        assert scenarios.mixture_alpha([0.7, 0.7], [0.3, 0.7], 1e-14, lags) == pytest.approx(0.7, abs=1e-10)

    def test_workers_do_not_change_output(self, tmp_path):
        cfg = config.validate_config(SMALL_BEADS)
        m1, _ = mf.run_to_directory(cfg, tmp_path / "a", workers=1)
        m2, _ = mf.run_to_directory(cfg, tmp_path / "b", workers=2)
        assert m1 == m2

    def test_alpha_draws_respect_bounds(self):
        cfg = config.validate_config(SMALL_YEAST.replace("replicate_count = 2", "replicate_count = 40"))
        alphas = np.concatenate([[spec.alpha for spec, _ in scenarios.yeast_segments(cfg, r)] for r in range(40)])
        assert alphas.min() >= 0.6 and alphas.max() <= 1.0
        assert abs(alphas.mean() - 0.81) < 0.02


class TestManifest:
    def test_files_and_checksums(self, tmp_path):
        cfg = config.validate_config(SMALL_BEADS)
        manifest, outcome = mf.run_to_directory(cfg, tmp_path)
        on_disk = json.loads((tmp_path / mf.MANIFEST).read_text())
        assert on_disk == manifest
        assert manifest["config_hash"] == cfg.config_hash()
        for name, digest in manifest["files"].items():
            assert io.sha256_file(tmp_path / name) == digest
            if name.startswith("msd_"):
                assert io.read_columns(tmp_path / name)[0]["config_hash"] == cfg.config_hash()
        assert "timing.json" not in manifest["files"]
        assert manifest["achieved_sample_rates"]["decimation"] == 141
        assert mf.verify(tmp_path)[1] == []

    def test_verify_detects_tampering(self, tmp_path):
        mf.run_to_directory(config.validate_config(SMALL_BEADS), tmp_path)
        (tmp_path / "report.txt").write_text("changed\n")
        (tmp_path / "fits.txt").unlink()
        problems = mf.verify(tmp_path)[1]
        assert sorted(problems) == ["fits.txt: missing", "report.txt: checksum mismatch"]

    def test_rerun_is_identical(self, tmp_path):
        cfg = config.validate_config(SMALL_YEAST)
        mf.run_to_directory(cfg, tmp_path / "a")
        mf.run_to_directory(cfg, tmp_path / "b")
        assert (tmp_path / "a" / mf.MANIFEST).read_bytes() == (tmp_path / "b" / mf.MANIFEST).read_bytes()


class TestCli:
    def write(self, tmp_path, text):
        path = tmp_path / "c.cfg"
        path.write_text(text)
        return str(path)

    def test_validate_prints_canonical(self, tmp_path, capsys):
        assert cli.main(["validate", self.write(tmp_path, SMALL_BEADS)]) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "chain.window = \"hann\"" in out
        assert "# config_hash: " in out

    def test_config_error_exit(self, tmp_path, capsys):
        path = self.write(tmp_path, SMALL_BEADS + "detection.efficiency = 1.2\n")
        assert cli.main(["run", path, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
        assert "detection.efficiency" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    def test_missing_file_and_preset(self, tmp_path, capsys):
        assert cli.main(["validate", str(tmp_path / "none.cfg")]) == cli.EXIT_CONFIG
        assert cli.main(["validate", "preset:nope"]) == cli.EXIT_CONFIG
        assert "available: beads, budget, spectra, yeast" in capsys.readouterr().err

    def test_bad_workers(self, tmp_path):
        assert cli.main(["run", "preset:budget", "--workers", "0"]) == cli.EXIT_CONFIG

    def test_run_check_and_report(self, tmp_path, capsys):
        out = tmp_path / "budget"
        assert cli.main(["run", "preset:budget", "--out", str(out), "--check"]) == cli.EXIT_OK
        assert "[PASS] rate_gain" in capsys.readouterr().out
        assert cli.main(["report", str(out)]) == cli.EXIT_OK
        assert "detected_percent = 52" in capsys.readouterr().out
        (out / "report.txt").write_text("tampered\n")
        assert cli.main(["report", str(out / mf.MANIFEST)]) == cli.EXIT_RUNTIME

    def test_failed_check_exit(self, tmp_path):
        path = self.write(tmp_path, "scenario = budget\nseeds.trajectory = 0\nseeds.noise = 0\n"
                                    "budget.measured_db = 3.0\n")
        assert cli.main(["run", path, "--out", str(tmp_path / "o"), "--check"]) == cli.EXIT_CHECK
        assert cli.main(["run", path, "--out", str(tmp_path / "o")]) == cli.EXIT_OK

    def test_domain_error_exit(self, tmp_path):
        path = self.write(tmp_path, SMALL_BEADS.replace("beads", "spectra") + "spectra.raw_duration = 0.5\n")
        assert cli.main(["run", path, "--out", str(tmp_path / "o")]) == cli.EXIT_RUNTIME

    def test_output_dir_precedence(self, tmp_path, monkeypatch):
        cfg = config.validate_config(SMALL_BEADS)
        monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
        assert cli.output_dir(cfg, None) == tmp_path / "env" / "beads"
        assert cli.output_dir(cfg.with_overrides({"output_dir": "cfgdir"}), None).name == "cfgdir"
        assert cli.output_dir(cfg, str(tmp_path / "flag")) == tmp_path / "flag"
        monkeypatch.delenv(cli.OUT_ENV)
        assert str(cli.output_dir(cfg, None)) == "squeezetrack-runs/beads"

    def test_seed_override(self, tmp_path):
        path = self.write(tmp_path, SMALL_BEADS)
        cli.main(["run", path, "--out", str(tmp_path / "a"), "--seed", "99"])
        text = (tmp_path / "a" / "config.cfg").read_text()
        assert "seeds.noise = 99" in text and "seeds.trajectory = 99" in text
