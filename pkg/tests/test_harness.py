import math
import os
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from nlgcs.harness.config import (ConfigError, ExperimentConfig, emit_config,
                                  load_config, parse_config)
from nlgcs.harness.lemmas import lemmas_csv, verify_lemmas
from nlgcs.harness.presets import preset
from nlgcs.harness.sweep import (fit_slope, run_uniform_sweep, summary_csv,
                                 sweep_csv)


class TestFitSlope:
    def test_exact_power_law(self):
        pairs = [(m, m ** -0.5) for m in (100, 200, 400, 800)]
        slope, intercept, r2 = fit_slope(pairs)
        assert slope == pytest.approx(-0.5, abs=1e-12)
        assert r2 == pytest.approx(1.0)

    def test_scaled_power_law(self):
        pairs = [(m, 7.0 * m ** -0.5) for m in (100, 200, 400)]
        slope, intercept, _ = fit_slope(pairs)
        assert slope == pytest.approx(-0.5, abs=1e-12)
        assert intercept == pytest.approx(math.log(7.0), abs=1e-12)

    def test_constant(self):
        slope, _, _ = fit_slope([(m, 3.0) for m in (10, 100, 1000)])
        assert slope == pytest.approx(0.0, abs=1e-12)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_slope([(10, 1.0), (20, 0.5)])

    def test_nonpositive_err(self):
        with pytest.raises(ValueError):
            fit_slope([(10, 1.0), (20, 0.0), (40, 0.5)])


class TestConfig:
    def test_round_trip(self):
        cfg = preset("onebit-dither")
        text = emit_config(cfg)
        cfg2 = parse_config(text)
        assert cfg2 == cfg
        assert emit_config(cfg2) == text

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("frob.nicate = 1\n")

    def test_bad_line_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("no equals sign here\n")

    def test_comments_and_blanks(self):
        cfg = parse_config("# comment\n\nlink.kind = uqd  # alias\nlink.delta = 2.0\n")
        assert cfg.link.kind == "quantizer"
        assert cfg.link.delta == 2.0

    def test_m_grid_must_increase(self):
        with pytest.raises(ConfigError):
            parse_config("m.grid = 100 100 200\n")

    def test_metric_validated(self):
        with pytest.raises(ConfigError):
            parse_config("metric.name = l1\n")


class TestPresets:
    def test_uqd_delta(self):
        assert preset("uqd").link.delta == 3.0

    def test_onebit_solver(self):
        cfg = preset("onebit")
        assert cfg.solver.restarts == 10
        assert cfg.solver.steps == 1000

    def test_dither_rule(self):
        cfg = preset("onebit-dither")
        assert cfg.lambda_auto
        assert cfg.lambda_c == 3.0
        assert cfg.metric == "rel_l2"

    def test_desk_scale(self):
        cfg = preset("sim-relu")
        assert cfg.generator.dims[0] == 10
        assert cfg.generator.dims[-1] == 200

    def test_unknown(self):
        with pytest.raises(ValueError):
            preset("twobit")


def _tiny_config(tmp_path, seed=77):
    cfg = preset("onebit")
    return replace(cfg, m_grid=(40, 80, 160), n_signals=2, n_trials=2,
                   solver=replace(cfg.solver, restarts=3, steps=60),
                   generator=replace(cfg.generator, dims=(4, 16, 30)),
                   master_seed=seed, output_dir=str(tmp_path / "out"))


class TestSweep:
    def test_report_shape_and_worst_case(self, tmp_path):
        cfg = _tiny_config(tmp_path)
        rep = run_uniform_sweep(cfg)
        assert len(rep.cells) == 6
        for cell in rep.cells:
            worst = cell.worst(cfg.metric)
            assert worst == min(cell.per_signal)  # cosine: worst is min
            assert worst <= cell.mean() + 1e-12

    def test_byte_identical_reruns(self, tmp_path):
        cfg = _tiny_config(tmp_path)
        r1 = run_uniform_sweep(cfg)
        r2 = run_uniform_sweep(cfg)
        assert sweep_csv(r1) == sweep_csv(r2)
        assert summary_csv(r1) == summary_csv(r2)

    def test_master_seed_changes_results(self, tmp_path):
        r1 = run_uniform_sweep(_tiny_config(tmp_path, seed=77))
        r2 = run_uniform_sweep(_tiny_config(tmp_path, seed=78))
        assert sweep_csv(r1) != sweep_csv(r2)

    def test_parallel_matches_serial(self, tmp_path, monkeypatch):
        cfg = _tiny_config(tmp_path)
        serial = sweep_csv(run_uniform_sweep(cfg))
        monkeypatch.setenv("NLGCS_THREADS", "2")
        parallel = sweep_csv(run_uniform_sweep(cfg))
        assert serial == parallel

    def test_dithered_lambda_rule_scales_with_m(self, tmp_path):
        from nlgcs.harness.sweep import link_for_m
        cfg = replace(_tiny_config(tmp_path), link=preset("onebit-dither").link,
                      lambda_auto=True, lambda_c=3.0)
        l1 = link_for_m(cfg, 100, 2.0)
        l2 = link_for_m(cfg, 400, 2.0)
        assert l1.lambda_ == pytest.approx(6.0 * math.sqrt(math.log(100)))
        assert l2.lambda_ > l1.lambda_


class TestVerifyLemmas:
    def test_entropy_suite_passes(self):
        checks = verify_lemmas("entropy", seed=0)
        assert all(c.passed for c in checks)

    def test_srec_suite_passes(self):
        checks = verify_lemmas("srec", seed=0)
        assert all(c.passed for c in checks)

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            verify_lemmas("everything")

    def test_csv_shape(self):
        checks = verify_lemmas("entropy", seed=0)
        text = lemmas_csv(checks)
        lines = text.strip().splitlines()
        assert lines[0] == "lemma_id,statistic,value,threshold,pass"
        assert len(lines) == len(checks) + 1


def _run_cli(args, cwd):
    env = dict(os.environ)
    return subprocess.run([sys.executable, "-m", "nlgcs.harness.cli", *args],
                          capture_output=True, text=True, cwd=cwd, env=env)


class TestCli:
    def test_preset_emit_and_sweep_determinism(self, tmp_path):
        cfg_path = tmp_path / "exp.cfg"
        out = _run_cli(["preset", "onebit", "--emit", str(cfg_path)], tmp_path)
        assert out.returncode == 0
        text = cfg_path.read_text()
        text = text.replace("m.grid = 100 200 400 800 1600", "m.grid = 30 60 120")
        text = text.replace("signals.count = 10", "signals.count = 2")
        text = text.replace("trials.count = 5", "trials.count = 1")
        text = text.replace("solver.restarts = 10", "solver.restarts = 2")
        text = text.replace("solver.steps = 1000", "solver.steps = 40")
        text = text.replace("generator.dims = 10 64 64 200", "generator.dims = 3 8 20")
        text = text.replace("output.dir = out", f"output.dir = {tmp_path / 'o1'}")
        cfg_path.write_text(text)
        r1 = _run_cli(["sweep", str(cfg_path)], tmp_path)
        assert r1.returncode == 0, r1.stderr
        first = (tmp_path / "o1" / "sweep.csv").read_bytes()
        summary1 = (tmp_path / "o1" / "summary.csv").read_bytes()
        assert (tmp_path / "o1" / "sweep.png").exists()
        r2 = _run_cli(["sweep", str(cfg_path)], tmp_path)
        assert r2.returncode == 0
        assert (tmp_path / "o1" / "sweep.csv").read_bytes() == first
        assert (tmp_path / "o1" / "summary.csv").read_bytes() == summary1

    def test_verify_lemmas_entropy_exit_zero(self, tmp_path):
        out = _run_cli(["verify-lemmas", "entropy", "--output", str(tmp_path / "lem")],
                       tmp_path)
        assert out.returncode == 0, out.stderr
        assert (tmp_path / "lem" / "lemmas.csv").exists()
        assert "[PASS]" in out.stdout

    def test_unknown_preset_usage_error(self, tmp_path):
        out = _run_cli(["verify-lemmas", "nonsense"], tmp_path)
        assert out.returncode == 2

    def test_fit_csv(self, tmp_path):
        csv = tmp_path / "pairs.csv"
        csv.write_text("m,err\n100,0.1\n400,0.05\n1600,0.025\n")
        out = _run_cli(["fit", str(csv)], tmp_path)
        assert out.returncode == 0
        assert "slope -0.5" in out.stdout

    def test_fit_bad_values_usage_error(self, tmp_path):
        csv = tmp_path / "pairs.csv"
        csv.write_text("100,0.0\n200,0.1\n400,0.2\n")
        out = _run_cli(["fit", str(csv)], tmp_path)
        assert out.returncode == 2

    def test_dump_ensemble(self, tmp_path):
        cfg_path = tmp_path / "exp.cfg"
        _run_cli(["preset", "uqd", "--emit", str(cfg_path)], tmp_path)
        text = cfg_path.read_text().replace("generator.dims = 10 64 64 200",
                                            "generator.dims = 3 8 20")
        cfg_path.write_text(text.replace("m.grid = 100 200 400 800 1600",
                                         "m.grid = 25 50"))
        out = _run_cli(["dump-ensemble", str(cfg_path), str(tmp_path / "ens.bin")],
                       tmp_path)
        assert out.returncode == 0, out.stderr
        from nlgcs.sensing import load_ensemble
        ens = load_ensemble(tmp_path / "ens.bin")
        assert ens.m == 25 and ens.n == 20
        assert ens.link.kind == "quantizer"
