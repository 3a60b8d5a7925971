"""CLI: config handling, experiment runs, fits, and calculator subcommands."""

import math

import pytest
import yaml

from dualradio.cli import (ConfigError, build_trial_config, expand_sweep,
                           fit_scaling, main, normalize_config, parse_delta,
                           read_trials_csv)
from dualradio.engine import csv_header


def base_config(**overrides):
    cfg = {
        "problem": "local",
        "engine": "analytic_star",
        "gadget": {"kind": "star", "delta": 64, "n": 66},
        "algo": "rlb",
        "tau": 2,
        "adversary": {"kind": "iid_subset"},
        "trials": 25,
        "seed": 11,
        "max_rounds": 400,
        "out": "unused.csv",
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


class TestConfigParsing:
    def test_parse_delta_forms(self):
        assert parse_delta(64) == 64
        assert parse_delta("64") == 64
        assert parse_delta("log2:10") == 1024
        with pytest.raises(ConfigError, match="delta"):
            parse_delta(1)
        with pytest.raises(ConfigError, match="delta"):
            parse_delta("log2:x")

    def test_errors_name_offending_key(self):
        with pytest.raises(ConfigError, match="gadget.kind"):
            normalize_config(base_config(gadget={"delta": 8}))
        with pytest.raises(ConfigError, match="trials"):
            normalize_config(base_config(trials=0))
        with pytest.raises(ConfigError, match="sweep.bogus"):
            normalize_config(base_config(sweep={"bogus": [1]}))
        with pytest.raises(ConfigError, match="adversary.kind"):
            expand_sweep(normalize_config(
                base_config(adversary={"kind": "nope"})))
        with pytest.raises(ConfigError, match="adversary.l"):
            expand_sweep(normalize_config(
                base_config(adversary={"kind": "degree_walk_restricted"})))

    def test_sweep_expansion_order(self):
        cfg = normalize_config(base_config(sweep={"tau": [1, 2, 4, 8]}))
        points = expand_sweep(cfg)
        assert [p["tau"] for p in points] == [1, 2, 4, 8]

    def test_single_point_when_no_sweep(self):
        points = expand_sweep(normalize_config(base_config()))
        assert len(points) == 1

    def test_build_trial_config(self):
        points = expand_sweep(normalize_config(base_config()))
        trial_cfg, trials = build_trial_config(points[0])
        assert trials == 25
        assert trial_cfg.schedule.label == "rlb"
        assert trial_cfg.adversary["tau"] == 2  # defaults to the point's tau

    def test_auto_max_rounds_resolves(self):
        points = expand_sweep(normalize_config(base_config(max_rounds="auto")))
        trial_cfg, _ = build_trial_config(points[0])
        assert trial_cfg.max_rounds > 1000


class TestRunCommand:
    def test_run_writes_csv_and_summary(self, tmp_path, capsys):
        out = tmp_path / "t.csv"
        path = write_config(tmp_path, base_config(out=str(out)))
        assert main(["run", path]) == 0
        text = out.read_text()
        lines = text.strip().split("\n")
        assert lines[0] == csv_header()
        assert len(lines) == 1 + 25
        assert "rate" in capsys.readouterr().out

    def test_rerun_is_byte_identical(self, tmp_path):
        out = tmp_path / "t.csv"
        path = write_config(tmp_path, base_config(out=str(out)))
        assert main(["run", path]) == 0
        first = out.read_bytes()
        assert main(["run", path]) == 0
        assert out.read_bytes() == first

    def test_jobs_do_not_change_output(self, tmp_path):
        out = tmp_path / "t.csv"
        cfg = base_config(out=str(out), trials=10, sweep={"tau": [1, 2, 3]})
        path = write_config(tmp_path, cfg)
        assert main(["run", path]) == 0
        serial = out.read_bytes()
        assert main(["run", path, "--jobs", "3"]) == 0
        assert out.read_bytes() == serial

    def test_sweep_summary_rows(self, tmp_path, capsys):
        out = tmp_path / "t.csv"
        cfg = base_config(out=str(out), trials=5, sweep={"tau": [1, 2, 4, 8]})
        path = write_config(tmp_path, cfg)
        assert main(["run", path]) == 0
        body = capsys.readouterr().out
        assert body.count("iid_subset") == 4
        rows = out.read_text().strip().split("\n")[1:]
        assert len(rows) == 20
        assert [r.split(",")[0] for r in rows] == [str(i) for i in range(20)]

    def test_print_config_round_trips(self, tmp_path, capsys):
        path = write_config(tmp_path, base_config(sweep={"tau": [1, 2]}))
        assert main(["run", path, "--print-config"]) == 0
        echoed = yaml.safe_load(capsys.readouterr().out)
        again = normalize_config(echoed)
        assert expand_sweep(again) == expand_sweep(normalize_config(
            yaml.safe_load(open(path))))

    def test_invalid_config_nonzero_exit(self, tmp_path, capsys):
        path = write_config(tmp_path, base_config(trials=-3))
        assert main(["run", path]) == 1
        assert "trials" in capsys.readouterr().err

    def test_no_partial_left_behind(self, tmp_path):
        out = tmp_path / "t.csv"
        path = write_config(tmp_path, base_config(out=str(out)))
        main(["run", path])
        assert not (tmp_path / "t.csv.partial").exists()


class TestFitCommand:
    @staticmethod
    def synthetic_csv(tmp_path):
        # medians exactly 3x the local-tau predictor 2^l / l at tau = 1
        rows = [csv_header()]
        trial = 0
        for dl2 in (4, 8, 16, 32):
            pred = (2 ** dl2) / dl2
            median = 3 * pred
            for _ in range(3):
                rows.append(f"{trial},{trial},local,rlb,analytic_star,{dl2},1,"
                            f"iid_subset,1,{int(median)},{int(median)}")
                trial += 1
        path = tmp_path / "synthetic.csv"
        path.write_text("\n".join(rows) + "\n")
        return str(path)

    def test_exponent_one_on_exact_data(self, tmp_path):
        rows = read_trials_csv(self.synthetic_csv(tmp_path))
        fit = fit_scaling(rows, "local-tau", {})
        assert fit.exponent == pytest.approx(1.0, abs=1e-9)
        assert fit.residual == pytest.approx(0.0, abs=1e-9)

    def test_cli_fit_prints_exponent(self, tmp_path, capsys):
        path = self.synthetic_csv(tmp_path)
        assert main(["fit", path, "--predictor", "local-tau"]) == 0
        out = capsys.readouterr().out
        line = [l for l in out.splitlines() if l.startswith("exponent")][0]
        assert float(line.split()[1]) == pytest.approx(1.0, abs=1e-9)

    def test_too_few_points_rejected(self, tmp_path):
        rows = [csv_header(), "0,0,local,rlb,analytic_star,4,1,iid_subset,1,5,5"]
        path = tmp_path / "short.csv"
        path.write_text("\n".join(rows) + "\n")
        assert main(["fit", str(path), "--predictor", "local-tau"]) == 1

    def test_global_predictor_needs_diameter(self, tmp_path):
        rows = read_trials_csv(self.synthetic_csv(tmp_path))
        with pytest.raises(ConfigError, match="--param D"):
            fit_scaling(rows, "global-tau2", {})
        fit = fit_scaling(rows, "global-tau2", {"D": "24"})
        assert math.isfinite(fit.exponent)


class TestScalingSweeps:
    """End-to-end sweep -> CSV -> fit, checking the predicted trends."""

    @staticmethod
    def run_sweep_rows(configs, trials):
        from dualradio.engine import run_trials, trial_csv_row

        rows = []
        tid = 0
        for cfg in configs:
            stats = run_trials(cfg, trials)
            for res in stats.results:
                rows.append(trial_csv_row(tid, cfg, res))
                tid += 1
        return rows

    def test_frlb_vs_worst_stable_adversary_trend(self, tmp_path):
        from dualradio.engine import TrialConfig
        from dualradio.gadgets import star_gadget
        from dualradio.schedules import frlb_schedule

        delta = 2 ** 12
        g = star_gadget(delta, delta + 2)
        configs = []
        for tau in (1, 2, 3, 4):
            sched = frlb_schedule(delta, tau)
            configs.append(TrialConfig(
                problem="local", gadget=g, schedule=sched,
                adversary={"kind": "argmin", "tau": tau}, seed=2000,
                max_rounds=200_000, engine_mode="analytic_star"))
        rows = self.run_sweep_rows(configs, 400)
        path = tmp_path / "sweep.csv"
        path.write_text(csv_header() + "\n" + "\n".join(rows) + "\n")
        fit = fit_scaling(read_trials_csv(str(path)), "local-tau2", {})
        assert 0.7 <= fit.exponent <= 1.3

    def test_decay_vs_correlated_shift_trend(self, tmp_path):
        from dualradio.engine import TrialConfig
        from dualradio.gadgets import double_star
        from dualradio.schedules import decay_schedule

        configs = []
        # a fourth sweep point (2^14) satisfies the fit's minimum-point rule
        for dl2 in (8, 10, 12, 14):
            delta = 2 ** dl2
            g = double_star(delta)
            sched = decay_schedule(delta)
            configs.append(TrialConfig(
                problem="local", gadget=g, schedule=sched,
                adversary={"kind": "correlated_shift",
                           "shift": sched.cycle_length},
                seed=3000, max_rounds=100_000, engine_mode="analytic_star"))
        rows = self.run_sweep_rows(configs, 300)
        path = tmp_path / "sweep.csv"
        path.write_text(csv_header() + "\n" + "\n".join(rows) + "\n")
        fit = fit_scaling(read_trials_csv(str(path)), "shift", {})
        assert fit.exponent >= 0.7


class TestCalculators:
    def test_oracle_exact(self, capsys):
        assert main(["oracle", "exact", "4", "0.25", "false"]) == 0
        assert capsys.readouterr().out.strip() == "0.421875"

    def test_oracle_wpi(self, capsys):
        assert main(["oracle", "wpi", "0.5", "0.5"]) == 0
        assert capsys.readouterr().out.strip() == "0 0.25"

    def test_oracle_prosing_and_interval(self, capsys):
        assert main(["oracle", "prosing", "2", "0.5"]) == 0
        v = float(capsys.readouterr().out.strip())
        assert v == pytest.approx(1 / (2 * math.e), rel=1e-12)
        assert main(["oracle", "interval", "2", "8", "0.25"]) == 0
        assert float(capsys.readouterr().out.strip()) == pytest.approx(
            0.2669677734375, abs=1e-14)

    def test_gadget_star_output(self, capsys):
        assert main(["gadget", "star", "4", "6"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("n 6\n")
        assert out.count("U ") == 2

    def test_schedule_dump(self, capsys):
        assert main(["schedule", "rlb", "--delta", "16", "--tau", "2"]) == 0
        assert capsys.readouterr().out == "index,probability\n1,0.25\n2,0.0625\n"
