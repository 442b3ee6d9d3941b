import csv
import math

import numpy as np
import pytest

from spdiff.cli import (PRESETS, config_from_mapping, main, make_preset,
                        parse_config_text)
from spdiff.errors import ValidationError

CONFIG_TEXT = """\
# demo configuration
differentiator.variant = linear
differentiator.a10 = 5
differentiator.a20 = 2
gain.mode = fixed
gain.g = 300
signal.kind = sine
signal.amplitude = 1
signal.angular_frequency = 1
integrator.method = rk4
integrator.h = 1e-5
run.horizon = 0.2
run.label = demo
"""


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class TestConfigFile:
    def test_parse(self):
        kv = parse_config_text(CONFIG_TEXT)
        assert kv["differentiator.variant"] == "linear"
        assert kv["run.horizon"] == "0.2"

    def test_bad_line(self):
        with pytest.raises(ValidationError, match="line 1"):
            parse_config_text("not a key value pair")

    def test_flat_keys_required(self):
        with pytest.raises(ValidationError, match="section.name"):
            parse_config_text("horizon = 5")

    def test_unknown_key_rejected(self):
        kv = parse_config_text(CONFIG_TEXT + "run.typo = 1\n")
        with pytest.raises(ValidationError, match="run.typo"):
            config_from_mapping(kv)

    def test_build_experiment(self):
        cfg = config_from_mapping(parse_config_text(CONFIG_TEXT))
        assert cfg.label == "demo"
        assert cfg.differentiator.variant == "linear"
        assert cfg.integrator.h == 1e-5
        assert cfg.horizon == 0.2


class TestPresets:
    @pytest.mark.parametrize("name", PRESETS)
    def test_all_valid(self, name):
        cfg = make_preset(name)
        assert cfg.differentiator.schedule.g_max == 300.0
        assert cfg.integrator.h == 1e-6
        assert cfg.horizon == 5.0

    def test_unknown(self):
        with pytest.raises(ValidationError):
            make_preset("turbo")


class TestRun:
    def test_run_with_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(CONFIG_TEXT)
        rc = main(["run", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 0
        header, rows = read_csv(tmp_path / "demo-trajectory.csv")
        assert header == ["t", "v", "vdot", "x1", "x2", "e1", "e2"]
        assert len(rows) > 100
        assert (tmp_path / "demo-report.txt").exists()
        out = capsys.readouterr().out
        assert "convergence_time" in out

    def test_byte_identical_reruns(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(CONFIG_TEXT)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(cfg), "--out", str(d1)]) == 0
        assert main(["run", "--config", str(cfg), "--out", str(d2)]) == 0
        assert (d1 / "demo-trajectory.csv").read_bytes() \
            == (d2 / "demo-trajectory.csv").read_bytes()

    def test_lf_line_endings_and_17_digits(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(CONFIG_TEXT)
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        raw = (tmp_path / "demo-trajectory.csv").read_bytes()
        assert b"\r" not in raw
        # values roundtrip exactly through the 17-significant-digit format
        header, rows = read_csv(tmp_path / "demo-trajectory.csv")
        assert float(rows[3][0]) == 3 * 1e-5  # same float the kernel computed

    def test_validation_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text(CONFIG_TEXT + "differentiator.a10 = -1\n")
        assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2

    def test_missing_preset_and_config(self, tmp_path):
        assert main(["run", "--out", str(tmp_path)]) == 2

    def test_numerical_exit_code(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(CONFIG_TEXT + "run.init_x2 = 2e9\n")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 3

    def test_guard_violation_is_validation_error(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(CONFIG_TEXT.replace("integrator.h = 1e-5",
                                           "integrator.h = 1e-2"))
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2


class TestCompare:
    def test_three_presets(self, tmp_path):
        rc = main(["compare", "linear-sec6", "nonlinear-sec6", "hybrid-sec6",
                   "--horizon", "0.1", "--out", str(tmp_path)])
        assert rc == 0
        header, rows = read_csv(tmp_path / "compare.csv")
        assert header[0] == "label"
        assert [r[0] for r in rows] == ["linear-sec6", "nonlinear-sec6", "hybrid-sec6"]

    def test_repeat_preset_rows_identical(self, tmp_path):
        rc = main(["compare", "hybrid-sec6", "hybrid-sec6",
                   "--horizon", "0.05", "--out", str(tmp_path)])
        assert rc == 0
        _, rows = read_csv(tmp_path / "compare.csv")
        # identical except the informational wall-clock column
        assert rows[0][:6] == rows[1][:6]

    def test_w_form_preset_matches_linear_metrics(self, tmp_path):
        rc = main(["compare", "linear-sec6", "linear-sec6-wform",
                   "--horizon", "0.2", "--out", str(tmp_path)])
        assert rc == 0
        _, rows = read_csv(tmp_path / "compare.csv")
        ts_lin, ts_w = float(rows[0][2]), float(rows[1][2])
        sse_lin, sse_w = float(rows[0][3]), float(rows[1][3])
        assert ts_lin == pytest.approx(ts_w, rel=1e-6, abs=2e-5)
        assert sse_lin == pytest.approx(sse_w, rel=1e-6)


class TestSweep:
    def test_requires_three_epsilons(self, tmp_path):
        rc = main(["sweep", "--preset", "linear-sec6", "--epsilon", "0.01",
                   "--out", str(tmp_path)])
        assert rc == 2

    def test_small_sweep(self, tmp_path):
        rc = main(["sweep", "--preset", "linear-sec6",
                   "--epsilon", "0.01", "0.005", "0.0025",
                   "--horizon", "1", "--out", str(tmp_path)])
        assert rc == 0
        header, rows = read_csv(tmp_path / "sweep.csv")
        assert header == ["epsilon", "steady_state_error", "h"]
        assert len(rows) == 3
        slope_text = (tmp_path / "sweep-slope.txt").read_text()
        slope = float(slope_text.split("=")[1])
        assert 0.8 <= slope <= 1.2

    def test_infeasible_h(self, tmp_path):
        rc = main(["sweep", "--preset", "linear-sec6",
                   "--epsilon", "0.01", "0.005", "0.0025",
                   "--h", "1e-3", "--out", str(tmp_path)])
        assert rc == 2


class TestLemma:
    def test_linear_checks(self, tmp_path):
        rc = main(["lemma", "--system", "linear", "--inits", "1,1;-2,0.5",
                   "--out", str(tmp_path)])
        assert rc == 0
        header, rows = read_csv(tmp_path / "lemma-linear.csv")
        assert len(rows) == 2

    def test_nonlinear_with_random_inits(self, tmp_path, capsys):
        rc = main(["lemma", "--system", "nonlinear", "--random-inits", "3",
                   "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "homogeneity residual" in out
        assert "all checks passed" in out

    def test_origin_settles_immediately(self, tmp_path, capsys):
        rc = main(["lemma", "--system", "hybrid", "--inits", "0,0",
                   "--out", str(tmp_path)])
        assert rc == 0
        assert "settling=0.0000" in capsys.readouterr().out


class TestFreq:
    def test_outputs(self, tmp_path):
        rc = main(["freq", "--omega", "1", "5", "--h", "1e-5",
                   "--out", str(tmp_path)])
        assert rc == 0
        header, rows = read_csv(tmp_path / "freq.csv")
        assert header[:3] == ["omega", "mag_analytic", "phase_analytic"]
        assert len(rows) == 2
        for row in rows:
            assert float(row[5]) < 0.01    # mag deviation
            assert float(row[6]) < 0.01    # phase deviation


def write_stream_csv(path, ts, vs):
    with open(path, "w", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "v"))
        w.writerows((f"{t:.17g}", f"{v:.17g}") for t, v in zip(ts, vs))


class TestStream:
    def test_constant_input_kills_derivative(self, tmp_path):
        ts = np.arange(2000) * 1e-4
        write_stream_csv(tmp_path / "in.csv", ts, np.ones_like(ts))
        rc = main(["stream", "--preset", "hybrid-sec6",
                   "--input", str(tmp_path / "in.csv"), "--out", str(tmp_path)])
        assert rc == 0
        data = np.genfromtxt(tmp_path / "stream.csv", delimiter=",", names=True)
        assert abs(data["x2"][-1]) < 1e-6

    def test_non_monotone_rejected(self, tmp_path):
        write_stream_csv(tmp_path / "in.csv", [0.0, 1e-4, 1e-4], [0.0, 0.1, 0.2])
        rc = main(["stream", "--preset", "hybrid-sec6",
                   "--input", str(tmp_path / "in.csv"), "--out", str(tmp_path)])
        assert rc == 2

    def test_rate_mismatch_rejected(self, tmp_path):
        ts = np.arange(100) * 2e-4
        write_stream_csv(tmp_path / "in.csv", ts, np.sin(ts))
        rc = main(["stream", "--preset", "hybrid-sec6", "--rate", "10000",
                   "--input", str(tmp_path / "in.csv"), "--out", str(tmp_path)])
        assert rc == 2

    def test_triangular_input_gives_square_wave_output(self, tmp_path):
        # slope flips of the input become level flips of the estimate
        period = 0.8
        slope = 4.0 / period   # amplitude 0.8, so slope = 4A/T = 4
        ts = np.arange(8000) * 1e-4
        u = np.mod(ts, period)
        vs = np.where(u < period / 2.0, slope * u, slope * (period - u))
        write_stream_csv(tmp_path / "in.csv", ts, vs)
        rc = main(["stream", "--preset", "hybrid-sec6",
                   "--input", str(tmp_path / "in.csv"), "--out", str(tmp_path)])
        assert rc == 0
        data = np.genfromtxt(tmp_path / "stream.csv", delimiter=",", names=True)
        corners = np.arange(0.0, ts[-1] + period, period / 2.0)
        away = np.ones(ts.size, dtype=bool)
        for tc in corners:
            away &= np.abs(data["t"] - tc) > 0.05
        want = np.where(np.mod(data["t"], period) < period / 2.0, slope, -slope)
        assert np.max(np.abs(data["x2"][away] - want[away])) < 0.05 * slope

    def test_sampled_signal_from_config(self, tmp_path):
        sig = tmp_path / "sig.csv"
        ts = np.linspace(0.0, 1.0, 101)
        with open(sig, "w", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("t", "v"))
            w.writerows((f"{t:.17g}", f"{math.sin(t):.17g}") for t in ts)
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(CONFIG_TEXT.replace("signal.kind = sine",
                                           "signal.kind = sampled\n"
                                           f"signal.csv = {sig}"))
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 0

    def test_matches_offline_run_exactly_on_shared_grid(self, tmp_path):
        # sample interval equal to h (dyadic so the grids align bitwise)
        h = 2.0 ** -13
        n = 1024
        ts = np.arange(n + 1) * h
        write_stream_csv(tmp_path / "in.csv", ts, np.sin(ts))
        cfg = tmp_path / "run.cfg"
        cfg.write_text(CONFIG_TEXT.replace("integrator.h = 1e-5",
                                           f"integrator.h = {h!r}")
                                  .replace("run.horizon = 0.2",
                                           f"run.horizon = {n * h!r}"))
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert main(["stream", "--config", str(cfg),
                     "--input", str(tmp_path / "in.csv"),
                     "--out", str(tmp_path)]) == 0
        offline = np.genfromtxt(tmp_path / "demo-trajectory.csv",
                                delimiter=",", names=True)
        online = np.genfromtxt(tmp_path / "stream.csv", delimiter=",", names=True)
        assert offline["t"].size == online["t"].size == n + 1
        np.testing.assert_array_equal(online["x2"], offline["x2"])
