import csv
import io
import subprocess
import sys

import pytest

from qcdkit.cli import HEADER, format_number, main
from qcdkit.config import ConfigError, load_config, parse_config

NETWORK = """
[model]
family = gaussian
mu0 = 0
mu1 = 1

[change]
law = fixed
gamma = 1

[simulation]
trials = 2000
seed = 3

[network]
sensors = {sensors}
local_thresholds = 3.0
sum_threshold = 3.0
centralized_threshold = 3.0
"""


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    reader = csv.reader(io.StringIO(text))
    assert tuple(next(reader)) == HEADER
    return list(reader)


class TestSimulate:
    def test_table_preset_grid(self, capsys):
        code, out, _ = run(capsys, "simulate", "--preset", "table2", "--trials", "3000")
        assert code == 0
        body = rows(out)
        by_metric = {}
        for r in body:
            by_metric.setdefault(r[2], []).append(r[1])
        assert set(by_metric) == {"ADD", "PFA"}
        for thresholds in by_metric.values():
            assert thresholds == ["1.386", "2.197", "4.595", "6.906", "11.512"]
        assert all(r[7] == "20240101" for r in body)

    def test_byte_identical_reruns(self, capsys):
        argv = ("simulate", "--preset", "table2", "--trials", "2000", "--seed", "5")
        first, second = run(capsys, *argv)[1], run(capsys, *argv)[1]
        assert first == second
        assert run(capsys, *argv, "--threads", "1")[1] == first

    def test_zero_trials_is_config_error(self, capsys):
        code, _, err = run(capsys, "simulate", "--preset", "table2", "--trials", "0")
        assert code == 2 and "simulation.trials" in err

    def test_unknown_key_named(self, capsys):
        code, _, err = run(capsys, "simulate", "--preset", "table2", "--set", "detector.colour=red")
        assert code == 2 and "detector.colour" in err

    def test_missing_key_named(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[model]\nfamily = gaussian\nmu0 = 0\n[change]\nlaw = never\n[detector]\nkind = cusum\nthresholds = 3\n[simulation]\ntrials = 10\n")
        code, _, err = run(capsys, "simulate", str(path))
        assert code == 2 and "model.mu1" in err

    def test_estimation_error_exit_code(self, capsys):
        code, _, err = run(
            capsys, "simulate", "--preset", "table2", "--trials", "50",
            "--set", "detector.thresholds=400", "--set", "simulation.horizon_cap=20",
        )
        assert code == 3 and "estimation error" in err

    def test_writes_output_file(self, tmp_path, capsys):
        dest = tmp_path / "out.csv"
        code, out, _ = run(capsys, "simulate", "--preset", "fig6", "--trials", "200", "--output", str(dest))
        assert code == 0 and out == ""
        metrics = {r[2] for r in rows(dest.read_text())}
        assert metrics == {"FAR", "MeanTimeToFalseAlarm"}

    def test_no_config_at_all(self, capsys):
        assert run(capsys, "simulate")[0] == 2


class TestTradeoff:
    def test_slope_footer(self, capsys):
        code, out, _ = run(
            capsys, "tradeoff", "--preset", "fig4", "--trials", "20000", "--set", "detector.thresholds=2,3,4,5"
        )
        assert code == 0
        body = rows(out)
        assert body[-1][2] == "SLOPE" and body[-1][1] == ""
        assert 2.0 < float(body[-1][3]) < 5.0
        assert len(body) == 2 * 4 + 1

    def test_single_grid_point_rejected(self, capsys):
        code, _, err = run(capsys, "tradeoff", "--preset", "fig6", "--set", "detector.thresholds=4.8")
        assert code == 2 and "detector.thresholds" in err


class TestOvershoot:
    def test_prediction_rows(self, capsys):
        code, out, _ = run(capsys, "overshoot", "--preset", "table2", "--set", "overshoot.crossings=5000")
        assert code == 0
        body = rows(out)
        names = [r[2] for r in body]
        assert names[:4] == ["KAPPA", "ZETA", "ETA_MEAN", "FLAGGED"]
        assert names.count("SECOND_ORDER_PFA") == 5 and names.count("SECOND_ORDER_ADD") == 5
        second = run(capsys, "overshoot", "--preset", "table2", "--set", "overshoot.crossings=5000")[1]
        assert second == out

    def test_degenerate_guard_row(self, capsys):
        code, out, _ = run(
            capsys, "overshoot", "--preset", "table2", "--set", "overshoot.degenerate_step=0.5", "--set", "change.rho=0.01"
        )
        assert code == 0
        flagged = [r for r in rows(out) if r[2] == "FLAGGED"]
        assert flagged[0][3] == "1"


class TestDecentralized:
    def test_single_sensor_row(self, tmp_path, capsys):
        path = tmp_path / "net.ini"
        path.write_text(NETWORK.format(sensors=1))
        code, out, _ = run(capsys, "decentralized", str(path))
        assert code == 0
        body = {(r[0], r[2]): r for r in rows(out)}
        assert body[("fusion", "SINGLE_SENSOR_EQUIVALENCE")][3] == "1"
        assert body[("fusion", "ORDERING_HOLDS")][3] == "1"
        assert body[("centralized", "FIRST_ORDER_SLOPE")][3] == "2"

    def test_ordering_row_with_several_sensors(self, tmp_path, capsys):
        path = tmp_path / "net.ini"
        path.write_text(NETWORK.format(sensors=3) + "quantizer_levels = 4\n")
        code, out, _ = run(capsys, "decentralized", str(path))
        assert code == 0
        body = rows(out)
        assert any(r[0] == "fusion" and r[2] == "ORDERING_HOLDS" and r[3] == "1" for r in body)
        assert any(r[2] == "KL_QUANTIZED" for r in body)
        assert {r[0] for r in body if r[2] == "DELAY"} == {
            "fusion_min", "fusion_max", "fusion_all", "fusion_sum", "fusion_centralized"
        }

    def test_missing_network_section(self, capsys):
        code, _, err = run(capsys, "decentralized", "--preset", "table2")
        assert code == 2 and "network" in err


class TestFormatting:
    @pytest.mark.parametrize(
        "value,text",
        [(0.0, "0"), (12, "12"), (5.61e-3, "0.00561"), (5.6e-4, "5.600000e-04"), (13.9, "13.9"), (float("inf"), "inf")],
    )
    def test_numbers(self, value, text):
        assert format_number(value) == text

    def test_config_layering(self):
        cfg = load_config(preset="fig4", overrides=["simulation.trials=7"])
        assert cfg.trials == 7 and cfg.get("model", "mu1") == 0.75
        with pytest.raises(ConfigError):
            parse_config("[model]\nfamily = cauchy\n")
        with pytest.raises(ConfigError):
            load_config(preset="fig9")

    def test_console_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "qcdkit.cli", "simulate", "--preset", "fig6", "--trials", "0"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
