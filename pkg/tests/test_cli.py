"""Command-line interface: flags, config precedence, CSV and manifest output."""

import csv

import pytest

from gridshare.cli import (
    CRITICAL_COLUMNS,
    HEATMAP_COLUMNS,
    SWEEP_COLUMNS,
    _grid,
    main,
    write_results_csv,
)
from gridshare.experiments import CriticalRateEstimate


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestAllocateCommand:
    def test_linearized_example(self, capsys):
        status = main(
            [
                "allocate",
                "--model",
                "linearized",
                "--stations",
                "2",
                "--resistance",
                "0.1",
                "--delta",
                "0.05",
                "--state",
                "1,1",
            ]
        )
        assert status == 0
        values = [float(tok) for tok in capsys.readouterr().out.split(",")]
        assert values == pytest.approx([0.2700831, 0.1350415], abs=5e-7)

    def test_missing_state_is_an_error(self, capsys):
        assert main(["allocate"]) == 1
        assert "error" in capsys.readouterr().err

    def test_bad_delta_is_an_error(self, capsys):
        status = main(["allocate", "--delta", "0.9", "--state", "1,1"])
        assert status == 1
        assert "delta" in capsys.readouterr().err

    def test_unknown_flag_exits_with_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["allocate", "--frobnicate"])
        assert exc.value.code == 2


class TestStationaryCommand:
    def test_birth_death_value_lands_in_csv(self, tmp_path, capsys):
        out = tmp_path / "stationary.csv"
        status = main(
            [
                "stationary",
                "--stations",
                "1",
                "--capacity",
                "1",
                "--lambda",
                "0.1",
                "--model",
                "distflow",
                "--out",
                str(out),
            ]
        )
        assert status == 0
        (row,) = read_csv(out)
        assert float(row["mean_number"]) == pytest.approx(0.1596639, abs=5e-8)
        assert float(row["mean_time"]) == pytest.approx(1.9)
        assert row["method"] == "exact"
        manifest = (tmp_path / "stationary.manifest.txt").read_text()
        assert "command = stationary" in manifest
        assert "lambda = 0.1" in manifest


class TestSimulateCommand:
    def test_writes_sim_rows_and_manifest(self, tmp_path):
        out = tmp_path / "simulate.csv"
        status = main(
            [
                "simulate",
                "--stations",
                "2",
                "--capacity",
                "3",
                "--lambda",
                "0.1",
                "--horizon",
                "2000",
                "--burn-in",
                "200",
                "--seed",
                "5",
                "--replications",
                "2",
                "--out",
                str(out),
            ]
        )
        assert status == 0
        rows = read_csv(out)
        assert [r["lot"] for r in rows] == ["1", "2"]
        assert all(r["method"] == "sim" for r in rows)
        assert all(r["seed"] == "5" for r in rows)
        assert "seed = 5" in (tmp_path / "simulate.manifest.txt").read_text()


class TestSweepCommand:
    def test_reruns_are_byte_identical(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        args = [
            "sweep",
            "--stations",
            "2",
            "--capacity",
            "3",
            "--model",
            "both",
            "--grid",
            "0.05,0.1",
            "--method",
            "exact",
        ]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        rows = read_csv(a)
        assert len(rows) == 8  # 2 models x 2 rate points x 2 lots
        assert list(rows[0]) == list(SWEEP_COLUMNS)
        assert {r["model"] for r in rows} == {"distflow", "linearized"}

    def test_help_exits_zero(self):
        with pytest.raises(SystemExit) as exc:
            main(["sweep", "--help"])
        assert exc.value.code == 0


class TestCriticalCommand:
    def test_writes_schema_rows(self, tmp_path):
        out = tmp_path / "critical.csv"
        status = main(
            [
                "critical",
                "--capacity",
                "4",
                "--model",
                "distflow",
                "--grid",
                "0.1:0.5:0.1",
                "--method",
                "exact",
                "--out",
                str(out),
            ]
        )
        assert status == 0
        rows = read_csv(out)
        assert list(rows[0]) == list(CRITICAL_COLUMNS)
        assert float(rows[0]["critical_rate"]) > 0


class TestHeatmapCommand:
    def test_writes_schema_rows(self, tmp_path):
        out = tmp_path / "heatmap.csv"
        status = main(
            [
                "heatmap",
                "--capacity",
                "3",
                "--model",
                "linearized",
                "--total-rates",
                "0.1,0.2",
                "--fractions",
                "0.25,0.75",
                "--method",
                "exact",
                "--out",
                str(out),
            ]
        )
        assert status == 0
        rows = read_csv(out)
        assert list(rows[0]) == list(HEATMAP_COLUMNS)
        assert len(rows) == 4


class TestConfigResolution:
    def test_config_file_overridden_by_flags(self, tmp_path, capsys):
        conf = tmp_path / "run.conf"
        conf.write_text("model = linearized\ndelta = 0.05\nstations = 2\n")
        assert main(["allocate", "--config", str(conf), "--state", "1,1"]) == 0
        from_file = capsys.readouterr().out
        assert main(
            [
                "allocate",
                "--config",
                str(conf),
                "--model",
                "distflow",
                "--state",
                "1,1",
            ]
        ) == 0
        overridden = capsys.readouterr().out
        assert float(from_file.split(",")[0]) == pytest.approx(0.2700831, abs=5e-7)
        assert from_file != overridden

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        conf = tmp_path / "run.conf"
        conf.write_text("wattage = 9000\n")
        assert main(["allocate", "--config", str(conf), "--state", "1,1"]) == 1
        assert "wattage" in capsys.readouterr().err

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GRIDSHARE_SEED", "77")
        out = tmp_path / "simulate.csv"
        args = [
            "simulate",
            "--stations",
            "1",
            "--capacity",
            "2",
            "--lambda",
            "0.1",
            "--horizon",
            "500",
            "--burn-in",
            "50",
            "--out",
            str(out),
        ]
        assert main(args) == 0
        assert "seed = 77" in (tmp_path / "simulate.manifest.txt").read_text()
        # an explicit flag wins over the environment
        assert main(args + ["--seed", "3"]) == 0
        assert "seed = 3" in (tmp_path / "simulate.manifest.txt").read_text()


class TestCsvWriter:
    def test_empty_table_with_schema_gives_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_results_csv([], path, HEATMAP_COLUMNS)
        assert path.read_bytes() == b"model,total_rate,fraction_1,total_mean_number,ci\r\n"

    def test_empty_table_without_schema_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_results_csv([], tmp_path / "x.csv")

    def test_seven_significant_digits(self, tmp_path):
        est = CriticalRateEstimate(
            model="distflow",
            fraction_1=0.5,
            rate=0.12345678901,
            lower=0.1,
            upper=0.15,
            grid_step=0.05,
            explosive=True,
            candidates=(0.1234568,),
        )
        path = tmp_path / "crit.csv"
        write_results_csv([est], path, CRITICAL_COLUMNS)
        (row,) = read_csv(path)
        assert row["critical_rate"] == "0.1234568"


class TestGridParsing:
    def test_range_spec(self):
        assert _grid("0.1:0.2:0.05") == pytest.approx([0.1, 0.15, 0.2])

    def test_comma_list(self):
        assert _grid("0.1,0.3") == pytest.approx([0.1, 0.3])

    def test_bad_spec_rejected(self):
        import argparse

        with pytest.raises(argparse.ArgumentTypeError):
            _grid("0.1:0.2")
        with pytest.raises(argparse.ArgumentTypeError):
            _grid("0.1:0.2:-0.1")
