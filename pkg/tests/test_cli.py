import json

import numpy as np
import pytest

from xtalk_quant.cli import run
from xtalk_quant.scenario import Scenario


def _read_table(path):
    """Parse a report: meta dict plus column-name -> list of strings."""
    meta, header, rows = {}, None, []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key] = val
            continue
        if header is None:
            header = line.split("\t")
            continue
        rows.append(line.split("\t"))
    cols = {name: [r[i] for r in rows if len(r) == len(header)] for i, name in enumerate(header)}
    return meta, cols


@pytest.fixture()
def fast_args(tmp_path):
    """Overrides that keep CLI runs small: 4 users, ~33 tones."""
    return ["--users", "4", "--decimation", "208", "--seed", "5"]


class TestSynthAndInspect:
    def test_synth_writes_deterministic_file(self, tmp_path, fast_args, capsys):
        out1 = tmp_path / "a.json"
        out2 = tmp_path / "b.json"
        assert run(["synth-channel", "--out", str(out1), *fast_args]) == 0
        assert run(["synth-channel", "--out", str(out2), *fast_args]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        text = capsys.readouterr().out
        assert "gamma1=" in text and "gamma2=" in text

    def test_inspect(self, tmp_path, fast_args, capsys):
        out = tmp_path / "a.json"
        run(["synth-channel", "--out", str(out), *fast_args])
        assert run(["inspect-channel", "--in", str(out)]) == 0
        text = capsys.readouterr().out
        assert "alpha*ell" in text

    def test_bad_channel_file_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        assert run(["inspect-channel", "--in", str(bad)]) == 2

    def test_length_and_band_overrides(self, tmp_path, capsys):
        out = tmp_path / "c.json"
        code = run(
            [
                "synth-channel",
                "--users",
                "4",
                "--decimation",
                "208",
                "--seed",
                "5",
                "--length",
                "600",
                "--band",
                "15e6",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        text = capsys.readouterr().out
        assert "gamma2=" in text
        from xtalk_quant.channel_model import fit_alpha, load_channel

        ens = load_channel(out)
        assert ens.grid.f_end <= 15e6 + ens.grid.spacing
        # doubled length doubles the fitted aggregate
        assert fit_alpha(ens) == pytest.approx(0.0038, rel=1e-10)


class TestAnalyze:
    def test_zero_loss_at_exactly_representable_precoder(self, tmp_path, capsys):
        # an identity channel has precoder I: rounding is exact, losses are 0
        chan = {
            "format_version": 1,
            "kind": "xtalk-quant-channel",
            "p": 2,
            "tone_count": 2,
            "f_start": 1e6,
            "spacing": 4312.5,
            "tones": [
                [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]],
                [[0.9, 0.0], [0.0, 0.0], [0.0, 0.0], [0.9, 0.0]],
            ],
        }
        cpath = tmp_path / "chan.json"
        cpath.write_text(json.dumps(chan))
        out = tmp_path / "report.tsv"
        assert run(["analyze", "--channel-file", str(cpath), "--out", str(out)]) == 0
        meta, cols = _read_table(out)
        assert meta["format_version"] == "1"
        assert "scenario_hash" in meta
        losses = [float(x) for x in cols["loss_bps_hz"]]
        assert all(l == 0.0 for l in losses)

    def test_reference_scenario_band_loss_under_one_percent(self, tmp_path, capsys):
        out = tmp_path / "report.tsv"
        code = run(
            [
                "analyze",
                "--decimation",
                "208",
                "--seed",
                "5",
                "--d-bits",
                "14",
                "--normalize",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        err = capsys.readouterr().err
        worst = float(err.rsplit("=", 1)[1])
        assert worst < 0.01

    def test_determinism(self, tmp_path, fast_args):
        out1, out2 = tmp_path / "r1.tsv", tmp_path / "r2.tsv"
        run(["analyze", "--normalize", "--out", str(out1), *fast_args])
        run(["analyze", "--normalize", "--out", str(out2), *fast_args])
        assert out1.read_bytes() == out2.read_bytes()


class TestBound:
    def test_all_columns_monotone(self, tmp_path, fast_args):
        out = tmp_path / "bounds.tsv"
        assert (
            run(
                [
                    "bound",
                    "--which",
                    "all",
                    "--d-min",
                    "10",
                    "--d-max",
                    "18",
                    "--out",
                    str(out),
                    *fast_args,
                ]
            )
            == 0
        )
        _, cols = _read_table(out)
        for name, vals in cols.items():
            if name == "d_bits":
                continue
            nums = [float(v) for v in vals if v != ""]
            assert all(a > b for a, b in zip(nums, nums[1:])), name

    def test_below_floor_exit_4(self, capsys):
        # 10 users push r_max past 1, so the floor 1/2 + log2(1+r) exceeds d=1
        args = ["--users", "10", "--decimation", "208", "--seed", "5"]
        assert (
            run(["bound", "--which", "main", "--d-min", "1", "--d-max", "2", *args])
            == 4
        )
        assert "minimum admissible" in capsys.readouterr().err

    def test_relative_curve_crosses_target(self, tmp_path, capsys):
        out = tmp_path / "rel.tsv"
        code = run(
            [
                "bound",
                "--which",
                "relative",
                "--d-min",
                "10",
                "--d-max",
                "20",
                "--decimation",
                "64",
                "--seed",
                "5",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        _, cols = _read_table(out)
        vals = [float(v) for v in cols["relative"]]
        assert vals[0] > 0.01 > vals[-1]
        crossings = sum(1 for a, b in zip(vals, vals[1:]) if a > 0.01 >= b)
        assert crossings == 1


class TestDesignBits:
    def test_relative_target(self, capsys):
        code = run(
            [
                "design-bits",
                "--target-relative",
                "0.01",
                "--decimation",
                "64",
                "--seed",
                "5",
            ]
        )
        assert code == 0
        text = capsys.readouterr().out
        assert "d_min =" in text
        assert "bound at d_min" in text

    def test_tone_target_floor_note(self, capsys):
        args = ["--users", "10", "--decimation", "208", "--seed", "5"]
        code = run(["design-bits", "--target-tone", "100.0", *args])
        assert code == 0
        assert "floor" in capsys.readouterr().out

    def test_requires_exactly_one_target(self, fast_args):
        assert run(["design-bits", *fast_args]) == 2


class TestSimulate:
    def test_zero_errors(self, tmp_path, fast_args):
        out = tmp_path / "sim.tsv"
        code = run(
            ["simulate", "--n-trials", "3", "--zero-errors", "--out", str(out), *fast_args]
        )
        assert code == 0
        _, cols = _read_table(out)
        assert float(cols["stat_tone_bps_hz"][0]) == 0.0
        assert float(cols["eta_band"][0]) == 0.0

    def test_d_range_curve_and_determinism(self, tmp_path, fast_args):
        out1, out2 = tmp_path / "s1.tsv", tmp_path / "s2.tsv"
        args = [
            "simulate",
            "--n-trials",
            "50",
            "--d-range",
            "8:12",
            *fast_args,
        ]
        assert run([*args, "--out", str(out1)]) == 0
        assert run([*args, "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        _, cols = _read_table(out1)
        worst = [float(v) for v in cols["stat_tone_bps_hz"]]
        assert all(a >= b for a, b in zip(worst, worst[1:]))

    def test_csi_run(self, tmp_path, fast_args):
        out = tmp_path / "csi.tsv"
        code = run(
            [
                "simulate",
                "--n-trials",
                "20",
                "--csi-samples",
                "1000",
                "--out",
                str(out),
                *fast_args,
            ]
        )
        assert code == 0
        meta, cols = _read_table(out)
        assert meta["csi_samples"] == "1000"


class TestSweep:
    def test_rows_with_errors_recorded(self, tmp_path, fast_args):
        out = tmp_path / "sweep.tsv"
        code = run(
            [
                "sweep",
                "--lengths",
                "300,5000",
                "--target-relative",
                "0.01",
                "--out",
                str(out),
                *fast_args,
            ]
        )
        assert code == 0
        _, cols = _read_table(out)
        assert cols["d_min_bits"][0] != ""
        assert cols["d_min_bits"][1] == ""
        assert "FloorNonpositive" in cols["error"][1]


class TestScenarioFile:
    def test_round_trip_idempotent(self, tmp_path):
        scen = Scenario(users=4, decimation=208, seed=5, d_bits=12)
        p1, p2 = tmp_path / "s1.json", tmp_path / "s2.json"
        scen.save(p1)
        Scenario.load(p1).save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_config_drives_cli_and_flags_override(self, tmp_path, capsys):
        scen = Scenario(users=3, decimation=208, seed=5)
        cfg = tmp_path / "scen.json"
        scen.save(cfg)
        out = tmp_path / "chan.json"
        assert run(["synth-channel", "--config", str(cfg), "--out", str(out)]) == 0
        assert "p=3" in capsys.readouterr().out
        assert run(["synth-channel", "--config", str(cfg), "--users", "2", "--out", str(out)]) == 0
        assert "p=2" in capsys.readouterr().out

    def test_unknown_key_exit_2(self, tmp_path):
        cfg = tmp_path / "scen.json"
        cfg.write_text(json.dumps({"format_version": 1, "nonsense": 1}))
        assert run(["synth-channel", "--config", str(cfg), "--out", str(cfg) + ".c"]) == 2
