import numpy as np
import pytest

from daleforge.calibrate import CalibrationConstants
from daleforge.cli import EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE, main, parse_duration
from daleforge.datasets import ChannelSeries, HouseDataset, read_mains, write_calibration, write_house, write_waveform_chunk
from daleforge.household import dump_house_config
from daleforge.pipeline import build_scenario, default_calibration, write_waveforms
from daleforge.powercalc import synth_waveform
from daleforge.presets import small_house


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    root = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--seed", "7", "--out", str(root), "--duration", "1d"]) == EXIT_OK
    return root


class TestSimulate:
    def test_layout(self, simulated, capsys):
        house = simulated / "house_1"
        channel_files = sorted(house.glob("channel_*.dat"))
        assert len([p for p in channel_files if "button" not in p.name]) >= 6
        assert (house / "labels.dat").exists()
        assert (house / "mains.dat").exists()

    def test_prints_seed(self, tmp_path, capsys):
        code, out, _ = run(capsys, "simulate", "--seed", 42, "--out", tmp_path, "--duration", "600")
        assert code == EXIT_OK
        assert "seed: 42" in out

    def test_generated_seed_is_printed(self, tmp_path, capsys):
        code, out, _ = run(capsys, "simulate", "--out", tmp_path, "--duration", "120")
        assert code == EXIT_OK
        assert out.splitlines()[0].startswith("seed: ")

    def test_byte_identical(self, tmp_path, capsys):
        for name in ("a", "b"):
            assert run(capsys, "simulate", "--seed", 9, "--out", tmp_path / name, "--duration", "2h")[0] == EXIT_OK
        a = sorted((tmp_path / "a" / "house_1").iterdir())
        b = sorted((tmp_path / "b" / "house_1").iterdir())
        assert [p.name for p in a] == [p.name for p in b]
        for pa, pb in zip(a, b):
            assert pa.read_bytes() == pb.read_bytes(), pa.name

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "house.yaml"
        dump_house_config(small_house(), cfg)
        code, _, _ = run(capsys, "simulate", "--seed", 1, "--config", cfg, "--out", tmp_path / "o", "--duration", "1h", "--house-number", 4)
        assert code == EXIT_OK
        assert (tmp_path / "o" / "house_4" / "labels.dat").exists()

    def test_rf_log(self, tmp_path, capsys):
        log = tmp_path / "rf.jsonl"
        assert run(capsys, "simulate", "--seed", 1, "--out", tmp_path, "--duration", "600", "--rf-log", log)[0] == EXIT_OK
        assert log.read_text().count("\n") > 50

    @pytest.mark.parametrize(
        "argv",
        [
            ["simulate", "--out", "x", "--house-preset", "mansion"],
            ["simulate", "--out", "x", "--duration", "soon"],
            ["simulate", "--out", "x", "--duration", "1"],
            ["simulate"],
            ["frobnicate"],
        ],
    )
    def test_usage_errors(self, argv, capsys):
        assert run(capsys, *argv)[0] == EXIT_USAGE

    def test_config_and_preset_conflict(self, tmp_path, capsys):
        cfg = tmp_path / "house.yaml"
        dump_house_config(small_house(), cfg)
        code, _, err = run(capsys, "simulate", "--config", cfg, "--house-preset", "small", "--out", tmp_path)
        assert code == EXIT_USAGE and "either" in err

    def test_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "house.yaml"
        cfg.write_text("vampire_power: 3\n")
        assert run(capsys, "simulate", "--config", cfg, "--out", tmp_path)[0] == EXIT_USAGE

    def test_missing_config(self, tmp_path, capsys):
        assert run(capsys, "simulate", "--config", tmp_path / "nope.yaml", "--out", tmp_path)[0] == EXIT_IO

    def test_durations(self):
        assert parse_duration("7d") == 604800
        assert parse_duration("90m") == 5400
        assert parse_duration("3600") == 3600


class TestValidate:
    def test_fresh_dataset_passes(self, simulated, capsys):
        code, out, _ = run(capsys, "validate", simulated, "--out", simulated / "report")
        assert code == EXIT_OK
        assert "proportion_submetered" in out
        assert (simulated / "report" / "house_1" / "report.txt").exists()
        assert (simulated / "report" / "house_1" / "mains_histogram.csv").exists()

    @pytest.mark.parametrize("seed", [11, 12, 13])
    def test_simulated_output_always_validates(self, seed, tmp_path, capsys):
        assert run(capsys, "simulate", "--seed", seed, "--out", tmp_path, "--duration", "3h")[0] == EXIT_OK
        assert run(capsys, "validate", tmp_path / "house_1")[0] == EXIT_OK

    def test_lossless_dataset(self, tmp_path, capsys):
        t = 1_400_000_000 + 6 * np.arange(1000)
        ds = HouseDataset(
            1,
            {1: ChannelSeries(1, t, np.full(t.size, 300)), 2: ChannelSeries(2, t, np.full(t.size, 240))},
            {1: "aggregate", 2: "fridge"},
        )
        write_house(ds, tmp_path)
        code, out, _ = run(capsys, "validate", tmp_path)
        assert code == EXIT_OK
        assert "dropout_rate = 0.0\n" in out

    def test_labels_metadata_mismatch(self, tmp_path, capsys):
        assert run(capsys, "simulate", "--seed", 1, "--out", tmp_path, "--duration", "600")[0] == EXIT_OK
        labels = tmp_path / "house_1" / "labels.dat"
        labels.write_text(labels.read_text() + "99 ghost\n")
        code, _, err = run(capsys, "validate", tmp_path)
        assert code == EXIT_DATA
        assert "99" in err

    def test_unparseable_reports_file_and_line(self, tmp_path, capsys):
        assert run(capsys, "simulate", "--seed", 1, "--out", tmp_path, "--duration", "600")[0] == EXIT_OK
        ch = tmp_path / "house_1" / "channel_2.dat"
        lines = ch.read_text().splitlines()
        lines[2] = "123 abc"
        ch.write_text("\n".join(lines) + "\n")
        code, _, err = run(capsys, "validate", tmp_path)
        assert code == EXIT_DATA
        assert "channel_2.dat:3:" in err

    def test_missing_root(self, tmp_path, capsys):
        assert run(capsys, "validate", tmp_path / "nothing")[0] == EXIT_IO


def rows(path):
    m = read_mains(path)
    return m


class TestMeter:
    def test_one_hour_gives_3600_rows(self, tmp_path, capsys):
        scenario = build_scenario(small_house(), 3700, seed=2, with_mains=False)
        write_waveforms(scenario.trajectory, tmp_path / "w", 3600, chunk_seconds=600, sample_rate=1000)
        cal = tmp_path / "calibration.cfg"
        write_calibration(default_calibration(), cal)
        code, _, _ = run(capsys, "meter", tmp_path / "w", "--calibration", cal, "--out", tmp_path / "mains.dat")
        assert code == EXIT_OK
        m = read_mains(tmp_path / "mains.dat")
        assert len(m) == 3600
        assert np.allclose(np.diff(m.timestamps), 1.0)
        for line in (tmp_path / "mains.dat").read_text().splitlines()[:5]:
            t, p, s, v = line.split()
            assert len(t.split(".")[1]) == 1 and all(len(x.split(".")[1]) == 2 for x in (p, s, v))

    def _meter_one(self, tmp_path, capsys, phase):
        cal = CalibrationConstants(253 * np.sqrt(2) / 2**31, 30 * np.sqrt(2) / 2**31)
        write_calibration(cal, tmp_path / "c.cfg")
        chunk = synth_waveform(50, 10.0, 16000, 240, [(1, 8.0, phase)], start_time=1e9)
        write_waveform_chunk(chunk, cal, tmp_path)
        code, _, _ = run(capsys, "meter", tmp_path, "--calibration", tmp_path / "c.cfg", "--out", tmp_path / "m.dat")
        assert code == EXIT_OK
        return read_mains(tmp_path / "m.dat")

    def test_resistive(self, tmp_path, capsys):
        m = self._meter_one(tmp_path, capsys, 0.0)
        assert len(m) == 10
        assert np.all(np.abs(m.active - m.apparent) / m.apparent < 0.02)
        assert m.apparent == pytest.approx(np.full(10, 1920.0), rel=1e-3)

    def test_quadrature(self, tmp_path, capsys):
        m = self._meter_one(tmp_path, capsys, np.pi / 2)
        assert np.all(np.abs(m.active) < 0.01 * m.apparent)
        assert np.all(m.apparent > 1000)

    def test_missing_calibration(self, tmp_path, capsys):
        write_waveform_chunk(synth_waveform(50, 1.0, 1000, 1.0), None, tmp_path)
        assert run(capsys, "meter", tmp_path, "--out", tmp_path / "m.dat")[0] != EXIT_OK
        assert run(capsys, "meter", tmp_path, "--calibration", tmp_path / "none.cfg", "--out", tmp_path / "m.dat")[0] == EXIT_IO

    def test_empty_directory(self, tmp_path, capsys):
        write_calibration(default_calibration(), tmp_path / "c.cfg")
        (tmp_path / "w").mkdir()
        assert run(capsys, "meter", tmp_path / "w", "--calibration", tmp_path / "c.cfg", "--out", tmp_path)[0] == EXIT_USAGE


def test_log_level_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DALE_FORGE_LOG", "debug")
    assert run(capsys, "simulate", "--seed", 1, "--out", tmp_path, "--duration", "120")[0] == EXIT_OK
