import io
import json

import pytest

from cfmimo.cli import emit_csv, main
from cfmimo.config import ConfigError, format_config, parse_config, parse_text
from cfmimo.harness import ExperimentConfig, SweepReport, run_sweep
from cfmimo.scenario import ScenarioConfig

SMALL = """\
# tiny network
K = 8
L = 4
N_t = 4
snr_points_db = [0, 20]
n_trials = 2
methods = [none, zfs, enhanced_rate]
precoders = [zf, mmse]
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


class TestConfig:
    def test_defaults(self):
        cfg = parse_config(environ={})
        assert cfg == ExperimentConfig()
        assert cfg.scenario.M == 64 and cfg.K_s == 8

    def test_file_values(self, cfg_file):
        cfg = parse_config(cfg_file, environ={})
        assert cfg.scenario.M == 16 and cfg.K_s == 4
        assert cfg.methods == ("none", "zfs", "enhanced_rate")

    def test_zero_scheduled_users(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(overrides={"K_s": 0}, environ={})
        assert exc.value.key == "K_s"

    def test_snr_override_echoed(self):
        cfg = parse_config(overrides={"snr_points_db": [5]}, environ={})
        assert "snr_points_db = [5.0]" in format_config(cfg)

    def test_round_trip(self, cfg_file):
        cfg = parse_config(cfg_file, environ={})
        values, _ = parse_text(format_config(cfg))
        from cfmimo.config import build_config

        assert build_config(values) == cfg

    def test_env_override(self, cfg_file):
        cfg = parse_config(cfg_file, environ={"CFMIMO_N_TRIALS": "7", "HOME": "/x"})
        assert cfg.n_trials == 7

    def test_unknown_key_reports_line(self):
        with pytest.raises(ConfigError) as exc:
            parse_text("K = 8\n\nbogus = 1\n")
        assert exc.value.line == 3 and "bogus" in str(exc.value)

    def test_duplicate_key(self):
        with pytest.raises(ConfigError):
            parse_text("K = 8\nk = 4\n")

    def test_type_error(self):
        with pytest.raises(ConfigError) as exc:
            parse_text("n_trials = many\n")
        assert exc.value.line == 1


def test_csv_single_row():
    cfg = ExperimentConfig(
        scenario=ScenarioConfig(K=1, L=1, N_t=4, M=4),
        snr_points_db=(10.0,),
        n_trials=1,
        methods=("none",),
        networks=("cellfree",),
        K_s=1,
    )
    buf = io.StringIO()
    emit_csv(run_sweep(cfg), buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 2
    assert lines[0] == ",".join(SweepReport.COLUMNS)
    assert lines[1].startswith("cellfree,none,zf,10,")


def test_csv_empty_report():
    with pytest.raises(ValueError):
        emit_csv(SweepReport(rows=[]), io.StringIO())


def test_sweep_outputs_byte_identical(cfg_file, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["sweep", "--config", str(cfg_file), "--out", str(out), "--quiet", "--no-plots"]) == 0
        outs.append((out / "sweep.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = outs[0].decode().splitlines()
    assert len(rows) == 1 + 2 * 3 * 2 * 2


def test_sweep_writes_manifest_and_figures(cfg_file, tmp_path):
    out = tmp_path / "run"
    assert main(["sweep", "--config", str(cfg_file), "--out", str(out), "--quiet", "--seed", "3"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["dominance_violations"] == 0
    assert "master_seed = 3" in (out / "resolved.cfg").read_text()
    for fig in manifest["figures"]:
        assert (out / fig).stat().st_size > 0
    assert "sumrate_cellfree.png" in manifest["figures"]


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("K_s = 0\n")
    assert main(["sweep", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["schedule", "--config", str(tmp_path / "nope.cfg")]) == 1


def test_schedule_prints_sets(cfg_file, capsys):
    assert main(["schedule", "--config", str(cfg_file), "--snr", "10"]) == 0
    out = capsys.readouterr().out
    assert "[cellfree zf snr=10 dB]" in out and "enhanced_rate" in out


def test_capacity_error_exit_code(tmp_path, capsys):
    p = tmp_path / "cap.cfg"
    p.write_text(SMALL.replace("methods = [none, zfs, enhanced_rate]", "methods = [exhaustive]") + "exhaustive_cap = 5\n")
    assert main(["schedule", "--config", str(p)]) == 2
    assert "exceed" in capsys.readouterr().out


def test_validate_passes(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 7
