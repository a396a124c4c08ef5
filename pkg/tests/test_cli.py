import subprocess
import sys

import pytest
import yaml

from cfleo import __version__
from cfleo.cli import main

TINY = dict(num_saps=2, num_uts=6, tau_up=3, tau_dd=297, horizon_slots=5, num_runs=1,
            ga_population=10, ga_generations=4)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return path


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("run", "sweep", "verify"):
        assert cmd in out


def test_run_writes_outputs(config_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(config_file), "--mode", "best_channel", "--seed", "3",
                 "--out", str(out)]) == 0
    assert (out / "summary.csv").read_text().startswith("mode,M,avg_se")
    echo = yaml.safe_load((out / "config.echo").read_text())
    assert echo["seed"] == 3 and echo["mode"] == "best_channel"
    assert "avg_se" in capsys.readouterr().out


def test_sweep_command(config_file, tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(config_file), "--saps", "1,2", "--out", str(out)]) == 0
    assert len((out / "summary.csv").read_text().strip().splitlines()) == 7


def test_bad_config_key(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("num_saps: 4\nwarp_factor: 9\n")
    assert main(["run", "--config", str(path)]) == 2
    assert "warp_factor" in capsys.readouterr().err


def test_bad_saps_argument(config_file):
    with pytest.raises(SystemExit) as e:
        main(["sweep", "--config", str(config_file), "--saps", "4,x"])
    assert e.value.code == 2


def test_verify_rejects_few_trials():
    with pytest.raises(SystemExit) as e:
        main(["verify", "--trials", "100"])
    assert e.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cfleo", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout


def test_verify_passes_at_default_trials(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 3
