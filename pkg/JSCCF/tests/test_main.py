"""
Tests for main.py focusing on ExperimentRunner dispatch and exit codes
"""

import pandas as pd
import pytest
from unittest.mock import patch

from JSCCF.autodiff.gradcheck import GradCheckReport
from JSCCF.runner.config_parser import parse_config
from JSCCF.runner.main import ExperimentRunner, main, provenance

TINY = """\
dataset = synthetic
synthetic_count = 12
height = 8
width = 8
channels = 1
channel_uses = 8, 8
kernel_size = 3
encoder_widths = 2, 2, 2
decoder_widths = 2, 2, 2
combiner_widths = 2, 2
batch = 4
max_steps = 3
eval_every = 2
val_fraction = 0.2
test_fraction = 0.25
snr_db = 5
"""


@pytest.fixture(autouse=True)
def isolated_cwd(tmp_path, monkeypatch):
    # setup_logging writes ./logs
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def write_config(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write


@pytest.fixture
def trained(tmp_path, write_config):
    """Output directory of a tiny finished training run."""
    out = tmp_path / "train_run"
    assert main(["train", "--config", str(write_config("train.cfg", TINY)), "--out", str(out)]) == 0
    return out


# Test the runner object
def test_run_without_initialization(write_config):
    config = parse_config(write_config("g.cfg", "subcommand = gradcheck\n"))
    with pytest.raises(RuntimeError, match="Runner not initialized"):
        ExperimentRunner(config).run()


def test_provenance_names_raising_module():
    try:
        parse_config("/definitely/absent.cfg")
    except FileNotFoundError as e:
        assert provenance(e) == "JSCCF.runner.config_parser"


# Test gradcheck exit codes
def test_gradcheck_passes(tmp_path, write_config):
    reports = [GradCheckReport("conv2d_down", True, 1e-9, points=2)]
    with patch("JSCCF.runner.main.run_gradcheck_suite", return_value=reports):
        status = main(["gradcheck", "--config", str(write_config("g.cfg", "")), "--out", str(tmp_path / "g")])
    assert status == 0
    frame = pd.read_csv(tmp_path / "g" / "gradcheck.csv")
    assert list(frame.columns) == ["case", "points", "max_rel_error", "passed"]


def test_gradcheck_failure_exit_code(tmp_path, write_config):
    reports = [GradCheckReport("gdn", True, 1e-9), GradCheckReport("igdn", False, 0.2)]
    with patch("JSCCF.runner.main.run_gradcheck_suite", return_value=reports):
        status = main(["gradcheck", "--config", str(write_config("g.cfg", "")), "--out", str(tmp_path / "g")])
    assert status == 1


# Test configuration and runtime errors
def test_configuration_error_exit_code(tmp_path, write_config, capsys):
    status = main(["train", "--config", str(write_config("bad.cfg", "batch = 0\n")), "--out", str(tmp_path / "x")])
    assert status == 2
    assert "batch" in capsys.readouterr().err


def test_missing_checkpoint_exit_code(tmp_path, write_config):
    path = write_config("eval.cfg", TINY + f"checkpoint = {tmp_path / 'absent.jscf'}\n")
    assert main(["eval", "--config", str(path), "--out", str(tmp_path / "e")]) == 1


def test_missing_config_file(tmp_path):
    assert main(["eval", "--config", str(tmp_path / "absent.cfg")]) == 1


# Test end-to-end runs
def test_train_writes_artifacts(trained):
    assert (trained / "model.jscf").is_file()
    assert (trained / "config.resolved").is_file()
    for layer in (1, 2):
        frame = pd.read_csv(trained / f"train_layer{layer}.csv")
        assert list(frame.columns) == ["step", "train_loss", "val_loss"]


def test_eval_is_deterministic(tmp_path, trained, write_config):
    path = write_config("eval.cfg", TINY + f"checkpoint = {trained / 'model.jscf'}\nrealizations = 2\n")
    outputs = []
    for name in ("e1", "e2"):
        assert main(["eval", "--config", str(path), "--out", str(tmp_path / name)]) == 0
        outputs.append((tmp_path / name / "eval.csv").read_bytes())
    assert outputs[0] == outputs[1]
    frame = pd.read_csv(tmp_path / "e1" / "eval.csv")
    assert len(frame) == 3 * 2 * 2
    assert not (tmp_path / "e1" / "gap.csv").exists()


def test_eval_with_rd_table_writes_gap(tmp_path, trained, write_config):
    rd = tmp_path / "bpg.csv"
    rd.write_text("image_id,rate_bpp,psnr_db\n*,0.1,20\n*,1.0,30\n")
    path = write_config("gap.cfg", TINY + f"checkpoint = {trained / 'model.jscf'}\nrealizations = 2\nrd_csv = {rd}\n")
    assert main(["eval", "--config", str(path), "--out", str(tmp_path / "g")]) == 0
    gap = pd.read_csv(tmp_path / "g" / "gap.csv")
    assert list(gap.columns) == ["image_id", "psnr_gap_db"]
    assert gap["image_id"].tolist() == [0, 1, 2]


def test_seed_override_is_echoed(tmp_path, trained, write_config):
    path = write_config("eval.cfg", TINY + f"checkpoint = {trained / 'model.jscf'}\nrealizations = 1\n")
    assert main(["eval", "--config", str(path), "--seed", "7", "--out", str(tmp_path / "s")]) == 0
    assert "seed = 7" in (tmp_path / "s" / "config.resolved").read_text()


def test_sweep_and_varlen(tmp_path, trained, write_config):
    base = TINY + f"checkpoint = {trained / 'model.jscf'}\nrealizations = 1\n"
    sweep = write_config("sweep.cfg", base + "snr_test_db = 0, 5\n")
    assert main(["sweep", "--config", str(sweep), "--out", str(tmp_path / "sw")]) == 0
    assert len(pd.read_csv(tmp_path / "sw" / "sweep.csv")) == 4
    varlen = write_config("varlen.cfg", base + "targets_db = 0, 100\n")
    assert main(["varlen", "--config", str(varlen), "--out", str(tmp_path / "vl")]) == 0
    summary = pd.read_csv(tmp_path / "vl" / "varlen_summary.csv")
    assert summary["mean_layers_used"].tolist() == [1.0, 2.0]


def test_baseline(tmp_path, write_config):
    rd = tmp_path / "bpg.csv"
    rd.write_text("image_id,rate_bpp,psnr_db\n*,0.1,20\n*,1.0,30\n")
    path = write_config("base.cfg", TINY + f"rd_csv = {rd}\nsnr_grid = 0, 10\ntargets_db = 20, 25, 40\n")
    assert main(["baseline", "--config", str(path), "--out", str(tmp_path / "b")]) == 0
    frame = pd.read_csv(tmp_path / "b" / "baseline.csv")
    assert set(frame["scheme"]) == {"capacity:bpg"}
    bandwidth = pd.read_csv(tmp_path / "b" / "baseline_varlen.csv")
    assert list(bandwidth.columns) == ["snr_db", "target_db", "mean_bandwidth_ratio", "unreachable"]
    assert len(bandwidth) == 2 * 3
    assert bandwidth[bandwidth["target_db"] == 40]["unreachable"].tolist() == [1, 1]
