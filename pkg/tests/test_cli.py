import json

import pytest
from click.testing import CliRunner

from app.main import cli
from app.services.bench import TRUTH_FILE

BENCH_CONFIG = """\
data:
  directory: data
edci:
  n_batteries: 1
  outer_max: 2
  inverse:
    max_iter: 5
windows:
  train_days: 2
  test_days: 1
bench:
  n_devices: 2
  days: 3
  seed: 4
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(BENCH_CONFIG)
    return path


@pytest.fixture
def dataset(runner, config_file, tmp_path):
    result = runner.invoke(cli, ["generate", "--config", str(config_file), "--out", str(tmp_path / "data")])
    assert result.exit_code == 0, result.output
    return tmp_path / "data"


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0


def test_generate_without_bench_section_is_a_usage_error(runner, tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("edci:\n  n_batteries: 2\n")
    result = runner.invoke(cli, ["generate", "--config", str(path), "--out", str(tmp_path / "out")])
    assert result.exit_code == 2


def test_generate_is_reproducible(runner, config_file, dataset, tmp_path):
    again = tmp_path / "again"
    result = runner.invoke(cli, ["generate", "--config", str(config_file), "--out", str(again)])
    assert result.exit_code == 0
    for name in (TRUTH_FILE, "total_load.csv", "price.csv"):
        assert (again / name).read_bytes() == (dataset / name).read_bytes()


def test_identify_writes_a_bundle(runner, config_file, dataset, tmp_path):
    out = tmp_path / "identify"
    result = runner.invoke(cli, ["identify", "--config", str(config_file), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "params_w0.json").is_file()
    assert (out / "scores.csv").is_file()
    params = json.loads((out / "params_w0.json").read_text())
    assert len(params["pl_profile"]) == 24


def test_predict_from_a_params_file(runner, config_file, dataset, tmp_path):
    runner.invoke(cli, ["identify", "--config", str(config_file), "--out", str(tmp_path / "identify")])
    out = tmp_path / "predict"
    result = runner.invoke(cli, [
        "predict", "--params-file", str(tmp_path / "identify" / "params_w0.json"),
        "--exogenous-dir", str(dataset), "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    assert (out / "prediction.csv").is_file()
    assert (out / "prediction.svg").is_file()


def test_evaluate_uses_truth_when_present(runner, config_file, dataset, tmp_path):
    out = tmp_path / "evaluate"
    result = runner.invoke(cli, ["evaluate", "--config", str(config_file), "--out", str(out), "--workers", "1"])
    assert result.exit_code == 0, result.output
    scores = (out / "scores.csv").read_text().splitlines()
    assert len(scores) == 3
    assert (out / "summary.csv").is_file()


@pytest.mark.parametrize("param", ["N=8..1", "N=0..2", "batteries"])
def test_sweep_rejects_bad_ranges(runner, config_file, tmp_path, param):
    result = runner.invoke(cli, ["sweep", "--config", str(config_file), "--param", param, "--out", str(tmp_path / "s")])
    assert result.exit_code == 2


def test_missing_data_directory_fails(runner, config_file, tmp_path):
    result = runner.invoke(cli, [
        "identify", "--config", str(config_file), "--data-dir", str(tmp_path / "nowhere"), "--out", str(tmp_path / "o"),
    ])
    assert result.exit_code == 1


def test_malformed_truth_file_fails(runner, config_file, dataset, tmp_path):
    truth = dataset / TRUTH_FILE
    lines = truth.read_text().splitlines()
    header = lines[0].split(",")
    cells = lines[1].split(",")
    cells[header.index("esl")] = ""
    lines[1] = ",".join(cells)
    truth.write_text("\n".join(lines) + "\n")

    result = runner.invoke(cli, ["identify", "--config", str(config_file), "--out", str(tmp_path / "o")])
    assert result.exit_code == 1
    assert "non-finite" in result.output
