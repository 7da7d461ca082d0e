"""End-to-end tests of the command line on the tiny configuration."""

import json

import pytest
import yaml
from click.testing import CliRunner

from clozecheck.cli import cli
from clozecheck.core.config import load_config
from clozecheck.evaluation.report import read_reports
from clozecheck.pipeline.ablation import architecture_variants
from clozecheck.pipeline.ablation import shard_variants
from clozecheck.pipeline.ablation import variant_config
from clozecheck.pipeline.commands import RunPaths
from tests.conftest import tiny_config_data


def invoke(config_path, *args):
    result = CliRunner().invoke(cli, ["-c", str(config_path), *args])
    assert result.exit_code == 0, result.output
    return result


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    """Tiny run taken through gen-data, pretrain and train once for the module."""
    root = tmp_path_factory.mktemp("pipeline")
    config_path = root / "tiny.yaml"
    config_path.write_text(yaml.safe_dump(tiny_config_data(root / "run")))
    invoke(config_path, "gen-data")
    invoke(config_path, "pretrain")
    invoke(config_path, "train")
    return config_path, root / "run"


def test_gen_data_outputs(run):
    """Test manifests, images, resources and the config snapshot."""
    _, run_dir = run
    data = run_dir / "data"
    for name in ("train.jsonl", "dev.jsonl", "test.jsonl", "vocab.txt", "confusion.tsv"):
        assert (data / name).exists(), name
    assert any(data.rglob("*.pgm"))
    assert load_config(run_dir / "config.yaml").seed == 7


def test_training_outputs(run):
    """Test checkpoints and metric logs of both stages."""
    _, run_dir = run
    assert (run_dir / "ocr.ckpt").exists()
    assert (run_dir / "mac.ckpt").exists()
    pretrain = [json.loads(line) for line in (run_dir / "pretrain_metrics.jsonl").read_text().splitlines()]
    assert [r["epoch"] for r in pretrain] == [1]
    train = [json.loads(line) for line in (run_dir / "train_metrics.jsonl").read_text().splitlines()]
    assert set(train[0]) == {"epoch", "train_loss", "dev_seq_f1", "dev_bin_accuracy"}


def test_eval(run):
    """Test that eval reports both systems and writes its files."""
    config_path, run_dir = run
    result = invoke(config_path, "eval")
    assert "Overall performance" in result.output
    reports = read_reports(run_dir / "eval" / "report.json")
    assert [r.system for r in reports] == ["ocr-pipeline", "mac"]
    assert reports[0].cer is not None
    assert reports[1].sequence_level
    assert sum(reports[1].counts.values()) == 6
    assert (run_dir / "eval" / "errors.jsonl").exists()


def test_eval_without_ocr_checkpoint(run, tmp_path):
    """Test that skipping the baseline writes null OCR fields to errors.jsonl."""
    config_path, run_dir = run
    missing = tmp_path / "missing.ckpt"
    invoke(config_path, "--set", f"train.ocr_checkpoint={missing}", "eval")
    reports = read_reports(run_dir / "eval" / "report.json")
    assert [r.system for r in reports] == ["mac"]
    lines = (run_dir / "eval" / "errors.jsonl").read_text().splitlines()
    for case in map(json.loads, lines):
        assert case["ocr_y"] is None
        assert case["decoded"] is None
        assert case["mac_y"] != case["y"]


def test_correct(run):
    """Test single-answer correction output."""
    config_path, run_dir = run
    record = json.loads((run_dir / "data" / "test.jsonl").read_text().splitlines()[0])
    image = run_dir / "data" / record["image_path"]
    result = invoke(config_path, "correct", "--image", str(image), "--answer", record["answer"])
    output = json.loads(result.output)
    assert len(output["labels"]) == len(record["answer"]) + 1
    assert output["binary"] in (0, 1)
    assert output["labels"][0] in ("O", "B-add")


def test_viz_attn(run):
    """Test attention export for a chosen sample."""
    config_path, run_dir = run
    record = json.loads((run_dir / "data" / "test.jsonl").read_text().splitlines()[1])
    result = invoke(config_path, "viz-attn", "--sample", record["id"])
    assert "Wrote" in result.output
    out = run_dir / "attention" / record["id"]
    assert (out / "cross_attention.csv").exists()
    assert (out / "heatmaps" / "layer0_head0.pgm").exists()


def test_viz_attn_unknown_sample(run):
    """Test that an unknown sample id is a domain error."""
    config_path, _ = run
    result = CliRunner().invoke(cli, ["-c", str(config_path), "viz-attn", "--sample", "nope"])
    assert result.exit_code == 1
    assert "Unknown sample ids" in result.output


def test_stats(run):
    """Test the statistics table."""
    config_path, _ = run
    result = invoke(config_path, "stats")
    lines = result.output.splitlines()
    assert lines[0].split()[:2] == ["split", "shard"]
    test_row = next(line for line in lines if line.startswith("test"))
    assert test_row.split()[1:5] == ["platform", "6", "6", "3:3"]


def test_ablate_shard_without_grid(run):
    """Test a shard exclusion ablation without the architecture grid."""
    config_path, run_dir = run
    result = invoke(config_path, "ablate", "--no-grid", "--without", "handwriting")
    assert "wo-handwriting" in result.output
    reports = read_reports(run_dir / "ablations" / "report.json")
    assert [r.system for r in reports] == ["wo-handwriting"]
    assert reports[0].tags["variant"] == "wo-handwriting"
    variant_train = (run_dir / "ablations" / "wo-handwriting" / "data" / "train.jsonl").read_text()
    assert '"shard": "handwriting"' not in variant_train


def test_missing_dataset_is_domain_error(tmp_path):
    """Test that commands needing a corpus fail cleanly before gen-data."""
    config_path = tmp_path / "tiny.yaml"
    config_path.write_text(yaml.safe_dump(tiny_config_data(tmp_path / "run")))
    result = CliRunner().invoke(cli, ["-c", str(config_path), "train"])
    assert result.exit_code == 1
    assert "run gen-data first" in result.output


def test_invalid_override_is_domain_error(tmp_path):
    """Test that configuration errors exit with code 1."""
    config_path = tmp_path / "tiny.yaml"
    config_path.write_text(yaml.safe_dump(tiny_config_data(tmp_path / "run")))
    result = CliRunner().invoke(cli, ["-c", str(config_path), "--set", "model.bogus=1", "stats"])
    assert result.exit_code == 1
    assert "Invalid configuration" in result.output


def test_architecture_variant_tags():
    """Test the depth and text self-attention grid."""
    assert [v.tag for v in architecture_variants()] == [
        "enc1-fus1-tsa-on",
        "enc1-fus1-tsa-off",
        "enc2-fus2-tsa-on",
        "enc2-fus2-tsa-off",
        "enc3-fus3-tsa-on",
        "enc3-fus3-tsa-off",
    ]


def test_variant_config_shares_base_artifacts(tiny_config, tmp_path):
    """Test that grid variants reuse the base corpus and OCR checkpoint."""
    base = RunPaths.of(tiny_config)
    variant = architecture_variants()[3]
    cfg = variant_config(tiny_config, variant, tmp_path / "ablations")
    assert cfg.model.n_fus == 2
    assert not cfg.model.text_self_attn
    paths = RunPaths.of(cfg)
    assert paths.data == base.data
    assert paths.ocr_checkpoint == base.ocr_checkpoint
    assert paths.root == tmp_path / "ablations" / "enc2-fus2-tsa-off"

    (shard,) = shard_variants(tiny_config, ["platform"])
    own = variant_config(tiny_config, shard, tmp_path / "ablations")
    assert own.data.exclude_shards == ["platform"]
    assert RunPaths.of(own).data == tmp_path / "ablations" / "wo-platform" / "data"


@pytest.mark.slow
def test_full_ablation_grid(run):
    """Test every architecture variant on the shared corpus."""
    config_path, run_dir = run
    invoke(config_path, "ablate")
    reports = read_reports(run_dir / "ablations" / "report.json")
    assert [r.system for r in reports] == [v.tag for v in architecture_variants()]
    assert all(r.sequence_level for r in reports)
