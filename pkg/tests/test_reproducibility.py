"""Tests for run determinism and checkpoint reloads."""

from dataclasses import asdict

import pytest

from clozecheck.core.config import RunConfig
from clozecheck.models.store import load_ocr
from clozecheck.pipeline.commands import RunPaths
from clozecheck.pipeline.commands import cmd_eval
from clozecheck.pipeline.commands import cmd_gen_data
from clozecheck.pipeline.commands import cmd_pretrain
from clozecheck.pipeline.commands import cmd_train_mac
from clozecheck.pipeline.commands import load_resources
from clozecheck.pipeline.commands import load_split
from clozecheck.training.ocr import OcrTrainer
from tests.conftest import tiny_config_data


def full_run(run_dir):
    cfg = RunConfig.model_validate(tiny_config_data(run_dir))
    cmd_gen_data(cfg)
    pretrain = cmd_pretrain(cfg)
    cmd_train_mac(cfg)
    return cfg, pretrain, cmd_eval(cfg)


def metric_fields(report):
    fields = asdict(report)
    fields.pop("tags")
    return fields


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    """The same seed run twice in separate directories."""
    root = tmp_path_factory.mktemp("determinism")
    return full_run(root / "a"), full_run(root / "b")


def test_dataset_bytes_identical(two_runs):
    """Test that manifests and images are byte-identical across runs."""
    (cfg_a, _, _), (cfg_b, _, _) = two_runs
    data_a, data_b = RunPaths.of(cfg_a).data, RunPaths.of(cfg_b).data
    files_a = sorted(p.relative_to(data_a) for p in data_a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(data_b) for p in data_b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (data_a / rel).read_bytes() == (data_b / rel).read_bytes(), rel


def test_final_metrics_identical(two_runs):
    """Test that both runs report the same metrics."""
    (_, _, reports_a), (_, _, reports_b) = two_runs
    assert [metric_fields(r) for r in reports_a] == [metric_fields(r) for r in reports_b]


def test_training_logs_identical(two_runs):
    """Test that per-epoch training records match."""
    (cfg_a, log_a, _), (cfg_b, log_b, _) = two_runs
    assert log_a.records == log_b.records
    assert RunPaths.of(cfg_a).train_log.read_text() == RunPaths.of(cfg_b).train_log.read_text()


def test_ocr_reload_reproduces_dev_cer(two_runs):
    """Test that the saved OCR checkpoint scores the logged dev CER."""
    (cfg, log, _), _ = two_runs
    paths = RunPaths.of(cfg)
    vocab, _ = load_resources(paths)
    trainer = OcrTrainer(cfg, vocab, model=load_ocr(paths.ocr_checkpoint, cfg, vocab))
    dev_cer = trainer.evaluate(load_split(paths, "dev"))
    assert dev_cer == pytest.approx(log.records[-1]["dev_cer"], rel=1e-6, abs=1e-9)
