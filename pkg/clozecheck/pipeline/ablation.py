"""Ablation sweeps: encoder/fusion depth with and without text self-attention, and training shards."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from clozecheck.core.config import RunConfig
from clozecheck.core.types import MetricsReport
from clozecheck.evaluation.report import write_reports
from clozecheck.pipeline.commands import MAC_SYSTEM
from clozecheck.pipeline.commands import RunPaths
from clozecheck.pipeline.commands import cmd_eval
from clozecheck.pipeline.commands import cmd_gen_data
from clozecheck.pipeline.commands import cmd_pretrain
from clozecheck.pipeline.commands import cmd_train_mac
from clozecheck.pipeline.commands import snapshot


logger = logging.getLogger(__name__)

DEPTHS = (1, 2, 3)


@dataclass(frozen=True)
class Variant:
    """One ablation run: a tag and the dotted config changes it applies."""

    tag: str
    changes: dict[str, Any]
    own_data: bool = False


def architecture_variants(depths: Sequence[int] = DEPTHS) -> list[Variant]:
    """``N_enc = N_fus = n`` for each depth, text self-attention on and off."""
    return [
        Variant(
            tag=f"enc{n}-fus{n}-tsa-{'on' if tsa else 'off'}",
            changes={"model.n_enc": n, "model.n_fus": n, "model.text_self_attn": tsa},
        )
        for n in depths
        for tsa in (True, False)
    ]


def shard_variants(cfg: RunConfig, without: Sequence[str]) -> list[Variant]:
    """One variant per excluded training shard; each regenerates its corpus and backbone."""
    return [
        Variant(
            tag=f"wo-{name}",
            changes={"data.exclude_shards": sorted({*cfg.data.exclude_shards, name})},
            own_data=True,
        )
        for name in without
    ]


def variant_config(base: RunConfig, variant: Variant, root: Path) -> RunConfig:
    """Copy of ``base`` under ``root/<tag>``; shared-data variants reuse the base corpus and OCR."""
    data = base.model_dump(mode="json")
    data["run_dir"] = str(root / variant.tag)
    if not variant.own_data:
        base_paths = RunPaths.of(base)
        data["data"]["dir"] = str(base_paths.data)
        data["train"]["ocr_checkpoint"] = str(base_paths.ocr_checkpoint)
    for dotted, value in variant.changes.items():
        section, key = dotted.split(".", 1)
        data[section][key] = value
    return RunConfig.model_validate(data)


def run_variant(cfg: RunConfig, variant: Variant) -> MetricsReport:
    if variant.own_data:
        cmd_gen_data(cfg)
        if cfg.train.pretrain:
            cmd_pretrain(cfg)
    cmd_train_mac(cfg)
    reports = cmd_eval(cfg, tags={"variant": variant.tag})
    mac = next(r for r in reports if r.system == MAC_SYSTEM)
    mac.system = variant.tag
    return mac


def cmd_ablate(
    cfg: RunConfig, without: Sequence[str] = (), grid: bool = True
) -> list[MetricsReport]:
    """Run the depth/text-attention grid and the shard exclusions under ``run_dir/ablations``.

    The base corpus and OCR checkpoint are created first when missing.
    Writes ``ablations/report.json`` and ``ablations/report.txt`` with one
    MAC row per variant.
    """
    paths = snapshot(cfg)
    variants = (architecture_variants() if grid else []) + shard_variants(cfg, without)
    if any(not v.own_data for v in variants):
        if not paths.manifest("train").exists():
            cmd_gen_data(cfg)
        if cfg.train.pretrain and not paths.ocr_checkpoint.exists():
            cmd_pretrain(cfg)

    reports = []
    for variant in variants:
        logger.info("Ablation %s", variant.tag)
        reports.append(run_variant(variant_config(cfg, variant, paths.ablation_dir), variant))
    write_reports(paths.ablation_dir, reports, title="ablations")
    return reports
