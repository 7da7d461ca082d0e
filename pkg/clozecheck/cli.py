"""CLI for clozecheck."""

import functools
import json
import logging
from collections.abc import Callable
from pathlib import Path
from typing import Any
from typing import TypeVar

import click

from clozecheck.core.config import RunConfig
from clozecheck.core.config import load_config
from clozecheck.exceptions import ClozecheckError
from clozecheck.pipeline.ablation import cmd_ablate
from clozecheck.pipeline.commands import cmd_correct
from clozecheck.pipeline.commands import cmd_eval
from clozecheck.pipeline.commands import cmd_gen_data
from clozecheck.pipeline.commands import cmd_pretrain
from clozecheck.pipeline.commands import cmd_stats
from clozecheck.pipeline.commands import cmd_train_mac
from clozecheck.pipeline.commands import cmd_viz_attn
from clozecheck.utils.log import set_logger
from clozecheck.utils.log import verbosity_to_level


logger = logging.getLogger("clozecheck")

F = TypeVar("F", bound=Callable[..., Any])


def domain_errors(fn: F) -> F:
    """Report ``ClozecheckError`` as a click error (exit code 1) instead of a traceback."""

    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return fn(*args, **kwargs)
        except ClozecheckError as e:
            raise click.ClickException(str(e)) from e

    return wrapper  # type: ignore[return-value]


def resolve_config(ctx: click.Context, **flags: Any) -> RunConfig:
    """Config file, then ``--set`` overrides, then command flags."""
    opts = ctx.find_root().obj
    merged = {**opts["flags"], **{k: v for k, v in flags.items() if v is not None}}
    return load_config(opts["config"], opts["overrides"], merged)


@click.group()
@click.version_option(package_name="clozecheck")
@click.option("-v", "--verbose", default=0, count=True, help="-v for INFO, -vv for DEBUG")
@click.option(
    "--config", "-c", "config_path", type=click.Path(dir_okay=False), help="YAML or JSON run config"
)
@click.option(
    "--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Dotted override, e.g. train.epochs_mac=3"
)
@click.option("--seed", type=int, help="Run seed (overrides the config)")
@click.option("--run-dir", help="Run directory (overrides the config)")
@click.pass_context
def cli(
    ctx: click.Context,
    verbose: int,
    config_path: str | None,
    overrides: tuple[str, ...],
    seed: int | None,
    run_dir: str | None,
):
    """clozecheck - multimodal correction of handwritten fill-in-the-blank answers."""
    set_logger(logger, level=verbosity_to_level(verbose))
    ctx.obj = {
        "config": config_path,
        "overrides": list(overrides),
        "flags": {"seed": seed, "run_dir": run_dir},
    }


@cli.command("gen-data")
@click.pass_context
@domain_errors
def gen_data(ctx: click.Context):
    """Generate the synthetic corpus (train is augmented, dev/test are not)."""
    cfg = resolve_config(ctx)
    click.echo(f"Generating corpus in: {cfg.run_dir}")
    result = cmd_gen_data(cfg)
    for split, count in result["counts"].items():
        click.echo(f"  {split}: {count} samples")
    click.echo("✓ Corpus written")


@cli.command()
@click.option("--epochs", type=int, help="Override train.epochs_pretrain")
@click.pass_context
@domain_errors
def pretrain(ctx: click.Context, epochs: int | None):
    """Pretrain the OCR backbone with CTC."""
    cfg = resolve_config(ctx, **{"train.epochs_pretrain": epochs})
    log = cmd_pretrain(cfg)
    if log.records:
        last = log.records[-1]
        click.echo(f"  epoch {last['epoch']}: loss {last['train_loss']:.4f}, dev CER {last['dev_cer']:.4f}")
    click.echo("✓ OCR checkpoint saved")


@cli.command()
@click.option("--no-pretrain", is_flag=True, help="Train the backbone jointly from scratch")
@click.option("--epochs", type=int, help="Override train.epochs_mac")
@click.pass_context
@domain_errors
def train(ctx: click.Context, no_pretrain: bool, epochs: int | None):
    """Train the multimodal correction model."""
    flags: dict[str, Any] = {"train.epochs_mac": epochs}
    if no_pretrain:
        flags["train.pretrain"] = False
    cfg = resolve_config(ctx, **flags)
    log = cmd_train_mac(cfg)
    if log.records:
        last = log.records[-1]
        click.echo(
            f"  epoch {last['epoch']}: loss {last['train_loss']:.4f}, "
            f"dev span F1 {last['dev_seq_f1']:.4f}, dev accuracy {last['dev_bin_accuracy']:.4f}"
        )
    click.echo("✓ MAC checkpoint saved")


@cli.command("eval")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), help="MAC checkpoint")
@click.option("--ocr-checkpoint", type=click.Path(exists=True, dir_okay=False), help="OCR checkpoint")
@click.pass_context
@domain_errors
def evaluate(ctx: click.Context, checkpoint: str | None, ocr_checkpoint: str | None):
    """Evaluate MAC and the OCR pipeline baseline on the test split."""
    cfg = resolve_config(ctx)
    reports = cmd_eval(
        cfg,
        mac_checkpoint=Path(checkpoint) if checkpoint else None,
        ocr_checkpoint=Path(ocr_checkpoint) if ocr_checkpoint else None,
    )
    click.echo((cfg.path / "eval" / "report.txt").read_text(), nl=False)
    click.echo(f"✓ {len(reports)} reports written to: {cfg.path / 'eval'}")


@cli.command()
@click.option("--image", required=True, type=click.Path(exists=True, dir_okay=False), help="Line image (PGM)")
@click.option("--answer", required=True, help="Ground answer text")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), help="MAC checkpoint")
@click.pass_context
@domain_errors
def correct(ctx: click.Context, image: str, answer: str, checkpoint: str | None):
    """Print {labels, binary} as JSON for one answer."""
    cfg = resolve_config(ctx)
    result = cmd_correct(cfg, Path(image), answer, Path(checkpoint) if checkpoint else None)
    click.echo(json.dumps(result))


@cli.command("viz-attn")
@click.option("--sample", "sample_ids", multiple=True, help="Sample id (repeatable)")
@click.option("--split", default="test", type=click.Choice(["train", "dev", "test"]))
@click.option("--limit", default=1, show_default=True, help="Samples to export without --sample")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), help="MAC checkpoint")
@click.pass_context
@domain_errors
def viz_attn(
    ctx: click.Context, sample_ids: tuple[str, ...], split: str, limit: int, checkpoint: str | None
):
    """Export cross-attention CSVs and heatmaps."""
    cfg = resolve_config(ctx)
    written = cmd_viz_attn(
        cfg, list(sample_ids), split, limit, Path(checkpoint) if checkpoint else None
    )
    click.echo(f"✓ Wrote {len(written)} files to: {cfg.path / 'attention'}")


@cli.command()
@click.option("--without", multiple=True, help="Training shard to exclude (repeatable)")
@click.option("--no-grid", is_flag=True, help="Skip the depth/text-attention grid")
@click.pass_context
@domain_errors
def ablate(ctx: click.Context, without: tuple[str, ...], no_grid: bool):
    """Run ablation variants and tabulate their MAC results."""
    cfg = resolve_config(ctx)
    reports = cmd_ablate(cfg, without=list(without), grid=not no_grid)
    for report in reports:
        click.echo(
            f"  {report.system:<22} span F1 {report.seq_f1:.4f}  accuracy {report.bin_accuracy:.4f}"
        )
    click.echo(f"✓ {len(reports)} variants written to: {cfg.path / 'ablations'}")


@cli.command()
@click.pass_context
@domain_errors
def stats(ctx: click.Context):
    """Show images, samples and y=0:y=1 per split and shard."""
    cfg = resolve_config(ctx)
    click.echo(f"{'split':<6} {'shard':<12} {'images':>7} {'samples':>8} {'y=0:y=1':>12} {'expansion':>10}")
    for row in cmd_stats(cfg):
        ratio = f"{row.right}:{row.wrong}"
        click.echo(
            f"{row.split:<6} {row.shard:<12} {row.images:>7} {row.samples:>8} "
            f"{ratio:>12} {row.expansion:>10.2f}"
        )


def main():
    """Entry point for CLI."""
    cli()


if __name__ == "__main__":
    main()
