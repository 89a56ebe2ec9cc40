#!/usr/bin/env python3
"""
Evaluate a checkpoint on a dataset and write the per-image metric report.

Usage:
    msrfeval.py --config run.cfg --checkpoint run/best.ckpt --data data/other --out report.csv
    msrfeval.py --config run.cfg --checkpoint run/best.ckpt --baseline baseline.csv
"""

import click

from msrfnet.config import load_run_config
from msrfnet.errors import exit_on_error
from msrfnet.metrics import MetricsReport
from msrfnet.tensor import set_num_threads
from msrfnet.trainer import SPLITS, evaluate


@click.command(name="eval")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="key = value config file")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override one config key")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option(
    "--data",
    type=click.Path(exists=True, file_okay=False),
    help="Dataset root (default: the configured data_root or synthetic set)",
)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), help="CSV report path")
@click.option("--split", type=click.Choice(SPLITS), default="all", show_default=True)
@click.option("--fps-trials", type=click.IntRange(min=0), default=0, help="Time N single-image forward passes")
@click.option(
    "--baseline",
    type=click.Path(exists=True, dir_okay=False),
    help="Report CSV of another model for a paired t-test on DSC",
)
@click.option("--threads", type=click.IntRange(min=1), default=1, envvar="MSRF_THREADS", show_default=True)
@exit_on_error
def eval_command(config, overrides, checkpoint, data, out, split, fps_trials, baseline, threads):
    """
    Report DSC, mIoU, recall and precision of CHECKPOINT per image.
    """
    set_num_threads(threads)
    cfg = load_run_config(config, overrides)
    click.secho(f"📂 Evaluating {checkpoint} on {data or cfg.data_root or 'synthetic data'}", fg="blue")
    report = evaluate(cfg, checkpoint, data, split, fps_trials)
    if baseline:
        report.compare(MetricsReport.read_csv(baseline))

    click.echo(report.to_table())
    if out:
        report.to_csv(out)
        click.secho(f"✅ Report written to: {out}", fg="green")


if __name__ == "__main__":
    eval_command()
