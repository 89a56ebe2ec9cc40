#!/usr/bin/env python3
"""
Train a network from a config file.

Usage:
    msrftrain.py --config run.cfg
    msrftrain.py --config run.cfg --set epochs=5 --set ablation=no_subnet
    MSRF_THREADS=1 msrftrain.py --config run.cfg   # strict determinism
"""

import click

from msrfnet.config import load_run_config
from msrfnet.errors import exit_on_error
from msrfnet.tensor import set_num_threads
from msrfnet.trainer import train


@click.command(name="train")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="key = value config file")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override one config key")
@click.option(
    "--threads",
    type=click.IntRange(min=1),
    default=1,
    envvar="MSRF_THREADS",
    show_default=True,
    help="Worker threads for per-sample convolution work",
)
@exit_on_error
def train_command(config, overrides, threads):
    """
    Train with Adam and keep the checkpoint with the best validation DSC.
    """
    set_num_threads(threads)
    cfg = load_run_config(config, overrides)
    source = cfg.data_root or f"{cfg.synth_n} synthetic samples"
    click.secho(f"📂 Data: {source}", fg="blue")
    click.secho(f"🏋️ Training for {cfg.epochs} epoch(s), output in {cfg.out_dir}", fg="green")

    def report(row):
        marker = " *" if row["best"] else ""
        click.echo(
            f"epoch {row['epoch']:4d}  loss {row['train_loss']:.6f}  val_dsc {row['val_dsc']:.4f}{marker}"
        )

    result = train(cfg, on_epoch=report)
    click.secho(
        f"✅ Best val DSC {result.best_val_dsc:.4f} at epoch {result.best_epoch}: {result.best_checkpoint}",
        fg="green",
    )


if __name__ == "__main__":
    train_command()
