#!/usr/bin/env python3
"""
Print the parameter count of every network module.

Usage:
    msrfparams.py --config run.cfg
    msrfparams.py --config run.cfg --checkpoint run/best.ckpt --out params.tsv
"""

import click

from msrfnet.checkpoint import Checkpoint
from msrfnet.config import load_run_config
from msrfnet.errors import exit_on_error
from msrfnet.network import param_count_table
from msrfnet.trainer import load_params


@click.command(name="params")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="key = value config file")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override one config key")
@click.option(
    "--checkpoint",
    type=click.Path(exists=True, dir_okay=False),
    help="Check that this checkpoint matches the configured network",
)
@click.option("--out", type=click.Path(dir_okay=False, writable=True), help="Also write the table as TSV")
@exit_on_error
def params_command(config, overrides, checkpoint, out):
    """
    Parameter tensors and scalar counts per module, with a total row.
    """
    cfg = load_run_config(config, overrides)
    table = param_count_table(cfg.net)
    click.echo(table.to_string(index=False))
    if out:
        table.to_csv(out, sep="\t", index=False)
        click.secho(f"✅ Table written to: {out}", fg="green")
    if checkpoint:
        click.secho(f"📂 {checkpoint}: {Checkpoint(checkpoint, 'r').size()} tensor(s)", fg="blue")
        load_params(cfg.net, checkpoint)
        click.secho("✅ Checkpoint matches the configuration", fg="green")


if __name__ == "__main__":
    params_command()
