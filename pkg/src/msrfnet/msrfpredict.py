#!/usr/bin/env python3
"""
Predict masks (and edge maps) for PGM images.

Usage:
    msrfpredict.py --config run.cfg --checkpoint run/best.ckpt --in images/ --out pred/
"""

import click

from msrfnet.config import load_run_config
from msrfnet.errors import exit_on_error
from msrfnet.tensor import set_num_threads
from msrfnet.trainer import predict


@click.command(name="predict")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="key = value config file")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override one config key")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option(
    "--in",
    "inputs",
    type=click.Path(exists=True),
    multiple=True,
    required=True,
    help="PGM image or directory of PGM images (repeatable)",
)
@click.option("--out", type=click.Path(file_okay=False, writable=True), required=True)
@click.option("--no-edges", is_flag=True, help="Do not write the shape-stream edge maps")
@click.option("--threads", type=click.IntRange(min=1), default=1, envvar="MSRF_THREADS", show_default=True)
@exit_on_error
def predict_command(config, overrides, checkpoint, inputs, out, no_edges, threads):
    """
    Write <id>_mask.pgm and <id>_edge.pgm for every input image.
    """
    set_num_threads(threads)
    cfg = load_run_config(config, overrides)
    written = predict(cfg, checkpoint, inputs, out, edges=not no_edges)
    for path in written:
        click.echo(path)
    click.secho(f"✅ {len(written)} file(s) written to {out}", fg="green")


if __name__ == "__main__":
    predict_command()
