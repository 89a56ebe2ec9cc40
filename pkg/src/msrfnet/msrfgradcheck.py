#!/usr/bin/env python3
"""
Compare tape gradients of the total loss with central finite differences.

Usage:
    msrfgradcheck.py                       # gradcheck preset, 25 parameters
    msrfgradcheck.py --config run.cfg --samples 50 --tol 1e-5
"""

import sys

import click

from msrfnet.config import load_run_config
from msrfnet.errors import exit_on_error
from msrfnet.gradcheck import gradcheck
from msrfnet.tensor import set_num_threads


@click.command(name="gradcheck")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="Default: the gradcheck preset")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override one config key")
@click.option("--samples", type=click.IntRange(min=1), default=25, show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True, help="Relative error tolerance")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=click.IntRange(min=1), default=1, envvar="MSRF_THREADS", show_default=True)
@exit_on_error
def gradcheck_command(config, overrides, samples, tol, seed, threads):
    """
    Exit 0 when every sampled parameter is within tolerance, 1 otherwise.
    """
    set_num_threads(threads)
    if config is None:
        overrides = ("preset=gradcheck",) + tuple(overrides)
    cfg = load_run_config(config, overrides)
    report = gradcheck(cfg, n_params=samples, tolerance=tol, seed=seed)

    click.echo(report.to_frame().to_string(index=False))
    worst = report.worst
    summary = f"worst relative error {worst.rel_error:.3e} at {worst.name}{list(worst.index)}"
    if not report.passed:
        click.secho(f"❌ Gradcheck failed: {summary} (tol {tol:g})", fg="red", err=True)
        sys.exit(1)
    click.secho(f"✅ Gradcheck passed: {summary}", fg="green")


if __name__ == "__main__":
    gradcheck_command()
