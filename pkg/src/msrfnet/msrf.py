#!/usr/bin/env python3
"""
The `msrf` command group.

Usage:
    msrf synth --n 20 --size 64 --out data/synth
    msrf train --config run.cfg
    msrf eval --config run.cfg --checkpoint run/best.ckpt --out report.csv
    msrf predict --config run.cfg --checkpoint run/best.ckpt --in images/ --out pred/
    msrf gradcheck --samples 25 --tol 1e-4
    msrf params --config run.cfg
"""

import logging

import click

from msrfnet.msrfeval import eval_command
from msrfnet.msrfgradcheck import gradcheck_command
from msrfnet.msrfparams import params_command
from msrfnet.msrfpredict import predict_command
from msrfnet.msrfsynth import synth
from msrfnet.msrftrain import train_command


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
@click.option("-q", "--quiet", is_flag=True, help="Only log warnings and errors")
def cli(verbose, quiet):
    """
    Multi-scale residual fusion network for binary image segmentation.
    """
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


for command in (synth, train_command, eval_command, predict_command, gradcheck_command, params_command):
    cli.add_command(command)


if __name__ == "__main__":
    cli()
