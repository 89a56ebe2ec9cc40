#!/usr/bin/env python3
"""
This script benchmarks the speed of the main network operations.
It times a forward pass, a forward/backward pass, an Adam step, the
single-image frame rate and the gradient check on the toy configurations.
"""

import os
import pathlib
import shutil
import subprocess
import sys
import time

import click

current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)
src_dir = os.path.join(parent_dir, "src")
if os.path.isdir(src_dir):
    sys.path.insert(0, src_dir)
else:
    sys.path.insert(0, parent_dir)

from msrfnet import data as dataio  # noqa: E402
from msrfnet.config import RunConfig, apply_overrides  # noqa: E402
from msrfnet.gradcheck import gradcheck  # noqa: E402
from msrfnet.metrics import fps  # noqa: E402
from msrfnet.optim import OptimState, adam_step  # noqa: E402
from msrfnet.tensor import set_num_threads  # noqa: E402
from msrfnet.trainer import build_params, compute_gradients, predict_batch  # noqa: E402

OVERFIT_EPOCHS = 300
OVERFIT_TRAIN_SAMPLES = 16


def measure_time(func, *args, **kwargs):
    """Measures the execution time of a given function."""
    start_time = time.perf_counter()
    func(*args, **kwargs)
    end_time = time.perf_counter()
    return end_time - start_time


def synth_with_cli(out_dir, n, size):
    """Writes a synthetic dataset through msrfsynth.py."""
    script = os.path.join(src_dir, "msrfnet", "msrfsynth.py")
    cmd = [sys.executable, script, "--n", str(n), "--size", str(size), "--out", str(out_dir)]
    env = dict(os.environ, PYTHONPATH=src_dir)
    subprocess.run(cmd, check=True, capture_output=True, text=True, env=env)


@click.command()
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--batch-size", type=click.IntRange(min=1), default=4, show_default=True)
def main(threads, batch_size):
    """Main function to run the benchmarks."""
    set_num_threads(threads)
    benchmark_dir = pathlib.Path("./benchmark_temp")
    benchmark_dir.mkdir(exist_ok=True)
    cfg = apply_overrides(RunConfig(), {"preset": "toy"}).validate()
    net = cfg.net

    try:
        synth_time = measure_time(synth_with_cli, benchmark_dir / "synth", 20, net.height)
        print(f"Time to write 20 synthetic samples: {synth_time:.4f} seconds")

        samples = dataio.load_dataset(benchmark_dir / "synth")
        images, masks = dataio.stack_batch(samples[:batch_size])
        params = build_params(net, cfg.seed)

        forward_time = measure_time(predict_batch, params, net, images)
        print(f"Forward pass (batch {batch_size}): {forward_time:.4f} seconds")

        backward_time = measure_time(compute_gradients, params, net, images, masks)
        print(f"Forward + backward pass (batch {batch_size}): {backward_time:.4f} seconds")

        steps = OVERFIT_EPOCHS * -(-OVERFIT_TRAIN_SAMPLES // batch_size)
        print(
            f"Estimated overfit run ({OVERFIT_EPOCHS} epochs, {steps} steps):"
            f" {steps * backward_time / 60:.1f} minutes"
        )

        _, grads = compute_gradients(params, net, images, masks)
        state = OptimState.for_params(params, lr=cfg.lr)
        adam_time = measure_time(adam_step, params, grads, state)
        print(f"Adam step over {params.num_elements()} parameters: {adam_time:.4f} seconds")

        frames = fps(lambda batch: predict_batch(params, net, batch), images[:1], trials=5)
        print(f"Single-image frame rate: {frames:.2f} FPS")

        check_cfg = apply_overrides(RunConfig(), {"preset": "gradcheck"}).validate()
        check_time = measure_time(gradcheck, check_cfg, 25)
        print(f"Gradient check of 25 parameters: {check_time:.4f} seconds")

    except Exception as e:
        print(f"An error occurred during benchmarking: {e}")
    finally:
        if benchmark_dir.exists():
            shutil.rmtree(benchmark_dir)


if __name__ == "__main__":
    main()
