"""
Shared fixtures. Puts src/ on sys.path so the tests run from a checkout
without installing the package.
"""

import os
import sys

import numpy as np
import pytest

current_dir = os.path.dirname(os.path.abspath(__file__))
src_dir = os.path.join(os.path.dirname(current_dir), "src")
if os.path.isdir(src_dir) and src_dir not in sys.path:
    sys.path.insert(0, src_dir)

from msrfnet.config import apply_overrides, RunConfig  # noqa: E402
from msrfnet import tensor  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def serial_float64():
    """Every test starts in double precision with one thread."""
    tensor.set_default_dtype("float64")
    tensor.set_num_threads(1)
    yield
    tensor.set_default_dtype("float64")
    tensor.set_num_threads(1)


@pytest.fixture
def gradcheck_cfg():
    """The 16x16 network with widths 4/8/16/32."""
    return apply_overrides(RunConfig(), {"preset": "gradcheck"}).validate()


@pytest.fixture
def tiny_run_cfg(tmp_path):
    """A run small enough to train for a couple of epochs in a test."""
    cfg = apply_overrides(
        RunConfig(),
        {
            "preset": "gradcheck",
            "epochs": 2,
            "batch_size": 2,
            "synth_n": 4,
            "lr": 1e-3,
            "out_dir": str(tmp_path / "run"),
        },
    )
    return cfg.validate()
