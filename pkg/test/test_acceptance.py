#!/usr/bin/env python3
"""
Overfit runs on the 64x64 synthetic set. These train for minutes, so they are
marked slow and skipped by default; run them with `pytest -m slow`.
"""

import pytest

from msrfnet.checkpoint import save_checkpoint
from msrfnet.config import RunConfig, apply_overrides
from msrfnet.tensor import set_num_threads
from msrfnet.trainer import build_params, evaluate, train

pytestmark = pytest.mark.slow

EPOCHS = 300


def overfit_config(out_dir, **overrides):
    settings = {
        "preset": "toy",
        "synth_n": 20,
        "batch_size": 4,
        "lr": 1e-4,
        "epochs": EPOCHS,
        "seed": 0,
        "out_dir": str(out_dir),
    }
    settings.update(overrides)
    return apply_overrides(RunConfig(), settings).validate()


@pytest.fixture(scope="module")
def overfit_runs(tmp_path_factory):
    set_num_threads(4)
    runs = {}
    try:
        for name in ("full", "no_subnet"):
            cfg = overfit_config(tmp_path_factory.mktemp(name), ablation=name)
            result = train(cfg)
            report = evaluate(cfg, result.last_checkpoint, split="train")
            runs[name] = (cfg, result, report)
    finally:
        set_num_threads(1)
    return runs


def test_overfits_training_set(overfit_runs):
    _, result, report = overfit_runs["full"]
    assert report.mean("dsc") >= 0.95


def test_loss_decreases(overfit_runs):
    _, result, _ = overfit_runs["full"]
    log = result.log.set_index("epoch")
    assert log.loc[1, "train_loss"] >= log.loc[50, "train_loss"]


def test_full_model_at_least_matches_no_subnet(overfit_runs):
    full = overfit_runs["full"][2].mean("dsc")
    ablated = overfit_runs["no_subnet"][2].mean("dsc")
    print(f"train DSC after {EPOCHS} epochs: full {full:.4f}, no_subnet {ablated:.4f}")
    assert full >= ablated


def test_untrained_model_scores_in_range(tmp_path):
    cfg = overfit_config(tmp_path)
    path = tmp_path / "random.ckpt"
    save_checkpoint(build_params(cfg.net, 123), path)
    report = evaluate(cfg, path)
    assert len(report) == cfg.synth_n
    assert 0.0 <= report.mean("dsc") <= 1.0
