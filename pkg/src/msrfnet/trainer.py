"""
Training, evaluation and prediction on top of the network and the Adam step.

A training run writes into `out_dir`:
    config.txt      the resolved configuration
    train_log.tsv   epoch, train_loss, val_dsc, best
    best.ckpt       parameters with the highest validation DSC so far
    last.ckpt       parameters after the final epoch
    epoch_NNNN.ckpt every `checkpoint_every` epochs, when set
"""

import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import data as dataio
from .checkpoint import load_checkpoint, save_checkpoint
from .config import format_config
from .errors import ConfigError, DataIOError
from .losses import total_loss
from .metrics import MetricsReport, binarize, fps
from .network import msrfnet_forward, network_param_shapes
from .optim import OptimState, adam_step
from .params import ParamStore
from .tensor import DTYPES, GradTape, Tensor, backward, get_num_threads, set_default_dtype

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["epoch", "train_loss", "val_dsc", "best"]
SPLITS = ("all", "train", "val", "test")
EVAL_BATCH = 8


@dataclass
class TrainResult:
    log: pd.DataFrame
    params: ParamStore
    best_epoch: int
    best_val_dsc: float
    best_checkpoint: str
    last_checkpoint: str


def build_params(net, seed):
    return ParamStore.from_shapes(network_param_shapes(net), seed, DTYPES[net.dtype])


def load_params(net, checkpoint):
    return load_checkpoint(checkpoint, network_param_shapes(net), DTYPES[net.dtype])


def check_image(image, net, label):
    expected = (net.in_channels, net.height, net.width)
    if tuple(image.shape) != expected:
        raise DataIOError(
            f"{label} is {list(image.shape)}, the network expects [C,H,W] = {list(expected)}"
        )


def check_samples(samples, net, source):
    for sample in samples:
        check_image(sample.image, net, f"{source}: sample {sample.id}")
    return samples


def load_samples(cfg, data_root=None):
    """The dataset at `data_root` (or cfg.data_root), else the seeded synthetic set."""
    root = data_root or cfg.data_root
    if root:
        samples = dataio.load_dataset(root)
        source = root
    else:
        if cfg.net.height != cfg.net.width:
            raise ConfigError("synthetic data is square; set height = width or give data_root")
        samples = dataio.synth_dataset(cfg.synth_n, cfg.net.height, cfg.seed)
        source = "synthetic dataset"
    if not samples:
        raise DataIOError(f"{source}: no samples found")
    return check_samples(samples, cfg.net, source)


def preflight(cfg):
    """Validate everything a run needs before any compute. Returns (train, val, test)."""
    cfg.validate()
    set_default_dtype(cfg.net.dtype)
    train_set, val_set, test_set = dataio.split(load_samples(cfg), seed=cfg.seed)
    if not train_set:
        raise DataIOError("the training split is empty; add more samples")
    logger.info(
        "split: %d train, %d val, %d test", len(train_set), len(val_set), len(test_set)
    )
    return train_set, val_set, test_set


def network_input(images, net):
    """Images as a constant Tensor in the configured precision."""
    return Tensor(images, dtype=DTYPES[net.dtype])


def loss_on_batch(params, net, images, masks, training=False, rng=None):
    """Scalar total loss of one batch (numpy images and masks, [N,C,H,W])."""
    outputs = msrfnet_forward(network_input(images, net), params, net, training, rng)
    edges = dataio.boundary_map(masks).data if outputs.edge is not None else None
    return total_loss(
        outputs.pred,
        outputs.ds0,
        outputs.ds1,
        outputs.edge,
        masks,
        edges,
        net.loss_weights(),
        net.loss_mode,
        net.deep_supervision,
    )


def compute_gradients(params, net, images, masks, training=False, rng=None):
    with GradTape() as tape:
        loss = loss_on_batch(params, net, images, masks, training, rng)
    return loss.item(), backward(loss, tape, params)


def predict_batch(params, net, images):
    return msrfnet_forward(network_input(images, net), params, net, training=False)


def evaluate_samples(params, net, samples):
    preds = []
    for start in range(0, len(samples), EVAL_BATCH):
        images, _ = dataio.stack_batch(samples[start : start + EVAL_BATCH])
        preds.extend(predict_batch(params, net, images).pred.data[:, 0])
    return MetricsReport.from_masks(
        [s.id for s in samples], preds, [s.mask.data[0] for s in samples]
    )


def train(cfg, on_epoch=None):
    """
    Adam over seeded shuffled mini-batches. `on_epoch(row)` is called with each
    log row as a dict. Validation DSC selects best.ckpt; when the validation
    split is empty the training split is used instead.
    """
    train_set, val_set, _ = preflight(cfg)
    net = cfg.net
    select_set = val_set or train_set
    if not val_set:
        logger.warning("validation split is empty; selecting checkpoints on the training split")

    logger.info("training on %d thread(s)", get_num_threads())
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "config.txt"), "w") as f:
        f.write(format_config(cfg))
    log_path = os.path.join(cfg.out_dir, "train_log.tsv")
    best_path = os.path.join(cfg.out_dir, "best.ckpt")
    last_path = os.path.join(cfg.out_dir, "last.ckpt")

    params = build_params(net, cfg.seed)
    state = OptimState.for_params(params, lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)

    rows = []
    best_dsc, best_epoch = -np.inf, 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_set))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [
                dataio.random_augment(train_set[i], rng, cfg.augment)
                for i in order[start : start + cfg.batch_size]
            ]
            images, masks = dataio.stack_batch(batch)
            loss, grads = compute_gradients(params, net, images, masks, training=True, rng=rng)
            adam_step(params, grads, state)
            total += loss * len(batch)

        val_dsc = evaluate_samples(params, net, select_set).mean("dsc")
        is_best = val_dsc > best_dsc
        if is_best:
            best_dsc, best_epoch = val_dsc, epoch
            save_checkpoint(params, best_path)
        if cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            save_checkpoint(params, os.path.join(cfg.out_dir, f"epoch_{epoch:04d}.ckpt"))

        row = {
            "epoch": epoch,
            "train_loss": total / len(train_set),
            "val_dsc": val_dsc,
            "best": int(is_best),
        }
        rows.append(row)
        pd.DataFrame(rows, columns=LOG_COLUMNS).to_csv(
            log_path, sep="\t", index=False, float_format="%.8f"
        )
        logger.info("epoch %d: loss %.6f, val dsc %.4f", epoch, row["train_loss"], val_dsc)
        if on_epoch is not None:
            on_epoch(row)

    save_checkpoint(params, last_path)
    return TrainResult(
        pd.DataFrame(rows, columns=LOG_COLUMNS), params, best_epoch, best_dsc, best_path, last_path
    )


def select_split(samples, split, seed):
    if split not in SPLITS:
        raise ConfigError(f"unknown split '{split}', expected one of {SPLITS}")
    if split == "all":
        return samples
    return dict(zip(SPLITS[1:], dataio.split(samples, seed=seed)))[split]


def evaluate(cfg, checkpoint, data_root=None, split="all", fps_trials=0):
    """
    Metrics of `checkpoint` on a dataset. Any checkpoint may be evaluated on any
    dataset directory whose images match the configured size.
    """
    cfg.validate()
    set_default_dtype(cfg.net.dtype)
    samples = select_split(load_samples(cfg, data_root), split, cfg.seed)
    if not samples:
        raise DataIOError(f"the '{split}' split is empty")
    params = load_params(cfg.net, checkpoint)
    report = evaluate_samples(params, cfg.net, samples)
    if fps_trials:
        images, _ = dataio.stack_batch(samples[:1])
        report.fps = fps(lambda batch: predict_batch(params, cfg.net, batch), images, fps_trials)
    return report


def _input_paths(inputs):
    paths = []
    for item in inputs:
        if os.path.isdir(item):
            paths += sorted(
                os.path.join(item, fn) for fn in os.listdir(item) if fn.endswith(".pgm")
            )
        else:
            paths.append(item)
    if not paths:
        raise DataIOError(f"no .pgm images found in {', '.join(map(str, inputs))}")
    return paths


def predict(cfg, checkpoint, inputs, out_dir, edges=True):
    """
    Write `<id>_mask.pgm` (binarized at 0.5) and, with the shape stream on,
    `<id>_edge.pgm` for every image in `inputs` (files or directories).
    """
    cfg.validate()
    set_default_dtype(cfg.net.dtype)
    if cfg.net.in_channels != 1:
        raise ConfigError("prediction reads grayscale PGM images; set in_channels = 1")
    params = load_params(cfg.net, checkpoint)
    os.makedirs(out_dir, exist_ok=True)

    written = []
    for path in _input_paths(inputs):
        image_id = os.path.splitext(os.path.basename(path))[0]
        image = dataio.load_pgm(path)
        check_image(image, cfg.net, path)
        outputs = predict_batch(params, cfg.net, image.data[None])

        mask_path = os.path.join(out_dir, f"{image_id}_mask.pgm")
        dataio.save_pgm(binarize(outputs.pred.data[0]).astype(np.float64), mask_path)
        written.append(mask_path)
        if edges and outputs.edge is not None:
            edge_path = os.path.join(out_dir, f"{image_id}_edge.pgm")
            dataio.save_pgm(outputs.edge.data[0], edge_path)
            written.append(edge_path)
    return written
