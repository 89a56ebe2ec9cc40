"""
Image/mask I/O, synthetic datasets, augmentation, boundary maps and splits.

Dataset directory layout:
    <root>/images/<id>.pgm
    <root>/masks/<id>.pgm

Images are binary 8-bit PGM ("P5", maxval 255) scaled to [0, 1]; masks are
binarized at pixel value >= 128.
"""

import logging
import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataIOError
from .tensor import Tensor

logger = logging.getLogger(__name__)

AUGMENT_OPS = ("hflip", "vflip", "rot90", "random_crop")
SPLIT_RATIOS = (0.8, 0.1, 0.1)

_HEADER = re.compile(rb"\s*(P\d)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


@dataclass
class Sample:
    image: Tensor
    mask: Tensor
    id: str

    def __post_init__(self):
        if self.image.shape[-2:] != self.mask.shape[-2:]:
            raise DataIOError(
                f"sample {self.id}: image is {list(self.image.shape)}, mask is {list(self.mask.shape)}"
            )
        if not np.isin(self.mask.data, (0.0, 1.0)).all():
            raise DataIOError(f"sample {self.id}: mask is not binary")


# --- PGM ----------------------------------------------------------------------


def read_pgm_bytes(path):
    """Return the raw 8-bit pixels of a P5 file as a [H, W] uint8 array."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] != b"P5":
        raise DataIOError(f"{path}: bad magic {raw[:2]!r}, expected b'P5'")
    match = _HEADER.match(raw)
    if match is None:
        raise DataIOError(f"{path}: malformed PGM header")
    width, height, maxval = (int(v) for v in match.groups()[1:])
    if maxval != 255:
        raise DataIOError(f"{path}: maxval {maxval} is not supported, expected 255")
    payload = raw[match.end() :]
    if len(payload) < width * height:
        raise DataIOError(
            f"{path}: truncated payload, expected {width * height} bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.uint8, count=width * height).reshape(height, width)


def load_pgm(path):
    """Tensor[1, H, W] with values b / 255."""
    return Tensor(read_pgm_bytes(path)[None].astype(np.float64) / 255.0)


def load_mask(path):
    return Tensor((read_pgm_bytes(path)[None] >= 128).astype(np.float64))


def save_pgm(tensor, path):
    data = np.asarray(getattr(tensor, "data", tensor), dtype=np.float64)
    data = data.reshape(data.shape[-2:])
    pixels = np.round(np.clip(data, 0.0, 1.0) * 255.0).astype(np.uint8)
    height, width = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())


# --- synthetic data -----------------------------------------------------------


def _shape_mask(rng, size, area):
    """Boolean mask of one random ellipse or rectangle of roughly `area` pixels."""
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    aspect = rng.uniform(0.5, 2.0)
    if rng.random() < 0.5:
        a = min(np.sqrt(area * aspect / np.pi), size / 2 - 1)
        b = min(np.sqrt(area / (np.pi * aspect)), size / 2 - 1)
        cy = rng.uniform(b + 1, size - b - 1)
        cx = rng.uniform(a + 1, size - a - 1)
        return ((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2 <= 1.0
    w = min(np.sqrt(area * aspect), size - 2)
    h = min(area / w, size - 2)
    top = rng.uniform(1, size - h - 1)
    left = rng.uniform(1, size - w - 1)
    return (yy >= top) & (yy < top + h) & (xx >= left) & (xx < left + w)


def synth_sample(rng, size, sample_id):
    n_shapes = int(rng.integers(1, 4))
    mask = np.zeros((size, size), dtype=bool)
    for _ in range(n_shapes):
        fraction = rng.uniform(0.05, 0.40 / n_shapes)
        mask |= _shape_mask(rng, size, fraction * size * size)

    background = rng.uniform(0.05, 0.35)
    contrast = rng.uniform(0.35, 0.6)
    image = background + contrast * mask + rng.normal(0.0, 0.05, size=(size, size))
    image = np.clip(image, 0.0, 1.0)
    return Sample(Tensor(image[None]), Tensor(mask[None].astype(np.float64)), sample_id)


def synth_dataset(n, size, seed):
    """
    `n` noisy images with 1-3 ellipses/rectangles each, covering 5%-40% of the
    image together; the mask is the union of the shapes.
    """
    if n < 1:
        raise ConfigError(f"synth_dataset needs n >= 1, got {n}")
    if size < 8:
        raise ConfigError(f"synth_dataset needs size >= 8, got {size}")
    rng = np.random.default_rng(seed)
    return [synth_sample(rng, size, f"synth_{i:04d}") for i in range(n)]


# --- augmentation ---------------------------------------------------------------


def _random_crop(image, mask, rng):
    h, w = image.shape[-2:]
    ch = int(rng.integers(int(0.75 * h), h + 1))
    cw = int(rng.integers(int(0.75 * w), w + 1))
    top = int(rng.integers(0, h - ch + 1))
    left = int(rng.integers(0, w - cw + 1))
    pad = ((0, 0), ((h - ch) // 2, h - ch - (h - ch) // 2), ((w - cw) // 2, w - cw - (w - cw) // 2))
    crop = (slice(None), slice(top, top + ch), slice(left, left + cw))
    return np.pad(image[crop], pad), np.pad(mask[crop], pad)


def augment(sample, seed, ops):
    """Apply `ops` in order, the same geometric transform to image and mask."""
    unknown = [op for op in ops if op not in AUGMENT_OPS]
    if unknown:
        raise ConfigError(f"unknown augmentation(s) {unknown}, expected a subset of {AUGMENT_OPS}")
    rng = np.random.default_rng(seed)
    image, mask = sample.image.data, sample.mask.data
    for op in ops:
        if op == "hflip":
            image, mask = image[..., ::-1], mask[..., ::-1]
        elif op == "vflip":
            image, mask = image[..., ::-1, :], mask[..., ::-1, :]
        elif op == "rot90":
            image, mask = np.rot90(image, axes=(-2, -1)), np.rot90(mask, axes=(-2, -1))
        elif op == "random_crop":
            image, mask = _random_crop(image, mask, rng)
    return Sample(
        Tensor(np.ascontiguousarray(image)), Tensor(np.ascontiguousarray(mask)), sample.id
    )


def random_augment(sample, rng, ops):
    """Each op in `ops` applied with probability 0.5, drawn from `rng`."""
    chosen = [op for op in ops if rng.random() < 0.5]
    return augment(sample, int(rng.integers(0, 2**31 - 1)), chosen) if chosen else sample


# --- boundary maps and splits ---------------------------------------------------


def boundary_map(mask):
    """
    Pixels with mask 1 and at least one 4-neighbour 0; outside the image counts
    as 0. Works on the last two axes.
    """
    m = np.asarray(getattr(mask, "data", mask)) > 0.5
    pad = [(0, 0)] * (m.ndim - 2) + [(1, 1), (1, 1)]
    p = np.pad(m, pad)
    interior = p[..., :-2, 1:-1] & p[..., 2:, 1:-1] & p[..., 1:-1, :-2] & p[..., 1:-1, 2:]
    return Tensor((m & ~interior).astype(np.float64))


def split(dataset, ratios=SPLIT_RATIOS, seed=0):
    """Seeded shuffle into (train, val, test) of floor(0.8n), floor(0.1n) and the rest."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(np.floor(ratios[0] * n + 1e-9))
    n_val = int(np.floor(ratios[1] * n + 1e-9))
    parts = (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :])
    return tuple([dataset[i] for i in part] for part in parts)


# --- dataset directories --------------------------------------------------------


def load_dataset(root):
    image_dir = os.path.join(root, "images")
    mask_dir = os.path.join(root, "masks")
    if not os.path.isdir(image_dir) or not os.path.isdir(mask_dir):
        raise DataIOError(f"{root}: expected 'images/' and 'masks/' subdirectories")
    ids = sorted(fn[: -len(".pgm")] for fn in os.listdir(image_dir) if fn.endswith(".pgm"))
    samples = []
    for sample_id in ids:
        mask_path = os.path.join(mask_dir, f"{sample_id}.pgm")
        if not os.path.exists(mask_path):
            raise DataIOError(f"{root}: image {sample_id} has no mask {mask_path}")
        image = load_pgm(os.path.join(image_dir, f"{sample_id}.pgm"))
        samples.append(Sample(image, load_mask(mask_path), sample_id))
    logger.info("loaded %d sample(s) from %s", len(samples), root)
    return samples


def save_dataset(samples, root):
    os.makedirs(os.path.join(root, "images"), exist_ok=True)
    os.makedirs(os.path.join(root, "masks"), exist_ok=True)
    for sample in samples:
        save_pgm(sample.image, os.path.join(root, "images", f"{sample.id}.pgm"))
        save_pgm(sample.mask, os.path.join(root, "masks", f"{sample.id}.pgm"))


def stack_batch(samples):
    """(images[N,1,H,W], masks[N,1,H,W]) as numpy arrays."""
    images = np.stack([s.image.data for s in samples])
    masks = np.stack([s.mask.data for s in samples])
    return images, masks
