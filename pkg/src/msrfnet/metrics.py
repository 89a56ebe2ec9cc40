"""
Segmentation metrics, per-image reports and the paired t-test.

A ratio with a zero denominator is 1.0 when both masks are empty (perfect
agreement) and 0.0 otherwise, so every metric stays in [0, 1].
"""

import time
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy.special import betainc

from .errors import ShapeError, StatsError

THRESHOLD = 0.5
METRICS = ("dsc", "miou", "recall", "precision")
REPORT_COLUMNS = ("image_id",) + METRICS


class ConfusionCounts(NamedTuple):
    tp: int
    fp: int
    fn: int
    tn: int


class TTestResult(NamedTuple):
    t: float
    df: int
    p: float


def binarize(prob, threshold=THRESHOLD):
    return np.asarray(prob) >= threshold


def confusion_counts(pred_bin, gt):
    pred_bin = np.asarray(pred_bin).astype(bool)
    gt = np.asarray(gt).astype(bool)
    if pred_bin.shape != gt.shape:
        raise ShapeError("confusion_counts", "mask shape", list(gt.shape), list(pred_bin.shape))
    tp = int(np.count_nonzero(pred_bin & gt))
    fp = int(np.count_nonzero(pred_bin & ~gt))
    fn = int(np.count_nonzero(~pred_bin & gt))
    tn = int(pred_bin.size - tp - fp - fn)
    return ConfusionCounts(tp, fp, fn, tn)


def _ratio(num, den, counts):
    if den == 0:
        return 1.0 if counts.tp + counts.fp + counts.fn == 0 else 0.0
    return num / den


def dsc(counts):
    return _ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn, counts)


def miou(counts):
    return _ratio(counts.tp, counts.tp + counts.fp + counts.fn, counts)


def recall(counts):
    return _ratio(counts.tp, counts.tp + counts.fn, counts)


def precision(counts):
    return _ratio(counts.tp, counts.tp + counts.fp, counts)


def image_metrics(pred_bin, gt):
    counts = confusion_counts(pred_bin, gt)
    return {
        "dsc": dsc(counts),
        "miou": miou(counts),
        "recall": recall(counts),
        "precision": precision(counts),
    }


def paired_t_test(a, b):
    """Two-sided paired t-test on a - b with n - 1 degrees of freedom."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise StatsError(f"paired t-test needs two equal-length 1-D samples, got {a.shape} and {b.shape}")
    n = a.size
    if n < 2:
        raise StatsError(f"paired t-test needs at least 2 pairs, got {n}")
    diff = a - b
    sd = diff.std(ddof=1)
    if sd == 0.0:
        raise StatsError("paired t-test is undefined: the differences have zero variance")
    t = float(diff.mean() / (sd / np.sqrt(n)))
    df = n - 1
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TTestResult(t, df, p)


def fps(forward, batch, trials=10):
    """Images per second of `forward(batch)` over `trials` runs after one warm-up."""
    if trials < 1:
        raise StatsError(f"fps needs at least one trial, got {trials}")
    forward(batch)
    start = time.perf_counter()
    for _ in range(trials):
        forward(batch)
    elapsed = time.perf_counter() - start
    return len(batch) * trials / elapsed


@dataclass
class MetricsReport:
    per_image: pd.DataFrame
    fps: Optional[float] = None
    t_test: Optional[TTestResult] = None

    @classmethod
    def from_masks(cls, ids, preds, gts, threshold=THRESHOLD):
        records = []
        for image_id, pred, gt in zip(ids, preds, gts):
            row = {"image_id": image_id}
            row.update(image_metrics(binarize(pred, threshold), binarize(gt)))
            records.append(row)
        return cls(pd.DataFrame.from_records(records, columns=list(REPORT_COLUMNS)))

    @classmethod
    def read_csv(cls, path):
        df = pd.read_csv(path, dtype={"image_id": str}, float_precision="round_trip")
        missing = [c for c in REPORT_COLUMNS if c not in df.columns]
        if missing:
            raise StatsError(f"{path}: report is missing column(s) {', '.join(missing)}")
        return cls(df[list(REPORT_COLUMNS)])

    def __len__(self):
        return len(self.per_image)

    def mean(self, metric="dsc"):
        if self.per_image.empty:
            return 0.0
        return float(self.per_image[metric].mean())

    def summary(self):
        """Mean and population standard deviation of every metric."""
        values = self.per_image[list(METRICS)]
        return pd.DataFrame({"mean": values.mean(), "std": values.std(ddof=0)})

    def compare(self, baseline, metric="dsc"):
        """Paired t-test of this report against `baseline`, matched on image_id."""
        merged = self.per_image.merge(baseline.per_image, on="image_id", suffixes=("", "_base"))
        if len(merged) != len(self.per_image):
            raise StatsError(
                f"baseline shares {len(merged)} of {len(self.per_image)} image ids with this report"
            )
        self.t_test = paired_t_test(merged[metric], merged[f"{metric}_base"])
        return self.t_test

    def to_csv(self, path):
        self.per_image.to_csv(path, index=False)

    def to_table(self):
        lines = [self.per_image.to_string(index=False, float_format=lambda v: f"{v:.4f}"), ""]
        for metric, row in self.summary().iterrows():
            lines.append(f"{metric:<10} {row['mean']:.4f} ± {row['std']:.4f}")
        if self.fps is not None:
            lines.append(f"{'fps':<10} {self.fps:.2f}")
        if self.t_test is not None:
            t, df, p = self.t_test
            lines.append(f"{'t-test':<10} t={t:.4f} df={df} p={p:.4g}")
        return "\n".join(lines)
