"""
Metrics
=======
Classification scores (confusion matrix, OA, AA, Kappa, per-class accuracy)
and generated-vs-actual distribution diagnostics (shared-bin histograms,
two-sample KS statistic, pcolor images).
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np
import pandas as pd
from statsmodels.distributions.empirical_distribution import ECDF

from .data import CoherencyRaster, PatchSet, tile_patches
from .errors import EmptySampleError, LabelRangeError, ShapeMismatchError, UndefinedMetricError

logger = logging.getLogger(__name__)

PCOLOR_PERCENTILES = (2.0, 98.0)
PCOLOR_FLAT_GRAY   = 128


# ==============================================================================
# CLASSIFICATION
# ==============================================================================

@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i, j] = samples of true class i + 1 predicted as class j + 1."""

    counts: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def to_frame(self) -> pd.DataFrame:
        ids = range(1, self.num_classes + 1)
        return pd.DataFrame(self.counts,
                            index=pd.Index([f"true_{i}" for i in ids], name="class"),
                            columns=[f"pred_{i}" for i in ids])


def confusion(preds, labels, num_classes: int) -> ConfusionMatrix:
    preds  = np.asarray(preds, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if preds.shape != labels.shape:
        raise ShapeMismatchError(f"{len(preds)} predictions for {len(labels)} labels")
    for name, v in (("prediction", preds), ("label", labels)):
        if v.size and (v.min() < 1 or v.max() > num_classes):
            raise LabelRangeError(
                f"{name} values {v.min()}..{v.max()} fall outside 1..{num_classes}"
            )
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (labels - 1, preds - 1), 1)
    return ConfusionMatrix(counts)


def _require_total(cm: ConfusionMatrix, metric: str) -> None:
    if cm.total == 0:
        raise UndefinedMetricError(f"{metric} is undefined for an empty confusion matrix")


def oa(cm: ConfusionMatrix) -> float:
    """Overall accuracy: trace / total."""
    _require_total(cm, "OA")
    return float(np.trace(cm.counts) / cm.total)


def excluded_classes(cm: ConfusionMatrix) -> List[int]:
    """Classes with zero support (left out of AA)."""
    return [int(i) + 1 for i in np.flatnonzero(cm.support == 0)]


def aa(cm: ConfusionMatrix) -> float:
    """Average accuracy: mean per-class recall over classes with support."""
    _require_total(cm, "AA")
    support = cm.support
    has     = support > 0
    skipped = excluded_classes(cm)
    if skipped:
        logger.warning(f"[metrics] AA excludes zero-support classes {skipped}")
    recall = np.diag(cm.counts)[has] / support[has]
    return float(recall.mean())


def kappa(cm: ConfusionMatrix) -> float:
    """Cohen's kappa, (p_o - p_e) / (1 - p_e)."""
    _require_total(cm, "Kappa")
    total = float(cm.total)
    p_o   = np.trace(cm.counts) / total
    p_e   = float(np.sum(cm.counts.sum(axis=1) * cm.counts.sum(axis=0))) / total ** 2
    if np.isclose(p_e, 1.0, rtol=0.0, atol=1e-15):
        raise UndefinedMetricError("Kappa is undefined: expected agreement is 1")
    return float((p_o - p_e) / (1.0 - p_e))


def per_class_accuracy(cm: ConfusionMatrix) -> pd.DataFrame:
    support = cm.support
    correct = np.diag(cm.counts)
    with np.errstate(invalid="ignore", divide="ignore"):
        acc = np.where(support > 0, correct / np.maximum(support, 1), np.nan)
    return pd.DataFrame({
        "class":    np.arange(1, cm.num_classes + 1),
        "support":  support,
        "correct":  correct,
        "accuracy": acc,
    })


def classification_summary(cm: ConfusionMatrix) -> dict:
    """OA, AA and Kappa; Kappa is NaN (with a warning) when undefined."""
    try:
        k = kappa(cm)
    except UndefinedMetricError as e:
        logger.warning(f"[metrics] {e}")
        k = float("nan")
    return {"oa": oa(cm), "aa": aa(cm), "kappa": k, "excluded": excluded_classes(cm)}


def write_confusion_csv(cm: ConfusionMatrix, path) -> None:
    cm.to_frame().to_csv(path)


# ==============================================================================
# DISTRIBUTIONS
# ==============================================================================

@dataclass
class HistogramReport:
    channel:         str
    plane:           str
    edges:           np.ndarray
    count_actual:    np.ndarray
    count_generated: np.ndarray
    ks:              float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "channel":         self.channel,
            "plane":           self.plane,
            "bin_left":        self.edges[:-1],
            "bin_right":       self.edges[1:],
            "count_actual":    self.count_actual,
            "count_generated": self.count_generated,
        })


def ks_statistic(a, b) -> float:
    """Two-sample KS statistic sup |F_a - F_b| over the pooled raw values."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptySampleError(f"KS needs two non-empty samples, got sizes {a.size}, {b.size}")
    pooled = np.concatenate([a, b])
    return float(np.max(np.abs(ECDF(a)(pooled) - ECDF(b)(pooled))))


def histogram_compare(actual, generated, bins: int = 64,
                      channel: str = "", plane: str = "re") -> HistogramReport:
    """
    Shared-edge histograms of two samples plus their KS statistic.

    Edges span the pooled range; a degenerate range is widened by 0.5 on
    each side.
    """
    a = np.asarray(actual, dtype=np.float64).ravel()
    g = np.asarray(generated, dtype=np.float64).ravel()
    if a.size == 0 or g.size == 0:
        raise EmptySampleError(
            f"histogram_compare needs two non-empty samples, got sizes {a.size}, {g.size}"
        )
    lo = min(a.min(), g.min())
    hi = max(a.max(), g.max())
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    return HistogramReport(
        channel         = channel,
        plane           = plane,
        edges           = edges,
        count_actual    = np.histogram(a, edges)[0],
        count_generated = np.histogram(g, edges)[0],
        ks              = ks_statistic(a, g),
    )


def write_histogram_csv(reports: Iterable[HistogramReport], path) -> None:
    """One header; each report's rows are followed by a '# ks=<value>' line."""
    with open(path, "w", newline="") as f:
        first = True
        for report in reports:
            report.to_frame().to_csv(f, header=first, index=False, lineterminator="\n")
            f.write(f"# ks={report.ks!r}\n")
            first = False


# ==============================================================================
# PCOLOR
# ==============================================================================

def pcolor_export(source: Union[CoherencyRaster, PatchSet, np.ndarray]) -> np.ndarray:
    """
    (T11, T22, T33) -> (R, G, B) uint8 image [H, W, 3].

    Each channel is clipped to its 2nd..98th percentile and scaled to 0..255;
    a constant channel maps to mid gray. PatchSets are tiled row-major first.
    """
    if isinstance(source, PatchSet):
        pixels = tile_patches(source).pixels
    elif isinstance(source, CoherencyRaster):
        pixels = source.pixels
    else:
        pixels = np.asarray(source)
    if pixels.ndim != 3 or pixels.shape[2] < 3 or pixels.size == 0:
        raise ShapeMismatchError(f"pcolor needs a non-empty [H, W, 9] raster, got {pixels.shape}")

    rgb = np.empty(pixels.shape[:2] + (3,), dtype=np.uint8)
    for ch in range(3):
        v      = pixels[..., ch].astype(np.float64)
        lo, hi = np.percentile(v, PCOLOR_PERCENTILES)
        if hi <= lo:
            rgb[..., ch] = PCOLOR_FLAT_GRAY
            continue
        scaled = (np.clip(v, lo, hi) - lo) / (hi - lo) * 255.0
        rgb[..., ch] = np.rint(scaled).astype(np.uint8)
    return rgb


def write_ppm(rgb: np.ndarray, path) -> None:
    """Binary PPM (P6, maxval 255)."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w = rgb.shape[:2]
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes())
