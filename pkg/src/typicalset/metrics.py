"""Detection metrics: reject thresholds, FPR at fixed TPR, ROC/AUROC,
calibration error, and classification accuracy.

Scores follow the package-wide convention that higher means more
in-distribution; a sample is flagged as out-of-distribution when its score is
at or below the reject threshold. Threshold selection resolves ties toward
retaining more in-distribution samples, so the achieved retention is always at
least the nominal one. Counting is exact (rational threshold selection, no
interpolation), which is what makes the trapezoidal and pairwise readings of
the AUROC agree to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DataError, ParameterError, ShapeError
from .validation import as_float_vector, require_finite

DEFAULT_ECE_BINS = 20


@dataclass(frozen=True)
class RejectRegion:
    """Score threshold realizing an in-distribution retention of at least 1 - alpha."""

    gamma: float
    alpha: float
    achieved_tpr: float

    def __post_init__(self):
        if not math.isfinite(self.gamma):
            raise ParameterError(f"gamma must be finite, got {self.gamma}")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class DetectionMetrics:
    """Detection quality of one ID-vs-OOD score comparison."""

    fpr_at_tpr: float
    auroc: float
    roc_points: tuple[tuple[float, float], ...]
    gamma: float
    n_id: int
    n_ood: int
    ece: float | None = None
    accuracy: float | None = None

    def __post_init__(self):
        pts = tuple((float(f), float(t)) for f, t in self.roc_points)
        if pts and (pts[0] != (0.0, 0.0) or pts[-1] != (1.0, 1.0)):
            raise DataError("roc_points must start at (0,0) and end at (1,1)")
        for (f0, t0), (f1, t1) in zip(pts, pts[1:]):
            if f1 < f0 or t1 < t0:
                raise DataError("roc_points must be nondecreasing in both coordinates")
        object.__setattr__(self, "roc_points", pts)


def _check_scores(scores, name: str) -> np.ndarray:
    arr = as_float_vector(scores, name)
    if arr.size == 0:
        raise DataError(f"{name} must be nonempty")
    require_finite(arr, name)
    return arr


def threshold_at_tpr(id_scores, alpha: float) -> RejectRegion:
    """Largest threshold gamma such that the fraction of ID scores >= gamma is
    at least 1 - alpha.

    Concretely gamma is the (floor(alpha * n) + 1)-th smallest ID score, with
    the product evaluated in exact rational arithmetic so the order statistic
    cannot be off by one near integer boundaries. Ties at gamma count toward
    retention, hence ``achieved_tpr >= 1 - alpha``.
    """
    scores = _check_scores(id_scores, "id_scores")
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    n = scores.size
    k = int(Fraction(alpha) * n)  # floor of the exact product
    gamma = float(np.partition(scores, k)[k])
    achieved = float(np.count_nonzero(scores >= gamma)) / n
    return RejectRegion(gamma=gamma, alpha=alpha, achieved_tpr=achieved)


def fpr_at_tpr(id_scores, ood_scores, alpha: float = 0.05) -> float:
    """Fraction of OOD scores at or above the reject threshold for ``alpha``.

    ``alpha = 0.05`` gives the usual false-positive rate at 95% ID retention.
    """
    ood = _check_scores(ood_scores, "ood_scores")
    region = threshold_at_tpr(id_scores, alpha)
    return float(np.count_nonzero(ood >= region.gamma)) / ood.size


def auroc(id_scores, ood_scores) -> float:
    """Probability a random ID score exceeds a random OOD score, ties at half
    credit (the Mann-Whitney statistic)."""
    a = _check_scores(id_scores, "id_scores")
    b = _check_scores(ood_scores, "ood_scores")
    combined = np.concatenate([a, b])
    order = np.argsort(combined, kind="mergesort")
    ranks = np.empty(combined.size, dtype=np.float64)
    sorted_vals = combined[order]
    i = 0
    while i < sorted_vals.size:  # midranks over tie groups
        j = i
        while j + 1 < sorted_vals.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    u = ranks[: a.size].sum() - a.size * (a.size + 1) / 2.0
    return float(u) / (a.size * b.size)


def roc_curve(id_scores, ood_scores) -> list[tuple[float, float]]:
    """ROC points, one per distinct threshold, classifying ``score >= t`` as ID.

    Thresholds run over every distinct score value plus +-infinity sentinels,
    yielding endpoints (0, 0) and (1, 1); duplicate points collapse. Sorted by
    FPR, then TPR.
    """
    a = _check_scores(id_scores, "id_scores")
    b = _check_scores(ood_scores, "ood_scores")
    thresholds = np.unique(np.concatenate([a, b]))
    a_sorted = np.sort(a)
    b_sorted = np.sort(b)
    points = {(0.0, 0.0), (1.0, 1.0)}
    for t in thresholds:
        tpr = (a.size - np.searchsorted(a_sorted, t, side="left")) / a.size
        fpr = (b.size - np.searchsorted(b_sorted, t, side="left")) / b.size
        points.add((float(fpr), float(tpr)))
    return sorted(points)


def trapezoid_auroc(points) -> float:
    """Trapezoidal area under an ROC point list (exact for tie segments)."""
    area = 0.0
    for (f0, t0), (f1, t1) in zip(points, points[1:]):
        area += (f1 - f0) * (t0 + t1) / 2.0
    return area


#: Default significance grid for false-positive-rate sweeps.
DEFAULT_ALPHA_GRID = tuple(round(0.01 * i, 2) for i in range(1, 51))


def fpr_curve(id_scores, ood_scores, alphas=DEFAULT_ALPHA_GRID) -> list[tuple[float, float]]:
    """False positive rate at a grid of significance levels.

    Returns ``(alpha, fpr)`` pairs; the default grid runs 0.01 .. 0.50 in
    steps of 0.01, so ``alpha = 0.05`` reproduces the usual operating point.
    """
    return [(float(a), fpr_at_tpr(id_scores, ood_scores, float(a))) for a in alphas]


def detection_metrics(
    id_scores,
    ood_scores,
    alpha: float = 0.05,
    ece: float | None = None,
    accuracy: float | None = None,
) -> DetectionMetrics:
    """Bundle threshold, FPR@TPR, AUROC and the ROC curve for one pairing."""
    region = threshold_at_tpr(id_scores, alpha)
    ood = _check_scores(ood_scores, "ood_scores")
    fpr = float(np.count_nonzero(ood >= region.gamma)) / ood.size
    points = roc_curve(id_scores, ood_scores)
    return DetectionMetrics(
        fpr_at_tpr=fpr,
        auroc=auroc(id_scores, ood_scores),
        roc_points=tuple(points),
        gamma=region.gamma,
        n_id=int(np.asarray(id_scores).size),
        n_ood=int(ood.size),
        ece=ece,
        accuracy=accuracy,
    )


def ece(confidences, correct, n_bins: int = DEFAULT_ECE_BINS) -> float:
    """Expected calibration error over equal-width, right-closed bins on [0, 1].

    Each occupied bin contributes its sample weight times the absolute gap
    between mean confidence and accuracy; empty bins contribute nothing.
    """
    conf = as_float_vector(confidences, "confidences")
    corr = np.asarray(correct)
    if corr.ndim != 1:
        raise ShapeError(f"correct must be 1-D, got ndim={corr.ndim}")
    if conf.shape[0] != corr.shape[0]:
        raise ShapeError(
            f"confidences length {conf.shape[0]} != correct length {corr.shape[0]}"
        )
    if conf.size == 0:
        raise DataError("confidences must be nonempty")
    require_finite(conf, "confidences")
    if conf.min() < 0.0 or conf.max() > 1.0:
        raise DataError("confidences must lie in [0, 1]")
    n_bins = int(n_bins)
    if n_bins < 1:
        raise ParameterError(f"n_bins must be >= 1, got {n_bins}")
    corr = corr.astype(np.float64)
    # right-closed bins: (b/B, (b+1)/B], with 0 folded into the first bin
    idx = np.clip(np.ceil(conf * n_bins).astype(np.int64) - 1, 0, n_bins - 1)
    total = 0.0
    for b in range(n_bins):
        mask = idx == b
        count = int(mask.sum())
        if count == 0:
            continue
        gap = abs(corr[mask].mean() - conf[mask].mean())
        total += (count / conf.size) * gap
    return total


def accuracy(logits, labels) -> float:
    """Fraction of rows whose argmax (ties to the smallest index) matches the label."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be 2-D, got ndim={logits.ndim}")
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != logits.shape[0]:
        raise ShapeError("labels must be 1-D and match the number of logit rows")
    require_finite(logits, "logits")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise DataError("labels out of range for the logit width")
    return float(np.count_nonzero(logits.argmax(axis=1) == labels)) / labels.size


def msp_calibration_inputs(logits, labels) -> tuple[np.ndarray, np.ndarray]:
    """Confidence (max softmax) and correctness vectors for calibration checks."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs = shifted / shifted.sum(axis=1, keepdims=True)
    pred = logits.argmax(axis=1)
    conf = probs[np.arange(logits.shape[0]), pred]
    return conf, pred == np.asarray(labels)
