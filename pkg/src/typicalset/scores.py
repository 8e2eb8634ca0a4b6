"""Test statistics for OOD detection computed from features and the linear head.

Every score is oriented so that higher means more in-distribution, which fixes
a single reject-region convention (flag a sample when its score falls at or
below the threshold). All scores are deterministic pure functions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FitError, ParameterError, ShapeError
from .model import FeatureBatch, LinearHead, RectifierSpec
from .rectify import apply_head
from .validation import as_float_matrix, frozen_copy, require_finite

DEFAULT_ODIN_TEMPERATURE = 1000.0
DEFAULT_MAHALANOBIS_SHRINKAGE = 0.01
# Floor for the shrinkage target's diagonal: keeps the shrunk covariance
# positive-definite even when a channel has zero within-class scatter.
COVARIANCE_DIAGONAL_FLOOR = 1e-12


class ScoreName(enum.Enum):
    ENERGY = "energy"
    MSP = "msp"
    ODIN_T = "odin"
    GRADNORM = "gradnorm"
    MAHALANOBIS = "mahalanobis"


@dataclass(frozen=True)
class ScoreReport:
    """Per-sample OOD scores plus the provenance needed to reproduce them."""

    scores: np.ndarray
    score_name: ScoreName
    rectifier: str = "none"
    temperature: float | None = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 1:
            raise ShapeError(f"scores must be 1-D, got ndim={scores.ndim}")
        require_finite(scores, "scores")
        object.__setattr__(self, "scores", frozen_copy(scores))

    @property
    def n_samples(self) -> int:
        return self.scores.shape[0]


def _check_logits(logits) -> np.ndarray:
    logits = as_float_matrix(logits, "logits")
    if logits.shape[1] < 1:
        raise ShapeError("logit rows must be nonempty")
    require_finite(logits, "logits")
    return logits


def energy_score(logits) -> np.ndarray:
    """Log-sum-exp of each logit row, with max-subtraction stabilization.

    Under the energy reading of a classifier this is the negated energy, i.e.
    a monotone proxy for the modeled input density.
    """
    logits = _check_logits(logits)
    m = logits.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))).ravel()


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def msp_score(logits) -> np.ndarray:
    """Maximum softmax probability per sample."""
    logits = _check_logits(logits)
    return _softmax(logits).max(axis=1)


def odin_t_score(logits, temperature: float = DEFAULT_ODIN_TEMPERATURE) -> np.ndarray:
    """Maximum softmax probability after temperature scaling.

    The input-perturbation half of the original method needs gradients
    through the feature extractor, which exported batches cannot provide;
    only the temperature part is implemented.
    """
    if not np.isfinite(temperature) or temperature <= 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    logits = _check_logits(logits)
    return msp_score(logits / float(temperature))


def gradnorm_score(
    batch: FeatureBatch, head: LinearHead, temperature: float = 1.0
) -> np.ndarray:
    """L1 norm of the head-weight gradient of cross-entropy to a uniform target.

    The gradient with respect to the weight matrix is the outer product
    ``(p - u) z^T`` (``p`` the softmax of the temperature-scaled logits, ``u``
    uniform), so its L1 norm factorizes as ``||p - u||_1 * ||z||_1``; this
    closed form is what gets computed.
    """
    if not np.isfinite(temperature) or temperature <= 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    logits = apply_head(batch, head)
    p = _softmax(logits / float(temperature))
    dev = np.abs(p - 1.0 / head.n_classes).sum(axis=1)
    return dev * np.abs(batch.data).sum(axis=1)


@dataclass(frozen=True)
class MahalanobisModel:
    """Per-class means with a shared (shrunk) covariance, stored as its inverse."""

    class_means: np.ndarray
    shared_covariance_inverse: np.ndarray
    shrinkage: float

    def __post_init__(self):
        means = as_float_matrix(self.class_means, "class_means")
        inv = as_float_matrix(self.shared_covariance_inverse, "covariance inverse")
        if inv.shape[0] != inv.shape[1] or inv.shape[0] != means.shape[1]:
            raise ShapeError(
                f"covariance inverse {inv.shape} incompatible with means {means.shape}"
            )
        if not np.allclose(inv, inv.T, rtol=1e-10, atol=1e-12):
            raise DataError("covariance inverse must be symmetric")
        if not 0.0 <= self.shrinkage < 1.0:
            raise ParameterError(f"shrinkage must lie in [0, 1), got {self.shrinkage}")
        object.__setattr__(self, "class_means", frozen_copy(means))
        object.__setattr__(self, "shared_covariance_inverse", frozen_copy(inv))

    @property
    def n_classes(self) -> int:
        return self.class_means.shape[0]

    @property
    def n_channels(self) -> int:
        return self.class_means.shape[1]


def mahalanobis_fit(
    batch: FeatureBatch,
    n_classes: int,
    shrinkage: float = DEFAULT_MAHALANOBIS_SHRINKAGE,
) -> MahalanobisModel:
    """Fit per-class means and a shared covariance on labeled features.

    The covariance is the within-class scatter with divisor N, then shrunk
    toward its own diagonal: ``(1 - shrinkage) * S + shrinkage * diag(S)``,
    with the target diagonal floored at a tiny positive value so channels
    with zero scatter still yield a positive-definite matrix when shrinkage
    is on. Positive definiteness is established by a Cholesky factorization;
    a failure raises :class:`FitError` suggesting a larger shrinkage.
    """
    if batch.labels is None:
        raise DataError("mahalanobis_fit requires a labeled batch")
    if not 0.0 <= shrinkage < 1.0:
        raise ParameterError(f"shrinkage must lie in [0, 1), got {shrinkage}")
    n_classes = int(n_classes)
    if n_classes < 2:
        raise ParameterError(f"need at least 2 classes, got {n_classes}")
    labels = batch.labels
    if labels.max() >= n_classes:
        raise DataError(
            f"label {labels.max()} out of range for {n_classes} classes"
        )
    d = batch.n_channels
    means = np.empty((n_classes, d))
    centered = np.empty_like(batch.data)
    for k in range(n_classes):
        mask = labels == k
        if not mask.any():
            raise DataError(f"class {k} has no samples")
        means[k] = batch.data[mask].mean(axis=0)
        centered[mask] = batch.data[mask] - means[k]
    cov = centered.T @ centered / batch.n_samples
    target = np.diag(np.maximum(np.diag(cov), COVARIANCE_DIAGONAL_FLOOR))
    shrunk = (1.0 - shrinkage) * cov + shrinkage * target
    try:
        chol = np.linalg.cholesky(shrunk)
    except np.linalg.LinAlgError as exc:
        raise FitError(
            "shared covariance is singular after shrinkage; increase the shrinkage"
        ) from exc
    inv = np.linalg.inv(chol)
    precision = inv.T @ inv
    precision = 0.5 * (precision + precision.T)  # exact symmetry for the invariant
    return MahalanobisModel(means, precision, float(shrinkage))


def mahalanobis_score(batch: FeatureBatch, model: MahalanobisModel) -> np.ndarray:
    """Negated squared Mahalanobis distance to the closest class mean."""
    if batch.n_channels != model.n_channels:
        raise ShapeError(
            f"batch has {batch.n_channels} channels but model expects {model.n_channels}"
        )
    best = np.full(batch.n_samples, np.inf)
    for k in range(model.n_classes):
        diff = batch.data - model.class_means[k]
        dist = np.einsum("ij,jk,ik->i", diff, model.shared_covariance_inverse, diff)
        np.minimum(best, dist, out=best)
    return -best


def make_report(
    scores: np.ndarray,
    score_name: ScoreName,
    rectifier: RectifierSpec | str = "none",
    temperature: float | None = None,
) -> ScoreReport:
    desc = rectifier.describe() if isinstance(rectifier, RectifierSpec) else str(rectifier)
    return ScoreReport(scores, score_name, desc, temperature)
