"""Feature rectification operators and channel statistics.

All operators are pure: they return new batches and never mutate their inputs,
so a single loaded batch can be reused across a sweep of truncation strengths.
Two-sided clamps are idempotent and monotone in the truncation strength; for
any finite batch there is a strength beyond which they are the identity.
"""

from __future__ import annotations

import numpy as np

from .errors import InsufficientDataError, ParameterError, ShapeError, StateError
from .model import BnChannelStats, FeatureBatch, LinearHead, RectifierKind, RectifierSpec, Stage

DEFAULT_SIGMA_FLOOR = 1e-6


def _check_channels(batch: FeatureBatch, stats: BnChannelStats) -> None:
    if batch.n_channels != stats.n_channels:
        raise ShapeError(
            f"batch has {batch.n_channels} channels but stats have {stats.n_channels}"
        )


def trbn_clamp(batch: FeatureBatch, stats: BnChannelStats, lam: float) -> FeatureBatch:
    """Clamp pre-activation features into ``[mu - lam*sigma, mu + lam*sigma]``.

    This is the typical-set rectification applied to the normalized features
    before ReLU; values inside the interval pass through unchanged.
    """
    if batch.stage is not Stage.PRE_ACTIVATION:
        raise StateError("trbn_clamp requires pre-activation features")
    if not np.isfinite(lam) or lam <= 0:
        raise ParameterError(f"truncation strength must be positive, got {lam}")
    _check_channels(batch, stats)
    lo, hi = stats.interval(float(lam))
    return batch.with_data(np.clip(batch.data, lo, hi))


def relu(batch: FeatureBatch) -> FeatureBatch:
    """Elementwise max(0, x); marks the batch as post-activation."""
    if batch.stage is not Stage.PRE_ACTIVATION:
        raise StateError("relu expects pre-activation features (already applied?)")
    return batch.with_data(np.maximum(batch.data, 0.0), stage=Stage.POST_ACTIVATION)


def react_clamp(batch: FeatureBatch, threshold: float) -> FeatureBatch:
    """One-sided upper clamp of post-activation features at ``threshold``."""
    if batch.stage is not Stage.POST_ACTIVATION:
        raise StateError("react_clamp requires post-activation features")
    if not np.isfinite(threshold) or threshold <= 0:
        raise ParameterError(f"clamp threshold must be positive, got {threshold}")
    return batch.with_data(np.minimum(batch.data, float(threshold)))


def estimate_channel_stats(
    batch: FeatureBatch, sigma_floor: float = DEFAULT_SIGMA_FLOOR
) -> BnChannelStats:
    """Per-channel sample mean and standard deviation (divisor N-1).

    Standard deviations are floored at ``sigma_floor`` so constant channels
    still define a valid (zero-width up to the floor) clamp interval.
    """
    if batch.n_samples < 2:
        raise InsufficientDataError(
            f"need at least 2 samples to estimate channel statistics, got {batch.n_samples}"
        )
    if not np.isfinite(sigma_floor) or sigma_floor <= 0:
        raise ParameterError(f"sigma_floor must be positive, got {sigma_floor}")
    mu = batch.data.mean(axis=0)
    sigma = np.maximum(batch.data.std(axis=0, ddof=1), float(sigma_floor))
    return BnChannelStats(mu, sigma)


def tfem_clamp(batch: FeatureBatch, stats: BnChannelStats, lam: float) -> FeatureBatch:
    """Two-sided clamp of post-activation features against empirical statistics.

    After clamping into ``[mu - lam*sigma, mu + lam*sigma]`` the result is
    re-clamped at 0 from below, since post-activation features are nonnegative
    (the empirical lower bound may dip below zero on sparse channels).
    """
    if batch.stage is not Stage.POST_ACTIVATION:
        raise StateError("tfem_clamp requires post-activation features")
    if not np.isfinite(lam) or lam <= 0:
        raise ParameterError(f"truncation strength must be positive, got {lam}")
    _check_channels(batch, stats)
    lo, hi = stats.interval(float(lam))
    return batch.with_data(np.maximum(np.clip(batch.data, lo, hi), 0.0))


def apply_head(batch: FeatureBatch, head: LinearHead) -> np.ndarray:
    """Logits ``W @ z + b`` for every sample; returns an N x K float64 array."""
    if batch.n_channels != head.n_channels:
        raise ShapeError(
            f"batch has {batch.n_channels} channels but head expects {head.n_channels}"
        )
    return batch.data @ head.weights.T + head.bias


def apply_rectifier(
    batch: FeatureBatch,
    spec: RectifierSpec,
    bn_stats: BnChannelStats | None = None,
) -> FeatureBatch:
    """Run ``batch`` through ``spec``'s rectifier and ReLU, yielding
    post-activation features ready for the head.

    Pre-activation batches follow clamp -> ReLU -> (react/tfem); batches that
    are already post-activation only admit the post-activation rectifiers.
    """
    if batch.stage is Stage.PRE_ACTIVATION:
        if spec.kind is RectifierKind.BATS:
            if bn_stats is None:
                raise ParameterError("bats rectifier requires BN channel statistics")
            batch = trbn_clamp(batch, bn_stats, spec.lam)
        batch = relu(batch)
    elif spec.kind is RectifierKind.BATS:
        raise StateError("bats rectifier requires pre-activation features")
    if spec.kind is RectifierKind.REACT:
        batch = react_clamp(batch, spec.react_threshold)
    elif spec.kind is RectifierKind.TFEM:
        batch = tfem_clamp(batch, spec.empirical_stats, spec.lam)
    return batch
