"""Composition of rectify -> ReLU -> head -> score used by the runner and CLI.

Kept as plain library calls so that manually composing the same operators
yields bit-identical scores.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError, ParameterError
from .model import BnChannelStats, FeatureBatch, LinearHead, RectifierSpec
from .rectify import apply_head, apply_rectifier
from .scores import (
    MahalanobisModel,
    ScoreName,
    energy_score,
    gradnorm_score,
    mahalanobis_fit,
    mahalanobis_score,
    msp_score,
    odin_t_score,
)


def rectified_features(
    batch: FeatureBatch,
    rectifier: RectifierSpec,
    bn_stats: BnChannelStats | None = None,
) -> FeatureBatch:
    """Post-activation features after the configured rectifier and ReLU."""
    return apply_rectifier(batch, rectifier, bn_stats)


def compute_scores(
    batch: FeatureBatch,
    head: LinearHead,
    score_name: ScoreName,
    rectifier: RectifierSpec,
    bn_stats: BnChannelStats | None = None,
    temperature: float | None = None,
    mahalanobis_model: MahalanobisModel | None = None,
) -> np.ndarray:
    """Scores for one batch under one rectifier/score configuration."""
    feats = rectified_features(batch, rectifier, bn_stats)
    if score_name is ScoreName.ENERGY:
        return energy_score(apply_head(feats, head))
    if score_name is ScoreName.MSP:
        return msp_score(apply_head(feats, head))
    if score_name is ScoreName.ODIN_T:
        if temperature is None:
            raise ParameterError("odin scoring requires a temperature")
        return odin_t_score(apply_head(feats, head), temperature)
    if score_name is ScoreName.GRADNORM:
        return gradnorm_score(feats, head, 1.0 if temperature is None else temperature)
    if score_name is ScoreName.MAHALANOBIS:
        if mahalanobis_model is None:
            raise ParameterError("mahalanobis scoring requires a fitted model")
        return mahalanobis_score(feats, mahalanobis_model)
    raise ParameterError(f"unknown score {score_name!r}")


def fit_mahalanobis_reference(
    id_batch: FeatureBatch,
    head: LinearHead,
    rectifier: RectifierSpec,
    bn_stats: BnChannelStats | None,
    shrinkage: float,
) -> MahalanobisModel:
    """Fit the Mahalanobis reference on the rectified ID features.

    The ID batch stands in for training features, so the class-conditional
    Gaussians see exactly the features the score will consume.
    """
    if id_batch.labels is None:
        raise DataError("mahalanobis scoring requires a labeled ID dump")
    feats = rectified_features(id_batch, rectifier, bn_stats)
    return mahalanobis_fit(feats, head.n_classes, shrinkage)
