"""scikit-learn style estimators wrapping the core operators.

These adapters work on plain 2-D arrays so rectification and detection compose
with pipelines, grid search and the rest of the sklearn ecosystem; the typed
batch API underneath stays the source of truth for the numerics.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .defaults import DEFAULT_ALPHA, DEFAULT_LAMBDA
from .errors import ParameterError
from .metrics import threshold_at_tpr
from .model import BnChannelStats, FeatureBatch, LinearHead, RectifierSpec, Stage
from .pipeline import compute_scores, rectified_features
from .rectify import estimate_channel_stats, react_clamp, tfem_clamp, trbn_clamp
from .scores import (
    DEFAULT_MAHALANOBIS_SHRINKAGE,
    ScoreName,
    mahalanobis_fit,
    mahalanobis_score,
)


class BatsRectifier(BaseEstimator, TransformerMixin):
    """Clamp pre-activation features into the typical interval of given
    per-channel statistics.

    Parameters are the normalization layer's learnable location/scale arrays
    and the truncation strength; ``fit`` only validates shapes.
    """

    def __init__(self, mu=None, sigma=None, lam: float = DEFAULT_LAMBDA):
        self.mu = mu
        self.sigma = sigma
        self.lam = lam

    def fit(self, X, y=None):
        if self.mu is None or self.sigma is None:
            raise ParameterError("BatsRectifier requires mu and sigma arrays")
        self.stats_ = BnChannelStats(self.mu, self.sigma)
        return self

    def transform(self, X):
        if not hasattr(self, "stats_"):
            self.fit(X)
        batch = FeatureBatch(np.asarray(X, dtype=np.float64), Stage.PRE_ACTIVATION)
        return trbn_clamp(batch, self.stats_, self.lam).data


class ReactRectifier(BaseEstimator, TransformerMixin):
    """One-sided upper clamp of post-activation features at a fixed threshold."""

    def __init__(self, threshold: float = 1.0):
        self.threshold = threshold

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        batch = FeatureBatch(np.asarray(X, dtype=np.float64), Stage.POST_ACTIVATION)
        return react_clamp(batch, self.threshold).data


class TfemRectifier(BaseEstimator, TransformerMixin):
    """Two-sided clamp of post-activation features against statistics
    estimated from the training features passed to ``fit``."""

    def __init__(self, lam: float = 1.0, sigma_floor: float = 1e-6):
        self.lam = lam
        self.sigma_floor = sigma_floor

    def fit(self, X, y=None):
        batch = FeatureBatch(np.asarray(X, dtype=np.float64), Stage.POST_ACTIVATION)
        self.stats_ = estimate_channel_stats(batch, self.sigma_floor)
        return self

    def transform(self, X):
        if not hasattr(self, "stats_"):
            raise NotFittedError("TfemRectifier must be fitted before transform")
        batch = FeatureBatch(np.asarray(X, dtype=np.float64), Stage.POST_ACTIVATION)
        return tfem_clamp(batch, self.stats_, self.lam).data


class MahalanobisOodDetector(BaseEstimator, OutlierMixin):
    """Class-conditional Gaussian scorer with a shared shrunk covariance.

    ``fit`` expects post-activation features and integer labels;
    ``score_samples`` returns the negated squared distance to the nearest
    class mean (higher = more in-distribution) and ``predict`` follows the
    sklearn outlier convention (+1 inlier, -1 outlier) at the threshold
    retaining ``1 - alpha`` of the training samples.
    """

    def __init__(
        self,
        n_classes: int | None = None,
        shrinkage: float = DEFAULT_MAHALANOBIS_SHRINKAGE,
        alpha: float = DEFAULT_ALPHA,
    ):
        self.n_classes = n_classes
        self.shrinkage = shrinkage
        self.alpha = alpha

    def fit(self, X, y):
        y = np.asarray(y)
        k = int(y.max()) + 1 if self.n_classes is None else int(self.n_classes)
        batch = FeatureBatch(
            np.asarray(X, dtype=np.float64), Stage.POST_ACTIVATION, labels=y
        )
        self.model_ = mahalanobis_fit(batch, k, self.shrinkage)
        self.offset_ = threshold_at_tpr(self.score_samples(X), self.alpha).gamma
        return self

    def score_samples(self, X):
        if not hasattr(self, "model_"):
            raise NotFittedError("MahalanobisOodDetector must be fitted first")
        batch = FeatureBatch(np.asarray(X, dtype=np.float64), Stage.POST_ACTIVATION)
        return mahalanobis_score(batch, self.model_)

    def decision_function(self, X):
        return self.score_samples(X) - self.offset_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, 1, -1)


class OodScoreDetector(BaseEstimator, OutlierMixin):
    """Full rectify -> ReLU -> head -> score detector over raw feature arrays.

    The head arrays and normalization statistics are estimator parameters;
    ``fit`` consumes ID features to place the reject threshold at the score
    retaining ``1 - alpha`` of them. Input arrays are pre-activation features.
    """

    def __init__(
        self,
        head_w=None,
        head_b=None,
        mu=None,
        sigma=None,
        score: str = "energy",
        rectifier: str = "none",
        lam: float = DEFAULT_LAMBDA,
        react_threshold: float = 1.0,
        temperature: float | None = None,
        alpha: float = DEFAULT_ALPHA,
    ):
        self.head_w = head_w
        self.head_b = head_b
        self.mu = mu
        self.sigma = sigma
        self.score = score
        self.rectifier = rectifier
        self.lam = lam
        self.react_threshold = react_threshold
        self.temperature = temperature
        self.alpha = alpha

    def _resolve(self, X_fit=None):
        head = LinearHead(self.head_w, self.head_b)
        stats = None
        if self.mu is not None and self.sigma is not None:
            stats = BnChannelStats(self.mu, self.sigma)
        if self.rectifier == "none":
            spec = RectifierSpec.none()
        elif self.rectifier == "bats":
            spec = RectifierSpec.bats(self.lam)
        elif self.rectifier == "react":
            spec = RectifierSpec.react(self.react_threshold)
        elif self.rectifier == "tfem":
            if X_fit is None:
                raise ParameterError("tfem rectifier needs fit() before scoring")
            batch = FeatureBatch(np.asarray(X_fit, dtype=np.float64), Stage.PRE_ACTIVATION)
            post = rectified_features(batch, RectifierSpec.none(), stats)
            spec = RectifierSpec.tfem(self.lam, estimate_channel_stats(post))
        else:
            raise ParameterError(f"unknown rectifier {self.rectifier!r}")
        return head, stats, spec

    def fit(self, X, y=None):
        self.head_, self.stats_, self.spec_ = self._resolve(X_fit=X)
        self.offset_ = threshold_at_tpr(self.score_samples(X), self.alpha).gamma
        return self

    def score_samples(self, X):
        if not hasattr(self, "spec_"):
            raise NotFittedError("OodScoreDetector must be fitted first")
        batch = FeatureBatch(np.asarray(X, dtype=np.float64), Stage.PRE_ACTIVATION)
        return compute_scores(
            batch,
            self.head_,
            ScoreName(self.score),
            self.spec_,
            bn_stats=self.stats_,
            temperature=self.temperature,
        )

    def decision_function(self, X):
        return self.score_samples(X) - self.offset_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, 1, -1)
