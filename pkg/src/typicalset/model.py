"""Core data model: feature batches, per-channel normalization statistics,
the linear classifier head, and rectifier configuration.

All types are immutable after construction (arrays are defensively copied and
marked read-only), so batches can be shared freely across threads and reused
across sweeps without copying.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError, ShapeError
from .validation import (
    as_float_matrix,
    as_float_vector,
    as_label_vector,
    frozen_copy,
    require_finite,
)


class Stage(enum.Enum):
    """Whether a batch holds pre-activation (pre-ReLU) or post-activation features."""

    PRE_ACTIVATION = "pre"
    POST_ACTIVATION = "post"


class RectifierKind(enum.Enum):
    NONE = "none"
    BATS = "bats"
    REACT = "react"
    TFEM = "tfem"


@dataclass(frozen=True)
class FeatureBatch:
    """An N x d matrix of deep features plus optional class labels.

    ``data[i, c]`` is the activation of channel ``c`` for sample ``i``. The
    ``stage`` flag records whether ReLU has already been applied; rectifiers
    check it so that pre-activation clamps cannot be applied twice or in the
    wrong order.
    """

    data: np.ndarray
    stage: Stage = Stage.PRE_ACTIVATION
    labels: np.ndarray | None = None

    def __post_init__(self):
        data = as_float_matrix(self.data, "features")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ShapeError(f"features must be at least 1x1, got {data.shape}")
        require_finite(data, "features")
        object.__setattr__(self, "data", frozen_copy(data))
        if not isinstance(self.stage, Stage):
            raise ParameterError(f"stage must be a Stage, got {self.stage!r}")
        if self.labels is not None:
            labels = as_label_vector(self.labels, "labels")
            if labels.shape[0] != data.shape[0]:
                raise ShapeError(
                    f"labels length {labels.shape[0]} != number of samples {data.shape[0]}"
                )
            if labels.size and labels.min() < 0:
                raise DataError("labels must be nonnegative class indices")
            object.__setattr__(self, "labels", frozen_copy(labels))

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray, stage: Stage | None = None) -> "FeatureBatch":
        """New batch with replaced features; labels carry over."""
        return FeatureBatch(data, self.stage if stage is None else stage, self.labels)


@dataclass(frozen=True)
class BnChannelStats:
    """Per-channel location/scale pairs defining the typical interval
    ``[mu - lam*sigma, mu + lam*sigma]``."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = as_float_vector(self.mu, "mu")
        sigma = as_float_vector(self.sigma, "sigma")
        if mu.shape != sigma.shape:
            raise ShapeError(f"mu and sigma must match, got {mu.shape} vs {sigma.shape}")
        require_finite(mu, "mu")
        require_finite(sigma, "sigma")
        if (sigma <= 0).any():
            idx = int(np.flatnonzero(sigma <= 0)[0])
            raise DataError(f"sigma must be strictly positive; sigma[{idx}] = {sigma[idx]}")
        object.__setattr__(self, "mu", frozen_copy(mu))
        object.__setattr__(self, "sigma", frozen_copy(sigma))

    @property
    def n_channels(self) -> int:
        return self.mu.shape[0]

    def interval(self, lam: float) -> tuple[np.ndarray, np.ndarray]:
        """Lower/upper clamp bounds per channel for truncation strength ``lam``."""
        return self.mu - lam * self.sigma, self.mu + lam * self.sigma


@dataclass(frozen=True)
class LinearHead:
    """Fully connected classifier head mapping d-channel features to K logits."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        weights = as_float_matrix(self.weights, "weights")
        bias = as_float_vector(self.bias, "bias")
        if weights.shape[0] != bias.shape[0]:
            raise ShapeError(
                f"weights rows {weights.shape[0]} != bias length {bias.shape[0]}"
            )
        if weights.shape[0] < 2:
            raise ShapeError(f"head must map to K >= 2 classes, got K={weights.shape[0]}")
        require_finite(weights, "weights")
        require_finite(bias, "bias")
        object.__setattr__(self, "weights", frozen_copy(weights))
        object.__setattr__(self, "bias", frozen_copy(bias))

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_channels(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class RectifierSpec:
    """Which rectifier to apply before scoring, and with what parameters.

    ``lam`` is the truncation strength for the two-sided clamps (BATS / TFEM),
    ``react_threshold`` the one-sided upper clamp, and ``empirical_stats`` the
    estimated per-channel statistics TFEM clamps against.
    """

    kind: RectifierKind = RectifierKind.NONE
    lam: float | None = None
    react_threshold: float | None = None
    empirical_stats: BnChannelStats | None = field(default=None, repr=False)

    def __post_init__(self):
        if not isinstance(self.kind, RectifierKind):
            raise ParameterError(f"kind must be a RectifierKind, got {self.kind!r}")
        if self.kind in (RectifierKind.BATS, RectifierKind.TFEM):
            if self.lam is None or not np.isfinite(self.lam) or self.lam <= 0:
                raise ParameterError(
                    f"{self.kind.value} requires a positive truncation strength, got {self.lam}"
                )
        if self.kind is RectifierKind.REACT:
            if (
                self.react_threshold is None
                or not np.isfinite(self.react_threshold)
                or self.react_threshold <= 0
            ):
                raise ParameterError(
                    f"react requires a positive clamp threshold, got {self.react_threshold}"
                )
        if self.kind is RectifierKind.TFEM and self.empirical_stats is None:
            raise ParameterError("tfem requires empirical channel statistics")

    @classmethod
    def none(cls) -> "RectifierSpec":
        return cls(RectifierKind.NONE)

    @classmethod
    def bats(cls, lam: float) -> "RectifierSpec":
        return cls(RectifierKind.BATS, lam=float(lam))

    @classmethod
    def react(cls, threshold: float) -> "RectifierSpec":
        return cls(RectifierKind.REACT, react_threshold=float(threshold))

    @classmethod
    def tfem(cls, lam: float, stats: BnChannelStats) -> "RectifierSpec":
        return cls(RectifierKind.TFEM, lam=float(lam), empirical_stats=stats)

    def describe(self) -> str:
        if self.kind is RectifierKind.NONE:
            return "none"
        if self.kind is RectifierKind.REACT:
            return f"react(threshold={self.react_threshold:g})"
        return f"{self.kind.value}(lambda={self.lam:g})"
