"""Seedable desk-scale generators for ID/OOD feature batches and a random head.

Channel parameters are drawn once per seed (means in [-1, 1], scales in
[0.5, 1.5], stylized magnitudes rather than fitted ones), then every channel
is generated from its own spawned substream, so serial and per-channel
parallel generation produce identical batches. OOD batches draw from a
sibling stream of the ID batch: a zero-strength stressor is distributionally
identical to ID but sample-wise independent of it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import BnChannelStats, FeatureBatch, LinearHead, Stage


class OodKind(enum.Enum):
    MEAN_SHIFT = "mean_shift"
    SCALE_INFLATE = "scale_inflate"
    HEAVY_TAIL = "heavy_tail"


@dataclass(frozen=True)
class SyntheticSpec:
    """Size, class count, OOD stressor and seed of one synthetic scenario.

    ``ood_param`` is the stressor strength: the mean shift in units of sigma,
    the scale multiplier (> 1), or the Student-t degrees of freedom (> 2).
    """

    n_samples: int
    d_channels: int
    k_classes: int
    ood_kind: OodKind = OodKind.HEAVY_TAIL
    ood_param: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ParameterError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.d_channels < 1:
            raise ParameterError(f"d_channels must be >= 1, got {self.d_channels}")
        if self.k_classes < 2:
            raise ParameterError(f"k_classes must be >= 2, got {self.k_classes}")
        if not isinstance(self.ood_kind, OodKind):
            raise ParameterError(f"ood_kind must be an OodKind, got {self.ood_kind!r}")
        p = float(self.ood_param)
        if self.ood_kind is OodKind.SCALE_INFLATE and p <= 1.0:
            raise ParameterError(f"scale_inflate needs a multiplier > 1, got {p}")
        if self.ood_kind is OodKind.HEAVY_TAIL and p <= 2.0:
            raise ParameterError(f"heavy_tail needs dof > 2, got {p}")
        if self.ood_kind is OodKind.MEAN_SHIFT and not np.isfinite(p):
            raise ParameterError(f"mean_shift needs a finite delta, got {p}")


def _streams(seed: int):
    id_ss, ood_ss = np.random.SeedSequence(seed).spawn(2)
    return id_ss, ood_ss


def gen_id(spec: SyntheticSpec) -> tuple[FeatureBatch, BnChannelStats, LinearHead]:
    """Generate an ID batch with exactly known channel statistics and a head.

    Features of channel c are N(mu_c, sigma_c^2); the returned statistics
    carry the exact generating (mu_c, sigma_c). Head entries have variance
    1/sqrt(d). Labels are uniform over the classes.
    """
    id_ss, _ = _streams(spec.seed)
    d = spec.d_channels
    sub = id_ss.spawn(d + 3)  # [params, channel 0..d-1, head, labels]
    param_rng = np.random.default_rng(sub[0])
    mu = param_rng.uniform(-1.0, 1.0, d)
    sigma = param_rng.uniform(0.5, 1.5, d)
    data = np.empty((spec.n_samples, d))
    for c in range(d):
        data[:, c] = np.random.default_rng(sub[1 + c]).normal(mu[c], sigma[c], spec.n_samples)
    head_rng = np.random.default_rng(sub[d + 1])
    weight_std = d ** -0.25  # variance 1/sqrt(d)
    weights = head_rng.normal(0.0, weight_std, (spec.k_classes, d))
    bias = head_rng.normal(0.0, weight_std, spec.k_classes)
    labels = np.random.default_rng(sub[d + 2]).integers(0, spec.k_classes, spec.n_samples)
    batch = FeatureBatch(data, Stage.PRE_ACTIVATION, labels)
    return batch, BnChannelStats(mu, sigma), LinearHead(weights, bias)


def gen_ood(spec: SyntheticSpec, id_stats: BnChannelStats) -> FeatureBatch:
    """Generate an OOD batch stressing the ID channel statistics.

    Mean shift moves each channel by delta * sigma_c; scale inflation widens
    it; the heavy-tail stressor replaces the Gaussian with a scaled Student-t,
    whose rare extreme draws are what typical-set clamping targets.
    """
    if id_stats.n_channels != spec.d_channels:
        raise ParameterError(
            f"id_stats have {id_stats.n_channels} channels, spec wants {spec.d_channels}"
        )
    _, ood_ss = _streams(spec.seed)
    d = spec.d_channels
    sub = ood_ss.spawn(d)
    p = float(spec.ood_param)
    data = np.empty((spec.n_samples, d))
    for c in range(d):
        rng = np.random.default_rng(sub[c])
        mu_c = id_stats.mu[c]
        sigma_c = id_stats.sigma[c]
        if spec.ood_kind is OodKind.MEAN_SHIFT:
            data[:, c] = rng.normal(mu_c + p * sigma_c, sigma_c, spec.n_samples)
        elif spec.ood_kind is OodKind.SCALE_INFLATE:
            data[:, c] = rng.normal(mu_c, p * sigma_c, spec.n_samples)
        else:
            data[:, c] = mu_c + sigma_c * rng.standard_t(p, spec.n_samples)
    return FeatureBatch(data, Stage.PRE_ACTIVATION)
