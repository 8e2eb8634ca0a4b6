"""Synthetic generators: determinism, stream splitting, and moment checks."""

import numpy as np
import pytest

from typicalset import (
    OodKind,
    ParameterError,
    SyntheticSpec,
    auroc,
    energy_score,
    gen_id,
    gen_ood,
    relu,
    apply_head,
)


def spec_of(n=1000, d=8, k=4, kind=OodKind.HEAVY_TAIL, param=3.0, seed=0):
    return SyntheticSpec(n, d, k, kind, param, seed)


def test_spec_validation():
    with pytest.raises(ParameterError):
        spec_of(n=0)
    with pytest.raises(ParameterError):
        spec_of(k=1)
    with pytest.raises(ParameterError):
        spec_of(kind=OodKind.SCALE_INFLATE, param=1.0)
    with pytest.raises(ParameterError):
        spec_of(kind=OodKind.HEAVY_TAIL, param=2.0)


def test_gen_id_deterministic_per_seed():
    a, stats_a, head_a = gen_id(spec_of(seed=7))
    b, stats_b, head_b = gen_id(spec_of(seed=7))
    np.testing.assert_array_equal(a.data, b.data)
    np.testing.assert_array_equal(a.labels, b.labels)
    np.testing.assert_array_equal(stats_a.mu, stats_b.mu)
    np.testing.assert_array_equal(head_a.weights, head_b.weights)
    c, _, _ = gen_id(spec_of(seed=8))
    assert not np.array_equal(a.data, c.data)


def test_gen_id_channel_streams_are_independent_of_width():
    # the first channels of a wider batch reproduce the narrower batch only if
    # channel substreams are keyed by position; param draws differ with d, so
    # instead check that per-channel regeneration is order-independent:
    # serial generation equals re-assembly from per-channel seeds.
    spec = spec_of(n=200, d=5, seed=3)
    batch, stats, _ = gen_id(spec)
    id_ss, _ = np.random.SeedSequence(spec.seed).spawn(2)
    sub = id_ss.spawn(spec.d_channels + 3)
    for c in reversed(range(spec.d_channels)):  # deliberately out of order
        col = np.random.default_rng(sub[1 + c]).normal(
            stats.mu[c], stats.sigma[c], spec.n_samples
        )
        np.testing.assert_array_equal(batch.data[:, c], col)


def test_gen_id_moments_at_scale():
    spec = spec_of(n=100_000, d=16, seed=0)
    batch, stats, _ = gen_id(spec)
    se = stats.sigma / np.sqrt(spec.n_samples)
    assert (np.abs(batch.data.mean(axis=0) - stats.mu) < 4 * se).all()
    assert (stats.sigma > 0).all()


def test_gen_id_labels_cover_classes():
    batch, _, head = gen_id(spec_of(n=5000, k=10, seed=1))
    assert set(np.unique(batch.labels)) == set(range(10))
    assert head.n_classes == 10


def test_gen_ood_null_mean_shift_is_distributionally_identical():
    spec = spec_of(n=5000, d=64, k=10, kind=OodKind.MEAN_SHIFT, param=0.0, seed=0)
    batch, stats, head = gen_id(spec)
    ood = gen_ood(spec, stats)
    assert not np.array_equal(batch.data, ood.data)  # independent draws
    id_scores = energy_score(apply_head(relu(batch), head))
    ood_scores = energy_score(apply_head(relu(ood), head))
    assert abs(auroc(id_scores, ood_scores) - 0.5) <= 0.03


def test_gen_ood_heavy_tail_kurtosis():
    spec = spec_of(n=100_000, d=8, kind=OodKind.HEAVY_TAIL, param=3.0, seed=0)
    _, stats, _ = gen_id(spec)
    ood = gen_ood(spec, stats)
    centered = ood.data - ood.data.mean(axis=0)
    m2 = (centered**2).mean(axis=0)
    m4 = (centered**4).mean(axis=0)
    excess = m4 / m2**2 - 3.0
    assert (excess > 0).all()


def test_gen_ood_scale_inflate_doubles_std():
    spec = spec_of(n=100_000, d=8, kind=OodKind.SCALE_INFLATE, param=2.0, seed=0)
    _, stats, _ = gen_id(spec)
    ood = gen_ood(spec, stats)
    target = 2.0 * stats.sigma
    se = target / np.sqrt(2.0 * (spec.n_samples - 1))
    assert (np.abs(ood.data.std(axis=0, ddof=1) - target) < 3 * se).all()


def test_gen_ood_mean_shift_moves_means():
    spec = spec_of(n=50_000, d=4, kind=OodKind.MEAN_SHIFT, param=1.5, seed=2)
    _, stats, _ = gen_id(spec)
    ood = gen_ood(spec, stats)
    target = stats.mu + 1.5 * stats.sigma
    se = stats.sigma / np.sqrt(spec.n_samples)
    assert (np.abs(ood.data.mean(axis=0) - target) < 4 * se).all()


def test_gen_ood_requires_matching_stats():
    spec = spec_of(d=8)
    _, stats, _ = gen_id(spec_of(d=4))
    with pytest.raises(ParameterError):
        gen_ood(spec, stats)


def test_ood_draws_decoupled_from_id_draws():
    # same seed, same kind: the OOD stream must not replay the ID stream
    spec = spec_of(n=1000, d=4, kind=OodKind.MEAN_SHIFT, param=0.0, seed=5)
    batch, stats, _ = gen_id(spec)
    ood = gen_ood(spec, stats)
    assert not np.allclose(batch.data, ood.data)
