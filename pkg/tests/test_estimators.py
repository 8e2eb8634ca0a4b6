"""scikit-learn estimator layer: API compliance and equivalence with the core ops."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from typicalset import (
    BatsRectifier,
    BnChannelStats,
    FeatureBatch,
    MahalanobisOodDetector,
    OodScoreDetector,
    ReactRectifier,
    Stage,
    TfemRectifier,
    energy_score,
    estimate_channel_stats,
    mahalanobis_fit,
    mahalanobis_score,
    react_clamp,
    relu,
    tfem_clamp,
    trbn_clamp,
)


@pytest.fixture
def pre_features(rng):
    return rng.normal(0.2, 1.1, size=(200, 6))


@pytest.fixture
def stats6():
    mu = np.linspace(-0.5, 0.5, 6)
    sigma = np.linspace(0.8, 1.4, 6)
    return mu, sigma


def test_bats_rectifier_matches_core_op(pre_features, stats6):
    mu, sigma = stats6
    est = BatsRectifier(mu=mu, sigma=sigma, lam=1.0).fit(pre_features)
    got = est.transform(pre_features)
    want = trbn_clamp(
        FeatureBatch(pre_features), BnChannelStats(mu, sigma), 1.0
    ).data
    np.testing.assert_array_equal(got, want)


def test_react_rectifier_matches_core_op(rng):
    X = np.abs(rng.normal(size=(50, 4)))
    got = ReactRectifier(threshold=0.75).fit(X).transform(X)
    want = react_clamp(FeatureBatch(X, Stage.POST_ACTIVATION), 0.75).data
    np.testing.assert_array_equal(got, want)


def test_tfem_rectifier_fits_stats_then_clamps(rng):
    X = np.abs(rng.normal(size=(100, 3)))
    est = TfemRectifier(lam=1.0).fit(X)
    batch = FeatureBatch(X, Stage.POST_ACTIVATION)
    want = tfem_clamp(batch, estimate_channel_stats(batch), 1.0).data
    np.testing.assert_array_equal(est.transform(X), want)


def test_tfem_rectifier_requires_fit(rng):
    with pytest.raises(NotFittedError):
        TfemRectifier().transform(np.abs(rng.normal(size=(5, 2))))


def test_estimators_expose_get_set_params(stats6):
    mu, sigma = stats6
    est = BatsRectifier(mu=mu, sigma=sigma, lam=2.0)
    assert est.get_params()["lam"] == 2.0
    est.set_params(lam=0.5)
    assert est.lam == 0.5
    cloned = clone(est)
    assert cloned.get_params()["lam"] == 0.5


def test_rectifiers_compose_in_pipeline(pre_features, stats6, rng):
    mu, sigma = stats6
    pipe = Pipeline(
        [
            ("bats", BatsRectifier(mu=mu, sigma=sigma, lam=1.5)),
        ]
    )
    out = pipe.fit_transform(pre_features)
    assert out.shape == pre_features.shape


def test_mahalanobis_detector_matches_core(rng):
    X = rng.normal(size=(120, 5))
    y = rng.integers(0, 3, size=120)
    det = MahalanobisOodDetector(shrinkage=0.05, alpha=0.1).fit(X, y)
    batch = FeatureBatch(X, Stage.POST_ACTIVATION, labels=y)
    model = mahalanobis_fit(batch, 3, 0.05)
    np.testing.assert_array_equal(
        det.score_samples(X),
        mahalanobis_score(FeatureBatch(X, Stage.POST_ACTIVATION), model),
    )
    # threshold retains at least 1 - alpha of the training samples
    assert (det.predict(X) == 1).mean() >= 0.9


def test_ood_score_detector_end_to_end(rng):
    d, k = 8, 4
    mu = rng.uniform(-1, 1, d)
    sigma = rng.uniform(0.5, 1.5, d)
    W = rng.normal(size=(k, d))
    b = rng.normal(size=k)
    X_id = rng.normal(mu, sigma, size=(400, d))
    X_ood = rng.normal(mu, 3 * sigma, size=(300, d))
    det = OodScoreDetector(
        head_w=W, head_b=b, mu=mu, sigma=sigma,
        score="energy", rectifier="bats", lam=1.25, alpha=0.05,
    ).fit(X_id)
    s_id = det.score_samples(X_id)
    # equivalence with the typed pipeline
    batch = FeatureBatch(X_id)
    want = energy_score(
        relu(trbn_clamp(batch, BnChannelStats(mu, sigma), 1.25)).data
        @ W.T + b
    )
    np.testing.assert_allclose(s_id, want, rtol=0, atol=0)
    preds = det.predict(X_id)
    assert set(np.unique(preds)) <= {-1, 1}
    assert (preds == 1).mean() >= 0.95
    # the detector flags a decent share of strongly inflated OOD samples
    assert (det.predict(X_ood) == -1).mean() > 0.05


def test_ood_score_detector_requires_fit(rng):
    det = OodScoreDetector(head_w=np.eye(2), head_b=np.zeros(2))
    with pytest.raises(NotFittedError):
        det.score_samples(rng.normal(size=(3, 2)))


def test_ood_score_detector_clones(rng):
    det = OodScoreDetector(head_w=np.eye(2), head_b=np.zeros(2), score="msp")
    cloned = clone(det)
    assert cloned.get_params()["score"] == "msp"
