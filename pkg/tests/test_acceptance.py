"""Acceptance suite.

Each test implements one acceptance criterion at its stated tolerance and
prints a single ``ACCEPTANCE <name>: PASS|FAIL`` line (run with ``-s`` or
``-v`` to see them). One criterion, marked KNOWN RED in its docstring, is
intentionally kept failing; see that docstring.

Benchmark-scale headline numbers need the original models and datasets, so
this gate is property-based; the cross-runtime dump check lives in the
exporter package's test suite.
"""

import math
import time
from fractions import Fraction

import numpy as np

from typicalset import (
    OodKind,
    SyntheticSpec,
    apply_head,
    auroc,
    energy_score,
    erf,
    fpr_at_tpr,
    gen_id,
    gen_ood,
    mc_truncated_moments,
    read_dump,
    rectified_mean,
    relu,
    roc_curve,
    trapezoid_auroc,
    trbn_clamp,
    truncated_rectified_mean,
    truncation_bias,
    variance_ratio,
    write_dump,
)
from typicalset.cli import main

MC_DRAWS = 10_000_000
MC_SEED = 1
THEORY_LAMBDAS = (0.25, 0.5, 1.0, 1.5, 2.0, 3.0)

# canonical desk-scale scenario: heavy-tail OOD, fixed seed
FIG_SHAPE_SPEC = SyntheticSpec(
    n_samples=5000, d_channels=64, k_classes=10,
    ood_kind=OodKind.HEAVY_TAIL, ood_param=3.0, seed=0,
)
SWEEP_GRID = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.75,
              1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0, 10.0)


def report(name: str, ok: bool = True) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}")


def test_theory_agreement_monte_carlo():
    """Closed-form C, E(z), E(zbar) vs the MC oracle at 1e7 draws, 3 SE each."""
    start = time.perf_counter()
    assert variance_ratio(0.0) == 0.0
    assert variance_ratio(8.0) > 1.0 - 1e-6
    # a clamp far beyond any realizable draw estimates the unclamped moments
    reference = mc_truncated_moments(0.0, 1.0, 50.0, MC_DRAWS, MC_SEED)
    assert abs(rectified_mean(0.0, 1.0) - reference.rectified_mean) <= (
        3 * reference.rectified_mean_se
    )
    for lam in THEORY_LAMBDAS:
        mc = mc_truncated_moments(0.0, 1.0, lam, MC_DRAWS, MC_SEED)
        assert abs(variance_ratio(lam) - mc.clipped_var) <= 3 * mc.clipped_var_se, lam
        assert abs(
            truncated_rectified_mean(0.0, 1.0, lam) - mc.rectified_mean
        ) <= 3 * mc.rectified_mean_se, lam
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"theory agreement took {elapsed:.1f}s"
    report("theory-agreement")


def test_bias_limit():
    """|bias(10, 1)| < 1e-6, and the bias stays negative across (0, 6]."""
    assert abs(truncation_bias(10.0, 1.0)) < 1e-6
    for lam in np.arange(0.05, 6.0 + 1e-9, 0.05):
        assert truncation_bias(float(lam), 1.0) < 0.0, lam
    report("bias-limit")


def test_derivative_identity_as_stated():
    """Finite-difference dC/dlam against the form 2*lam*erf(lam/sqrt(2)).

    KNOWN RED. The implemented variance ratio is pinned independently by the
    Monte-Carlo agreement criterion above, and differentiating its closed form
    gives 2*lam*erfc(lam/sqrt(2)): every exponential term cancels and only the
    erfc tail survives (a ratio bounded by 1 cannot have a derivative that
    grows like 2*lam either). The erf form asserted here therefore cannot
    match finite differences - the gap at lam=1 is about 0.73 - and no
    implementation could satisfy both this criterion and the Monte-Carlo one.
    The assertion is kept as stated rather than silently corrected;
    test_variance_ratio_derivative_matches_finite_difference in test_theory.py
    covers the identity that does hold.
    """
    h = 1e-6
    ok = True
    for lam in (0.5, 1.0, 2.0, 3.0):
        fd = (variance_ratio(lam + h) - variance_ratio(lam - h)) / (2 * h)
        stated = 2.0 * lam * erf(lam / math.sqrt(2.0))
        ok = ok and abs(fd - stated) <= 1e-6
    report("derivative-identity-as-stated", ok)
    assert ok, "finite differences do not match 2*lam*erf(lam/sqrt(2)); see docstring"


def _pairwise_auroc(id_scores, ood_scores):
    total = 0.0
    for a in id_scores:
        for b in ood_scores:
            total += 1.0 if a > b else (0.5 if a == b else 0.0)
    return total / (len(id_scores) * len(ood_scores))


def _enumerate_fpr(id_scores, ood_scores, alpha):
    n = len(id_scores)
    target = 1 - Fraction(alpha)
    gamma = None
    for v in sorted(set(float(s) for s in id_scores)):
        if Fraction(sum(1 for s in id_scores if s >= v), n) >= target:
            gamma = v
    return sum(1 for s in ood_scores if s >= gamma) / len(ood_scores)


def test_metric_oracles():
    """Trapezoidal AUROC vs O(n^2) pairwise counting (1e-12) and FPR@TPR vs
    exhaustive threshold enumeration (exact), 200 randomized instances each,
    ties injected."""
    rng = np.random.default_rng(2718)
    for _ in range(200):
        n_id = int(rng.integers(1, 31))
        n_ood = int(rng.integers(1, 31))
        if rng.random() < 0.5:
            pool = rng.integers(-4, 5, size=n_id + n_ood).astype(float)
        else:
            pool = rng.normal(size=n_id + n_ood)
        ids, oods = pool[:n_id], pool[n_id:]
        trap = trapezoid_auroc(roc_curve(ids, oods))
        assert abs(trap - _pairwise_auroc(ids, oods)) <= 1e-12
        assert abs(trap - auroc(ids, oods)) <= 1e-12
        alpha = float(rng.uniform(0.01, 0.6))
        assert fpr_at_tpr(ids, oods, alpha) == _enumerate_fpr(ids, oods, alpha)
    report("metric-oracles")


def test_convergence_to_baseline(tmp_path):
    """An inactive clamp (lam = 1e6) reproduces plain energy scores per sample."""
    spec = SyntheticSpec(
        n_samples=2000, d_channels=32, k_classes=8,
        ood_kind=OodKind.HEAVY_TAIL, ood_param=3.0, seed=0,
    )
    batch, stats, head = gen_id(spec)
    path = tmp_path / "conv.batsdump"
    write_dump(path, batch, stats, head)
    loaded, loaded_stats, loaded_head = read_dump(path)
    plain = energy_score(apply_head(relu(loaded), loaded_head))
    clamped = energy_score(
        apply_head(relu(trbn_clamp(loaded, loaded_stats, 1e6)), loaded_head)
    )
    assert np.abs(plain - clamped).max() <= 1e-12
    report("convergence-to-baseline")


def _sweep_fpr(id_batch, stats, head, ood_batch, lam=None, alpha=0.05):
    if lam is None:
        id_b, ood_b = id_batch, ood_batch
    else:
        id_b = trbn_clamp(id_batch, stats, lam)
        ood_b = trbn_clamp(ood_batch, stats, lam)
    id_scores = energy_score(apply_head(relu(id_b), head))
    ood_scores = energy_score(apply_head(relu(ood_b), head))
    return fpr_at_tpr(id_scores, ood_scores, alpha)


def test_sweep_shape_at_desk_scale():
    """The fixed-seed heavy-tail scenario bows below the unrectified baseline
    at an interior truncation strength and returns to it at lam = 10."""
    start = time.perf_counter()
    id_batch, stats, head = gen_id(FIG_SHAPE_SPEC)
    ood_batch = gen_ood(FIG_SHAPE_SPEC, stats)
    baseline = _sweep_fpr(id_batch, stats, head, ood_batch)
    curve = [
        _sweep_fpr(id_batch, stats, head, ood_batch, lam) for lam in SWEEP_GRID
    ]
    best = int(np.argmin(curve))
    assert curve[best] < baseline, "no strength improves on the baseline"
    assert 0 < best < len(SWEEP_GRID) - 1, "minimum must be interior to the grid"
    assert abs(curve[-1] - baseline) <= 1e-12, "lam=10 must return to the baseline"
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"sweep scenario took {elapsed:.1f}s"
    report("sweep-shape")


def test_variance_realization():
    """Clamped synthetic ID channels realize sigma_c^2 * C(lam) within 3 SE."""
    spec = SyntheticSpec(
        n_samples=20_000, d_channels=16, k_classes=4,
        ood_kind=OodKind.HEAVY_TAIL, ood_param=3.0, seed=0,
    )
    batch, stats, _ = gen_id(spec)
    n = spec.n_samples
    for lam in (0.5, 1.0, 2.0):
        clamped = trbn_clamp(batch, stats, lam).data
        sample_var = clamped.var(axis=0, ddof=1)
        target = stats.sigma**2 * variance_ratio(lam)
        centered = clamped - clamped.mean(axis=0)
        m2 = (centered**2).mean(axis=0)
        m4 = (centered**4).mean(axis=0)
        se = np.sqrt(np.maximum(m4 - (n - 3) / (n - 1) * m2 * m2, 0.0) / n)
        assert (np.abs(sample_var - target) <= 3 * se).all(), lam
    report("variance-realization")


def test_cli_determinism(tmp_path):
    """Two full CLI runs with identical seeds produce byte-identical CSV."""
    scenario = tmp_path / "scenario.json"
    scenario.write_text(
        '{"n_samples": 400, "d_channels": 16, "k_classes": 5, "seed": 0,'
        ' "ood": {"kind": "heavy_tail", "dof": 3.0}}'
    )
    outputs = []
    for tag in ("one", "two"):
        run_dir = tmp_path / tag
        run_dir.mkdir()
        id_path = run_dir / "id.batsdump"
        ood_path = run_dir / "ood.batsdump"
        csv_path = run_dir / "metrics.csv"
        assert main(["simulate", "--spec", str(scenario),
                     "--out", str(id_path), "--ood-out", str(ood_path)]) == 0
        assert main(["eval", "--id", str(id_path), "--ood", str(ood_path),
                     "--rectifier", "bats", "--lambda", "1.25",
                     "--score", "energy", "--out", str(csv_path)]) == 0
        outputs.append((id_path.read_bytes(), ood_path.read_bytes(), csv_path.read_bytes()))
    assert outputs[0] == outputs[1]
    report("cli-determinism")
