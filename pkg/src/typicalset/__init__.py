"""Typical-set feature rectification and post-hoc OOD detection.

The package operates on exported deep-feature batches: rectifiers clamp
features into the typical interval of per-channel statistics, scores turn the
rectified features and a linear head into per-sample OOD statistics, and the
metrics module evaluates detection quality. A theory module provides the
closed-form variance/bias effect of truncation together with a seeded
Monte-Carlo oracle, and scikit-learn style estimators wrap the core operators
for ecosystem composition.
"""

__version__ = "0.1.0"

from .defaults import DEFAULT_ALPHA, DEFAULT_LAMBDA
from .dump import read_dump, write_dump
from .errors import (
    DataError,
    DumpCorruptionError,
    DumpFormatError,
    FitError,
    InsufficientDataError,
    ParameterError,
    ShapeError,
    StateError,
    TypicalSetError,
)
from .estimators import (
    BatsRectifier,
    MahalanobisOodDetector,
    OodScoreDetector,
    ReactRectifier,
    TfemRectifier,
)
from .metrics import (
    DetectionMetrics,
    RejectRegion,
    accuracy,
    auroc,
    detection_metrics,
    ece,
    fpr_at_tpr,
    fpr_curve,
    roc_curve,
    threshold_at_tpr,
    trapezoid_auroc,
)
from .model import (
    BnChannelStats,
    FeatureBatch,
    LinearHead,
    RectifierKind,
    RectifierSpec,
    Stage,
)
from .pipeline import compute_scores, rectified_features
from .rectify import (
    apply_head,
    apply_rectifier,
    estimate_channel_stats,
    react_clamp,
    relu,
    tfem_clamp,
    trbn_clamp,
)
from .runner import EvalResult, EvalRow, RunConfig, run_eval, run_sweep
from .scores import (
    MahalanobisModel,
    ScoreName,
    ScoreReport,
    energy_score,
    gradnorm_score,
    mahalanobis_fit,
    mahalanobis_score,
    msp_score,
    odin_t_score,
)
from .synthetic import OodKind, SyntheticSpec, gen_id, gen_ood
from .theory import (
    McMoments,
    TruncationAnalysis,
    analyze_truncation,
    erf,
    erfc,
    mc_truncated_moments,
    rectified_mean,
    std_normal_cdf,
    std_normal_pdf,
    truncated_rectified_mean,
    truncation_bias,
    variance_ratio,
    variance_ratio_derivative,
)

__all__ = [
    "BatsRectifier",
    "BnChannelStats",
    "DEFAULT_ALPHA",
    "DEFAULT_LAMBDA",
    "DataError",
    "DetectionMetrics",
    "DumpCorruptionError",
    "DumpFormatError",
    "EvalResult",
    "EvalRow",
    "FeatureBatch",
    "FitError",
    "InsufficientDataError",
    "LinearHead",
    "MahalanobisModel",
    "MahalanobisOodDetector",
    "McMoments",
    "OodKind",
    "OodScoreDetector",
    "ParameterError",
    "ReactRectifier",
    "RectifierKind",
    "RectifierSpec",
    "RejectRegion",
    "RunConfig",
    "ScoreName",
    "ScoreReport",
    "ShapeError",
    "Stage",
    "StateError",
    "SyntheticSpec",
    "TfemRectifier",
    "TruncationAnalysis",
    "TypicalSetError",
    "accuracy",
    "analyze_truncation",
    "apply_head",
    "apply_rectifier",
    "auroc",
    "compute_scores",
    "detection_metrics",
    "ece",
    "energy_score",
    "erf",
    "erfc",
    "estimate_channel_stats",
    "fpr_at_tpr",
    "fpr_curve",
    "gen_id",
    "gen_ood",
    "gradnorm_score",
    "mahalanobis_fit",
    "mahalanobis_score",
    "mc_truncated_moments",
    "msp_score",
    "odin_t_score",
    "react_clamp",
    "read_dump",
    "rectified_features",
    "rectified_mean",
    "relu",
    "roc_curve",
    "run_eval",
    "run_sweep",
    "std_normal_cdf",
    "std_normal_pdf",
    "tfem_clamp",
    "threshold_at_tpr",
    "trapezoid_auroc",
    "trbn_clamp",
    "truncated_rectified_mean",
    "truncation_bias",
    "variance_ratio",
    "variance_ratio_derivative",
    "write_dump",
]
