"""Run configuration and the evaluation / sweep drivers behind the CLI.

Dumps are loaded once and shared read-only across truncation strengths; output
rows are deterministically ordered, and CSV/JSON emission is a pure function
of the results, so identical inputs yield byte-identical output.
"""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass, field, replace

from .defaults import DEFAULT_ALPHA
from .dump import read_dump
from .errors import DataError, ParameterError, ShapeError
from .metrics import DetectionMetrics, accuracy, detection_metrics, ece, msp_calibration_inputs
from .model import BnChannelStats, FeatureBatch, LinearHead, RectifierKind, RectifierSpec
from .pipeline import compute_scores, fit_mahalanobis_reference, rectified_features
from .rectify import apply_head, estimate_channel_stats
from .scores import DEFAULT_MAHALANOBIS_SHRINKAGE, MahalanobisModel, ScoreName

SEED_ENV_VAR = "TYPICALSET_SEED"

CSV_COLUMNS = (
    "rectifier",
    "score",
    "lambda",
    "ood_name",
    "fpr_at_tpr",
    "auroc",
    "gamma",
    "n_id",
    "n_ood",
)


@dataclass(frozen=True)
class RunConfig:
    """Everything an evaluation run needs besides the dumps themselves."""

    rectifier: RectifierSpec = field(default_factory=RectifierSpec.none)
    score_name: ScoreName = ScoreName.ENERGY
    temperature: float | None = None
    alpha: float = DEFAULT_ALPHA
    lambda_grid: tuple[float, ...] = ()
    seed: int = 0
    output_format: str = "csv"
    percent: bool = False
    mahalanobis_shrinkage: float = DEFAULT_MAHALANOBIS_SHRINKAGE

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.output_format not in ("csv", "json"):
            raise ParameterError(f"output format must be csv or json, got {self.output_format}")
        grid = tuple(float(v) for v in self.lambda_grid)
        for v in grid:
            if not math.isfinite(v) or v <= 0:
                raise ParameterError(f"lambda grid values must be positive, got {v}")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ParameterError("lambda grid must be strictly increasing")
        object.__setattr__(self, "lambda_grid", grid)


@dataclass(frozen=True)
class EvalRow:
    rectifier: str
    score: str
    lam: float | None
    ood_name: str
    fpr_at_tpr: float
    auroc: float
    gamma: float
    n_id: int
    n_ood: int
    metrics: DetectionMetrics | None = None


@dataclass(frozen=True)
class EvalResult:
    rows: tuple[EvalRow, ...]
    id_accuracy: float | None = None
    id_ece: float | None = None

    def to_csv(self, percent: bool = False) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows:
            scale = 100.0 if percent else 1.0
            cells = (
                row.rectifier,
                row.score,
                "" if row.lam is None else _fmt(row.lam),
                row.ood_name,
                _fmt(row.fpr_at_tpr * scale),
                _fmt(row.auroc * scale),
                _fmt(row.gamma),
                str(row.n_id),
                str(row.n_ood),
            )
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def to_json(self, percent: bool = False) -> str:
        scale = 100.0 if percent else 1.0
        payload = {
            "rows": [
                {
                    "rectifier": row.rectifier,
                    "score": row.score,
                    "lambda": row.lam,
                    "ood_name": row.ood_name,
                    "fpr_at_tpr": row.fpr_at_tpr * scale,
                    "auroc": row.auroc * scale,
                    "gamma": row.gamma,
                    "n_id": row.n_id,
                    "n_ood": row.n_ood,
                }
                for row in self.rows
            ],
        }
        if self.id_accuracy is not None:
            payload["id_accuracy"] = self.id_accuracy
        if self.id_ece is not None:
            payload["id_ece"] = self.id_ece
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def render(self, output_format: str, percent: bool = False) -> str:
        if output_format == "json":
            return self.to_json(percent)
        return self.to_csv(percent)


def _fmt(value: float) -> str:
    return repr(float(value))


@dataclass(frozen=True)
class LoadedDump:
    name: str
    batch: FeatureBatch
    stats: BnChannelStats | None
    head: LinearHead | None


def load_id_dump(path) -> LoadedDump:
    batch, stats, head = read_dump(path)
    if stats is None:
        raise DataError(f"ID dump {path} lacks BN channel statistics")
    if head is None:
        raise DataError(f"ID dump {path} lacks a classifier head")
    return LoadedDump(_dump_name(path), batch, stats, head)


def load_ood_dump(path, id_dump: LoadedDump) -> LoadedDump:
    batch, stats, head = read_dump(path)
    if batch.n_channels != id_dump.batch.n_channels:
        raise ShapeError(
            f"OOD dump {path} has {batch.n_channels} channels, "
            f"ID dump has {id_dump.batch.n_channels}"
        )
    if head is not None and head.n_classes != id_dump.head.n_classes:
        raise ShapeError(
            f"OOD dump {path} declares {head.n_classes} classes, "
            f"ID dump has {id_dump.head.n_classes}"
        )
    return LoadedDump(_dump_name(path), batch, stats, head)


def _dump_name(path) -> str:
    base = os.path.basename(str(path))
    return base.rsplit(".", 1)[0] if "." in base else base


def resolve_rectifier(
    config: RunConfig, id_dump: LoadedDump, lam: float | None = None
) -> RectifierSpec:
    """Concrete rectifier for one run: fills in lambda and TFEM statistics."""
    spec = config.rectifier
    if lam is not None and spec.kind in (RectifierKind.BATS, RectifierKind.TFEM):
        spec = replace(spec, lam=float(lam))
    if spec.kind is RectifierKind.TFEM and spec.empirical_stats is None:
        post = rectified_features(id_dump.batch, RectifierSpec.none(), id_dump.stats)
        spec = replace(spec, empirical_stats=estimate_channel_stats(post))
    return spec


def _score_pair(
    config: RunConfig,
    id_dump: LoadedDump,
    ood_dumps: list[LoadedDump],
    rectifier: RectifierSpec,
):
    model: MahalanobisModel | None = None
    if config.score_name is ScoreName.MAHALANOBIS:
        model = fit_mahalanobis_reference(
            id_dump.batch, id_dump.head, rectifier, id_dump.stats,
            config.mahalanobis_shrinkage,
        )
    kwargs = dict(
        head=id_dump.head,
        score_name=config.score_name,
        rectifier=rectifier,
        temperature=config.temperature,
        mahalanobis_model=model,
    )
    id_scores = compute_scores(id_dump.batch, bn_stats=id_dump.stats, **kwargs)
    ood_scores = [
        compute_scores(d.batch, bn_stats=id_dump.stats, **kwargs) for d in ood_dumps
    ]
    return id_scores, ood_scores


def _rows_for(
    config: RunConfig,
    id_dump: LoadedDump,
    ood_dumps: list[LoadedDump],
    rectifier: RectifierSpec,
    lam: float | None,
) -> list[EvalRow]:
    id_scores, ood_scores = _score_pair(config, id_dump, ood_dumps, rectifier)
    rows = []
    for dump_, scores in zip(ood_dumps, ood_scores):
        m = detection_metrics(id_scores, scores, config.alpha)
        rows.append(
            EvalRow(
                rectifier=rectifier.kind.value,
                score=config.score_name.value,
                lam=lam,
                ood_name=dump_.name,
                fpr_at_tpr=m.fpr_at_tpr,
                auroc=m.auroc,
                gamma=m.gamma,
                n_id=m.n_id,
                n_ood=m.n_ood,
                metrics=m,
            )
        )
    if len(rows) > 1:  # unweighted arithmetic mean across OOD datasets
        rows.append(
            EvalRow(
                rectifier=rectifier.kind.value,
                score=config.score_name.value,
                lam=lam,
                ood_name="average",
                fpr_at_tpr=sum(r.fpr_at_tpr for r in rows) / len(rows),
                auroc=sum(r.auroc for r in rows) / len(rows),
                gamma=rows[0].gamma,
                n_id=rows[0].n_id,
                n_ood=sum(r.n_ood for r in rows),
            )
        )
    return rows


def run_eval(config: RunConfig, id_path, ood_paths) -> EvalResult:
    """Detection metrics for one rectifier configuration against each OOD dump.

    Emits one row per OOD dump plus an unweighted average row when there are
    several. If the ID dump carries labels, ID accuracy and calibration error
    under the same rectifier are attached to the result.
    """
    id_dump = load_id_dump(id_path)
    ood_dumps = [load_ood_dump(p, id_dump) for p in ood_paths]
    if not ood_dumps:
        raise ParameterError("run_eval needs at least one OOD dump")
    lam = config.rectifier.lam if config.rectifier.kind in (
        RectifierKind.BATS, RectifierKind.TFEM,
    ) else None
    rectifier = resolve_rectifier(config, id_dump)
    rows = _rows_for(config, id_dump, ood_dumps, rectifier, lam)
    id_acc = id_ece = None
    if id_dump.batch.labels is not None:
        feats = rectified_features(id_dump.batch, rectifier, id_dump.stats)
        logits = apply_head(feats, id_dump.head)
        id_acc = accuracy(logits, id_dump.batch.labels)
        conf, correct = msp_calibration_inputs(logits, id_dump.batch.labels)
        id_ece = ece(conf, correct)
    return EvalResult(rows=tuple(rows), id_accuracy=id_acc, id_ece=id_ece)


def run_sweep(config: RunConfig, id_path, ood_paths) -> EvalResult:
    """Metrics across the lambda grid, with an unrectified baseline first.

    The dumps are loaded once and reused across the grid. Baseline rows carry
    rectifier "none" and an empty lambda; grid rows keep the grid order.
    """
    if not config.lambda_grid:
        raise ParameterError("run_sweep requires a nonempty lambda grid")
    if config.rectifier.kind not in (RectifierKind.BATS, RectifierKind.TFEM):
        raise ParameterError("run_sweep sweeps bats or tfem rectifiers")
    id_dump = load_id_dump(id_path)
    ood_dumps = [load_ood_dump(p, id_dump) for p in ood_paths]
    if not ood_dumps:
        raise ParameterError("run_sweep needs at least one OOD dump")
    rows = _rows_for(
        config, id_dump, ood_dumps, RectifierSpec.none(), None
    )
    for lam in config.lambda_grid:
        rectifier = resolve_rectifier(config, id_dump, lam)
        rows.extend(_rows_for(config, id_dump, ood_dumps, rectifier, lam))
    return EvalResult(rows=tuple(rows))
