"""Command-line interface.

Subcommands::

    typicalset theory    closed-form vs Monte-Carlo truncation table
    typicalset simulate  generate synthetic ID/OOD dumps
    typicalset score     per-sample OOD scores for one dump
    typicalset eval      detection metrics for ID vs OOD dumps
    typicalset sweep     metrics across a grid of truncation strengths

Errors exit with status 2 and print ``typicalset: error[<category>]: <msg>``
on stderr; the category names are stable and machine-parsable. The
``TYPICALSET_SEED`` environment variable overrides any configured seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .defaults import DEFAULT_ALPHA, DEFAULT_LAMBDA
from .dump import write_dump
from .errors import ParameterError, TypicalSetError
from .model import RectifierKind, RectifierSpec
from .pipeline import compute_scores, fit_mahalanobis_reference
from .runner import (
    SEED_ENV_VAR,
    RunConfig,
    load_id_dump,
    resolve_rectifier,
    run_eval,
    run_sweep,
)
from .scores import DEFAULT_ODIN_TEMPERATURE, ScoreName, make_report
from .synthetic import OodKind, SyntheticSpec, gen_id, gen_ood
from .theory import mc_truncated_moments, rectified_mean, truncation_bias, variance_ratio

_THEORY_COLUMNS = (
    "lambda",
    "variance_ratio",
    "bias_per_sigma",
    "mc_variance_ratio",
    "mc_bias_per_sigma",
    "abs_err_variance_ratio",
    "abs_err_bias_per_sigma",
)

# Exceeds every realistic draw, so the clamp is inactive and the rectified
# mean of this run estimates the unclamped one.
_MC_REFERENCE_LAMBDA = 1e9


def parse_lambda_grid(text: str) -> tuple[float, ...]:
    """Parse ``start:stop:step`` (inclusive stop) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ParameterError(f"grid must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ParameterError(f"grid step must be positive, got {step}")
        values = []
        k = 0
        while True:
            v = start + k * step
            if v > stop + 1e-12:
                break
            values.append(round(v, 12))
            k += 1
        if not values:
            raise ParameterError(f"grid {text!r} is empty")
        return tuple(values)
    return tuple(float(p) for p in text.split(",") if p.strip())


def _write_output(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        # flush here so a closed pipe surfaces inside main()'s handler, not at
        # interpreter shutdown
        sys.stdout.flush()


def _fmt(value: float) -> str:
    return repr(float(value))


def _env_seed(seed: int) -> int:
    env = os.environ.get(SEED_ENV_VAR)
    return int(env) if env else seed


def _rectifier_from_args(args) -> RectifierSpec:
    kind = args.rectifier
    if kind == "none":
        return RectifierSpec.none()
    if kind == "bats":
        return RectifierSpec.bats(args.lam)
    if kind == "react":
        return RectifierSpec.react(args.react_threshold)
    if kind == "tfem":
        # empirical statistics are estimated from the ID dump by the runner
        return RectifierSpec(RectifierKind.TFEM, lam=args.lam, empirical_stats=None)
    raise ParameterError(f"unknown rectifier {kind!r}")


def _add_rectifier_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--rectifier", choices=("none", "bats", "react", "tfem"), default="none"
    )
    parser.add_argument(
        "--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA,
        help="truncation strength for bats/tfem",
    )
    parser.add_argument("--react-threshold", type=float, default=1.0)


def _add_score_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--score", choices=tuple(s.value for s in ScoreName), default="energy"
    )
    parser.add_argument(
        "--temperature", type=float, default=None,
        help=f"softmax temperature (odin default {DEFAULT_ODIN_TEMPERATURE:g})",
    )


def _add_output_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--out", default=None, help="write output here instead of stdout")
    parser.add_argument(
        "--percent", action="store_true", help="display rates on a 0..100 scale"
    )


def _temperature(args) -> float | None:
    if args.temperature is not None:
        return args.temperature
    if args.score == "odin":
        return DEFAULT_ODIN_TEMPERATURE
    return None


def cmd_theory(args) -> None:
    seed = _env_seed(args.seed)
    grid = parse_lambda_grid(args.lambda_grid)
    reference = mc_truncated_moments(0.0, 1.0, _MC_REFERENCE_LAMBDA, args.mc_draws, seed)
    rows = []
    for lam in grid:
        mc = mc_truncated_moments(0.0, 1.0, lam, args.mc_draws, seed)
        analytic_c = variance_ratio(lam)
        analytic_bias = truncation_bias(lam, 1.0)
        mc_bias = mc.rectified_mean - reference.rectified_mean
        rows.append(
            {
                "lambda": lam,
                "variance_ratio": analytic_c,
                "bias_per_sigma": analytic_bias,
                "mc_variance_ratio": mc.clipped_var,
                "mc_bias_per_sigma": mc_bias,
                "abs_err_variance_ratio": abs(mc.clipped_var - analytic_c),
                "abs_err_bias_per_sigma": abs(mc_bias - analytic_bias),
            }
        )
    if args.format == "json":
        text = json.dumps({"rows": rows, "mc_draws": args.mc_draws, "seed": seed,
                           "mc_rectified_mean_reference": reference.rectified_mean,
                           "analytic_rectified_mean": rectified_mean(0.0, 1.0)},
                          sort_keys=True, indent=2) + "\n"
    else:
        lines = [",".join(_THEORY_COLUMNS)]
        for row in rows:
            lines.append(",".join(_fmt(row[c]) for c in _THEORY_COLUMNS))
        text = "\n".join(lines) + "\n"
    _write_output(text, args.out)


def _spec_from_file(path: str, seed_override: int | None) -> SyntheticSpec:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    ood = raw.get("ood", {})
    kind = OodKind(ood.get("kind", "heavy_tail"))
    if "param" in ood:
        param = float(ood["param"])
    elif kind is OodKind.HEAVY_TAIL:
        param = float(ood.get("dof", 3.0))
    elif kind is OodKind.MEAN_SHIFT:
        param = float(ood.get("delta", 1.0))
    else:
        param = float(ood.get("scale", 2.0))
    seed = int(raw.get("seed", 0)) if seed_override is None else seed_override
    return SyntheticSpec(
        n_samples=int(raw["n_samples"]),
        d_channels=int(raw["d_channels"]),
        k_classes=int(raw["k_classes"]),
        ood_kind=kind,
        ood_param=param,
        seed=seed,
    )


def cmd_simulate(args) -> None:
    env = os.environ.get(SEED_ENV_VAR)
    spec = _spec_from_file(args.spec, int(env) if env else None)
    batch, stats, head = gen_id(spec)
    write_dump(args.out, batch, stats, head)
    if args.ood_out:
        write_dump(args.ood_out, gen_ood(spec, stats))


def cmd_score(args) -> None:
    id_dump = load_id_dump(args.id)
    config = RunConfig(
        rectifier=_rectifier_from_args(args),
        score_name=ScoreName(args.score),
        temperature=_temperature(args),
        alpha=DEFAULT_ALPHA,
    )
    rectifier = resolve_rectifier(config, id_dump)
    model = None
    if config.score_name is ScoreName.MAHALANOBIS:
        model = fit_mahalanobis_reference(
            id_dump.batch, id_dump.head, rectifier, id_dump.stats,
            config.mahalanobis_shrinkage,
        )
    scores = compute_scores(
        id_dump.batch,
        id_dump.head,
        config.score_name,
        rectifier,
        bn_stats=id_dump.stats,
        temperature=config.temperature,
        mahalanobis_model=model,
    )
    report = make_report(scores, config.score_name, rectifier, config.temperature)
    lam = rectifier.lam if rectifier.kind in (RectifierKind.BATS, RectifierKind.TFEM) else ""
    if args.format == "json":
        text = json.dumps(
            {
                "score": report.score_name.value,
                "rectifier": report.rectifier,
                "temperature": report.temperature,
                "scores": [float(s) for s in report.scores],
            },
            sort_keys=True, indent=2,
        ) + "\n"
    else:
        lines = ["index,score,score_name,rectifier,lambda,temperature"]
        temp = "" if report.temperature is None else _fmt(report.temperature)
        lam_cell = _fmt(lam) if lam != "" else ""
        for i, s in enumerate(report.scores):
            lines.append(
                f"{i},{_fmt(s)},{report.score_name.value},{rectifier.kind.value},{lam_cell},{temp}"
            )
        text = "\n".join(lines) + "\n"
    _write_output(text, args.out)


def _eval_config(args) -> RunConfig:
    return RunConfig(
        rectifier=_rectifier_from_args(args),
        score_name=ScoreName(args.score),
        temperature=_temperature(args),
        alpha=args.alpha,
        lambda_grid=getattr(args, "grid", ()),
        output_format=args.format,
        percent=args.percent,
    )


def _split_ood_paths(values) -> list[str]:
    paths: list[str] = []
    for value in values:
        paths.extend(p for p in value.split(",") if p)
    if not paths:
        raise ParameterError("at least one OOD dump is required")
    return paths


def cmd_eval(args) -> None:
    config = _eval_config(args)
    result = run_eval(config, args.id, _split_ood_paths(args.ood))
    _write_output(result.render(config.output_format, config.percent), args.out)


def cmd_sweep(args) -> None:
    args.grid = parse_lambda_grid(args.lambda_grid)
    config = _eval_config(args)
    result = run_sweep(config, args.id, _split_ood_paths(args.ood))
    _write_output(result.render(config.output_format, config.percent), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="typicalset",
        description="Typical-set feature rectification and post-hoc OOD detection.",
    )
    parser.add_argument("--version", action="version", version=f"typicalset {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="closed-form vs Monte-Carlo truncation table")
    p.add_argument("--lambda-grid", default="0.25:4:0.25")
    p.add_argument("--mc-draws", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("simulate", help="generate synthetic dumps")
    p.add_argument("--spec", required=True, help="JSON scenario description")
    p.add_argument("--out", required=True, help="ID dump output path")
    p.add_argument("--ood-out", default=None, help="optional OOD dump output path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("score", help="per-sample scores for one dump")
    p.add_argument("--id", required=True)
    _add_rectifier_args(p)
    _add_score_args(p)
    _add_output_args(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="detection metrics for ID vs OOD dumps")
    p.add_argument("--id", required=True)
    p.add_argument("--ood", required=True, action="append",
                   help="OOD dump path(s); repeat or comma-separate")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    _add_rectifier_args(p)
    _add_score_args(p)
    _add_output_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="metrics across a truncation-strength grid")
    p.add_argument("--id", required=True)
    p.add_argument("--ood", required=True, action="append")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--lambda-grid", default="0.25:4:0.25")
    _add_rectifier_args(p)
    _add_score_args(p)
    _add_output_args(p)
    p.set_defaults(func=cmd_sweep, rectifier="bats")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except TypicalSetError as exc:
        print(f"typicalset: error[{exc.category}]: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # the downstream consumer closed the pipe (e.g. | head); not an error
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        try:
            sys.stdout.flush()
        except OSError:
            pass
        return 0
    except OSError as exc:
        print(f"typicalset: error[io]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
