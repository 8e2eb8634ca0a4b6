"""Command-line interface: ``typicalset-export --model <name> --images <dir>
--out <file.batsdump>``."""

from __future__ import annotations

import argparse
import sys

from .export import ExportJob, export_features
from .tail import UnsupportedArchitectureError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="typicalset-export",
        description=(
            "Export pooled pre-activation features, batch-norm parameters and "
            "the classifier head of a vision model as a feature dump."
        ),
    )
    parser.add_argument("--model", required=True, help="torchvision model name, e.g. densenet121")
    parser.add_argument("--images", required=True, help="image folder (class subdirs give labels)")
    parser.add_argument("--out", required=True, help="output .batsdump path")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--image-size", type=int, default=224)
    parser.add_argument(
        "--weights", default=None,
        help="torchvision weights tag (e.g. DEFAULT); omit for random initialization",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        model_name=args.model,
        image_dir=args.images,
        output_path=args.out,
        batch_size=args.batch_size,
        device=args.device,
        image_size=args.image_size,
        weights=args.weights,
    )
    try:
        path = export_features(job)
    except UnsupportedArchitectureError as exc:
        print(f"typicalset-export: error[architecture]: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"typicalset-export: error[data]: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
