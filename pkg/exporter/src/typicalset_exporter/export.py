"""Feature export: run a vision classifier over an image folder and dump the
pooled pre-activation features plus the normalization and head parameters.

The hook point is the output of the final batch-norm layer, pooled over the
spatial grid and captured before ReLU, so the downstream consumer can clamp
the features against the normalization statistics and then apply ReLU and the
head itself. The dumped statistics are the layer's learnable shift (mu) and
scale (sigma); the scale is stored as its absolute value (the interval
``[mu - lam*sigma, mu + lam*sigma]`` is symmetric in its sign) with a small
floor so channels with a vanishing scale stay representable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .dump_format import write_feature_dump
from .tail import check_forward_consistency, find_tail

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png", ".bmp", ".webp"}
SIGMA_FLOOR = 1e-6

# standard ImageNet preprocessing statistics
_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


@dataclass(frozen=True)
class ExportJob:
    """One export run: which model, which images, where the dump goes."""

    model_name: str
    image_dir: str
    output_path: str
    batch_size: int = 32
    device: str = "cpu"
    image_size: int = 224
    weights: str | None = None  # torchvision weights tag, e.g. "DEFAULT"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.image_size < 32:
            raise ValueError(f"image_size must be >= 32, got {self.image_size}")


def discover_images(image_dir) -> tuple[list[Path], np.ndarray | None]:
    """Collect image paths; class labels come from subdirectory names.

    A folder of class subdirectories yields labels indexed by sorted
    subdirectory name; a flat folder yields no labels.
    """
    root = Path(image_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"image directory {root} does not exist")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    paths: list[Path] = []
    labels: list[int] = []
    if class_dirs:
        for idx, sub in enumerate(class_dirs):
            for p in sorted(sub.iterdir()):
                if p.suffix.lower() in IMAGE_EXTENSIONS:
                    paths.append(p)
                    labels.append(idx)
        label_arr = np.asarray(labels, dtype=np.int64)
    else:
        paths = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
        label_arr = None
    if not paths:
        raise FileNotFoundError(f"no images found under {root}")
    return paths, label_arr


def load_image(path: Path, size: int) -> np.ndarray:
    """Decode, resize to ``size`` x ``size`` and normalize one image (CHW)."""
    with Image.open(path) as img:
        img = img.convert("RGB").resize((size, size), Image.BILINEAR)
        arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = (arr - _MEAN) / _STD
    return arr.transpose(2, 0, 1)


def build_model(name: str, weights: str | None, device: str) -> torch.nn.Module:
    import torchvision.models

    model = torchvision.models.get_model(name, weights=weights)
    return model.to(device).eval()


def export_features(job: ExportJob, model: torch.nn.Module | None = None) -> Path:
    """Run the export job and return the dump path.

    Features are the spatially pooled outputs of the final batch-norm layer,
    captured before ReLU; the dump also carries that layer's learnable
    (mu, sigma) and the classifier's (W, b). The tail structure is validated
    on the first batch before anything is written.
    """
    if model is None:
        model = build_model(job.model_name, job.weights, job.device)
    features_stack, bn, classifier = find_tail(model)
    paths, labels = discover_images(job.image_dir)
    device = torch.device(job.device)

    pooled_batches: list[np.ndarray] = []
    checked = False
    with torch.no_grad():
        for start in range(0, len(paths), job.batch_size):
            chunk = paths[start : start + job.batch_size]
            batch = torch.from_numpy(
                np.stack([load_image(p, job.image_size) for p in chunk])
            ).to(device)
            if not checked:
                check_forward_consistency(model, features_stack, classifier, batch)
                checked = True
            spatial = features_stack(batch)
            pooled = torch.nn.functional.adaptive_avg_pool2d(spatial, (1, 1)).flatten(1)
            pooled_batches.append(pooled.cpu().numpy())
    feats = np.concatenate(pooled_batches, axis=0)

    bn_mu = bn.bias.detach().cpu().numpy()
    bn_sigma = np.maximum(np.abs(bn.weight.detach().cpu().numpy()), SIGMA_FLOOR)
    head_w = classifier.weight.detach().cpu().numpy()
    head_b = classifier.bias.detach().cpu().numpy()
    if labels is not None and labels.max() >= head_w.shape[0]:
        raise ValueError(
            f"folder implies {labels.max() + 1} classes but the head has {head_w.shape[0]}"
        )

    out = Path(job.output_path)
    write_feature_dump(
        out,
        feats,
        stage="pre",
        labels=labels,
        bn_mu=bn_mu,
        bn_sigma=bn_sigma,
        head_w=head_w,
        head_b=head_b,
    )
    return out


def reference_logits(model: torch.nn.Module, job: ExportJob) -> np.ndarray:
    """Framework-side logits of the rectification-ready tail (ReLU after pooling).

    This is the float32 reference the dump is validated against: the same
    pooled pre-activation features pushed through ReLU and the head inside
    the framework.
    """
    features_stack, _, classifier = find_tail(model)
    paths, _ = discover_images(job.image_dir)
    outs: list[np.ndarray] = []
    with torch.no_grad():
        for start in range(0, len(paths), job.batch_size):
            chunk = paths[start : start + job.batch_size]
            batch = torch.from_numpy(
                np.stack([load_image(p, job.image_size) for p in chunk])
            ).to(torch.device(job.device))
            pooled = torch.nn.functional.adaptive_avg_pool2d(
                features_stack(batch), (1, 1)
            ).flatten(1)
            outs.append(classifier(torch.nn.functional.relu(pooled)).cpu().numpy())
    return np.concatenate(outs, axis=0)
