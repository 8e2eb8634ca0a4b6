"""Structural introspection of a classifier's final layers.

The exporter only supports models whose tail is normalization -> ReLU ->
global average pool -> fully-connected, with the feature stack exposed as
``model.features`` ending in a plain ``BatchNorm2d`` and the classifier as a
single ``Linear``. Anything else (residual additions after the final
normalization, bounded activations such as ReLU6, missing normalization
layers) is rejected with a diagnostic rather than approximated, since the
pre-activation hook point would be ambiguous.
"""

from __future__ import annotations

import torch
from torch import nn


class UnsupportedArchitectureError(RuntimeError):
    """The model does not expose the required BN -> ReLU -> pool -> FC tail."""


def find_tail(model: nn.Module) -> tuple[nn.Module, nn.BatchNorm2d, nn.Linear]:
    """Locate (feature stack, final batch-norm, classifier head) or reject."""
    features = getattr(model, "features", None)
    if features is None:
        raise UnsupportedArchitectureError(
            "model has no 'features' stack; a batch-normalized "
            "BN -> ReLU -> pool -> FC tail is required"
        )
    submodules = [m for m in features.modules() if not list(m.children())]
    if not submodules or not isinstance(submodules[-1], nn.BatchNorm2d):
        raise UnsupportedArchitectureError(
            "the feature stack must end in a BatchNorm2d so pre-activation "
            f"features are well defined; found {type(submodules[-1]).__name__}"
            if submodules else "the feature stack is empty"
        )
    bn = submodules[-1]
    classifier = getattr(model, "classifier", None)
    if not isinstance(classifier, nn.Linear):
        raise UnsupportedArchitectureError(
            "the classifier must be a single Linear layer, "
            f"found {type(classifier).__name__}"
        )
    if classifier.in_features != bn.num_features:
        raise UnsupportedArchitectureError(
            f"classifier expects {classifier.in_features} features but the final "
            f"normalization produces {bn.num_features}"
        )
    return features, bn, classifier


def check_forward_consistency(
    model: nn.Module, features: nn.Module, classifier: nn.Linear, sample: torch.Tensor
) -> None:
    """Verify the model's own forward equals ReLU -> pool -> FC over the stack.

    Run on the first batch; a mismatch means something (a residual branch, an
    extra activation) sits between the hook point and the head.
    """
    with torch.no_grad():
        manual = classifier(
            torch.flatten(
                nn.functional.adaptive_avg_pool2d(
                    nn.functional.relu(features(sample)), (1, 1)
                ),
                1,
            )
        )
        full = model(sample)
    if not torch.allclose(manual, full, atol=1e-5):
        raise UnsupportedArchitectureError(
            "the model's forward pass does not factor as "
            "features -> ReLU -> global pool -> classifier"
        )
