"""Package-wide default settings."""

# Truncation strength that works well for ImageNet-scale backbones
# (ResNet-50 / DenseNet-121 class of models). Compact models trained on
# small images usually want a different setting, roughly in 0.7 .. 3.
DEFAULT_LAMBDA = 1.25

# Significance level: alpha = 0.05 targets 95% ID retention (FPR95).
DEFAULT_ALPHA = 0.05
