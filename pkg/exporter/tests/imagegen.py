"""Synthetic image folders for exporter tests."""

import math

import numpy as np
from PIL import Image


def make_image_folder(root, n_per_class, classes=("cat", "dog", "owl"), size=64, seed=0):
    """Random-noise images in class subdirectories."""
    rng = np.random.default_rng(seed)
    for name in classes:
        sub = root / name
        sub.mkdir(parents=True)
        for i in range(n_per_class):
            arr = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
            Image.fromarray(arr, "RGB").save(sub / f"{name}_{i:03d}.png")
    return root


def make_gradient_folder(root, n, size=64, seed=0):
    """Smooth low-frequency images, distributionally unlike the noise folders."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True)
    ramp = np.linspace(0.0, 255.0, size, dtype=np.float32)
    for i in range(n):
        angle = rng.uniform(0, 2 * math.pi)
        plane = np.outer(np.cos(angle) * ramp, np.ones(size)) + np.outer(
            np.ones(size), np.sin(angle) * ramp
        )
        plane = (plane - plane.min()) / max(np.ptp(plane), 1e-9) * 255.0
        arr = np.stack([plane] * 3, axis=-1).astype(np.uint8)
        Image.fromarray(arr, "RGB").save(root / f"grad_{i:03d}.png")
    return root
