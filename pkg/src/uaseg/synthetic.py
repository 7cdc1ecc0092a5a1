"""Synthetic images with exact ground truth, for training and pipeline runs."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import derive_seed, rng, save_image, save_labels

SCENE_CLASSES = ("Sky", "Building", "Road", "Car")


def disc_task(n_images=4, size=32, seed=0):
    """Bright disc on a dark noisy background; one mask per image."""
    data = []
    for k in range(n_images):
        g = rng(derive_seed(seed, f"disc{k}"))
        yy, xx = np.mgrid[0:size, 0:size]
        cy, cx = g.uniform(0.3 * size, 0.7 * size, 2)
        r = g.uniform(0.18 * size, 0.3 * size)
        mask = ((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r).astype(np.float64)
        img = 0.2 + g.normal(0.0, 0.05, (size, size, 3))
        img[mask > 0] += 0.6
        data.append((np.clip(img, 0.0, 1.0), mask[None]))
    return data


def two_class_task(n_images=4, size=32, seed=0):
    """A bright disc and a dimmer square whose intensity ranges overlap."""
    data = []
    for k in range(n_images):
        g = rng(derive_seed(seed, f"two{k}"))
        yy, xx = np.mgrid[0:size, 0:size]
        cy, cx = g.uniform(0.25 * size, 0.45 * size, 2)
        r = g.uniform(0.12 * size, 0.2 * size)
        disc = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        s0 = int(g.integers(size // 2, size - size // 4))
        side = size // 4
        square = np.zeros((size, size), dtype=bool)
        square[s0:s0 + side, s0:s0 + side] = True
        square &= ~disc
        img = 0.2 + g.normal(0.0, 0.08, (size, size, 3))
        img[disc] += 0.55
        img[square] += 0.4
        masks = np.stack([disc, square]).astype(np.float64)
        data.append((np.clip(img, 0.0, 1.0), masks))
    return data


def scene(size=(48, 64), seed=0, palette=None):
    """A crude street scene: sky, buildings, road and a few cars.

    Returns ``(image, labels)`` where ``labels`` uses palette colours.
    """
    from .masks import camvid_palette

    palette = palette or camvid_palette()
    col = {name: np.array(palette.color_of(name), dtype=np.uint8) for name in SCENE_CLASSES}
    h, w = size
    g = rng(seed)
    labels = np.empty((h, w, 3), dtype=np.uint8)
    horizon = int(g.integers(h // 3, h // 2))
    labels[:horizon] = col["Sky"]
    labels[horizon:] = col["Road"]
    x = 0
    while x < w:
        bw = int(g.integers(6, 16))
        top = int(g.integers(2, horizon))
        labels[top:horizon, x:x + bw] = col["Building"]
        x += bw + int(g.integers(0, 6))
    for _ in range(int(g.integers(1, 4))):
        ch = int(g.integers(5, 10))
        cw = int(g.integers(8, 16))
        r0 = int(g.integers(horizon, h - ch))
        c0 = int(g.integers(0, w - cw))
        labels[r0:r0 + ch, c0:c0 + cw] = col["Car"]
    img = labels.astype(np.float64) / 255.0 * 0.8 + 0.1 + g.normal(0.0, 0.03, (h, w, 3))
    return np.clip(img, 0.0, 1.0), labels


def write_corpus(root, n=20, size=(48, 64), seed=0):
    """Write ``root/images/*.png`` and matching ``root/labels/*.png``."""
    root = Path(root)
    for k in range(n):
        img, labels = scene(size, derive_seed(seed, f"scene{k}"))
        save_image(root / "images" / f"frame{k:03d}.png", img)
        save_labels(root / "labels" / f"frame{k:03d}.png", labels)
    return root / "images", root / "labels"
