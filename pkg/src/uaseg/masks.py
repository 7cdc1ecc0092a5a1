"""Palette decomposition of colour-coded labels and connected-component cropping."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import InvalidInputError, InvalidParameterError

# 4-neighbourhood
_CROSS = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class Palette:
    """Ordered colour -> class-name table; position ``i`` is mask index ``i``."""

    colors: tuple
    names: tuple

    def __post_init__(self):
        colors = tuple(tuple(int(v) for v in c) for c in self.colors)
        object.__setattr__(self, "colors", colors)
        object.__setattr__(self, "names", tuple(self.names))
        if len(colors) != len(self.names):
            raise InvalidInputError("palette colours and names differ in length")
        if len(set(colors)) != len(colors):
            raise InvalidInputError("palette colours must be unique")
        for c in colors:
            if len(c) != 3 or not all(0 <= v <= 255 for v in c):
                raise InvalidInputError(f"bad palette colour {c}")

    def __len__(self):
        return len(self.colors)

    def color_of(self, name: str) -> tuple:
        try:
            return self.colors[self.names.index(name)]
        except ValueError:
            raise InvalidParameterError(f"class {name!r} not in palette") from None

    @classmethod
    def from_csv(cls, path) -> "Palette":
        with open(path, newline="") as fh:
            return cls._from_rows(csv.DictReader(fh))

    @classmethod
    def _from_rows(cls, rows) -> "Palette":
        colors, names = [], []
        for row in rows:
            colors.append((int(row["r"]), int(row["g"]), int(row["b"])))
            names.append(row["name"])
        return cls(tuple(colors), tuple(names))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["r", "g", "b", "name"])
            for c, name in zip(self.colors, self.names):
                writer.writerow([*c, name])


def camvid_palette() -> Palette:
    """The 32-class CamVid colour table shipped with the package."""
    with resources.files("uaseg").joinpath("data/camvid.csv").open(newline="") as fh:
        return Palette._from_rows(csv.DictReader(fh))


def _check_labels(labels):
    labels = np.asarray(labels)
    if labels.ndim != 3 or labels.shape[2] != 3:
        raise InvalidInputError(f"expected an (H, W, 3) label raster, got {labels.shape}")
    return labels


def color_mask(labels, color) -> np.ndarray:
    labels = _check_labels(labels)
    return np.all(labels == np.asarray(color, dtype=labels.dtype), axis=-1).astype(np.uint8)


def split_by_color(labels, palette: Palette) -> np.ndarray:
    """``(n, H, W)`` stack of binary masks, one per palette entry in order.

    Colours absent from the raster still get an (all-zero) mask so that
    indices stay stable; off-palette pixels are zero in every mask.
    """
    if len(palette) == 0:
        raise InvalidInputError("palette is empty")
    labels = _check_labels(labels)
    return np.stack([color_mask(labels, c) for c in palette.colors])


def merge_masks(masks, palette: Palette, fill=(0, 0, 0)) -> np.ndarray:
    """Inverse of :func:`split_by_color` for in-palette pixels."""
    masks = np.asarray(masks)
    out = np.empty(masks.shape[1:] + (3,), dtype=np.uint8)
    out[:] = fill
    for m, c in zip(masks, palette.colors):
        out[m.astype(bool)] = c
    return out


@dataclass
class InstancePatch:
    image_crop: np.ndarray | None
    mask_crop: np.ndarray
    source_id: str
    bbox: tuple  # (row0, col0, row1, col1), exclusive ends

    @property
    def area(self) -> int:
        return int(self.mask_crop.sum())


def extract_instances(labels, class_color, min_area=64, pad=8, image=None, source_id="") -> list[InstancePatch]:
    """Crop each 4-connected component of ``class_color`` with ``area >= min_area``.

    The bounding box is grown by ``pad`` on every side and clamped to the
    raster. ``mask_crop`` holds only the component itself, so patches never
    share pixels. ``image`` (same H, W) is cropped alongside when given.
    """
    if min_area < 1:
        raise InvalidParameterError("min_area must be >= 1")
    if pad < 0:
        raise InvalidParameterError("pad must be >= 0")
    mask = color_mask(labels, class_color)
    if image is not None and np.asarray(image).shape[:2] != mask.shape:
        raise InvalidInputError("image and labels differ in size")
    h, w = mask.shape
    components, count = ndimage.label(mask, structure=_CROSS)
    patches = []
    for idx, sl in enumerate(ndimage.find_objects(components), start=1):
        if sl is None:
            continue
        r0 = max(sl[0].start - pad, 0)
        c0 = max(sl[1].start - pad, 0)
        r1 = min(sl[0].stop + pad, h)
        c1 = min(sl[1].stop + pad, w)
        crop = (components[r0:r1, c0:c1] == idx).astype(np.uint8)
        if crop.sum() < min_area:
            continue
        img_crop = None if image is None else np.asarray(image)[r0:r1, c0:c1].copy()
        patches.append(InstancePatch(img_crop, crop, source_id, (r0, c0, r1, c1)))
    return patches


def load_palette(path=None) -> Palette:
    return camvid_palette() if path is None else Palette.from_csv(Path(path))
