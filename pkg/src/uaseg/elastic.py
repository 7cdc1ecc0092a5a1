"""Elastic deformation of label rasters by smoothed random displacement fields."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .core import InvalidInputError, InvalidParameterError, derive_seed, rng

PRESETS = {
    "fog": (20.0, 15.0),
    "rain": (25.0, 4.0),
    "snow": (30.0, 7.0),
}


@dataclass(frozen=True)
class DeformSpec:
    alpha: float
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InvalidParameterError(f"alpha must be >= 0, got {self.alpha}")
        if not self.sigma > 0:
            raise InvalidParameterError(f"sigma must be > 0, got {self.sigma}")


def preset(kind: str) -> tuple[float, float]:
    """``(alpha, sigma)`` for the fog, rain or snow style deformation."""
    try:
        return PRESETS[kind]
    except KeyError:
        raise InvalidParameterError(f"unknown preset {kind!r}") from None


def make_field(h: int, w: int, spec: DeformSpec) -> np.ndarray:
    """Random ``(h, w, 2)`` field of ``(dx, dy)`` offsets.

    Each axis is Uniform(-1, 1) noise blurred with a Gaussian of std
    ``sigma`` (kernel radius ``ceil(3 sigma)``, edge-clamped), rescaled to
    unit max-abs, then scaled by ``alpha``. ``alpha`` is therefore the exact
    peak displacement in pixels along each axis.
    """
    if h < 1 or w < 1:
        raise InvalidInputError("field dimensions must be >= 1")
    g = rng(spec.seed)
    radius = int(math.ceil(3.0 * spec.sigma))
    axes = []
    for _ in range(2):
        noise = g.uniform(-1.0, 1.0, (h, w))
        blurred = gaussian_filter(noise, spec.sigma, mode="nearest", radius=radius)
        peak = np.abs(blurred).max()
        if peak > 0:
            blurred = blurred / peak
        axes.append(spec.alpha * blurred)
    return np.stack(axes, axis=-1)


def _check_field(shape, field):
    field = np.asarray(field, dtype=np.float64)
    if field.shape != (shape[0], shape[1], 2):
        raise InvalidInputError(f"field shape {field.shape} does not match raster {shape[:2]}")
    if not np.all(np.isfinite(field)):
        raise InvalidInputError("displacement field must be finite")
    return field


def warp_labels(labels, field) -> np.ndarray:
    """Nearest-neighbour inverse warp with border clamping.

    ``out[i, j] = labels[rint(i + dy), rint(j + dx)]``; works for any
    ``(H, W, ...)`` array and never introduces values absent from the input.
    """
    labels = np.asarray(labels)
    field = _check_field(labels.shape, field)
    h, w = labels.shape[:2]
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    rows = np.clip(np.rint(ii + field[..., 1]), 0, h - 1).astype(np.intp)
    cols = np.clip(np.rint(jj + field[..., 0]), 0, w - 1).astype(np.intp)
    return labels[rows, cols]


def warp_image(img, field, order=1) -> np.ndarray:
    """Interpolating warp for continuous-valued ``(H, W, C)`` images."""
    img = np.asarray(img, dtype=np.float64)
    field = _check_field(img.shape, field)
    h, w = img.shape[:2]
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    coords = [ii + field[..., 1], jj + field[..., 0]]
    if img.ndim == 2:
        return map_coordinates(img, coords, order=order, mode="nearest")
    return np.stack(
        [map_coordinates(img[..., c], coords, order=order, mode="nearest") for c in range(img.shape[2])],
        axis=-1,
    )


def deform_labels(labels, kind: str, seed: int, alpha=None, sigma=None) -> np.ndarray:
    """Warp ``labels`` with a preset (optionally overridden) at ``derive_seed(seed, kind)``."""
    a, s = preset(kind)
    spec = DeformSpec(a if alpha is None else alpha, s if sigma is None else sigma, derive_seed(seed, kind))
    labels = np.asarray(labels)
    return warp_labels(labels, make_field(labels.shape[0], labels.shape[1], spec))


def synthesize_annotations(labels, seed: int) -> list[np.ndarray]:
    """``[original, fog, rain, snow]`` annotation variants of one ground truth."""
    labels = np.asarray(labels)
    return [labels.copy()] + [deform_labels(labels, kind, seed) for kind in ("fog", "rain", "snow")]
