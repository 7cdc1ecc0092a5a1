"""Synthetic fog, rain and snow corruption with a strength in [0, 1].

Strength 0 is the identity. Strength 1 is full fog colour for fog and the
densest streak/flake overlay for rain and snow. Rain and snow draw their
full-strength element set from the seed and render only a prefix of it, so
at a fixed seed every lower strength is a subset of every higher one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvalidParameterError, check_image, rng

KINDS = ("fog", "rain", "snow")

FOG_COLOR = np.array([0.9, 0.9, 0.9])
RAIN_DENSITY = 0.004
SNOW_DENSITY = 0.008
SNOW_LIFT = 0.1


@dataclass(frozen=True)
class WeatherSpec:
    kind: str
    strength: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown weather kind {self.kind!r}")
        if not (0.0 <= self.strength <= 1.0):
            raise InvalidParameterError(f"strength must lie in [0, 1], got {self.strength}")


def sample_weather(seed: int) -> WeatherSpec:
    """Uniform kind and Uniform(0, 1) strength, drawn from ``seed``."""
    g = rng(seed)
    kind = KINDS[int(g.integers(len(KINDS)))]
    strength = float(g.random())
    return WeatherSpec(kind, strength, seed)


def apply_weather(img, spec: WeatherSpec) -> np.ndarray:
    img = check_image(img)
    if spec.strength == 0.0:
        return img.copy()
    if spec.kind == "fog":
        return _fog(img, spec.strength)
    if spec.kind == "rain":
        return _rain(img, spec.strength, spec.seed)
    return _snow(img, spec.strength, spec.seed)


def _count(strength, density, h, w):
    # half-up rounding keeps the count monotone in strength
    return int(np.floor(strength * density * h * w + 0.5))


def _fog(img, a):
    return (1.0 - a) * img + a * FOG_COLOR


def _splat(layer, ys, xs, weights):
    """Bilinear accumulation of point weights into ``layer`` (anti-aliasing)."""
    h, w = layer.shape
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    fy = ys - y0
    fx = xs - x0
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            yy = y0 + dy
            xx = x0 + dx
            ok = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            np.add.at(layer, (yy[ok], xx[ok]), (weights * wy * wx)[ok])


def _rain(img, strength, seed):
    h, w = img.shape[:2]
    n_max = _count(1.0, RAIN_DENSITY, h, w)
    g = rng(seed)
    y0 = g.uniform(0, h, n_max)
    x0 = g.uniform(0, w, n_max)
    length = g.uniform(8.0, 20.0, n_max)
    angle = np.deg2rad(g.uniform(70.0, 110.0, n_max))
    brightness = g.uniform(0.4, 0.7, n_max)

    n = _count(strength, RAIN_DENSITY, h, w)
    layer = np.zeros((h, w))
    ys, xs, ws = [], [], []
    step = 0.5
    for i in range(n):
        t = np.arange(0.0, length[i], step)
        xs.append(x0[i] + t * np.cos(angle[i]))
        ys.append(y0[i] + t * np.sin(angle[i]))
        ws.append(np.full(t.shape, brightness[i] * step))
    if n:
        _splat(layer, np.concatenate(ys), np.concatenate(xs), np.concatenate(ws))
    layer = np.minimum(layer, 1.0)
    return np.minimum(img + layer[..., None], 1.0)


def _snow(img, strength, seed):
    h, w = img.shape[:2]
    n_max = _count(1.0, SNOW_DENSITY, h, w)
    g = rng(seed)
    cy = g.uniform(0, h, n_max)
    cx = g.uniform(0, w, n_max)
    radius = g.uniform(1.0, 3.0, n_max)
    shade = g.uniform(0.9, 1.0, n_max)

    n = _count(strength, SNOW_DENSITY, h, w)
    lifted = np.minimum(img + SNOW_LIFT * strength, 1.0)
    if n == 0:
        return lifted

    off = np.arange(-4, 5)
    oy, ox = np.meshgrid(off, off, indexing="ij")
    py = np.floor(cy[:n, None]).astype(np.int64) + oy.ravel()[None]
    px = np.floor(cx[:n, None]).astype(np.int64) + ox.ravel()[None]
    d = np.hypot(py + 0.5 - cy[:n, None], px + 0.5 - cx[:n, None])
    # soft disc edge, one pixel wide
    a = np.clip(radius[:n, None] + 0.5 - d, 0.0, 1.0)
    ok = (py >= 0) & (py < h) & (px >= 0) & (px < w) & (a > 0)

    alpha = np.zeros((h, w))
    tint = np.zeros((h, w))
    np.add.at(alpha, (py[ok], px[ok]), a[ok])
    np.add.at(tint, (py[ok], px[ok]), (a * shade[:n, None])[ok])
    covered = alpha > 0
    color = np.where(covered, tint / np.where(covered, alpha, 1.0), 0.0)
    alpha = np.minimum(alpha, 1.0)[..., None]
    return lifted * (1.0 - alpha) + color[..., None] * alpha
