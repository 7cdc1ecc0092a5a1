"""Shared array conventions, errors, seeding and PNG persistence.

Array conventions used throughout the package:

* ``RasterImage``: float64 array ``(H, W, 3)`` with values in [0, 1].
* ``LabelRaster``: uint8 array ``(H, W, 3)`` of palette colours.
* ``BinaryMask``: uint8 array ``(H, W)`` with values in {0, 1}.
* ``LogitStack`` / ``ProbabilityStack``: float64 array ``(n, H, W)``.
* ``UncertaintyMap``: float64 array ``(H, W)``, non-negative.
* ``DisplacementField``: float64 array ``(H, W, 2)`` holding ``(dx, dy)``.
"""
from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.special import expit

U64_MASK = (1 << 64) - 1


class InvalidInputError(ValueError):
    """Array shapes, dtypes or values violate an operation's contract."""


class InvalidParameterError(ValueError):
    """A scalar parameter lies outside its admissible range."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


class EmptyReportError(ValueError):
    """Aggregation was requested over no scores."""


def sigmoid_reduce(logits):
    """Map an ``(n, H, W)`` logit stack to probabilities, elementwise."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise InvalidInputError("logits must be finite")
    return expit(logits)


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int

    def derive(self, item_id: str) -> int:
        return derive_seed(self.master_seed, item_id)


def derive_seed(master_seed, item_id: str) -> int:
    """Per-item 64-bit seed from BLAKE2b over ``(master_seed, utf-8 item id)``.

    Pure and platform independent; the master seed is packed little-endian.
    """
    if isinstance(master_seed, SeedSpec):
        master_seed = master_seed.master_seed
    h = hashlib.blake2b(digest_size=8, person=b"uaseg-seed")
    h.update(struct.pack("<Q", int(master_seed) & U64_MASK))
    h.update(item_id.encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & U64_MASK))


def check_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise InvalidInputError(f"expected an (H, W, 3) image, got shape {img.shape}")
    if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
        raise InvalidInputError("image values must lie in [0, 1]")
    return img


def check_stack(arr, name="stack") -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise InvalidInputError(f"{name} must be (n, H, W), got shape {arr.shape}")
    return arr


# -- PNG persistence ---------------------------------------------------------

def to_uint8(img) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def encode_png(arr: np.ndarray) -> bytes:
    """Deterministic PNG bytes for a uint8 ``(H, W)`` or ``(H, W, 3)`` array."""
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(arr)).save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def write_if_changed(path, data: bytes) -> bool:
    """Write ``data`` unless ``path`` already holds identical bytes."""
    path = Path(path)
    if path.exists() and path.read_bytes() == data:
        return False
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return True


def write_text_if_changed(path, text: str) -> bool:
    return write_if_changed(path, text.encode("utf-8"))


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def save_image(path, img) -> bool:
    return write_if_changed(path, encode_png(to_uint8(img)))


def load_labels(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def save_labels(path, labels) -> bool:
    return write_if_changed(path, encode_png(np.asarray(labels, dtype=np.uint8)))


def load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        return (np.asarray(im.convert("L")) >= 128).astype(np.uint8)


def save_mask(path, mask) -> bool:
    return write_if_changed(path, encode_png((np.asarray(mask) > 0).astype(np.uint8) * 255))


def load_gray(path) -> np.ndarray:
    """Grayscale PNG as float64 in [0, 1]."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
