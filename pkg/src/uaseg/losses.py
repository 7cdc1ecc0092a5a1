"""Segmentation losses with analytic gradients.

All losses take ``(n, H, W)`` stacks. ``bce`` and the combined objectives
differentiate with respect to logits; ``soft_iou``, ``iou_loss`` and
``dice_loss`` differentiate with respect to probabilities.

The uncertainty-weighted objective is

    C[i, j] = alpha * mean_k BCE[k, i, j] + (1 - alpha) * (1 - IoU)
    W       = C * exp(-U)
    total   = mean(W) + beta * mean(U)

where the IoU term is the global soft IoU broadcast to every pixel and
``U`` is held constant under differentiation.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .core import InvalidInputError, InvalidParameterError, NumericError, check_stack, sigmoid_reduce


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.5
    beta: float = 0.1
    epsilon: float = 1e-6
    mc_samples: int = 10

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.beta >= 0.0:
            raise InvalidParameterError(f"beta must be >= 0, got {self.beta}")
        if not self.epsilon > 0.0:
            raise InvalidParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if int(self.mc_samples) != self.mc_samples or self.mc_samples < 2:
            raise InvalidParameterError(f"mc_samples must be an integer >= 2, got {self.mc_samples}")

    @classmethod
    def from_dict(cls, d) -> "LossConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidParameterError(f"unknown loss config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "LossConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LossBreakdown:
    bce: float
    iou_loss: float
    c: float
    w_mean: float
    r: float
    total: float

    def as_row(self):
        return [self.bce, self.iou_loss, self.c, self.w_mean, self.r, self.total]


def _pair(pred, target, name="pred"):
    pred = check_stack(pred, name)
    target = check_stack(target, "target")
    if pred.shape != target.shape:
        raise InvalidInputError(f"{name} shape {pred.shape} does not match target {target.shape}")
    return pred, target


def bce_elementwise(logits, target):
    """Stable ``-[y log s(x) + (1-y) log(1-s(x))]`` per element."""
    x = logits
    return np.maximum(x, 0.0) - x * target + np.log1p(np.exp(-np.abs(x)))


def bce(logits, target):
    """Mean binary cross-entropy on logits and its gradient ``(s(x) - y) / N``."""
    logits, target = _pair(logits, target, "logits")
    if not np.all(np.isfinite(logits)):
        raise InvalidInputError("logits must be finite")
    value = float(bce_elementwise(logits, target).mean())
    grad = (sigmoid_reduce(logits) - target) / logits.size
    return value, grad


def soft_iou(probs, target, epsilon=1e-6):
    """Global soft IoU ``(sum(p y) + eps) / (sum p + sum y - sum(p y) + eps)``.

    Returns the IoU and its gradient with respect to ``probs``.
    """
    probs, target = _pair(probs, target, "probs")
    inter = float((probs * target).sum()) + epsilon
    union = float(probs.sum() + target.sum() - (probs * target).sum()) + epsilon
    value = inter / union
    # d inter/dp = y, d union/dp = 1 - y
    grad = (target * union - inter * (1.0 - target)) / union**2
    return value, grad


def iou_loss(probs, target, epsilon=1e-6):
    value, grad = soft_iou(probs, target, epsilon)
    return 1.0 - value, -grad


def dice_loss(probs, target, epsilon=1e-6):
    """``1 - (2 sum(p y) + eps) / (sum p + sum y + eps)`` and its gradient w.r.t. ``probs``."""
    probs, target = _pair(probs, target, "probs")
    num = 2.0 * float((probs * target).sum()) + epsilon
    den = float(probs.sum() + target.sum()) + epsilon
    value = 1.0 - num / den
    grad = -(2.0 * target * den - num) / den**2
    return value, grad


def mc_uncertainty(samples) -> np.ndarray:
    """Per-pixel population std across Monte-Carlo probability samples.

    ``samples`` is a sequence of ``(n, H, W)`` (or ``(H, W)``) stacks. The std
    is taken per mask channel and averaged over channels. Samples are sorted
    along the sample axis first, which makes the result bit-identical under
    any reordering, and pixels where all samples agree are exactly zero.
    """
    if len(samples) < 2:
        raise InvalidInputError("need at least two Monte-Carlo samples")
    stacks = [check_stack(s, "sample") for s in samples]
    shape = stacks[0].shape
    if any(s.shape != shape for s in stacks):
        raise InvalidInputError("Monte-Carlo samples differ in shape")
    arr = np.sort(np.stack(stacks), axis=0)
    std = arr.std(axis=0)
    std[arr[0] == arr[-1]] = 0.0
    return std.mean(axis=0)


def _combined_inputs(logits, target, uncertainty):
    logits, target = _pair(logits, target, "logits")
    u = np.asarray(uncertainty, dtype=np.float64)
    if u.shape != logits.shape[1:]:
        raise InvalidInputError(f"uncertainty shape {u.shape} does not match {logits.shape[1:]}")
    if not (np.all(np.isfinite(logits)) and np.all(np.isfinite(u))):
        raise NumericError("non-finite logits or uncertainty")
    return logits, target, u


def combined_loss(logits, target, uncertainty, cfg: LossConfig = LossConfig()):
    """Uncertainty-weighted BCE/IoU objective.

    Returns ``(LossBreakdown, grad)`` with ``grad`` taken w.r.t. ``logits``.
    """
    logits, target, u = _combined_inputs(logits, target, uncertainty)
    n = logits.shape[0]
    hw = u.size
    a = cfg.alpha

    probs = sigmoid_reduce(logits)
    elem = bce_elementwise(logits, target)
    iou, d_iou = soft_iou(probs, target, cfg.epsilon)
    il = 1.0 - iou

    c_pix = a * elem.mean(axis=0) + (1.0 - a) * il
    weight = np.exp(-u)
    w = c_pix * weight
    w_mean = float(w.mean())
    r = cfg.beta * float(u.mean())
    total = w_mean + r
    if not np.isfinite(total):
        raise NumericError("combined loss is not finite")

    grad_bce = a * (probs - target) / n * weight[None] / hw
    grad_iou = (1.0 - a) * float(weight.mean()) * (-d_iou * probs * (1.0 - probs))
    grad = grad_bce + grad_iou

    out = LossBreakdown(
        bce=float(elem.mean()),
        iou_loss=il,
        c=a * float(elem.mean()) + (1.0 - a) * il,
        w_mean=w_mean,
        r=r,
        total=total,
    )
    return out, grad


def plain_loss(logits, target, cfg: LossConfig = LossConfig()):
    """The unweighted per-pixel mix ``mean(C)``, with no uncertainty terms.

    Shares the elementwise formulation of :func:`combined_loss`, so with
    ``U = 0`` and ``beta = 0`` the two agree bit for bit.
    """
    logits, target = _pair(logits, target, "logits")
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits")
    n = logits.shape[0]
    hw = logits.shape[1] * logits.shape[2]
    a = cfg.alpha

    probs = sigmoid_reduce(logits)
    elem = bce_elementwise(logits, target)
    iou, d_iou = soft_iou(probs, target, cfg.epsilon)
    il = 1.0 - iou

    c_pix = a * elem.mean(axis=0) + (1.0 - a) * il
    total = float(c_pix.mean())
    if not np.isfinite(total):
        raise NumericError("loss is not finite")

    grad = a * (probs - target) / n / hw + (1.0 - a) * (-d_iou * probs * (1.0 - probs))
    out = LossBreakdown(
        bce=float(elem.mean()),
        iou_loss=il,
        c=a * float(elem.mean()) + (1.0 - a) * il,
        w_mean=total,
        r=0.0,
        total=total,
    )
    return out, grad
