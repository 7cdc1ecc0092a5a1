"""A tiny numpy segmentation head trained on the uncertainty-weighted loss.

Architecture: inputs shifted to [-0.5, 0.5], 3x3 convolution (3 -> 8
channels, zero padding), tanh, 1x1 convolution (8 -> n logits).
Stochastic passes apply inverted dropout to the hidden activations; those
passes only feed the Monte-Carlo uncertainty map, while the gradient step
uses the deterministic pass. Dropout masks are redrawn every step.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import InvalidInputError, InvalidParameterError, NumericError, check_image, derive_seed, rng, sigmoid_reduce
from .losses import LossBreakdown, LossConfig, combined_loss, mc_uncertainty, plain_loss, soft_iou

log = logging.getLogger(__name__)

HIDDEN = 8
PARAM_ORDER = ("w1", "b1", "w2", "b2")
TRACE_FIELDS = ["step", "bce", "iou_loss", "c", "w_mean", "r", "total"]


@dataclass
class ToyHead:
    params: dict
    noise_rate: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.noise_rate < 1.0:
            raise InvalidParameterError(f"noise_rate must lie in [0, 1), got {self.noise_rate}")

    @classmethod
    def init(cls, n_masks=1, seed=0, noise_rate=0.2) -> "ToyHead":
        g = rng(seed)
        params = {
            "w1": g.normal(0.0, 1.0 / np.sqrt(27.0), (HIDDEN, 3, 3, 3)),
            "b1": np.zeros(HIDDEN),
            "w2": g.normal(0.0, 1.0 / np.sqrt(HIDDEN), (n_masks, HIDDEN)),
            "b2": np.zeros(n_masks),
        }
        return cls(params, noise_rate)

    @property
    def n_masks(self) -> int:
        return self.params["w2"].shape[0]

    def copy(self) -> "ToyHead":
        return ToyHead({k: v.copy() for k, v in self.params.items()}, self.noise_rate)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in PARAM_ORDER])

    def with_flat(self, vec) -> "ToyHead":
        params, pos = {}, 0
        for k in PARAM_ORDER:
            shape = self.params[k].shape
            size = int(np.prod(shape))
            params[k] = np.asarray(vec[pos:pos + size], dtype=np.float64).reshape(shape)
            pos += size
        return ToyHead(params, self.noise_rate)

    def save(self, out_dir):
        """Write ``params.bin`` (little-endian float64) and ``params.json`` (shape manifest)."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "params.bin").write_bytes(self.flat().astype("<f8").tobytes())
        manifest = {
            "dtype": "float64",
            "byte_order": "little",
            "order": list(PARAM_ORDER),
            "shapes": {k: list(self.params[k].shape) for k in PARAM_ORDER},
            "noise_rate": self.noise_rate,
        }
        (out_dir / "params.json").write_text(json.dumps(manifest, indent=2) + "\n")

    @classmethod
    def load(cls, out_dir) -> "ToyHead":
        out_dir = Path(out_dir)
        manifest = json.loads((out_dir / "params.json").read_text())
        vec = np.frombuffer((out_dir / "params.bin").read_bytes(), dtype="<f8")
        params, pos = {}, 0
        for k in manifest["order"]:
            shape = tuple(manifest["shapes"][k])
            size = int(np.prod(shape))
            params[k] = vec[pos:pos + size].astype(np.float64).reshape(shape)
            pos += size
        return cls(params, manifest["noise_rate"])


def _patches(img):
    """``(H*W, 27)`` im2col matrix of zero-padded 3x3 neighbourhoods, ordered (c, kh, kw)."""
    h, w, _ = img.shape
    padded = np.pad(img, ((1, 1), (1, 1), (0, 0)))
    cols = [padded[dy:dy + h, dx:dx + w, c] for c in range(3) for dy in range(3) for dx in range(3)]
    return np.stack(cols, axis=-1).reshape(h * w, 27)


def _forward(head, img, keep=None):
    p = head.params
    x = _patches(img - 0.5)
    hidden = np.tanh(x @ p["w1"].reshape(HIDDEN, 27).T + p["b1"])
    act = hidden if keep is None else hidden * keep / (1.0 - head.noise_rate)
    out = act @ p["w2"].T + p["b2"]
    h, w, _ = img.shape
    logits = out.reshape(h, w, -1).transpose(2, 0, 1)
    return logits, (x, hidden, act)


def forward(head: ToyHead, img, stochastic=False, seed=0) -> np.ndarray:
    """``(n, H, W)`` logits; with ``stochastic`` the hidden units are dropped at ``noise_rate``."""
    img = check_image(img)
    keep = None
    if stochastic:
        h, w, _ = img.shape
        keep = (rng(seed).random((h * w, HIDDEN)) >= head.noise_rate).astype(np.float64)
    return _forward(head, img, keep)[0]


def backward(head: ToyHead, img, grad_logits) -> dict:
    """Parameter gradients of a deterministic forward given ``dL/dlogits``."""
    img = check_image(img)
    p = head.params
    x, hidden, act = _forward(head, img)[1]
    g = np.asarray(grad_logits).transpose(1, 2, 0).reshape(-1, head.n_masks)
    d_hidden = (g @ p["w2"]) * (1.0 - hidden**2)
    return {
        "w1": (d_hidden.T @ x).reshape(p["w1"].shape),
        "b1": d_hidden.sum(axis=0),
        "w2": g.T @ act,
        "b2": g.sum(axis=0),
    }


def mc_forward(head: ToyHead, img, k: int, seed: int) -> np.ndarray:
    """Uncertainty map from ``k`` seeded stochastic passes."""
    if k < 2:
        raise InvalidInputError("need at least two Monte-Carlo passes")
    samples = [sigmoid_reduce(forward(head, img, True, derive_seed(seed, f"pass{j}"))) for j in range(k)]
    return mc_uncertainty(samples)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 200
    learning_rate: float = 0.5
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = 0
    log_every: int = 50

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidParameterError("steps must be >= 1")
        if not self.learning_rate >= 0:
            raise InvalidParameterError("learning_rate must be >= 0")
        if self.log_every < 1:
            raise InvalidParameterError("log_every must be >= 1")


def _mean_breakdown(parts) -> LossBreakdown:
    return LossBreakdown(*np.mean([b.as_row() for b in parts], axis=0).tolist())


def objective(head, dataset, loss_cfg: LossConfig, uncertainties=None):
    """Dataset-mean loss and parameter gradients.

    With ``uncertainties`` (one map per item) the weighted objective is used;
    with ``None`` the plain BCE/IoU mix.
    """
    parts = []
    grads = {k: np.zeros_like(v) for k, v in head.params.items()}
    for i, (img, target) in enumerate(dataset):
        logits = forward(head, img)
        if uncertainties is None:
            br, g = plain_loss(logits, target, loss_cfg)
        else:
            br, g = combined_loss(logits, target, uncertainties[i], loss_cfg)
        parts.append(br)
        for k, v in backward(head, img, g).items():
            grads[k] += v
    m = len(dataset)
    return _mean_breakdown(parts), {k: v / m for k, v in grads.items()}


def _check_dataset(dataset, n_masks):
    if not dataset:
        raise InvalidInputError("dataset is empty")
    for img, target in dataset:
        target = np.asarray(target)
        if target.ndim == 2:
            target = target[None]
        if target.shape != (n_masks,) + np.asarray(img).shape[:2]:
            raise InvalidInputError(f"target shape {target.shape} inconsistent with image and head")


def train(head: ToyHead, dataset, cfg: TrainConfig = TrainConfig(), weighted=True):
    """Full-batch gradient descent on the (uncertainty-weighted) loss.

    Returns the trained copy of ``head`` and a trace of ``(step, LossBreakdown)``
    where the breakdown is measured before that step's update.
    ``weighted=False`` trains on the plain mix without Monte-Carlo passes.
    """
    _check_dataset(dataset, head.n_masks)
    dataset = [(np.asarray(img, dtype=np.float64), np.asarray(t, dtype=np.float64).reshape((head.n_masks,) + np.shape(img)[:2]))
               for img, t in dataset]
    head = head.copy()
    trace = []
    for step in range(cfg.steps):
        maps = None
        if weighted:
            maps = [
                mc_forward(head, img, cfg.loss.mc_samples, derive_seed(cfg.seed, f"step{step}/item{i}"))
                for i, (img, _) in enumerate(dataset)
            ]
        try:
            br, grads = objective(head, dataset, cfg.loss, maps)
        except (NumericError, InvalidInputError) as exc:
            raise NumericError(f"training diverged at step {step}: {exc}") from exc
        if not np.isfinite(br.total):
            raise NumericError(f"training diverged at step {step}: loss {br.total}")
        trace.append((step, br))
        if step % cfg.log_every == 0:
            log.info("step %d total %.6f bce %.6f iou_loss %.6f r %.6f", step, br.total, br.bce, br.iou_loss, br.r)
        with np.errstate(over="ignore", invalid="ignore"):
            for k in head.params:
                head.params[k] = head.params[k] - cfg.learning_rate * grads[k]
        if not all(np.all(np.isfinite(v)) for v in head.params.values()):
            raise NumericError(f"training diverged at step {step}: non-finite parameters after update")
    return head, trace


def evaluate_soft_iou(head: ToyHead, dataset, epsilon=1e-6) -> float:
    """Mean soft IoU of deterministic predictions over ``dataset``."""
    vals = [soft_iou(sigmoid_reduce(forward(head, img)), target, epsilon)[0] for img, target in dataset]
    return float(np.mean(vals))


def write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for step, br in trace:
            w.writerow([step] + [repr(float(v)) for v in br.as_row()])
