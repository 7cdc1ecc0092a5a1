"""Binary IoU / Dice scoring, aggregation and model-comparison reports."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import EmptyReportError, InvalidInputError, write_text_if_changed

BOTH_EMPTY = "both_empty"
CSV_FIELDS = ["item_id", "class", "iou", "dice", "flag"]


def pixel_counts(pred, gt):
    """``(tp, fp, fn)`` integer pixel counts of two binary masks."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise InvalidInputError(f"pred shape {pred.shape} does not match gt {gt.shape}")
    p = pred.astype(bool)
    g = gt.astype(bool)
    tp = int(np.count_nonzero(p & g))
    return tp, int(np.count_nonzero(p)) - tp, int(np.count_nonzero(g)) - tp


def binary_iou_dice(pred, gt, epsilon=0.0):
    """IoU and Dice from integer counts, each smoothed by ``epsilon``.

    A pair with an empty union scores ``(1.0, 1.0)``.
    """
    tp, fp, fn = pixel_counts(pred, gt)
    union = tp + fp + fn
    if union == 0:
        return 1.0, 1.0
    iou = (tp + epsilon) / (union + epsilon)
    dice = (2 * tp + epsilon) / (2 * tp + fp + fn + epsilon)
    return iou, dice


@dataclass
class PairScore:
    item_id: str
    class_name: str
    iou: float
    dice: float
    flag: str = ""


def score_pair(item_id, class_name, pred, gt, epsilon=0.0) -> PairScore:
    iou, dice = binary_iou_dice(pred, gt, epsilon)
    empty = not (np.any(pred) or np.any(gt))
    return PairScore(item_id, class_name, iou, dice, BOTH_EMPTY if empty else "")


def write_scores_csv(path, scores):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for s in scores:
        w.writerow([s.item_id, s.class_name, repr(float(s.iou)), repr(float(s.dice)), s.flag])
    write_text_if_changed(path, buf.getvalue())


def read_scores_csv(path) -> list[PairScore]:
    with open(path, newline="") as fh:
        return [
            PairScore(r["item_id"], r["class"], float(r["iou"]), float(r["dice"]), r["flag"])
            for r in csv.DictReader(fh)
        ]


@dataclass
class ClassMean:
    iou: float
    dice: float
    count: int


@dataclass
class Summary:
    """Per-class and overall unweighted means of pair scores."""

    per_class: dict
    overall_iou: float
    overall_dice: float
    count: int
    flagged: int = 0

    def to_dict(self):
        return {
            "per_class": {k: asdict(v) for k, v in self.per_class.items()},
            "overall": {"iou": self.overall_iou, "dice": self.overall_dice, "count": self.count},
            "flagged": self.flagged,
        }

    @classmethod
    def from_dict(cls, d) -> "Summary":
        per_class = {k: ClassMean(float(v["iou"]), float(v["dice"]), int(v.get("count", 1)))
                     for k, v in d["per_class"].items()}
        o = d["overall"]
        return cls(per_class, float(o["iou"]), float(o["dice"]), int(o.get("count", 0)), int(d.get("flagged", 0)))

    @classmethod
    def from_table(cls, table) -> "Summary":
        """Build from ``{class: (iou, dice)}`` already-averaged values."""
        per_class = {k: ClassMean(float(i), float(d), 1) for k, (i, d) in table.items()}
        ious = [c.iou for c in per_class.values()]
        dices = [c.dice for c in per_class.values()]
        return cls(per_class, float(np.mean(ious)), float(np.mean(dices)), len(per_class))

    def save(self, path):
        write_text_if_changed(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Summary":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def aggregate(scores, include_flagged=False) -> Summary:
    """Unweighted means per class and over all scores.

    Both-empty pairs are counted in ``flagged`` but left out of the means
    unless ``include_flagged`` is set.
    """
    scores = list(scores)
    flagged = sum(1 for s in scores if s.flag == BOTH_EMPTY)
    used = scores if include_flagged else [s for s in scores if s.flag != BOTH_EMPTY]
    if not used:
        raise EmptyReportError("no scores to aggregate")
    by_class = defaultdict(list)
    for s in used:
        by_class[s.class_name].append(s)
    per_class = {
        name: ClassMean(
            float(np.mean([s.iou for s in group])),
            float(np.mean([s.dice for s in group])),
            len(group),
        )
        for name, group in sorted(by_class.items())
    }
    return Summary(
        per_class,
        float(np.mean([s.iou for s in used])),
        float(np.mean([s.dice for s in used])),
        len(used),
        flagged,
    )


def percent_change(a: float, b: float) -> float:
    """``100 (a / b - 1)``; NaN when the baseline ``b`` is not positive."""
    if not b > 0:
        return math.nan
    return 100.0 * (a / b - 1.0)


@dataclass
class ComparisonReport:
    per_class: dict = field(default_factory=dict)
    mean_change_iou: float = math.nan
    mean_change_dice: float = math.nan

    def to_dict(self):
        def clean(x):
            return None if isinstance(x, float) and math.isnan(x) else x

        return {
            "per_class": {k: {kk: clean(vv) for kk, vv in v.items()} for k, v in self.per_class.items()},
            "mean_change_iou": clean(self.mean_change_iou),
            "mean_change_dice": clean(self.mean_change_dice),
        }

    def save(self, path):
        write_text_if_changed(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def compare(a: Summary, b: Summary) -> ComparisonReport:
    """Percent change of model ``a`` over baseline ``b`` per class.

    The overall figures are unweighted means of the per-class changes,
    skipping classes whose baseline is zero.
    """
    if set(a.per_class) != set(b.per_class):
        raise InvalidInputError(
            f"class sets differ: {sorted(set(a.per_class) ^ set(b.per_class))}"
        )
    rows = {}
    for name in sorted(a.per_class):
        ca, cb = a.per_class[name], b.per_class[name]
        rows[name] = {
            "iou_a": ca.iou,
            "iou_b": cb.iou,
            "iou_change": percent_change(ca.iou, cb.iou),
            "dice_a": ca.dice,
            "dice_b": cb.dice,
            "dice_change": percent_change(ca.dice, cb.dice),
        }

    def mean_of(key):
        vals = [r[key] for r in rows.values() if not math.isnan(r[key])]
        return float(np.mean(vals)) if vals else math.nan

    return ComparisonReport(rows, mean_of("iou_change"), mean_of("dice_change"))
