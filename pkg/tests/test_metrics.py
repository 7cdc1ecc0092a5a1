import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis.extra.numpy import arrays

from oracles import pixel_count_scores
from uaseg.core import EmptyReportError, InvalidInputError
from uaseg.metrics import (
    BOTH_EMPTY,
    PairScore,
    Summary,
    aggregate,
    binary_iou_dice,
    compare,
    percent_change,
    pixel_counts,
    read_scores_csv,
    score_pair,
    write_scores_csv,
)

masks = arrays(np.bool_, (4, 5))


def test_identical_nonempty():
    m = np.zeros((4, 4), dtype=np.uint8)
    m[1:3, 1:3] = 1
    assert binary_iou_dice(m, m) == (1.0, 1.0)


def test_disjoint_with_epsilon():
    p = np.zeros((4, 4), dtype=np.uint8)
    g = np.zeros((4, 4), dtype=np.uint8)
    p[0, :] = 1
    g[3, :] = 1
    iou, dice = binary_iou_dice(p, g, 1e-6)
    assert iou == pytest.approx(1e-6 / (8 + 1e-6), rel=1e-12)
    assert iou == pytest.approx(1.25e-7, rel=1e-6)
    assert dice == pytest.approx(1.25e-7, rel=1e-6)


def test_nested_masks():
    g = np.zeros((4, 4), dtype=np.uint8)
    g[0, :] = 1
    p = np.zeros((4, 4), dtype=np.uint8)
    p[0, :2] = 1
    iou, dice = binary_iou_dice(p, g)
    assert iou == 0.5
    assert dice == pytest.approx(2 / 3, abs=1e-15)


def test_both_empty_flagged():
    z = np.zeros((3, 3))
    s = score_pair("a", "car", z, z)
    assert (s.iou, s.dice, s.flag) == (1.0, 1.0, BOTH_EMPTY)
    assert binary_iou_dice(z, z, 1e-6) == (1.0, 1.0)


def test_shape_mismatch():
    with pytest.raises(InvalidInputError):
        binary_iou_dice(np.zeros((2, 2)), np.zeros((2, 3)))


@given(masks, masks)
def test_symmetry(p, g):
    assert binary_iou_dice(p, g) == binary_iou_dice(g, p)


@given(masks, masks)
def test_dropping_false_positive_never_hurts(p, g):
    fp = np.argwhere(p & ~g)
    if len(fp) == 0:
        return
    q = p.copy()
    q[tuple(fp[0])] = False
    assert binary_iou_dice(q, g)[0] >= binary_iou_dice(p, g)[0]


@given(masks, masks)
def test_matches_pixel_oracle(p, g):
    counts, iou, dice = pixel_count_scores(p, g)
    assert pixel_counts(p, g) == counts
    got = binary_iou_dice(p, g)
    assert abs(got[0] - iou) <= 1e-12 and abs(got[1] - dice) <= 1e-12


@given(masks, masks)
def test_dice_iou_identity(p, g):
    if not (p | g).any():
        return
    iou, dice = binary_iou_dice(p, g)
    assert abs(dice - 2 * iou / (1 + iou)) <= 1e-9


def test_aggregate_means():
    s = aggregate([PairScore("a", "car", 0.2, 0.3), PairScore("b", "car", 0.4, 0.5)])
    assert s.per_class["car"].iou == pytest.approx(0.3, abs=1e-15)
    assert s.overall_dice == pytest.approx(0.4, abs=1e-15)


def test_aggregate_single_echoes():
    s = aggregate([PairScore("x", "car", 0.4598, 0.6258)])
    assert (s.per_class["car"].iou, s.per_class["car"].dice) == (0.4598, 0.6258)
    assert (s.overall_iou, s.overall_dice) == (0.4598, 0.6258)


def test_aggregate_skips_both_empty():
    scores = [PairScore("a", "car", 0.5, 0.6), PairScore("a", "sky", 1.0, 1.0, BOTH_EMPTY)]
    s = aggregate(scores)
    assert set(s.per_class) == {"car"} and s.flagged == 1
    assert set(aggregate(scores, include_flagged=True).per_class) == {"car", "sky"}


def test_aggregate_empty():
    with pytest.raises(EmptyReportError):
        aggregate([])
    with pytest.raises(EmptyReportError):
        aggregate([PairScore("a", "car", 1.0, 1.0, BOTH_EMPTY)])


def test_compare_self_is_zero():
    s = Summary.from_table({"car": (0.3, 0.4), "truck": (0.2, 0.25)})
    r = compare(s, s)
    assert all(v["iou_change"] == 0 and v["dice_change"] == 0 for v in r.per_class.values())
    assert r.mean_change_iou == 0 and r.mean_change_dice == 0


def test_compare_class_mismatch():
    with pytest.raises(InvalidInputError):
        compare(Summary.from_table({"car": (0.3, 0.4)}), Summary.from_table({"bus": (0.3, 0.4)}))


def test_percent_change_zero_baseline():
    assert np.isnan(percent_change(0.2, 0.0))
    r = compare(Summary.from_table({"a": (0.2, 0.2), "b": (0.2, 0.3)}), Summary.from_table({"a": (0.0, 0.1), "b": (0.1, 0.3)}))
    assert r.mean_change_iou == pytest.approx(100.0)
    assert json.loads(json.dumps(r.to_dict()))["per_class"]["a"]["iou_change"] is None


def test_csv_and_json_round_trip(tmp_path):
    scores = [PairScore("a.png", "car", 0.1 + 0.2, 1 / 3), PairScore("b.png", "sky", 1.0, 1.0, BOTH_EMPTY)]
    write_scores_csv(tmp_path / "s.csv", scores)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "item_id,class,iou,dice,flag"
    assert read_scores_csv(tmp_path / "s.csv") == scores
    summary = aggregate(scores)
    summary.save(tmp_path / "s.json")
    assert Summary.load(tmp_path / "s.json") == summary


def test_exhaustive_small_grid():
    # every 2x2 pred against every 2x2 gt
    cells = [np.array(bits, dtype=bool).reshape(2, 2) for bits in itertools.product([0, 1], repeat=4)]
    for p in cells:
        for g in cells:
            counts, iou, dice = pixel_count_scores(p, g)
            assert pixel_counts(p, g) == counts
            assert binary_iou_dice(p, g) == pytest.approx((iou, dice), abs=1e-12)
