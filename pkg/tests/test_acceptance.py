"""Acceptance criteria, one check per criterion.

Run with ``pytest -s tests/test_acceptance.py`` (or ``python tests/test_acceptance.py``)
to see one PASS/FAIL line per criterion.
"""
import hashlib
import itertools
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import central_difference, max_relative_error, pixel_count_scores  # noqa: E402
from uaseg.cli import main as cli_main  # noqa: E402
from uaseg.core import sigmoid_reduce  # noqa: E402
from uaseg.elastic import DeformSpec, make_field, warp_image, warp_labels  # noqa: E402
from uaseg.losses import LossConfig, bce, combined_loss, dice_loss, mc_uncertainty, soft_iou  # noqa: E402
from uaseg.metrics import Summary, binary_iou_dice, compare, pixel_counts  # noqa: E402
from uaseg.synthetic import disc_task, write_corpus  # noqa: E402
from uaseg.toy import ToyHead, TrainConfig, evaluate_soft_iou, train  # noqa: E402
from uaseg.weather import WeatherSpec, apply_weather  # noqa: E402


def ac1_report_arithmetic():
    """Percent gains for known per-class means."""
    a = Summary.from_table({"car": (0.156, 0.333)})
    b = Summary.from_table({"car": (0.087, 0.142)})
    car = compare(a, b).per_class["car"]
    ua = compare(Summary.from_table({"all": (0.4598, 0.6258)}), Summary.from_table({"all": (0.3221, 0.4809)}))
    ua = ua.per_class["all"]
    checks = {
        "car iou +79.3": abs(car["iou_change"] - 79.3) <= 0.5,
        "car iou near 79.13": abs(car["iou_change"] - 79.13) <= 0.5,
        "car iou formula": car["iou_change"] == 100 * (0.156 / 0.087 - 1),
        "car dice +134.51": abs(car["dice_change"] - 134.51) <= 0.5,
        "overall dice ~30": abs(ua["dice_change"] - 30.1) <= 0.5,
        "overall iou ~42.7": abs(ua["iou_change"] - 42.75) <= 0.5,
    }
    detail = (f"car iou {car['iou_change']:+.2f}% dice {car['dice_change']:+.2f}%, "
              f"overall iou {ua['iou_change']:+.2f}% dice {ua['dice_change']:+.2f}%")
    return all(checks.values()), detail, 1.0


def ac2_gradient_suite():
    """Analytic vs central differences on random instances up to 3x8x8."""
    g = np.random.default_rng(2024)
    worst = 0.0
    count = 0
    for _ in range(120):
        n, h, w = int(g.integers(1, 4)), int(g.integers(1, 9)), int(g.integers(1, 9))
        logits = g.normal(0, 2, (n, h, w))
        target = (g.random((n, h, w)) < 0.5).astype(float)
        u = g.uniform(0, 0.5, (h, w))
        cfg = LossConfig(alpha=float(g.uniform()), beta=float(g.uniform(0, 0.5)), epsilon=1e-3)
        probs = sigmoid_reduce(logits)
        pairs = [
            (bce(logits, target)[1], central_difference(lambda x: bce(x, target)[0], logits)),
            (soft_iou(probs, target, cfg.epsilon)[1],
             central_difference(lambda p: soft_iou(p, target, cfg.epsilon)[0], probs)),
            (dice_loss(probs, target, cfg.epsilon)[1],
             central_difference(lambda p: dice_loss(p, target, cfg.epsilon)[0], probs)),
            (combined_loss(logits, target, u, cfg)[1],
             central_difference(lambda x: combined_loss(x, target, u, cfg)[0].total, logits)),
        ]
        for analytic, numeric in pairs:
            worst = max(worst, max_relative_error(analytic, numeric))
        count += 1
    return worst < 1e-5, f"{count} instances x 4 losses, max relative error {worst:.2e}", 30.0


def ac3_metric_oracle():
    """All 2^16 (pred, gt) pairs of 4x2 masks against the pixel-count oracle."""
    masks = [np.array(bits, dtype=bool).reshape(4, 2) for bits in itertools.product([0, 1], repeat=8)]
    worst = 0.0
    count_mismatch = 0
    pairs = 0
    for gt in masks:
        for pred in masks:
            counts, iou, dice = pixel_count_scores(pred, gt)
            if pixel_counts(pred, gt) != counts:
                count_mismatch += 1
            got = binary_iou_dice(pred, gt)
            worst = max(worst, abs(got[0] - iou), abs(got[1] - dice))
            pairs += 1
    ok = pairs == 2**16 and count_mismatch == 0 and worst <= 1e-12
    return ok, f"{pairs} pairs, {count_mismatch} count mismatches, max ratio error {worst:.1e}", 60.0


def ac4_dice_iou_identity():
    g = np.random.default_rng(4)
    worst = 0.0
    done = 0
    while done < 1000:
        shape = tuple(int(s) for s in g.integers(1, 12, 2))
        pred = g.random(shape) < g.uniform()
        gt = g.random(shape) < g.uniform()
        if not (pred | gt).any():
            continue
        iou, dice = binary_iou_dice(pred, gt)
        worst = max(worst, abs(dice - 2 * iou / (1 + iou)))
        done += 1
    return worst <= 1e-9, f"1000 pairs, max deviation {worst:.1e}", None


def ac5_elastic_laws():
    g = np.random.default_rng(5)
    colors = g.integers(0, 256, (6, 3)).astype(np.uint8)
    labels = colors[g.integers(0, 6, (64, 64))]
    zero = make_field(64, 64, DeformSpec(0.0, 4.0, 1))
    identity = warp_labels(labels, zero).tobytes() == labels.tobytes()
    img = g.random((64, 64, 3))
    identity &= warp_image(img, zero).tobytes() == img.tobytes()

    peak_err = 0.0
    for k, (alpha, sigma) in enumerate([(20.0, 15.0), (25.0, 4.0), (30.0, 7.0), (5.0, 1.0)]):
        f = make_field(128, 128, DeformSpec(alpha, sigma, k))
        peak_err = max(peak_err, abs(np.abs(f[..., 0]).max() - alpha), abs(np.abs(f[..., 1]).max() - alpha))

    closed = 0
    for k in range(100):
        h, w = (int(s) for s in g.integers(8, 48, 2))
        lab = colors[g.integers(0, int(g.integers(1, 7)), (h, w))]
        f = make_field(h, w, DeformSpec(float(g.uniform(0, 30)), float(g.uniform(0.5, 15)), k))
        out = warp_labels(lab, f)
        closed += set(map(tuple, out.reshape(-1, 3))) <= set(map(tuple, lab.reshape(-1, 3)))
    ok = identity and peak_err <= 1e-9 and closed == 100
    return ok, f"identity {identity}, peak error {peak_err:.1e}, palette closure {closed}/100", None


def ac6_weather_laws():
    g = np.random.default_rng(6)
    img = np.clip(g.random((64, 64, 3)) * 0.9, 0, 1)
    strengths = [0.0, 0.25, 0.5, 0.75, 1.0]
    identity = all(apply_weather(img, WeatherSpec(k, 0.0, 3)).tobytes() == img.tobytes() for k in ("fog", "rain", "snow"))
    devs = [np.abs(apply_weather(img, WeatherSpec("fog", s)) - img) for s in strengths]
    fog_ok = all(np.all(b >= a) for a, b in zip(devs, devs[1:]))
    counts = {}
    for kind in ("rain", "snow"):
        counts[kind] = [int(np.count_nonzero(np.any(apply_weather(img, WeatherSpec(kind, s, 17)) != img, axis=-1)))
                        for s in strengths]
    mono = all(c == sorted(c) for c in counts.values())
    return identity and fog_ok and mono, f"identity {identity}, fog monotone {fog_ok}, counts {counts}", None


def ac7_mc_uncertainty():
    g = np.random.default_rng(7)
    base = g.random((3, 5, 6))
    zero = np.all(mc_uncertainty([base] * 10) == 0)
    half = [np.zeros((2, 5, 6))] * 5 + [np.ones((2, 5, 6))] * 5
    half_ok = np.all(mc_uncertainty(half) == 0.5)
    samples = [g.random((3, 5, 6)) for _ in range(10)]
    ref = mc_uncertainty(samples).tobytes()
    perm_ok = all(mc_uncertainty([samples[i] for i in g.permutation(10)]).tobytes() == ref for _ in range(20))
    return bool(zero and half_ok and perm_ok), f"zero {zero}, half {half_ok}, permutation {perm_ok}", None


def ac8_toy_training():
    data = disc_task(4, 32, seed=0)
    cfg = TrainConfig(steps=200, seed=0)
    head, trace = train(ToyHead.init(1, seed=0, noise_rate=0.2), data, cfg)
    iou = evaluate_soft_iou(head, data)
    totals = [b.total for _, b in trace]
    descent = np.mean(totals[-10:]) <= np.mean(totals[:10])

    plain_cfg = TrainConfig(steps=200, seed=0, loss=LossConfig(beta=0.0))
    quiet = ToyHead.init(1, seed=0, noise_rate=0.0)
    h_w, t_w = train(quiet, data, plain_cfg, weighted=True)
    h_p, t_p = train(quiet, data, plain_cfg, weighted=False)
    bitwise = t_w == t_p and h_w.flat().tobytes() == h_p.flat().tobytes()
    ok = iou > 0.9 and descent and bitwise
    detail = (f"soft IoU {iou:.4f}, first-10 {np.mean(totals[:10]):.4f} last-10 {np.mean(totals[-10:]):.4f}, "
              f"plain-C bit match {bitwise}")
    return ok, detail, 120.0


def _digest(root):
    root = Path(root)
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def ac9_pipeline_determinism():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        images, labels = write_corpus(tmp / "corpus", n=20, seed=99)
        digests = []
        codes = []
        for run, jobs in enumerate([1, 1, 2, 3]):
            out = tmp / f"run{run}"
            codes.append(cli_main(["pipeline", "--input", str(images), "--labels", str(labels),
                                   "--output", str(out), "--seed", "7", "--jobs", str(jobs),
                                   "--min-area", "16", "--pad", "4"]))
            digests.append(_digest(out))
        same = all(d == digests[0] for d in digests)
        ok = codes == [0, 0, 0, 0] and same and len(digests[0]) > 100
    return ok, f"exit codes {codes}, {len(digests[0])} files, identical across runs/jobs {same}", None


CRITERIA = [
    ("AC1 report arithmetic", ac1_report_arithmetic),
    ("AC2 gradient suite", ac2_gradient_suite),
    ("AC3 metric oracle", ac3_metric_oracle),
    ("AC4 dice-iou identity", ac4_dice_iou_identity),
    ("AC5 elastic-deform laws", ac5_elastic_laws),
    ("AC6 weather laws", ac6_weather_laws),
    ("AC7 MC uncertainty", ac7_mc_uncertainty),
    ("AC8 toy training", ac8_toy_training),
    ("AC9 pipeline determinism", ac9_pipeline_determinism),
]


def run_criterion(name, check):
    start = time.perf_counter()
    ok, detail, budget = check()
    elapsed = time.perf_counter() - start
    if budget is not None and elapsed > budget:
        ok = False
        detail += f" (over {budget:.0f}s budget)"
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail} [{elapsed:.2f}s]")
    return ok, detail


@pytest.mark.parametrize("name,check", CRITERIA, ids=[c[0].split()[0] for c in CRITERIA])
def test_criterion(name, check):
    ok, detail = run_criterion(name, check)
    assert ok, detail


if __name__ == "__main__":
    results = [run_criterion(name, check)[0] for name, check in CRITERIA]
    sys.exit(0 if all(results) else 1)
