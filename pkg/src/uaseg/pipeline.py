"""Directory-level batch stages: corrupt, deform, split, crop, evaluate.

Every stage reads one tree and writes under another, derives per-file
seeds from the master seed and the file's relative path, and only rewrites
outputs whose bytes changed. Results therefore do not depend on ``jobs``
and a rerun over a finished tree touches nothing.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

from .core import (
    InvalidInputError,
    derive_seed,
    load_gray,
    load_image,
    load_labels,
    save_image,
    save_labels,
    save_mask,
    encode_png,
    to_uint8,
    write_if_changed,
    write_text_if_changed,
)
from .elastic import PRESETS, deform_labels
from .losses import LossConfig, mc_uncertainty
from .masks import Palette, extract_instances, split_by_color
from .metrics import aggregate, score_pair, write_scores_csv
from .weather import KINDS, WeatherSpec, apply_weather, sample_weather

log = logging.getLogger(__name__)

CROP_INDEX_FIELDS = ["source_id", "index", "row0", "col0", "row1", "col1", "area"]


def list_pngs(root) -> list[str]:
    """Sorted POSIX relative paths of all PNG files below ``root``."""
    root = Path(root)
    if not root.is_dir():
        raise InvalidInputError(f"not a directory: {root}")
    return sorted(p.relative_to(root).as_posix() for p in root.rglob("*.png") if p.is_file())


def _map(func, items, jobs=1):
    if jobs <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(func, items))


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _stem_path(rel):
    p = Path(rel)
    return p.parent / p.stem


# -- weather -----------------------------------------------------------------

def _weather_one(rel, src, dst, kind, strength, seed):
    item_seed = derive_seed(seed, rel)
    if kind == "random" or strength == "random":
        drawn = sample_weather(item_seed)
        kind = drawn.kind if kind == "random" else kind
        strength = drawn.strength if strength == "random" else strength
    spec = WeatherSpec(kind, float(strength), item_seed)
    out = Path(dst) / rel
    if spec.strength == 0.0:
        write_if_changed(out, (Path(src) / rel).read_bytes())
    else:
        save_image(out, apply_weather(load_image(Path(src) / rel), spec))
    return [rel, spec.kind, repr(spec.strength), str(item_seed)]


def run_weather(src, dst, kind="random", strength="random", seed=0, jobs=1):
    """Corrupt every PNG under ``src``; ``kind``/``strength`` may be ``"random"``."""
    if kind != "random" and kind not in KINDS:
        raise InvalidInputError(f"unknown weather kind {kind!r}")
    if strength != "random":
        WeatherSpec("fog", float(strength))  # range check before any work
    rels = list_pngs(src)
    rows = _map(partial(_weather_one, src=str(src), dst=str(dst), kind=kind, strength=strength, seed=seed), rels, jobs)
    write_text_if_changed(Path(dst) / "weather.csv", _csv_text(["item_id", "kind", "strength", "seed"], rows))
    return rows


# -- deform ------------------------------------------------------------------

def _deform_one(rel, src, dst, presets, seed, alpha, sigma):
    item_seed = derive_seed(seed, rel)
    write_if_changed(Path(dst) / rel, (Path(src) / rel).read_bytes())
    labels = load_labels(Path(src) / rel)
    stem = _stem_path(rel)
    written = []
    for kind in presets:
        out = Path(dst) / f"{stem.as_posix()}_{kind}.png"
        save_labels(out, deform_labels(labels, kind, item_seed, alpha, sigma))
        written.append(out)
    return written


def run_deform(src, dst, presets=("fog", "rain", "snow"), seed=0, alpha=None, sigma=None, jobs=1):
    """Write ``<stem>.png`` plus one ``<stem>_<preset>.png`` per preset for every label file."""
    presets = tuple(presets)
    for p in presets:
        if p not in PRESETS:
            raise InvalidInputError(f"unknown preset {p!r}")
    rels = list_pngs(src)
    return _map(partial(_deform_one, src=str(src), dst=str(dst), presets=presets, seed=seed, alpha=alpha, sigma=sigma), rels, jobs)


# -- palette split -----------------------------------------------------------

def _safe(name):
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)


def _split_one(rel, src, dst, palette):
    masks = split_by_color(load_labels(Path(src) / rel), palette)
    stem = _stem_path(rel)
    for i, (m, name) in enumerate(zip(masks, palette.names)):
        save_mask(Path(dst) / stem / f"{i:02d}_{_safe(name)}.png", m)
    return rel


def run_split(src, dst, palette: Palette, jobs=1):
    rels = list_pngs(src)
    return _map(partial(_split_one, src=str(src), dst=str(dst), palette=palette), rels, jobs)


# -- instance cropping -------------------------------------------------------

def _find_image(images_dir, rel):
    if images_dir is None:
        return None
    direct = Path(images_dir) / rel
    if direct.exists():
        return direct
    return None


def _crop_one(rel, src, dst, images, color, min_area, pad):
    labels = load_labels(Path(src) / rel)
    img_path = _find_image(images, rel)
    image = None if img_path is None else load_image(img_path)
    patches = extract_instances(labels, color, min_area, pad, image=image, source_id=rel)
    stem = _stem_path(rel)
    rows = []
    for k, p in enumerate(patches):
        save_mask(Path(dst) / stem / f"{k:03d}_mask.png", p.mask_crop)
        if p.image_crop is not None:
            save_image(Path(dst) / stem / f"{k:03d}_image.png", p.image_crop)
        rows.append([rel, k, *p.bbox, p.area])
    return rows


def run_crop(src, dst, palette: Palette, class_name="Car", min_area=64, pad=8, images=None, jobs=1):
    """Crop connected components of one class; writes ``index.csv`` describing every patch."""
    color = palette.color_of(class_name)
    rels = list_pngs(src)
    per_file = _map(
        partial(_crop_one, src=str(src), dst=str(dst), images=None if images is None else str(images),
                color=color, min_area=min_area, pad=pad),
        rels, jobs,
    )
    rows = [r for rs in per_file for r in rs]
    write_text_if_changed(Path(dst) / "index.csv", _csv_text(CROP_INDEX_FIELDS, rows))
    return rows


# -- evaluation --------------------------------------------------------------

def _eval_one(pair, palette, epsilon):
    item_id, pred_path, gt_path = pair
    pred = load_labels(pred_path)
    gt = load_labels(gt_path)
    if pred.shape != gt.shape:
        raise InvalidInputError(f"{item_id}: prediction {pred.shape} and ground truth {gt.shape} differ")
    pm = split_by_color(pred, palette)
    gm = split_by_color(gt, palette)
    return [score_pair(item_id, name, p, g, epsilon) for name, p, g in zip(palette.names, pm, gm)]


def evaluate_pairs(pairs, palette: Palette, out_dir, epsilon=0.0, jobs=1, include_flagged=False):
    """Score ``(item_id, pred_png, gt_png)`` triples per palette class.

    Writes ``scores.csv`` and ``summary.json`` into ``out_dir``.
    """
    per_item = _map(partial(_eval_one, palette=palette, epsilon=epsilon), list(pairs), jobs)
    scores = [s for ss in per_item for s in ss]
    out_dir = Path(out_dir)
    write_scores_csv(out_dir / "scores.csv", scores)
    summary = aggregate(scores, include_flagged)
    summary.save(out_dir / "summary.json")
    return scores, summary


def run_eval(pred_dir, gt_dir, palette: Palette, out_dir, epsilon=0.0, jobs=1, include_flagged=False):
    rels = list_pngs(gt_dir)
    if not rels:
        raise InvalidInputError(f"no ground-truth PNGs under {gt_dir}")
    pairs = []
    for rel in rels:
        pred = Path(pred_dir) / rel
        if not pred.exists():
            raise InvalidInputError(f"missing prediction for {rel}")
        pairs.append((rel, str(pred), str(Path(gt_dir) / rel)))
    return evaluate_pairs(pairs, palette, out_dir, epsilon, jobs, include_flagged)


# -- uncertainty rendering ---------------------------------------------------

MAX_STD = 0.5  # largest population std of a [0, 1] variable


def render_uncertainty(samples_dir, out_dir):
    """Heatmap PNG and stats JSON of the per-pixel std across probability PNGs.

    The heatmap maps 0 to black and ``MAX_STD`` to white.
    """
    rels = list_pngs(samples_dir)
    if len(rels) < 2:
        raise InvalidInputError("need at least two sample PNGs")
    samples = [load_gray(Path(samples_dir) / r) for r in rels]
    if any(s.shape != samples[0].shape for s in samples):
        raise InvalidInputError("sample PNGs differ in shape")
    u = mc_uncertainty(samples)
    out_dir = Path(out_dir)
    write_if_changed(out_dir / "uncertainty.png", encode_png(to_uint8(u / MAX_STD)))
    stats = {
        "samples": len(samples),
        "height": int(u.shape[0]),
        "width": int(u.shape[1]),
        "min": float(u.min()),
        "max": float(u.max()),
        "mean": float(u.mean()),
        "scale": MAX_STD,
    }
    write_text_if_changed(out_dir / "stats.json", json.dumps(stats, indent=2, sort_keys=True) + "\n")
    return u, stats


# -- full pipeline -----------------------------------------------------------

@dataclass
class PipelineConfig:
    input_dir: Path
    labels_dir: Path
    output_dir: Path
    palette: Palette
    kind: str = "random"
    strength: object = "random"
    presets: tuple = ("fog", "rain", "snow")
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    class_name: str = "Car"
    min_area: int = 64
    pad: int = 8
    jobs: int = 1

    def validate(self):
        for d in (self.input_dir, self.labels_dir):
            if not Path(d).is_dir():
                raise InvalidInputError(f"not a readable directory: {d}")
        out = Path(self.output_dir).resolve()
        for d in (self.input_dir, self.labels_dir):
            d = Path(d).resolve()
            if out == d or d in out.parents:
                raise InvalidInputError(f"output directory {out} lies inside input {d}")
        if self.kind != "random" and self.kind not in KINDS:
            raise InvalidInputError(f"unknown weather kind {self.kind!r}")
        if self.strength != "random":
            WeatherSpec("fog", float(self.strength))
        for p in self.presets:
            if p not in PRESETS:
                raise InvalidInputError(f"unknown preset {p!r}")
        self.palette.color_of(self.class_name)
        labels = {_stem_path(r) for r in list_pngs(self.labels_dir)}
        images = {_stem_path(r) for r in list_pngs(self.input_dir)}
        if not labels:
            raise InvalidInputError(f"no label PNGs under {self.labels_dir}")
        missing = sorted(str(s) for s in labels - images)
        if missing:
            raise InvalidInputError(f"labels without images: {missing[:5]}")
        Path(self.output_dir).mkdir(parents=True, exist_ok=True)


def run_pipeline(cfg: PipelineConfig):
    """corrupt -> deform -> split -> crop -> eval under ``output_dir/<stage>/``.

    The eval stage scores each deformed annotation against its original,
    which measures how far the synthesized variants stray from the human
    ground truth per class.
    """
    cfg.validate()
    out = Path(cfg.output_dir)
    seed = cfg.seed
    log.info("weather stage")
    run_weather(cfg.input_dir, out / "weather", cfg.kind, cfg.strength, derive_seed(seed, "weather"), cfg.jobs)
    log.info("deform stage")
    run_deform(cfg.labels_dir, out / "deform", cfg.presets, derive_seed(seed, "deform"), jobs=cfg.jobs)
    log.info("split stage")
    run_split(out / "deform", out / "split", cfg.palette, cfg.jobs)
    log.info("crop stage")
    run_crop(cfg.labels_dir, out / "crop", cfg.palette, cfg.class_name, cfg.min_area, cfg.pad,
             images=out / "weather", jobs=cfg.jobs)
    log.info("eval stage")
    pairs = []
    for rel in list_pngs(cfg.labels_dir):
        stem = _stem_path(rel).as_posix()
        for kind in cfg.presets:
            pairs.append((f"{stem}_{kind}", str(out / "deform" / f"{stem}_{kind}.png"), str(Path(cfg.labels_dir) / rel)))
    _, summary = evaluate_pairs(pairs, cfg.palette, out / "eval", jobs=cfg.jobs)
    for kind in cfg.presets:
        subset = [p for p in pairs if p[0].endswith("_" + kind)]
        evaluate_pairs(subset, cfg.palette, out / "eval" / kind, jobs=cfg.jobs)
    return summary
