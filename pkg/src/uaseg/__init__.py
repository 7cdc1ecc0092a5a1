"""Uncertainty-aware segmentation training objective, weather/elastic data
synthesis and IoU/Dice evaluation, in numpy."""
from .core import (
    EmptyReportError,
    InvalidInputError,
    InvalidParameterError,
    NumericError,
    SeedSpec,
    derive_seed,
    sigmoid_reduce,
)
from .elastic import DeformSpec, make_field, preset, synthesize_annotations, warp_image, warp_labels
from .losses import LossBreakdown, LossConfig, bce, combined_loss, dice_loss, iou_loss, mc_uncertainty, soft_iou
from .masks import InstancePatch, Palette, camvid_palette, extract_instances, split_by_color
from .metrics import PairScore, Summary, aggregate, binary_iou_dice, compare
from .weather import WeatherSpec, apply_weather, sample_weather

__version__ = "0.1.0"

__all__ = [
    "DeformSpec",
    "EmptyReportError",
    "InstancePatch",
    "InvalidInputError",
    "InvalidParameterError",
    "LossBreakdown",
    "LossConfig",
    "NumericError",
    "PairScore",
    "Palette",
    "SeedSpec",
    "Summary",
    "WeatherSpec",
    "aggregate",
    "apply_weather",
    "bce",
    "binary_iou_dice",
    "camvid_palette",
    "combined_loss",
    "compare",
    "derive_seed",
    "dice_loss",
    "extract_instances",
    "iou_loss",
    "make_field",
    "mc_uncertainty",
    "preset",
    "sample_weather",
    "sigmoid_reduce",
    "soft_iou",
    "split_by_color",
    "synthesize_annotations",
    "warp_image",
    "warp_labels",
]
