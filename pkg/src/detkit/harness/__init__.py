"""Experiment harness: scenario synthesis, toy fitting, and report emission."""

from .config import (
    ConfigError,
    FitConfig,
    LossFlags,
    NmsConfig,
    NoiseConfig,
    NumericalError,
    ScenarioConfig,
    config_from_json,
    load_config,
)
from .scenario import (
    Scenario,
    SceneImage,
    detections_from_heads,
    score_flip_pair,
    generate_scenario,
    iou_histogram,
    iou_tar_values,
    true_iou,
)
from .toyfit import FitResult, ToyModel, fit_toy, init_toy_model
from .experiments import AbReport, AblationRow, ModeResult, evaluate_fit, run_ablation, run_nms_ab

__all__ = [
    "ScenarioConfig",
    "NoiseConfig",
    "LossFlags",
    "FitConfig",
    "NmsConfig",
    "ConfigError",
    "NumericalError",
    "config_from_json",
    "load_config",
    "Scenario",
    "SceneImage",
    "generate_scenario",
    "detections_from_heads",
    "iou_tar_values",
    "iou_histogram",
    "true_iou",
    "score_flip_pair",
    "ToyModel",
    "FitResult",
    "init_toy_model",
    "fit_toy",
    "run_nms_ab",
    "run_ablation",
    "evaluate_fit",
    "AbReport",
    "ModeResult",
    "AblationRow",
]
