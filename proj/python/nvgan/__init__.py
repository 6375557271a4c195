"""Conditional-GAN synthesis of night-time visible satellite imagery.

Thin wrapper around the compiled extension; see the project README for the
CLI and the full C++ API.
"""

from ._core import (  # noqa: F401
    CheckpointError,
    ConfigError,
    DataError,
    Session,
    ShapeError,
    StateError,
    albedo_to_image,
    attention_report,
    create_session,
    estimate_flow,
    evaluate_albedo,
    extrapolate,
    load_checkpoint,
    mae,
    make_synthetic,
    psnr,
    rmse,
    save_checkpoint,
    ssim,
    synthesize,
    train_epochs,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "DataError",
    "Session",
    "ShapeError",
    "StateError",
    "albedo_to_image",
    "attention_report",
    "create_session",
    "estimate_flow",
    "evaluate_albedo",
    "extrapolate",
    "load_checkpoint",
    "mae",
    "make_synthetic",
    "psnr",
    "rmse",
    "save_checkpoint",
    "ssim",
    "synthesize",
    "train_epochs",
]
