"""Transformer training harness for the STLC workbench's datasets."""

from .config import TrainConfig, full_preset, small_preset
from .loop import TrainResult, train

__all__ = ["TrainConfig", "TrainResult", "full_preset", "small_preset", "train"]
