"""Hierarchical book-genre classification over blurb and review text graphs."""

from .config import PipelineConfig, load_config
from .corpus import BookRecord, Taxonomy, load_dataset, load_taxonomy
from .errors import ConfigError, DataError, HigemineError, NumericError, ShapeError
from .pipeline import build_predictor, evaluate, prepare, run_pipeline, train_models

__version__ = "0.1.0"

__all__ = [
    "BookRecord",
    "ConfigError",
    "DataError",
    "HigemineError",
    "NumericError",
    "PipelineConfig",
    "ShapeError",
    "Taxonomy",
    "build_predictor",
    "evaluate",
    "load_config",
    "load_dataset",
    "load_taxonomy",
    "prepare",
    "run_pipeline",
    "train_models",
]
