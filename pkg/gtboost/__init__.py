"""Sparse gradient boosting: GBFS, A-GBM, group-testing split search and multitask A-GBM."""

from gtboost.boosting import (
    BoostedModel,
    MultitaskModel,
    fit,
    fit_multitask,
    load_model,
    predict,
    predict_any,
    save_model,
)
from gtboost.dataset import (
    FeatureMatrix,
    LabeledDataset,
    StandardizationParams,
    TaskBundle,
    generate_synthetic,
    load_csv,
    load_dataset,
    load_svmlight,
    standardize,
    train_valid_split,
)
from gtboost.errors import ConfigError, DataError, GTBoostError, InvariantViolation, ModelFormatError
from gtboost.models import BoostConfig, CriterionMode, GTConfig, SplitCriterionConfig, Splitter

__version__ = "0.1.0"

__all__ = [
    "BoostConfig",
    "BoostedModel",
    "ConfigError",
    "CriterionMode",
    "DataError",
    "FeatureMatrix",
    "GTBoostError",
    "GTConfig",
    "InvariantViolation",
    "LabeledDataset",
    "ModelFormatError",
    "MultitaskModel",
    "SplitCriterionConfig",
    "Splitter",
    "StandardizationParams",
    "TaskBundle",
    "fit",
    "fit_multitask",
    "generate_synthetic",
    "load_csv",
    "load_dataset",
    "load_model",
    "load_svmlight",
    "predict",
    "predict_any",
    "save_model",
    "standardize",
    "train_valid_split",
]
