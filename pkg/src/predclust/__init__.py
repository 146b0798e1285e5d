"""Predictive clustering: partition data so that one model per cluster fits well."""

from .core import (
    Assignment,
    ClusterParams,
    DataError,
    Dataset,
    LossKind,
    LossSpec,
    Regularization,
    Scaler,
    Task,
    data_loss,
    load_csv,
    loss_matrix,
    per_datum_loss,
    regularization_term,
    total_loss,
)
from .greedy import ClusterType, FitReport, GreedyConfig, fit
from .metrics import accuracy, adjusted_rand_index, predict, r2_score, rmse

__version__ = "0.1.0"

__all__ = [
    "Assignment", "ClusterParams", "ClusterType", "DataError", "Dataset", "FitReport", "GreedyConfig",
    "LossKind", "LossSpec", "Regularization", "Scaler", "Task", "accuracy", "adjusted_rand_index",
    "data_loss", "fit", "load_csv", "loss_matrix", "per_datum_loss", "predict", "r2_score",
    "regularization_term", "rmse", "total_loss",
]
