"""Per-point significance classifier for persistence diagrams."""
from .config import ABLATIONS, TunConfig
from .loss import cross_entropy, focal_loss
from .model import Batch, TunModel, collate
from .training import (
    Prediction, TrainResult, evaluate_loss, featurize, load_model, predict, predict_batch,
    save_model, train,
)

__all__ = [
    "ABLATIONS", "TunConfig", "TunModel", "Batch", "collate", "focal_loss", "cross_entropy",
    "featurize", "train", "TrainResult", "evaluate_loss", "save_model", "load_model", "predict",
    "predict_batch", "Prediction",
]
