"""Native classifiers behind a single train/predict interface."""

from .base import ClassifierModel, LabeledMatrix
from .forest import RandomForestModel, oob_error_curve, train_random_forest
from .io import load_model, save_model
from .mlp import MlpModel, train_mlp
from .svm import SvmModel, train_svm

TRAINERS = {
    "rf": train_random_forest,
    "svm": train_svm,
    "mlp": train_mlp,
}


def train(kind: str, data: LabeledMatrix, params: dict | None = None,
          seed: int = 0) -> ClassifierModel:
    """Dispatch to one of the three classifier kinds."""
    try:
        trainer = TRAINERS[kind]
    except KeyError:
        raise ValueError(f"unknown learner kind {kind!r}; expected one of "
                         f"{sorted(TRAINERS)}") from None
    return trainer(data, params, seed)


def predict(model: ClassifierModel, x):
    """Argmax class for one vector (ties break to the lowest id)."""
    return model.predict(x)


__all__ = [
    "ClassifierModel",
    "LabeledMatrix",
    "MlpModel",
    "RandomForestModel",
    "SvmModel",
    "TRAINERS",
    "load_model",
    "oob_error_curve",
    "predict",
    "save_model",
    "train",
    "train_mlp",
    "train_random_forest",
    "train_svm",
]
