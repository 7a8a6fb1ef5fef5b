"""Shared training-data container and classifier interface."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimMismatchError, EmptyDataError


@dataclass
class LabeledMatrix:
    """Dense feature rows with integer class labels.

    n_classes may exceed max(y)+1 so that models keep a fixed output
    width (7 for surgemes) even when a class is absent from training.
    """

    X: np.ndarray
    y: np.ndarray
    n_classes: int = 0

    def __post_init__(self) -> None:
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("y length must match X rows")
        if self.X.shape[0] == 0:
            raise EmptyDataError("no training rows")
        if self.n_classes <= 0:
            self.n_classes = int(self.y.max()) + 1
        if self.y.min() < 0 or self.y.max() >= self.n_classes:
            raise ValueError(f"labels outside 0..{self.n_classes - 1}")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_vectors(cls, vectors, n_classes: int = 0) -> "LabeledMatrix":
        """Build from feature-vector objects carrying .values and .label."""
        if not vectors:
            raise EmptyDataError("no feature vectors")
        X = np.stack([np.asarray(v.values, dtype=np.float64) for v in vectors])
        y = np.asarray([int(v.label) for v in vectors], dtype=np.int64)
        return cls(X, y, n_classes)


def canonical_row_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Content-keyed row permutation: sorting by it makes training
    independent of the incoming row order (RF bootstrap and SMO sweeps
    then see identical data for any shuffle of the input)."""
    keys = tuple(X[:, j] for j in range(X.shape[1] - 1, -1, -1)) + (y,)
    return np.lexsort(keys)


class ClassifierModel:
    """Common train/predict surface for the three classifier kinds."""

    kind: str = "base"

    def __init__(self, dim: int, n_classes: int, params: dict):
        self.dim = dim
        self.n_classes = n_classes
        self.params = dict(params)

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise DimMismatchError(
                f"input dim {arr.shape[-1] if arr.ndim else '?'} != model dim {self.dim}")
        return arr, single

    def predict_proba(self, x) -> np.ndarray:
        """Class distribution per row; nonnegative, rows sum to 1."""
        raise NotImplementedError

    def predict(self, x):
        """Argmax class id; ties break toward the lowest id."""
        proba = self.predict_proba(x)
        ids = np.argmax(proba, axis=-1)
        if np.asarray(x).ndim == 1:
            return int(ids if np.isscalar(ids) else ids.reshape(-1)[0])
        return ids.astype(np.int64)
