from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..data import LabeledDataset
from ..errors import SchemaError


class RangeScaler(TransformerMixin, BaseEstimator):
    """Affine map of each training feature onto [-1, 1].

    Constant training features map to 0.  Test values outside the training
    range are left unclamped.
    """

    def __init__(self, lower: float = -1.0, upper: float = 1.0):
        self.lower = lower
        self.upper = upper

    def fit(self, X, y=None):
        X = check_array(X)
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        self.constant_ = self.data_max_ == self.data_min_
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise SchemaError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        span = np.where(self.constant_, 1.0, self.data_max_ - self.data_min_)
        unit = (X - self.data_min_) / span
        out = self.lower + (self.upper - self.lower) * unit
        out[:, self.constant_] = 0.5 * (self.lower + self.upper)
        return out

    def to_dict(self):
        return {"min": self.data_min_.tolist(), "max": self.data_max_.tolist(),
                "range": [self.lower, self.upper]}

    @classmethod
    def from_dict(cls, d):
        scaler = cls(*d.get("range", (-1.0, 1.0)))
        scaler.data_min_ = np.asarray(d["min"], dtype=float)
        scaler.data_max_ = np.asarray(d["max"], dtype=float)
        scaler.constant_ = scaler.data_max_ == scaler.data_min_
        scaler.n_features_in_ = len(scaler.data_min_)
        return scaler


def scale_to_unit_range(train: LabeledDataset, test: LabeledDataset):
    """Fit on ``train`` only and map both sets; returns ``(train', test', scaler)``."""
    scaler = RangeScaler().fit(train.X)
    scaled = []
    for part in (train, test):
        scaled.append(LabeledDataset(part.participant_id, part.timestamps,
                                     scaler.transform(part.X), part.y, part.tasks))
    return scaled[0], scaled[1], scaler
