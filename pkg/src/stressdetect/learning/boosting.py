"""Discrete AdaBoost over one-dimensional threshold stumps."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..data import NEUTRAL, STRESS
from ..errors import SchemaError, TrainingError
from . import _solvers

EPS_FLOOR = 1e-10
ALPHA_CAP = 0.5 * math.log((1 - EPS_FLOOR) / EPS_FLOOR)


@dataclass(frozen=True)
class DecisionStump:
    """``polarity`` where the feature exceeds ``threshold``, ``-polarity`` elsewhere."""

    feature_index: int
    threshold: float
    polarity: int
    weight: float = 0.0

    def predict(self, X) -> np.ndarray:
        column = np.asarray(X, dtype=float)[:, self.feature_index]
        return np.where(column > self.threshold, self.polarity, -self.polarity)

    def to_dict(self):
        d = asdict(self)
        d["threshold"] = _encode_float(self.threshold)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["feature_index"]), _decode_float(d["threshold"]),
                   int(d["polarity"]), float(d["weight"]))


def _encode_float(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _decode_float(v):
    return float(v)


class SortedFeatures:
    """Per-feature sort order and the candidate split positions, computed once."""

    def __init__(self, X):
        X = np.asarray(X, dtype=float)
        self.X = X
        self.n, self.d = X.shape
        self.order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable"))
        self.sorted = np.ascontiguousarray(np.take_along_axis(X, self.order, axis=0))

    def threshold(self, k, j):
        if k == 0:
            return -math.inf
        if k == self.n:
            return math.inf
        return 0.5 * (self.sorted[k - 1, j] + self.sorted[k, j])

    def best_stumps(self, y, w):
        """Lowest weighted error stump for every feature.

        Returns ``(errors, positions, polarities)``, each of length ``d``.
        Ties go to the smallest threshold, then to polarity +1.
        """
        return _solvers.best_stumps(self.order, self.sorted,
                                    np.ascontiguousarray(y, dtype=np.float64),
                                    np.ascontiguousarray(w, dtype=np.float64))


def train_stump(X, y, w, feature_index: int):
    """Best stump on one feature; returns ``(stump, weighted_error)``."""
    X = np.asarray(X, dtype=float)
    column = X[:, [feature_index]] if X.ndim == 2 else X.reshape(-1, 1)
    sf = SortedFeatures(column)
    errors, positions, polarities = sf.best_stumps(np.asarray(y), np.asarray(w, dtype=float))
    stump = DecisionStump(feature_index, sf.threshold(int(positions[0]), 0), int(polarities[0]))
    return stump, float(errors[0])


def _as_pm1(y):
    y = np.asarray(y)
    values = set(np.unique(y).tolist())
    if values <= {STRESS, NEUTRAL}:
        return y.astype(int)
    if values <= {0, 1}:
        return np.where(y == 1, STRESS, NEUTRAL)
    raise TrainingError(f"labels must be +1/-1, got {sorted(values)}")


class StumpBoostClassifier(ClassifierMixin, BaseEstimator):
    """AdaBoost whose weak learners are single-feature threshold stumps.

    The order in which stumps are admitted is kept; it doubles as a ranking
    of the most discriminative features.
    """

    def __init__(self, n_estimators: int = 300, feature_names=None):
        self.n_estimators = n_estimators
        self.feature_names = feature_names

    def fit(self, X, y):
        X = check_array(X)
        y = _as_pm1(y)
        if len(np.unique(y)) < 2:
            raise TrainingError("AdaBoost needs both classes in the training set")
        if self.n_estimators < 1:
            raise TrainingError("n_estimators must be at least 1")
        n, d = X.shape
        sf = SortedFeatures(X)
        w = np.full(n, 1.0 / n)
        stumps, epsilons = [], []
        for _ in range(self.n_estimators):
            errors, positions, polarities = sf.best_stumps(y, w)
            j = int(np.argmin(errors))
            eps = float(errors[j])
            # chance-level round (rounding can leave eps a hair under 0.5)
            if eps >= 0.5 - EPS_FLOOR:
                break
            perfect = eps <= EPS_FLOOR
            alpha = ALPHA_CAP if perfect else 0.5 * math.log((1 - eps) / eps)
            stump = DecisionStump(j, sf.threshold(int(positions[j]), j), int(polarities[j]), alpha)
            stumps.append(stump)
            epsilons.append(eps)
            if perfect:
                break
            w = w * np.exp(-alpha * y * stump.predict(X))
            w /= w.sum()
        self.stumps_ = stumps
        self.epsilons_ = np.array(epsilons)
        self.classes_ = np.array([NEUTRAL, STRESS])
        self.n_features_in_ = d
        return self

    def _check_X(self, X):
        check_is_fitted(self, "stumps_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise SchemaError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def decision_function(self, X):
        X = self._check_X(X)
        margin = np.zeros(len(X))
        for stump in self.stumps_:
            margin += stump.weight * stump.predict(X)
        return margin

    def predict(self, X):
        return np.where(self.decision_function(X) > 0, STRESS, NEUTRAL)

    def staged_training_error(self, X, y):
        """Training error after each admitted stump."""
        X = self._check_X(X)
        y = _as_pm1(y)
        margin = np.zeros(len(X))
        out = []
        for stump in self.stumps_:
            margin += stump.weight * stump.predict(X)
            out.append(float(np.mean(np.where(margin > 0, STRESS, NEUTRAL) != y)))
        return np.array(out)

    def error_bound(self) -> float:
        """Product of 2 sqrt(eps (1 - eps)) over the admitted rounds."""
        eps = self.epsilons_
        return float(np.prod(2.0 * np.sqrt(eps * (1.0 - eps))))

    def ranked_features(self, top_k: int | None = None) -> list:
        """Feature of each stump in selection order (repeats allowed)."""
        check_is_fitted(self, "stumps_")
        names = self.feature_names
        picked = self.stumps_[:top_k] if top_k else self.stumps_
        return [names[s.feature_index] if names is not None else s.feature_index for s in picked]

    def to_dict(self):
        check_is_fitted(self, "stumps_")
        return {"n_estimators": self.n_estimators,
                "n_features": self.n_features_in_,
                "epsilons": self.epsilons_.tolist(),
                "stumps": [s.to_dict() for s in self.stumps_]}

    @classmethod
    def from_dict(cls, d, feature_names=None):
        model = cls(d["n_estimators"], feature_names)
        model.stumps_ = [DecisionStump.from_dict(s) for s in d["stumps"]]
        model.epsilons_ = np.asarray(d["epsilons"], dtype=float)
        model.n_features_in_ = int(d["n_features"])
        model.classes_ = np.array([NEUTRAL, STRESS])
        return model


def train_adaboost(train, T: int = 300, feature_names=None) -> StumpBoostClassifier:
    return StumpBoostClassifier(T, feature_names).fit(train.X, train.y)
