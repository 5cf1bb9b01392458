"""Stratified partitioning of labeled datasets."""
from __future__ import annotations

import math

import numpy as np
from sklearn.model_selection import StratifiedKFold

from ..data import LabeledDataset
from ..errors import StratificationError

MIN_PER_CLASS = 2


def stratified_split_indices(y, train_fraction: float = 0.75, seed: int = 0,
                             min_per_class: int = MIN_PER_CLASS):
    """Per class, ``round(train_fraction * count)`` rows go to train.

    Halves round up.  Both index arrays come back sorted so row order
    (time order, for sessions) is kept.
    """
    if not 0 < train_fraction < 1:
        raise StratificationError("train_fraction must lie strictly between 0 and 1")
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise StratificationError(f"need both classes, found {classes.tolist()}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in sorted(classes.tolist(), reverse=True):
        members = np.flatnonzero(y == label)
        if len(members) < min_per_class:
            raise StratificationError(
                f"class {label} has {len(members)} rows, need at least {min_per_class}")
        n_train = math.floor(train_fraction * len(members) + 0.5)
        n_train = min(max(n_train, 1), len(members) - 1)
        shuffled = rng.permutation(members)
        train.append(shuffled[:n_train])
        test.append(shuffled[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(data: LabeledDataset, train_fraction: float = 0.75, seed: int = 0):
    train_idx, test_idx = stratified_split_indices(data.y, train_fraction, seed)
    return data.subset(train_idx), data.subset(test_idx)


def stratified_folds(y, n_folds: int = 5, seed: int = 0):
    """Yield ``(train_idx, valid_idx)`` for stratified k-fold CV."""
    folds = StratifiedKFold(n_splits=n_folds, shuffle=True, random_state=seed)
    yield from folds.split(np.zeros(len(y)), y)
