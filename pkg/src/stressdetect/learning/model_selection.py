"""Grid search with stratified cross-validation for the RBF SVM."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, ConvergenceError
from .split import stratified_folds, stratified_split_indices
from .svm import KernelSpec, SMOClassifier

DEFAULT_C_GRID = tuple(2.0 ** k for k in range(-5, 16, 2))
DEFAULT_GAMMA_GRID = tuple(2.0 ** k for k in range(-15, 4, 2))


def cv_accuracy(X, y, spec: KernelSpec, folds: int = 5, seed: int = 0, **svm_kwargs) -> float:
    """Pooled accuracy over stratified folds (correct predictions / rows)."""
    correct = 0
    for train_idx, valid_idx in stratified_folds(y, folds, seed):
        model = SMOClassifier(spec.kind, spec.C, spec.gamma, **svm_kwargs)
        model.fit(X[train_idx], y[train_idx])
        correct += int(np.sum(model.predict(X[valid_idx]) == y[valid_idx]))
    return correct / len(y)


def grid_search_cv(X, y, C_grid=DEFAULT_C_GRID, gamma_grid=DEFAULT_GAMMA_GRID, folds: int = 5,
                   seed: int = 0, max_rows: int | None = None, **svm_kwargs):
    """Best RBF ``KernelSpec`` by CV accuracy, plus the full score table.

    Ties go to the smaller C, then the smaller gamma.  ``max_rows`` runs the
    search on a stratified subsample to bound the cost on long sessions.  A
    grid point whose solver hits its iteration cap on any fold scores None
    and cannot be selected.
    """
    C_grid = sorted(float(c) for c in C_grid)
    gamma_grid = sorted(float(g) for g in gamma_grid)
    if not C_grid or not gamma_grid:
        raise ConfigurationError("grid search needs at least one C and one gamma")
    if folds < 2:
        raise ConfigurationError("cross-validation needs at least 2 folds")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if max_rows is not None and len(y) > max_rows:
        keep, _ = stratified_split_indices(y, max_rows / len(y), seed)
        X, y = X[keep], y[keep]

    table = {}
    best, best_score = None, -1.0
    for C in C_grid:
        for gamma in gamma_grid:
            spec = KernelSpec("rbf", C, gamma)
            try:
                score = cv_accuracy(X, y, spec, folds, seed, **svm_kwargs)
            except ConvergenceError:
                table[(C, gamma)] = None
                continue
            table[(C, gamma)] = score
            if score > best_score:
                best, best_score = spec, score
    if best is None:
        raise ConvergenceError("no grid point converged", grid_points=len(table))
    return best, table
