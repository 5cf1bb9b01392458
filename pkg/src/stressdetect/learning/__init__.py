from .boosting import DecisionStump, StumpBoostClassifier, train_adaboost, train_stump
from .model_selection import DEFAULT_C_GRID, DEFAULT_GAMMA_GRID, cv_accuracy, grid_search_cv
from .scaling import RangeScaler, scale_to_unit_range
from .split import stratified_folds, stratified_split, stratified_split_indices
from .svm import KernelSpec, LinearSVMClassifier, SMOClassifier, train_linear_svm, train_rbf_svm

__all__ = [
    "DecisionStump", "StumpBoostClassifier", "train_adaboost", "train_stump",
    "DEFAULT_C_GRID", "DEFAULT_GAMMA_GRID", "cv_accuracy", "grid_search_cv",
    "RangeScaler", "scale_to_unit_range",
    "stratified_folds", "stratified_split", "stratified_split_indices",
    "KernelSpec", "LinearSVMClassifier", "SMOClassifier", "train_linear_svm", "train_rbf_svm",
]
