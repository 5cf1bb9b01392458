"""Soft-margin SVMs: SMO for kernel machines, dual coordinate descent for the linear one."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..data import NEUTRAL, STRESS
from ..errors import ConfigurationError, ConvergenceError, SchemaError, TrainingError
from . import _solvers
from .boosting import _as_pm1

# precompute the Gram matrix up to this many rows (about 200 MB)
FULL_KERNEL_ROWS = 5000
# the duality-gap refinement tightens the SMO tolerance at most this far below ``tol``
SMO_TOL_FLOOR = 1e-4
# coordinate-descent epochs tried before the interior-point fallback
DCD_FIRST_CHUNK = 200


def projected_gradient_spread(Z, alpha, C) -> float:
    """max PG - min PG for the bias-augmented dual; ``Z`` rows are y_i * x_i."""
    g = Z @ (Z.T @ alpha) - 1.0
    pg = np.where(alpha <= 0, np.minimum(g, 0.0), np.where(alpha >= C, np.maximum(g, 0.0), g))
    return float(pg.max() - pg.min())


def interior_point_dual(Z, C, max_iter: int = 100, patience: int = 5):
    """Mehrotra predictor-corrector on min 1/2 a'ZZ'a - sum(a), 0 <= a <= C.

    ZZ' has rank at most Z.shape[1], so every Newton system is reduced to a
    small dense one with the Woodbury identity.  Near the optimum rounding
    eventually spoils the Newton steps, so the best iterate (by max of dual
    residual and complementarity) is kept and returned once progress stalls.
    Returns the rounded duals, or None when no finite iterate was reached.
    """
    n, d = Z.shape
    a = np.full(n, C / 2.0)
    # the upper slack is its own variable: C - a loses every digit when a is near C
    s = C - a
    lam = np.ones(n)
    nu = np.ones(n)

    def newton(rd, rp, c1, c2):
        dinv = 1.0 / (lam / a + nu / s)
        r = -rd + c1 / a - (c2 + nu * rp) / s
        M = np.eye(d) + Z.T @ (Z * dinv[:, None])
        da = dinv * (r - Z @ np.linalg.solve(M, Z.T @ (dinv * r)))
        ds = -rp - da
        return da, ds, (c1 - lam * da) / a, (c2 - nu * ds) / s

    def max_step(v, dv):
        neg = dv < 0
        return min(1.0, float(np.min(-v[neg] / dv[neg]))) if neg.any() else 1.0

    best, best_merit, since_best = None, np.inf, 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(max_iter):
            rd = Z @ (Z.T @ a) - 1.0 - lam + nu
            rp = a + s - C
            mu = (lam @ a + nu @ s) / (2 * n)
            merit = max(float(np.abs(rd).max()), float(mu))
            if not np.isfinite(merit):
                break
            if merit < best_merit:
                best, best_merit, since_best = a.copy(), merit, 0
            else:
                since_best += 1
            if (np.abs(rd).max() < 1e-8 and mu < 1e-11) or since_best >= patience:
                break
            try:
                da, ds, dl, dn = newton(rd, rp, -lam * a, -nu * s)
                step = min(max_step(a, da), max_step(s, ds), max_step(lam, dl), max_step(nu, dn))
                mu_aff = ((lam + step * dl) @ (a + step * da)
                          + (nu + step * dn) @ (s + step * ds)) / (2 * n)
                sigma = (mu_aff / mu) ** 3
                da, ds, dl, dn = newton(rd, rp, -lam * a - dl * da + sigma * mu,
                                        -nu * s - dn * ds + sigma * mu)
            except np.linalg.LinAlgError:
                break
            step = 0.99 * min(max_step(a, da), max_step(s, ds), max_step(lam, dl), max_step(nu, dn))
            a = a + step * da
            s = s + step * ds
            lam = lam + step * dl
            nu = nu + step * dn
    if best is None:
        return None
    # snap duals that sit numerically on a bound
    return np.where(best < 1e-8 * C, 0.0, np.where(best > C - 1e-8 * C, C, best))


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    C: float = 1.0
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ConfigurationError(f"unknown kernel {self.kind!r}")
        if not self.C > 0:
            raise ConfigurationError("C must be positive")
        if self.kind == "rbf" and not (self.gamma is not None and self.gamma > 0):
            raise ConfigurationError("rbf kernel needs a positive gamma")

    def __call__(self, A, B):
        A = np.atleast_2d(A)
        B = np.atleast_2d(B)
        if self.kind == "linear":
            return A @ B.T
        sq = (A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2 * A @ B.T
        return np.exp(-self.gamma * np.maximum(sq, 0.0))


class _SVMBase(ClassifierMixin, BaseEstimator):

    def _check_X(self, X):
        check_is_fitted(self, "dual_coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise SchemaError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    @property
    def kernel_spec_(self) -> KernelSpec:
        return KernelSpec(self.kernel, self.C, self.gamma if self.kernel == "rbf" else None)

    def decision_function(self, X):
        X = self._check_X(X)
        out = np.empty(len(X))
        # chunked to bound the kernel block size
        for start in range(0, len(X), 2048):
            block = self.kernel_spec_(X[start:start + 2048], self.support_vectors_)
            out[start:start + 2048] = block @ self.dual_coef_ + self.intercept_
        return out

    def predict(self, X):
        return np.where(self.decision_function(X) > 0, STRESS, NEUTRAL)

    def kkt_residuals(self, X, y):
        """Per-row violation of the soft-margin optimality conditions.

        Needs the training rows in training order (``alpha_`` is indexed by row).
        """
        y = _as_pm1(y)
        margin = y * self.decision_function(X)
        alpha = self.alpha_
        at_zero = alpha <= 0
        at_c = alpha >= self.C
        free = ~at_zero & ~at_c
        res = np.zeros(len(y))
        res[at_zero] = np.maximum(0.0, 1.0 - margin[at_zero])
        res[at_c] = np.maximum(0.0, margin[at_c] - 1.0)
        res[free] = np.abs(margin[free] - 1.0)
        return res

    def _store(self, X, y, alpha, bias):
        self.alpha_ = alpha
        sv = alpha > 0
        self.support_ = np.flatnonzero(sv)
        self.support_vectors_ = X[sv]
        self.dual_coef_ = alpha[sv] * y[sv]
        self.intercept_ = float(bias)
        self.classes_ = np.array([NEUTRAL, STRESS])
        self.n_features_in_ = X.shape[1]

    def dual_objective(self):
        """Value of sum(alpha) - 1/2 alpha' Q alpha at the solution."""
        K = self.kernel_spec_(self.support_vectors_, self.support_vectors_)
        return float(np.abs(self.dual_coef_).sum() - 0.5 * self.dual_coef_ @ K @ self.dual_coef_)

    def to_dict(self):
        check_is_fitted(self, "dual_coef_")
        return {"kernel": self.kernel, "C": self.C,
                "gamma": self.gamma if self.kernel == "rbf" else None,
                "n_features": self.n_features_in_,
                "support_vectors": self.support_vectors_.tolist(),
                "dual_coef": self.dual_coef_.tolist(),
                "bias": self.intercept_}

    @classmethod
    def _restore(cls, model, d):
        model.support_vectors_ = np.asarray(d["support_vectors"], dtype=float).reshape(
            -1, int(d["n_features"]))
        model.dual_coef_ = np.asarray(d["dual_coef"], dtype=float)
        model.intercept_ = float(d["bias"])
        model.n_features_in_ = int(d["n_features"])
        model.classes_ = np.array([NEUTRAL, STRESS])
        return model


class SMOClassifier(_SVMBase):
    """Kernel SVM trained with two-variable SMO and maximal-violating-pair selection.

    SMO stops once the maximal violating pair is closer than ``tol``.  With
    ``objective_tol`` set it then keeps tightening that tolerance until the
    duality gap, an upper bound on the dual objective error, is at most
    ``objective_tol``; ``None`` skips this certificate.
    """

    def __init__(self, kernel: str = "rbf", C: float = 1.0, gamma: float = 1.0,
                 tol: float = 1e-3, max_iter: int = 1_000_000, objective_tol: float | None = 1e-3):
        self.kernel = kernel
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.objective_tol = objective_tol

    def fit(self, X, y):
        X = check_array(X)
        y = _as_pm1(y).astype(float)
        if len(np.unique(y)) < 2:
            raise TrainingError("SVM needs both classes in the training set")
        spec = self.kernel_spec_
        kind = _solvers.RBF if spec.kind == "rbf" else _solvers.LINEAR
        gamma = float(spec.gamma or 0.0)
        if len(X) <= FULL_KERNEL_ROWS:
            full, use_full = spec(X, X), True
        else:
            full, use_full = np.zeros((1, 1)), False
        X = np.ascontiguousarray(X)
        C = float(self.C)
        alpha, G = np.zeros(len(y)), -np.ones(len(y))
        # a small violating gap bounds the gradient, not the objective, whose error grows with C
        tol, used = float(self.tol), 0
        while True:
            alpha, G, iters, gap = _solvers.smo_solve(X, y, C, kind, gamma, tol,
                                                      int(self.max_iter) - used, full, use_full,
                                                      alpha, G)
            if iters < 0:
                raise ConvergenceError("SMO did not converge", iterations=self.max_iter,
                                       violating_gap=float(gap), tol=tol)
            used += int(iters)
            bias = _solvers.smo_bias(alpha, G, y, C)
            self.duality_gap_ = _solvers.duality_gap(alpha, G, y, C, bias)
            if (self.objective_tol is None or self.duality_gap_ <= self.objective_tol
                    or tol <= self.tol * SMO_TOL_FLOOR):
                break
            tol /= 10.0
        self.n_iter_ = used
        self._store(X, y.astype(int), alpha, bias)
        return self

    @classmethod
    def from_dict(cls, d):
        return cls._restore(cls(d["kernel"], d["C"], d["gamma"] or 1.0), d)


class LinearSVMClassifier(_SVMBase):
    """Linear SVM trained by dual coordinate descent.

    The bias is learned as the weight of a constant input column, so it is
    regularised together with the other weights.
    """

    kernel = "linear"
    gamma = None

    def __init__(self, C: float = 10.0, tol: float = 1e-3, max_epochs: int = 10_000,
                 bias_scale: float = 1.0, random_state: int = 0):
        self.C = C
        self.tol = tol
        self.max_epochs = max_epochs
        self.bias_scale = bias_scale
        self.random_state = random_state

    def fit(self, X, y):
        X = check_array(X)
        y = _as_pm1(y).astype(float)
        if len(np.unique(y)) < 2:
            raise TrainingError("SVM needs both classes in the training set")
        if not self.C > 0:
            raise ConfigurationError("C must be positive")
        Xb = np.ascontiguousarray(np.hstack([X, np.full((len(X), 1), self.bias_scale)]))
        C, tol = float(self.C), float(self.tol)
        first = min(int(self.max_epochs), DCD_FIRST_CHUNK)
        alpha, w, epochs, violation = _solvers.dcd_solve(
            Xb, y, C, tol, first, int(self.random_state), np.zeros(len(y)))
        self.solver_ = "coordinate_descent"
        if epochs < 0:
            # heavily degenerate duals stall coordinate descent; try the
            # interior-point route and keep it only if it passes the same test
            Z = Xb * y[:, None]
            polished = interior_point_dual(Z, C)
            if polished is not None and projected_gradient_spread(Z, polished, C) <= tol:
                alpha, w, epochs = polished, Z.T @ polished, first
                self.solver_ = "interior_point"
            elif self.max_epochs > first:
                # snapping near-bound duals can leave the interior-point answer just
                # short of the test; coordinate descent then only has to polish it
                start = alpha if polished is None else polished
                alpha, w, more, violation = _solvers.dcd_solve(
                    Xb, y, C, tol, int(self.max_epochs) - first, int(self.random_state) + 1, start)
                epochs = first + more if more >= 0 else -1
                if polished is not None:
                    self.solver_ = "interior_point+coordinate_descent"
        if epochs < 0:
            raise ConvergenceError("dual coordinate descent did not converge",
                                   epochs=self.max_epochs, violation=float(violation),
                                   tol=self.tol)
        self.n_iter_ = int(epochs)
        self.coef_ = w[:-1]
        self._store(X, y.astype(int), alpha, w[-1] * self.bias_scale)
        return self

    def decision_function(self, X):
        X = self._check_X(X)
        return X @ self.coef_ + self.intercept_

    def dual_objective(self):
        wb = self.intercept_ / self.bias_scale
        return float(self.alpha_.sum() - 0.5 * (self.coef_ @ self.coef_ + wb * wb))

    def margin_width(self) -> float:
        return float(2.0 / np.linalg.norm(self.coef_))

    @classmethod
    def from_dict(cls, d):
        model = cls._restore(cls(d["C"]), d)
        model.coef_ = model.dual_coef_ @ model.support_vectors_ if len(model.dual_coef_) \
            else np.zeros(model.n_features_in_)
        return model


def train_linear_svm(train, C: float = 10.0, **kwargs) -> LinearSVMClassifier:
    return LinearSVMClassifier(C, **kwargs).fit(train.X, train.y)


def train_rbf_svm(train, spec: KernelSpec, **kwargs) -> SMOClassifier:
    if spec.kind != "rbf":
        raise ConfigurationError("train_rbf_svm needs an rbf KernelSpec")
    return SMOClassifier("rbf", spec.C, spec.gamma, **kwargs).fit(train.X, train.y)
