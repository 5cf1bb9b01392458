"""Compiled inner loops for the SVM dual solvers."""
import numpy as np
from numba import njit

TAU = 1e-12
LINEAR = 0
RBF = 1


@njit(cache=True)
def _kernel_row(X, i, kind, gamma, out):
    n, d = X.shape
    for t in range(n):
        acc = 0.0
        if kind == LINEAR:
            for k in range(d):
                acc += X[i, k] * X[t, k]
            out[t] = acc
        else:
            for k in range(d):
                diff = X[i, k] - X[t, k]
                acc += diff * diff
            out[t] = np.exp(-gamma * acc)


@njit(cache=True)
def _q_row(X, y, i, kind, gamma, full, use_full, out):
    n = X.shape[0]
    if use_full:
        for t in range(n):
            out[t] = y[i] * y[t] * full[i, t]
    else:
        _kernel_row(X, i, kind, gamma, out)
        for t in range(n):
            out[t] *= y[i] * y[t]


@njit(cache=True)
def smo_solve(X, y, C, kind, gamma, tol, max_iter, full, use_full, alpha0, G0):
    """Two-variable SMO on the standard SVM dual, started from ``alpha0`` with gradient ``G0``.

    Returns (alpha, gradient, iterations, final_gap); iterations == -1 when
    ``max_iter`` was exhausted.
    """
    n = X.shape[0]
    alpha = alpha0.copy()
    G = G0.copy()
    Qi = np.empty(n)
    Qj = np.empty(n)
    gap = np.inf
    for it in range(max_iter):
        # maximal violating pair
        gmax = -np.inf
        gmin = np.inf
        i = -1
        j = -1
        for t in range(n):
            v = -y[t] * G[t]
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                if v > gmax:
                    gmax = v
                    i = t
            if (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0):
                if v < gmin:
                    gmin = v
                    j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap < tol:
            return alpha, G, it, gap

        _q_row(X, y, i, kind, gamma, full, use_full, Qi)
        _q_row(X, y, j, kind, gamma, full, use_full, Qj)
        old_ai = alpha[i]
        old_aj = alpha[j]
        if y[i] != y[j]:
            quad = Qi[i] + Qj[j] + 2.0 * Qi[j]
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Qi[i] + Qj[j] - 2.0 * Qi[j]
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        for t in range(n):
            G[t] += Qi[t] * dai + Qj[t] * daj
    return alpha, G, -1, gap


@njit(cache=True)
def smo_bias(alpha, G, y, C):
    ub = np.inf
    lb = -np.inf
    n_free = 0
    total = 0.0
    for t in range(len(alpha)):
        yg = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            total += yg
    if n_free > 0:
        rho = total / n_free
    else:
        rho = (ub + lb) / 2.0
    return -rho


def duality_gap(alpha, G, y, C, b):
    """Primal minus dual objective of an SVM dual point with gradient ``G = Q alpha - 1``.

    ``y_t f(x_t) = G_t + 1 + y_t b``, so the hinge terms and the margin term both
    come from the gradient.  The gap bounds the distance to the optimal dual value.
    """
    hinge = np.maximum(0.0, -G - y * b)
    return float(alpha @ G + C * hinge.sum())


@njit(cache=True)
def dcd_solve(X, y, C, tol, max_epochs, seed, alpha0):
    """Dual coordinate descent for the hinge-loss linear SVM, with shrinking.

    ``X`` already carries the constant bias column.  Stops when the spread of
    projected gradients over a pass drops below ``tol`` on the full set.
    Starts from ``alpha0``.  Returns (alpha, w, epochs, violation); epochs
    == -1 when ``max_epochs`` ran out.
    """
    np.random.seed(seed)
    n, d = X.shape
    alpha = alpha0.copy()
    w = np.zeros(d)
    for i in range(n):
        if alpha[i] != 0.0:
            for k in range(d):
                w[k] += alpha[i] * y[i] * X[i, k]
    qd = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(d):
            acc += X[i, k] * X[i, k]
        qd[i] = acc
    index = np.arange(n)
    active = n
    pg_max_old = np.inf
    pg_min_old = -np.inf
    violation = np.inf
    epoch = 0
    while epoch < max_epochs:
        pg_max = -np.inf
        pg_min = np.inf
        for s in range(active):
            r = s + np.random.randint(active - s)
            tmp = index[s]
            index[s] = index[r]
            index[r] = tmp
        s = 0
        while s < active:
            i = index[s]
            acc = 0.0
            for k in range(d):
                acc += w[k] * X[i, k]
            g = y[i] * acc - 1.0
            pg = 0.0
            if alpha[i] == 0.0:
                if g > pg_max_old:
                    active -= 1
                    tmp = index[s]
                    index[s] = index[active]
                    index[active] = tmp
                    continue
                elif g < 0.0:
                    pg = g
            elif alpha[i] == C:
                if g < pg_min_old:
                    active -= 1
                    tmp = index[s]
                    index[s] = index[active]
                    index[active] = tmp
                    continue
                elif g > 0.0:
                    pg = g
            else:
                pg = g
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if abs(pg) > 1e-12 and qd[i] > 0:
                old = alpha[i]
                new = old - g / qd[i]
                if new < 0.0:
                    new = 0.0
                elif new > C:
                    new = C
                alpha[i] = new
                step = (new - old) * y[i]
                for k in range(d):
                    w[k] += step * X[i, k]
            s += 1
        epoch += 1
        violation = pg_max - pg_min
        if violation <= tol:
            if active == n:
                return alpha, w, epoch, violation
            active = n
            pg_max_old = np.inf
            pg_min_old = -np.inf
            continue
        pg_max_old = pg_max if pg_max > 0 else np.inf
        pg_min_old = pg_min if pg_min < 0 else -np.inf
    return alpha, w, -1, violation


@njit(cache=True)
def best_stumps(order, sorted_x, y, w):
    """Lowest weighted-error threshold/polarity for every feature.

    Position k means the first k sorted rows fall at or below the threshold.
    Ties keep the smallest k, then polarity +1; errors within a relative
    1e-12 count as ties so summation order cannot decide them.
    """
    n, d = sorted_x.shape
    total_pos = 0.0
    total_neg = 0.0
    for t in range(n):
        if y[t] > 0:
            total_pos += w[t]
        else:
            total_neg += w[t]
    slack = 1e-12 * (total_pos + total_neg)
    errors = np.empty(d)
    positions = np.empty(d, dtype=np.int64)
    polarities = np.empty(d, dtype=np.int64)
    for j in range(d):
        below_pos = 0.0
        below_neg = 0.0
        best = total_neg
        best_k = 0
        best_p = 1
        if total_pos < best:
            best = total_pos
            best_p = -1
        for k in range(1, n + 1):
            t = order[k - 1, j]
            if y[t] > 0:
                below_pos += w[t]
            else:
                below_neg += w[t]
            if k < n and sorted_x[k, j] <= sorted_x[k - 1, j]:
                continue
            if k == n:
                below_pos = total_pos
                below_neg = total_neg
            e_plus = below_pos + (total_neg - below_neg)
            e_minus = below_neg + (total_pos - below_pos)
            if e_plus < best - slack:
                best = e_plus
                best_k = k
                best_p = 1
            if e_minus < best - slack:
                best = e_minus
                best_k = k
                best_p = -1
        errors[j] = max(best, 0.0)
        positions[j] = best_k
        polarities[j] = best_p
    return errors, positions, polarities
