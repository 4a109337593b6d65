"""Linear soft-margin SVM trained in the dual.

The solver is two-coordinate dual descent (SMO with second-order working-set
selection) on

    min_a  1/2 a'Qa - sum(a)   s.t.  0 <= a_i <= C,  y'a = 0,

which keeps the bias unregularized, so the primal is exactly
1/2 ||w||^2 + C * sum(hinge). The bias is recovered from w afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import InputError, ParameterError, ShapeError

TAU = 1e-12


@dataclass
class SvmModel:
    w: np.ndarray
    bias: float
    C: float = 1.0
    dual_history: list = field(default_factory=list, repr=False)
    n_updates: int = 0

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.w.size:
            raise ShapeError(f"model has {self.w.size} features, input has {X.shape[1]}")
        return X @ self.w + self.bias


def primal_objective(w, bias, X, y, C) -> float:
    """1/2 ||w||^2 + C * sum of hinge losses, labels in {0, 1}."""
    s = np.where(np.asarray(y) > 0, 1.0, -1.0)
    margins = s * (np.asarray(X, dtype=np.float64) @ w + bias)
    return float(0.5 * w @ w + C * np.maximum(0.0, 1.0 - margins).sum())


def svm_train(X, y, C: float = 1.0, seed: int = 0, tol: float = 1e-6, max_epochs: int = 1000) -> SvmModel:
    """Fit a linear SVM; labels are {0, 1}.

    ``seed`` is accepted for interface symmetry with the other trainers; the
    working-set rule is deterministic so it has no effect.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y).reshape(-1)
    n = X.shape[0]
    if y.size != n:
        raise ShapeError(f"{n} rows but {y.size} labels")
    if not C > 0:
        raise ParameterError(f"C must be positive, got {C}")
    if n < 2 or np.unique(y).size < 2:
        raise InputError("SVM training needs both classes present")
    if not np.isin(y, (0, 1)).all():
        raise InputError("SVM labels must be 0 or 1")
    s = np.where(y > 0, 1.0, -1.0)

    Q = (s[:, None] * s[None, :]) * (X @ X.T)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # Q alpha - 1
    history = np.zeros(max_epochs + 1)
    epochs, updates = _smo(Q, s, float(C), float(tol), int(max_epochs), alpha, grad, history)
    w = (alpha * s) @ X
    return SvmModel(w, _bias(X @ w, s), float(C), history[:epochs + 1].tolist(), int(updates))


@numba.njit(cache=True)
def _smo(Q, s, C, tol, max_epochs, alpha, grad, history):
    """Pair updates with second-order working-set selection.

    The maximal violator i is paired with the j giving the largest
    objective decrease. Updates ``alpha`` and ``grad`` (= Q alpha - 1) in
    place and records the dual objective after every epoch of n updates.
    """
    n = alpha.size
    updates = 0
    epochs = 0
    for epoch in range(max_epochs):
        converged = False
        for _ in range(n):
            i = -1
            g_max = -np.inf
            g_min = np.inf
            for t in range(n):
                sc = -s[t] * grad[t]
                if (s[t] > 0 and alpha[t] < C) or (s[t] < 0 and alpha[t] > 0):
                    if sc > g_max:
                        g_max = sc
                        i = t
                if (s[t] > 0 and alpha[t] > 0) or (s[t] < 0 and alpha[t] < C):
                    if sc < g_min:
                        g_min = sc
            if i < 0 or g_max - g_min < tol:
                converged = True
                break
            j = -1
            best = -np.inf
            for t in range(n):
                if (s[t] > 0 and alpha[t] > 0) or (s[t] < 0 and alpha[t] < C):
                    diff = g_max + s[t] * grad[t]
                    if diff > 0:
                        quad = Q[i, i] + Q[t, t] - 2.0 * s[i] * s[t] * Q[i, t]
                        if quad < TAU:
                            quad = TAU
                        gain = diff * diff / quad
                        if gain > best:
                            best = gain
                            j = t
            if j < 0:
                converged = True
                break
            quad = Q[i, i] + Q[j, j] - 2.0 * s[i] * s[j] * Q[i, j]
            if quad < TAU:
                quad = TAU
            # alpha_i += s_i * step, alpha_j -= s_j * step keeps y'alpha fixed
            step = (-s[i] * grad[i] + s[j] * grad[j]) / quad
            lo_i, hi_i = -alpha[i] * s[i], (C - alpha[i]) * s[i]
            lo_j, hi_j = alpha[j] * s[j], -(C - alpha[j]) * s[j]
            lo = max(min(lo_i, hi_i), min(lo_j, hi_j))
            hi = min(max(lo_i, hi_i), max(lo_j, hi_j))
            step = min(max(step, lo), hi)
            new_i = min(max(alpha[i] + s[i] * step, 0.0), C)
            new_j = min(max(alpha[j] - s[j] * step, 0.0), C)
            di = new_i - alpha[i]
            dj = new_j - alpha[j]
            alpha[i] = new_i
            alpha[j] = new_j
            for t in range(n):
                grad[t] += Q[i, t] * di + Q[j, t] * dj
            updates += 1
        epochs = epoch + 1
        obj = 0.0
        for t in range(n):
            obj += alpha[t] * (grad[t] - 1.0)
        history[epochs] = 0.5 * obj
        if converged:
            break
    return epochs, updates


def _bias(f, s) -> float:
    """Midpoint of the interval of biases minimizing the hinge sum for fixed w.

    ``f`` holds x_i . w. The hinge of row i is max(0, s_i (t_i - b)) with
    breakpoints t_i = s_i - f_i, so the sum is piecewise linear and convex and
    its minimizers form an interval whose ends are breakpoints. Taking the
    midpoint makes the bias unique and flips its sign under a label swap.
    """
    t = np.sort(s - f)
    values = np.empty(t.size)
    for start in range(0, t.size, 1024):
        b = t[start:start + 1024]
        values[start:start + 1024] = np.maximum(0.0, s[None, :] * ((s - f)[None, :] - b[:, None])).sum(axis=1)
    best = values.min()
    near = t[values <= best + 1e-9 * max(1.0, best)]
    return float(0.5 * (near[0] + near[-1]))


def svm_predict(model: SvmModel, X):
    """Labels (1 iff decision >= 0) and decision values."""
    d = model.decision_function(X)
    return (d >= 0).astype(np.int64), d
