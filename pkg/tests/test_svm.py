import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from scarcelearn.errors import InputError, ParameterError, ShapeError
from scarcelearn.svm import primal_objective, svm_predict, svm_train


def primal_oracle(X, y, C):
    """Smooth the hinge with softplus at decreasing temperatures, then refine with Powell."""
    d = X.shape[1]
    s = np.where(y > 0, 1.0, -1.0)
    theta = np.zeros(d + 1)
    for temp in (1e-1, 1e-2, 1e-3, 1e-4):
        def f(t):
            m = 1 - s * (X @ t[:d] + t[d])
            return 0.5 * t[:d] @ t[:d] + C * np.sum(temp * np.logaddexp(0, m / temp))
        theta = minimize(f, theta, method="BFGS", options={"gtol": 1e-10}).x
    exact = lambda t: primal_objective(t[:d], t[d], X, y, C)
    theta = minimize(exact, theta, method="Powell", options={"xtol": 1e-10, "ftol": 1e-14}).x
    return exact(theta)


def test_separable_blobs_perfect():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-3, 0.5, (30, 2)), rng.normal(3, 0.5, (30, 2))])
    y = np.repeat([0, 1], 30)
    m = svm_train(X, y)
    pred, _ = svm_predict(m, X)
    assert (pred == y).all()


def test_two_symmetric_points():
    m = svm_train([[-1.0, 0.0], [1.0, 0.0]], [0, 1], C=10.0)
    np.testing.assert_allclose(m.w, [1.0, 0.0], atol=1e-6)
    assert m.bias == pytest.approx(0.0, abs=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([0.1, 1.0, 10.0]))
def test_primal_matches_independent_optimizer(seed, C):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(10, 2))
    y = np.array([0, 1] * 5)
    X[y == 1] += 0.8
    m = svm_train(X, y, C=C, tol=1e-10)
    ours = primal_objective(m.w, m.bias, X, y, C)
    ref = primal_oracle(X, y, C)
    assert ours <= ref + 1e-3 * max(1.0, abs(ref))


def test_strong_duality_at_convergence():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 3))
    y = (X[:, 0] + 0.5 * rng.normal(size=40) > 0).astype(int)
    m = svm_train(X, y, C=1.0, tol=1e-10)
    primal = primal_objective(m.w, m.bias, X, y, 1.0)
    # the history stores the minimized dual 1/2 a'Qa - sum(a); its negative is the dual value
    assert -m.dual_history[-1] == pytest.approx(primal, rel=1e-5)


def test_decision_zero_predicts_positive():
    m = svm_train([[-1.0], [1.0]], [0, 1], C=10.0)
    pred, dec = svm_predict(m, [[0.0]])
    assert dec[0] == pytest.approx(0.0, abs=1e-9)
    m.bias = -0.0
    pred, dec = svm_predict(m, [[0.0]])
    assert pred[0] == 1


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.1, 10.0))
def test_scaling_x_and_c_preserves_predictions(seed, a):
    # scaling X by a and C by 1/a^2 rescales the optimum w by 1/a, same decisions
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 3))
    y = (X[:, 0] - X[:, 1] > 0).astype(int)
    Xt = rng.normal(size=(20, 3))
    d1 = svm_predict(svm_train(X, y, C=1.0, tol=1e-10), Xt)[1]
    d2 = svm_predict(svm_train(a * X, y, C=1.0 / a ** 2, tol=1e-10), a * Xt)[1]
    np.testing.assert_allclose(d1, d2, atol=1e-4 * max(1.0, np.abs(d1).max()))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_label_swap_negates_decision(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(25, 2))
    y = (X.sum(axis=1) + 0.3 * rng.normal(size=25) > 0).astype(int)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    Xt = rng.normal(size=(10, 2))
    d1 = svm_train(X, y, tol=1e-10).decision_function(Xt)
    d2 = svm_train(X, 1 - y, tol=1e-10).decision_function(Xt)
    np.testing.assert_allclose(d1, -d2, atol=1e-5)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_dual_objective_monotone(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 4))
    y = rng.integers(0, 2, 30)
    y[:2] = [0, 1]
    h = np.array(svm_train(X, y).dual_history)
    assert h[0] == 0.0
    assert np.all(np.diff(h) <= 1e-12)


def test_deterministic():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 5))
    y = rng.integers(0, 2, 50)
    a, b = svm_train(X, y, seed=1), svm_train(X, y, seed=2)
    np.testing.assert_array_equal(a.w, b.w)
    assert a.bias == b.bias


def test_input_errors():
    with pytest.raises(InputError):
        svm_train(np.zeros((4, 2)), [1, 1, 1, 1])
    with pytest.raises(InputError):
        svm_train(np.zeros((2, 2)), [0, 2])
    with pytest.raises(ShapeError):
        svm_train(np.zeros((3, 2)), [0, 1])
    with pytest.raises(ParameterError):
        svm_train(np.eye(2), [0, 1], C=0.0)
    m = svm_train(np.eye(2), [0, 1])
    with pytest.raises(ShapeError):
        svm_predict(m, np.zeros((1, 3)))
