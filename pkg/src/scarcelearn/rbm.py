"""Gaussian-Bernoulli and Bernoulli-Bernoulli RBMs trained by CD-1.

Weights are stored visible x hidden. The exact-enumeration routines at the
bottom are small-instance oracles used to check the CD update and the
closed-form conditionals.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .errors import DivergenceError, DomainError, InputError, ParameterError, ShapeError, SizeError

log = logging.getLogger(__name__)

GAUSSIAN = "gaussian_visible"
BERNOULLI = "bernoulli_visible"
KINDS = (GAUSSIAN, BERNOULLI)
MAX_EXACT_UNITS = 12


@dataclass
class RbmParams:
    kind: str
    W: np.ndarray
    c: np.ndarray  # visible bias
    b: np.ndarray  # hidden bias
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown RBM kind {self.kind!r}")
        self.W = np.atleast_2d(np.asarray(self.W, dtype=np.float64))
        self.c = np.asarray(self.c, dtype=np.float64).reshape(-1)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if self.W.shape != (self.c.size, self.b.size):
            raise ShapeError(f"W {self.W.shape} inconsistent with c ({self.c.size}) and b ({self.b.size})")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")

    @property
    def n_visible(self) -> int:
        return self.c.size

    @property
    def n_hidden(self) -> int:
        return self.b.size

    @property
    def var(self) -> float:
        return self.sigma ** 2 if self.kind == GAUSSIAN else 1.0

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.W).all() and np.isfinite(self.b).all() and np.isfinite(self.c).all())

    def copy(self) -> "RbmParams":
        return RbmParams(self.kind, self.W.copy(), self.c.copy(), self.b.copy(), self.sigma)


@dataclass
class RbmDelta:
    """Parameter-shaped increments: CD velocities and likelihood gradients."""

    W: np.ndarray
    c: np.ndarray
    b: np.ndarray

    @classmethod
    def zeros_like(cls, params: RbmParams) -> "RbmDelta":
        return cls(np.zeros_like(params.W), np.zeros_like(params.c), np.zeros_like(params.b))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.c, self.b])


@dataclass(frozen=True)
class CdConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 100
    iterations: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ParameterError(f"learning rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ParameterError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.iterations < 0:
            raise ParameterError("iterations must be >= 0")


@dataclass
class TrainTrace:
    errors: list = field(default_factory=list)

    def __len__(self):
        return len(self.errors)


def init_rbm(n_visible: int, n_hidden: int, kind: str = GAUSSIAN, rng=None, scale: float = 0.01,
             sigma: float = 1.0) -> RbmParams:
    rng = np.random.default_rng(rng)
    return RbmParams(kind, rng.normal(0.0, scale, (n_visible, n_hidden)),
                     np.zeros(n_visible), np.zeros(n_hidden), sigma)


def _check_v(params: RbmParams, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != params.n_visible or v.ndim > 2:
        raise ShapeError(f"visible vector of shape {v.shape}, expected (..., {params.n_visible})")
    return v


def _check_binary(x, what: str):
    if not np.isin(x, (0.0, 1.0)).all():
        raise DomainError(f"{what} must be binary")


def _check_h(params: RbmParams, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != params.n_hidden or h.ndim > 2:
        raise ShapeError(f"hidden vector of shape {h.shape}, expected (..., {params.n_hidden})")
    _check_binary(h, "hidden states")
    return h


def energy(params: RbmParams, v, h) -> float | np.ndarray:
    v = _check_v(params, v)
    h = _check_h(params, h)
    if params.kind == BERNOULLI:
        _check_binary(v, "Bernoulli visible states")
    inter = np.einsum("...i,ij,...j->...", v, params.W, h)
    linear = v @ params.c + h @ params.b + inter
    if params.kind == GAUSSIAN:
        s2 = params.sigma ** 2
        return 0.5 * np.sum(v * v, axis=-1) / s2 - linear / s2
    return -linear


def prob_h_given_v(params: RbmParams, v) -> np.ndarray:
    v = _check_v(params, v)
    return expit((v @ params.W + params.b) / params.var)


def visible_mean(params: RbmParams, h) -> np.ndarray:
    """Conditional visible mean for arbitrary (possibly real-valued) h."""
    act = np.asarray(h, dtype=np.float64) @ params.W.T + params.c
    return act if params.kind == GAUSSIAN else expit(act)


def prob_v_given_h(params: RbmParams, h) -> np.ndarray:
    """Gaussian kind: conditional means (variance sigma^2). Bernoulli kind: P(v=1|h)."""
    return visible_mean(params, _check_h(params, h))


def sample_h(params: RbmParams, v, rng) -> tuple[np.ndarray, np.ndarray]:
    p = prob_h_given_v(params, v)
    return (rng.random(p.shape) < p).astype(np.float64), p


def gibbs_step(params: RbmParams, v, rng):
    """One mean-field CD reconstruction: returns (h sample, v' mean, P(h|v'))."""
    h, _ = sample_h(params, v, rng)
    v_recon = visible_mean(params, h)
    return h, v_recon, prob_h_given_v(params, v_recon)


def cd1_update(params: RbmParams, batch, velocity: RbmDelta | None, cfg: CdConfig, rng):
    """One CD-1 step with momentum; returns (new params, new velocity)."""
    v = np.atleast_2d(_check_v(params, batch))
    if v.shape[0] == 0:
        raise InputError("CD update on an empty batch")
    h, v_model, h_model = gibbs_step(params, v, rng)
    return _apply_cd(params, v, h, v_model, h_model, velocity or RbmDelta.zeros_like(params), cfg)


def reconstruction_error(params: RbmParams, v, rng) -> float:
    _, v_recon, _ = gibbs_step(params, v, rng)
    return float(np.mean((np.asarray(v) - v_recon) ** 2))


def train_rbm(data, cfg: CdConfig, kind: str = GAUSSIAN, n_hidden: int = 100, init: RbmParams | None = None):
    """Train one RBM by CD-1 over shuffled mini-batches.

    One iteration is one pass over the data. The trace records the mean
    squared reconstruction error of each pass.
    """
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.shape[0] == 0:
        raise InputError("cannot train an RBM on zero rows")
    rng = np.random.default_rng(cfg.seed)
    params = init.copy() if init is not None else init_rbm(data.shape[1], n_hidden, kind, rng)
    if params.n_visible != data.shape[1]:
        raise ShapeError(f"RBM has {params.n_visible} visible units, data has {data.shape[1]} columns")
    velocity = RbmDelta.zeros_like(params)
    trace = TrainTrace()
    n = data.shape[0]
    bs = min(cfg.batch_size, n)
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(cfg.iterations):
            order = rng.permutation(n)
            sq = 0.0
            for start in range(0, n, bs):
                batch = data[order[start:start + bs]]
                h, v_recon, h_recon = gibbs_step(params, batch, rng)
                sq += float(np.sum((batch - v_recon) ** 2))
                params, velocity = _apply_cd(params, batch, h, v_recon, h_recon, velocity, cfg)
                if not params.is_finite():
                    raise DivergenceError(
                        f"RBM parameters became non-finite at iteration {it + 1} "
                        f"(learning rate {cfg.learning_rate}, momentum {cfg.momentum})", it + 1)
            err = sq / data.size
            if not np.isfinite(err):
                raise DivergenceError(f"reconstruction error became non-finite at iteration {it + 1}", it + 1)
            trace.errors.append(err)
    return params, trace


def _apply_cd(params, v, h_sample, v_model, h_model, velocity, cfg):
    n = v.shape[0]
    var = params.var
    h_data = prob_h_given_v(params, v)
    eta, eps = cfg.momentum, cfg.learning_rate
    vel = RbmDelta(
        eta * velocity.W + eps * (v.T @ h_data - v_model.T @ h_model) / (n * var),
        eta * velocity.c + eps * (v.sum(0) - v_model.sum(0)) / (n * var),
        eta * velocity.b + eps * (h_data.sum(0) - h_model.sum(0)) / n,
    )
    return RbmParams(params.kind, params.W + vel.W, params.c + vel.c, params.b + vel.b, params.sigma), vel


# -- exact enumeration oracles (Bernoulli kind, tiny instances) -------------

def binary_states(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=n))).reshape(2 ** n, n)


def _require_small(params: RbmParams):
    if params.kind != BERNOULLI:
        raise ParameterError("exact enumeration is implemented for the Bernoulli kind only")
    if params.n_visible > MAX_EXACT_UNITS or params.n_hidden > MAX_EXACT_UNITS:
        raise SizeError(
            f"exact enumeration limited to {MAX_EXACT_UNITS} visible and hidden units, "
            f"got D={params.n_visible}, K={params.n_hidden}")


def joint_log_table(params: RbmParams):
    """Unnormalized log p(v, h) = -E(v, h) over all states: returns (V, H, table, log Z)."""
    _require_small(params)
    V = binary_states(params.n_visible)
    H = binary_states(params.n_hidden)
    table = (V @ params.c)[:, None] + (H @ params.b)[None, :] + V @ params.W @ H.T
    return V, H, table, logsumexp(table)


def _state_rows(V, data) -> np.ndarray:
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    _check_binary(data, "data for exact likelihood")
    weights = 2 ** np.arange(V.shape[1] - 1, -1, -1)
    return (data @ weights).astype(np.int64)


def exact_loglik(params: RbmParams, data) -> float:
    """Mean log p(v) over the data rows, by full enumeration."""
    V, _, table, log_z = joint_log_table(params)
    rows = _state_rows(V, data)
    return float(np.mean(logsumexp(table[rows], axis=1) - log_z))


def exact_loglik_grad(params: RbmParams, data) -> RbmDelta:
    """Exact gradient of the mean log-likelihood w.r.t. (W, c, b)."""
    V, H, table, log_z = joint_log_table(params)
    joint = np.exp(table - log_z)
    rows = _state_rows(V, data)
    post = np.exp(table[rows] - logsumexp(table[rows], axis=1, keepdims=True))  # p(h | v_data)
    vd = V[rows]
    hd = post @ H
    n = vd.shape[0]
    model_vh = V.T @ joint @ H
    return RbmDelta(
        vd.T @ hd / n - model_vh,
        vd.mean(0) - joint.sum(1) @ V,
        hd.mean(0) - joint.sum(0) @ H,
    )
