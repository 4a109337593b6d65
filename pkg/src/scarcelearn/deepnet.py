"""Stacked RBM pretraining, deep classifier / deep autoencoder, dropout backprop."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, log_softmax, softmax

from .errors import DivergenceError, InputError, ParameterError, ShapeError
from .rbm import BERNOULLI, GAUSSIAN, CdConfig, RbmParams, init_rbm, prob_h_given_v, train_rbm

CLASSIFIER = "classifier"
AUTOENCODER = "autoencoder"
CROSS_ENTROPY = "cross_entropy"
SQUARED_ERROR = "squared_error"


@dataclass(frozen=True)
class NetworkSpec:
    hidden_sizes: tuple = (100, 20)
    input_dim: int = 312
    n_classes: int = 2

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ParameterError(f"hidden sizes must be positive, got {self.hidden_sizes}")
        if self.input_dim < 1 or self.n_classes < 1:
            raise ParameterError("input_dim and n_classes must be positive")

    @classmethod
    def parse(cls, text: str, **kw) -> "NetworkSpec":
        return cls(tuple(int(t) for t in text.replace("-", ",").split(",") if t.strip()), **kw)

    @property
    def label(self) -> str:
        return "-".join(str(h) for h in self.hidden_sizes)


@dataclass(frozen=True)
class DropoutConfig:
    p_visible: float = 0.0
    p_hidden: float = 0.0

    def __post_init__(self):
        for p in (self.p_visible, self.p_hidden):
            if not 0 <= p < 1:
                raise ParameterError(f"dropout probability {p} outside [0, 1)")

    @property
    def enabled(self) -> bool:
        return self.p_visible > 0 or self.p_hidden > 0

    @classmethod
    def parse(cls, text: str) -> "DropoutConfig":
        parts = [float(t) for t in text.split(",")]
        if len(parts) != 2:
            raise ParameterError(f"dropout expects 'p_visible,p_hidden', got {text!r}")
        return cls(*parts)


NO_DROPOUT = DropoutConfig()
PAPER_DROPOUT = DropoutConfig(0.2, 0.5)


@dataclass(frozen=True)
class FinetuneConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    iterations: int = 2000
    seed: int = 0
    loss: str | None = None  # defaults by topology
    batch_size: int = 100

    def __post_init__(self):
        if self.iterations < 0:
            raise ParameterError("iterations must be >= 0")
        if self.learning_rate < 0 or not 0 <= self.momentum < 1:
            raise ParameterError("need learning_rate >= 0 and momentum in [0, 1)")
        if self.loss not in (None, CROSS_ENTROPY, SQUARED_ERROR):
            raise ParameterError(f"unknown loss {self.loss!r}")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")


@dataclass
class Layer:
    W: np.ndarray  # fan_in x fan_out
    b: np.ndarray
    activation: str = "sigmoid"

    def copy(self) -> "Layer":
        return Layer(self.W.copy(), self.b.copy(), self.activation)


@dataclass
class DeepNet:
    topology: str
    layers: list
    representation_layer_index: int
    dropout: DropoutConfig = field(default_factory=DropoutConfig)

    def __post_init__(self):
        if self.topology not in (CLASSIFIER, AUTOENCODER):
            raise ParameterError(f"unknown topology {self.topology!r}")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.W.shape[1] != b.W.shape[0]:
                raise ShapeError("consecutive layer shapes do not chain")
        if not 0 < self.representation_layer_index < len(self.layer_sizes) - 1:
            raise ParameterError("representation layer must be a hidden layer")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.layers[0].W.shape[0]] + [l.W.shape[1] for l in self.layers]

    @property
    def input_dim(self) -> int:
        return self.layers[0].W.shape[0]

    @property
    def representation_size(self) -> int:
        return self.layer_sizes[self.representation_layer_index]

    @property
    def loss(self) -> str:
        return CROSS_ENTROPY if self.topology == CLASSIFIER else SQUARED_ERROR

    def copy(self) -> "DeepNet":
        return DeepNet(self.topology, [l.copy() for l in self.layers],
                       self.representation_layer_index, self.dropout)

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.W, layer.b]
        return out


# -- pretraining and construction -------------------------------------------

def pretrain_stack(data, spec: NetworkSpec, cfg: CdConfig, traces: list | None = None) -> list[RbmParams]:
    """Greedy layer-wise RBM training; the first layer has Gaussian visibles.

    When ``traces`` is a list, each layer's TrainTrace is appended to it.
    """
    x = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if x.shape[1] != spec.input_dim:
        raise ShapeError(f"data has {x.shape[1]} columns, spec expects {spec.input_dim}")
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(spec.hidden_sizes))
    stack = []
    for depth, n_hidden in enumerate(spec.hidden_sizes):
        kind = GAUSSIAN if depth == 0 else BERNOULLI
        layer_cfg = replace(cfg, seed=int(seeds[depth]))
        if cfg.iterations == 0:
            rbm = init_rbm(x.shape[1], n_hidden, kind, np.random.default_rng(layer_cfg.seed))
        else:
            rbm, trace = train_rbm(x, layer_cfg, kind, n_hidden)
            if traces is not None:
                traces.append(trace)
        stack.append(rbm)
        x = prob_h_given_v(rbm, x)
    return stack


def random_stack(spec: NetworkSpec, seed: int = 0) -> list[RbmParams]:
    """The initialization used when pretraining is skipped."""
    return pretrain_stack(np.zeros((1, spec.input_dim)), spec, CdConfig(iterations=0, seed=seed))


def build_classifier(stack: list[RbmParams], n_classes: int = 2) -> DeepNet:
    if not stack:
        raise ParameterError("cannot build a classifier from an empty stack")
    layers = [Layer(r.W.copy(), r.b.copy(), "sigmoid") for r in stack]
    top = stack[-1].n_hidden
    layers.append(Layer(np.zeros((top, n_classes)), np.zeros(n_classes), "softmax"))
    return DeepNet(CLASSIFIER, layers, len(stack))


def build_autoencoder(stack: list[RbmParams]) -> DeepNet:
    """Unfold the stack: encoder weights, then their transposes as decoder."""
    if not stack:
        raise ParameterError("cannot build an autoencoder from an empty stack")
    enc = [Layer(r.W.copy(), r.b.copy(), "sigmoid") for r in stack]
    dec = []
    for r in reversed(stack):
        act = "linear" if r.kind == GAUSSIAN else "sigmoid"
        dec.append(Layer(r.W.T.copy(), r.c.copy(), act))
    dec[-1].activation = "linear"
    return DeepNet(AUTOENCODER, enc + dec, len(stack))


# -- forward / backward ------------------------------------------------------

def _activate(z, kind):
    if kind == "sigmoid":
        return expit(z)
    if kind == "softmax":
        return softmax(z, axis=-1)
    return z


def _keep_probs(net: DeepNet, dropout: DropoutConfig) -> list[float]:
    """Keep probability of each layer's input: visible for the first, hidden after."""
    return [1.0 - dropout.p_visible] + [1.0 - dropout.p_hidden] * (len(net.layers) - 1)


def _check_input(net: DeepNet, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.input_dim:
        raise ShapeError(f"input has {x.shape[-1]} features, net expects {net.input_dim}")
    return x


def _forward(net: DeepNet, x, dropout: DropoutConfig, rng=None, train: bool = False):
    """Returns (activations, masks). Masks are None where nothing was dropped."""
    acts = [x]
    masks = []
    a = x
    for layer, k in zip(net.layers, _keep_probs(net, dropout)):
        if train:
            mask = (rng.random(a.shape) < k) if k < 1.0 else None
            masks.append(mask)
            z = (a if mask is None else a * mask) @ layer.W + layer.b
        else:
            z = a @ (layer.W * k if k < 1.0 else layer.W) + layer.b
        a = _activate(z, layer.activation)
        acts.append(a)
    return acts, masks


def forward(net: DeepNet, x, dropout: DropoutConfig | None = None, mode: str = "test", rng=None):
    """Per-layer activations, input first.

    Train mode draws fresh keep-masks for each layer input; test mode uses
    no masks and scales each weight matrix by its source layer's keep
    probability.
    """
    dropout = net.dropout if dropout is None else dropout
    x = _check_input(net, x)
    if mode == "train":
        if rng is None:
            raise ParameterError("train-mode forward needs an rng")
        return _forward(net, x, dropout, np.random.default_rng(rng), train=True)[0]
    if mode != "test":
        raise ParameterError(f"mode must be 'train' or 'test', got {mode!r}")
    return _forward(net, x, dropout)[0]


def loss_and_grads(net: DeepNet, x, targets, dropout: DropoutConfig | None = None, rng=None,
                   loss: str | None = None):
    """Batch loss and its gradient for every (W, b), in ``net.params()`` order.

    Cross-entropy is paired with a softmax output, squared error with a
    linear output; both are averaged over the batch.
    """
    dropout = NO_DROPOUT if dropout is None else dropout
    loss = loss or net.loss
    x = _check_input(net, np.atleast_2d(x))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    n = x.shape[0]
    if dropout.enabled and rng is None:
        raise ParameterError("dropout gradients need an rng for the masks")
    acts, masks = _forward(net, x, dropout, rng, train=True)
    inputs = [a if m is None else a * m for a, m in zip(acts, masks)]
    out = acts[-1]
    if loss == CROSS_ENTROPY:
        z_last = inputs[-1] @ net.layers[-1].W + net.layers[-1].b
        value = float(-np.sum(targets * log_softmax(z_last, axis=-1)) / n)
    else:
        value = float(0.5 * np.sum((out - targets) ** 2) / n)

    top = net.layers[-1].activation
    if loss == CROSS_ENTROPY and top == "softmax":
        delta = (out - targets) / n
    elif loss == SQUARED_ERROR and top == "linear":
        delta = (out - targets) / n
    elif loss == SQUARED_ERROR and top == "sigmoid":
        delta = (out - targets) * out * (1 - out) / n
    else:
        raise ParameterError(f"unsupported pairing of {loss} with a {top} output")

    grads = [None] * (2 * len(net.layers))
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        grads[2 * i] = inputs[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i == 0:
            break
        back = delta @ layer.W.T
        if masks[i] is not None:
            back = back * masks[i]
        a = acts[i]
        delta = back * a * (1 - a)
    return value, grads


def finetune(net: DeepNet, data, targets, dcfg: DropoutConfig, fcfg: FinetuneConfig):
    """Mini-batch backprop with momentum; returns (trained copy, per-iteration loss)."""
    x = _check_input(net, np.atleast_2d(data))
    y = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"{x.shape[0]} inputs but {y.shape[0]} targets")
    if x.shape[0] == 0:
        raise InputError("cannot fine-tune on zero rows")
    if y.shape[1] != net.layer_sizes[-1]:
        raise ShapeError(f"targets have width {y.shape[1]}, net outputs {net.layer_sizes[-1]}")
    loss = fcfg.loss or net.loss
    out = net.copy()
    out.dropout = dcfg
    params = out.params()
    velocity = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(fcfg.seed)
    n = x.shape[0]
    bs = min(fcfg.batch_size, n)
    trace = []
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(fcfg.iterations):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, bs):
                idx = order[start:start + bs]
                value, grads = loss_and_grads(out, x[idx], y[idx], dcfg, rng, loss)
                total += value * len(idx)
                for p, v, g in zip(params, velocity, grads):
                    v *= fcfg.momentum
                    v -= fcfg.learning_rate * g
                    p += v
            mean = total / n
            if not np.isfinite(mean) or not all(np.isfinite(p).all() for p in params):
                raise DivergenceError(f"fine-tuning loss became non-finite at iteration {it + 1}", it + 1)
            trace.append(mean)
    return out, trace


def one_hot(labels, n_classes: int = 2) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def extract_representation(net: DeepNet, X):
    """Test-mode activations of the representation layer."""
    from .features import FeatureMatrix

    if isinstance(X, FeatureMatrix):
        return X.with_values(extract_representation(net, X.values))
    acts = forward(net, np.atleast_2d(X), mode="test")
    return acts[net.representation_layer_index]


def predict_classes(net: DeepNet, X) -> np.ndarray:
    if net.topology != CLASSIFIER:
        raise ParameterError("only classifier nets predict labels")
    return np.argmax(forward(net, np.atleast_2d(X))[-1], axis=1)
