"""Feed-forward classifier: sigmoid hidden layers, backpropagation, Adam.

Weights are stored as ``(fan_in, fan_out)`` matrices, so a layer's
pre-activation is ``I = O_prev @ W + b``.

Two output modes:

``softmax``
    softmax outputs with cross-entropy loss; output error signal ``T - O``.
``sigmoid``
    independent sigmoid outputs with squared-error loss ``0.5 * sum (T - O)^2``;
    output error signal ``O (1 - O) (T - O)``.

Error signals follow the ascent convention (``w += lr * Err * O`` lowers the
loss); :func:`backward` also returns the loss gradients, which are their
negation, for the optimisers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PreconditionError, ShapeError, TrainingError

logger = logging.getLogger(__name__)

SOFTMAX = "softmax"
SIGMOID_OUT = "sigmoid"
OUTPUT_MODES = (SOFTMAX, SIGMOID_OUT)
ADAM = "adam"
SGD = "sgd"


def sigmoid(z):
    # tanh form never overflows and gives exactly 0.5 at 0
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(eq=False)
class NetModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output: str = SOFTMAX
    final_loss: float | None = None

    def __post_init__(self):
        if self.output not in OUTPUT_MODES:
            raise ConfigError(f"output mode must be one of {OUTPUT_MODES}, got {self.output!r}")
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ShapeError(f"weight shapes do not chain: {a.shape} then {b.shape}")
        for W, b in zip(self.weights, self.biases):
            if b.shape != (W.shape[1],):
                raise ShapeError(f"bias of shape {b.shape} does not match weights {W.shape}")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def with_params(self, params) -> "NetModel":
        k = len(self.weights)
        return NetModel(list(params[:k]), list(params[k:]), self.output, self.final_loss)

    def predict_proba(self, X) -> np.ndarray:
        return predict_net(self, X)[1]

    def predict(self, X) -> np.ndarray:
        return predict_net(self, X)[0]

    def to_dict(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "output": self.output,
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_dict(cls, data) -> "NetModel":
        sizes = data["layer_sizes"]
        weights = [np.asarray(W, dtype=np.float64).reshape(a, b) for W, a, b in zip(data["weights"], sizes, sizes[1:])]
        biases = [np.asarray(b, dtype=np.float64).reshape(-1) for b in data["biases"]]
        return cls(weights, biases, data["output"], data.get("final_loss"))


def init_net(layers, seed: int = 0, output: str = SOFTMAX) -> NetModel:
    """Xavier-uniform weights, zero biases."""
    layers = [int(s) for s in layers]
    if len(layers) < 3:
        raise ConfigError(f"need at least one hidden layer, got layer sizes {layers}")
    if min(layers) < 1:
        raise ConfigError(f"layer sizes must be positive, got {layers}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layers, layers[1:]):
        r = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-r, r, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetModel(weights, biases, output)


def _as_batch(net: NetModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.n_features:
        raise ShapeError(f"net expects rows of {net.n_features} features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise PreconditionError("non-finite network input")
    return x


def forward(net: NetModel, x) -> tuple[list[np.ndarray], np.ndarray]:
    """Activations of every layer (input first) and the output vector(s).

    ``x`` may be one row or a batch; activations are always 2-D.
    """
    O = _as_batch(net, x)
    acts = [O]
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        I = O @ W + b
        O = softmax(I) if i == last and net.output == SOFTMAX else sigmoid(I)
        acts.append(O)
    out = acts[-1]
    return acts, (out[0] if np.ndim(x) == 1 else out)


def loss(net: NetModel, output: np.ndarray, target: np.ndarray) -> float:
    """Mean per-row loss of ``output`` against one-hot ``target``."""
    output = np.atleast_2d(output)
    target = np.atleast_2d(target)
    if net.output == SOFTMAX:
        return float(-np.sum(target * np.log(output)) / output.shape[0])
    return float(0.5 * np.sum((target - output) ** 2) / output.shape[0])


@dataclass
class Gradients:
    deltas: list[np.ndarray]  # error signals per non-input layer, (B, units)
    weights: list[np.ndarray]  # d loss / d W, batch mean
    biases: list[np.ndarray]  # d loss / d b, batch mean

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]


def backward(net: NetModel, activations: list[np.ndarray], target) -> Gradients:
    """Backpropagate error signals from the output layer to the first hidden layer.

    Output: ``T - O`` (softmax) or ``O(1-O)(T-O)`` (sigmoid).
    Hidden unit j: ``O_j (1 - O_j) * sum_k Err_k w_jk``.
    The loss gradient of ``w_rj`` is ``-Err_j O_r`` and of ``b_j`` is
    ``-Err_j``, averaged over the batch.
    """
    if len(activations) != len(net.weights) + 1:
        raise ShapeError("activations do not come from a forward pass through this net")
    T = np.atleast_2d(np.asarray(target, dtype=np.float64))
    O = activations[-1]
    if T.shape != O.shape:
        raise ShapeError(f"target shape {T.shape} does not match output shape {O.shape}")
    if net.output == SOFTMAX:
        err = T - O
    else:
        err = O * (1.0 - O) * (T - O)
    deltas = [err]
    for layer in range(len(net.weights) - 1, 0, -1):
        H = activations[layer]
        err = H * (1.0 - H) * (err @ net.weights[layer].T)
        deltas.append(err)
    deltas.reverse()
    B = T.shape[0]
    gW = [-(activations[i].T @ deltas[i]) / B for i in range(len(net.weights))]
    gb = [-deltas[i].sum(axis=0) / B for i in range(len(net.weights))]
    return Gradients(deltas, gW, gb)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0, lr, beta1, beta2, eps)


def adam_step(params, grads, state: AdamState) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new parameters and a new state."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimiser state differ in length")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"parameter {p.shape} and gradient {g.shape} shapes differ")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t, state.lr, b1, b2, state.eps)


def sgd_step(params, grads, lr: float) -> list[np.ndarray]:
    return [p - lr * g for p, g in zip(params, grads)]


@dataclass
class TrainSpec:
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    optimizer: str = ADAM
    output: str = SOFTMAX
    patience: int | None = None
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.optimizer not in (ADAM, SGD):
            raise ConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.output not in OUTPUT_MODES:
            raise ConfigError(f"output must be one of {OUTPUT_MODES}, got {self.output!r}")
        if self.patience is not None and not 0 < self.validation_fraction < 1:
            raise ConfigError("validation_fraction must be in (0, 1) when patience is set")


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _training_arrays(data):
    X = getattr(data, "meta_features", None)
    if X is None:
        data.check_clean()
        X = data.features
    return np.asarray(X, dtype=np.float64), np.asarray(data.labels, dtype=np.int64), data.n_classes


def train_net(train, spec: TrainSpec | None = None, layers=None) -> NetModel:
    """Mini-batch training from a seeded Xavier start.

    ``train`` is a Dataset or a MetaDataset. ``layers`` defaults to one hidden
    layer of 16 units. With ``spec.patience`` set, a seeded validation slice is
    held back and the parameters with the best validation loss are returned
    once it has not improved for ``patience`` epochs.
    """
    spec = spec or TrainSpec()
    X, y, C = _training_arrays(train)
    n, d = X.shape
    layers = [d, 16, C] if layers is None else [int(s) for s in layers]
    if len(layers) < 3:
        raise ConfigError(f"need at least one hidden layer, got layer sizes {layers}")
    if layers[0] != d or layers[-1] != C:
        raise ConfigError(f"layer sizes {layers} do not match {d} input features and {C} classes")
    if n == 0:
        raise PreconditionError("cannot train on an empty dataset")

    init_seed, shuffle_seed = np.random.SeedSequence(spec.seed).generate_state(2)
    net = init_net(layers, int(init_seed), spec.output)
    rng = np.random.default_rng(int(shuffle_seed))
    T = one_hot(y, C)

    fit_idx, val_idx = np.arange(n), None
    if spec.patience is not None and n >= 2:
        perm = rng.permutation(n)
        n_val = max(1, int(round(n * spec.validation_fraction)))
        val_idx, fit_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])

    params = net.params()
    state = AdamState.zeros_like(params, spec.learning_rate, spec.beta1, spec.beta2, spec.eps)
    best = (np.inf, params, 0)
    # overflow is caught below as a non-finite loss and reported with its epoch
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for epoch in range(1, spec.epochs + 1):
            order = fit_idx[rng.permutation(fit_idx.shape[0])]
            for start in range(0, order.shape[0], spec.batch_size):
                b = order[start:start + spec.batch_size]
                acts, _ = forward(net, X[b])
                grads = backward(net, acts, T[b]).params()
                if spec.optimizer == ADAM:
                    params, state = adam_step(params, grads, state)
                else:
                    params = sgd_step(params, grads, spec.learning_rate)
                net = net.with_params(params)
            train_loss = loss(net, forward(net, X[fit_idx])[1], T[fit_idx])
            if not np.isfinite(train_loss) or not all(np.all(np.isfinite(p)) for p in params):
                raise TrainingError(f"network training diverged at epoch {epoch}")
            if val_idx is not None:
                val_loss = loss(net, forward(net, X[val_idx])[1], T[val_idx])
                if val_loss < best[0]:
                    best = (val_loss, params, epoch)
                elif epoch - best[2] >= spec.patience:
                    logger.info("early stop at epoch %d, best epoch %d", epoch, best[2])
                    net = net.with_params(best[1])
                    break
    net.final_loss = loss(net, forward(net, X[fit_idx])[1], T[fit_idx])
    return net


def predict_net(net: NetModel, rows) -> tuple[np.ndarray, np.ndarray]:
    """Class ids (argmax, ties to the lowest id) and output probability vectors.

    In sigmoid mode the sigmoid outputs are normalised to sum to one.
    """
    _, out = forward(net, rows)
    out = np.atleast_2d(out)
    if net.output == SIGMOID_OUT:
        out = out / out.sum(axis=1, keepdims=True)
    classes = np.argmax(out, axis=1)
    if np.ndim(rows) == 1:
        return classes[:1], out[0]
    return classes, out
