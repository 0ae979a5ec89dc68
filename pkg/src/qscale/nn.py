"""From-scratch neural building blocks: dense layers, LSTM, losses, optimizers.

Everything operates on plain float64 numpy arrays and returns exact
analytic gradients.  The LSTM follows the classic gate equations

    f_t = sigmoid(W_f . [h_prev, x_t] + b_f)
    i_t = sigmoid(W_i . [h_prev, x_t] + b_i)
    g_t = tanh(W_c . [h_prev, x_t] + b_c)
    c_t = f_t * c_prev + i_t * g_t
    o_t = sigmoid(W_o . [h_prev, x_t] + b_o)
    h_t = o_t * tanh(c_t)

with the hidden state concatenated before the input.  Weights initialise
uniformly in [-1/sqrt(fan_in), +1/sqrt(fan_in)] from a caller-provided
generator, so a fixed seed reproduces training bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError

ACTIVATIONS = ("sigmoid", "tanh", "relu", "identity")
LOSS_KINDS = ("l1", "mse")
OPTIMIZER_KINDS = ("sgd", "adam", "rmsprop")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
RMSPROP_ALPHA = 0.99
RMSPROP_EPS = 1e-8


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form avoids overflow for large negative inputs
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "identity":
        return z
    raise ConfigurationError(f"unknown activation {name!r}")


def _activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """d activation / d z, from the cached pre-activation z and output a."""
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a**2
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "identity":
        return np.ones_like(z)
    raise ConfigurationError(f"unknown activation {name!r}")


# ---------------------------------------------------------------------------
# dense feed-forward


@dataclass
class DenseLayer:
    weights: np.ndarray  # [n_out, n_in]
    bias: np.ndarray  # [n_out]
    activation: str = "identity"

    def __post_init__(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ConfigurationError("dense layer weight/bias shapes disagree")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


def dense_layer(
    rng: np.random.Generator, n_in: int, n_out: int, activation: str = "identity"
) -> DenseLayer:
    bound = 1.0 / np.sqrt(n_in)
    return DenseLayer(
        weights=rng.uniform(-bound, bound, (n_out, n_in)),
        bias=rng.uniform(-bound, bound, n_out),
        activation=activation,
    )


def dense_forward(layer: DenseLayer, x: np.ndarray) -> tuple[np.ndarray, tuple]:
    z = layer.weights @ x + layer.bias
    a = _activate(layer.activation, z)
    return a, (x, z, a)


def ffnn_forward(layers: Sequence[DenseLayer], x: np.ndarray) -> tuple[np.ndarray, list]:
    """Run a stack of dense layers; caches are consumed by ffnn_backward."""
    caches = []
    a = np.asarray(x, dtype=float)
    for layer in layers:
        if a.shape != (layer.n_in,):
            raise ConfigurationError(
                f"layer expects input of size {layer.n_in}, got shape {a.shape}"
            )
        a, cache = dense_forward(layer, a)
        caches.append(cache)
    return a, caches


def ffnn_backward(
    layers: Sequence[DenseLayer], caches: list, d_out: np.ndarray
) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Backpropagate d_out; returns per-layer (dW, db) and the input gradient."""
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore
    delta = np.asarray(d_out, dtype=float)
    for idx in range(len(layers) - 1, -1, -1):
        x, z, a = caches[idx]
        delta = delta * _activation_grad(layers[idx].activation, z, a)
        grads[idx] = (np.outer(delta, x), delta.copy())
        delta = layers[idx].weights.T @ delta
    return grads, delta


# ---------------------------------------------------------------------------
# LSTM


@dataclass
class LSTMLayerParams:
    w_f: np.ndarray
    w_i: np.ndarray
    w_c: np.ndarray
    w_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_f.shape[1] - self.w_f.shape[0]


def lstm_layer(rng: np.random.Generator, n_in: int, hidden: int) -> LSTMLayerParams:
    bound = 1.0 / np.sqrt(n_in + hidden)
    def mat() -> np.ndarray:
        return rng.uniform(-bound, bound, (hidden, n_in + hidden))
    def vec() -> np.ndarray:
        return rng.uniform(-bound, bound, hidden)
    return LSTMLayerParams(mat(), mat(), mat(), mat(), vec(), vec(), vec(), vec())


def lstm_cell_forward(
    layer: LSTMLayerParams, x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray
) -> tuple[np.ndarray, np.ndarray, tuple]:
    concat = np.concatenate([h_prev, x_t])
    f = sigmoid(layer.w_f @ concat + layer.b_f)
    i = sigmoid(layer.w_i @ concat + layer.b_i)
    g = np.tanh(layer.w_c @ concat + layer.b_c)
    o = sigmoid(layer.w_o @ concat + layer.b_o)
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    cache = (concat, c_prev, f, i, g, o, tc)
    return h, c, cache


def lstm_cell_backward(
    layer: LSTMLayerParams, cache: tuple, dh: np.ndarray, dc: np.ndarray
) -> tuple[dict, np.ndarray, np.ndarray, np.ndarray]:
    """Returns (param grads, dx, dh_prev, dc_prev)."""
    concat, c_prev, f, i, g, o, tc = cache
    hidden = f.size
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc**2)
    df = dc * c_prev
    di = dc * g
    dg = dc * i
    dc_prev = dc * f
    dz_f = df * f * (1.0 - f)
    dz_i = di * i * (1.0 - i)
    dz_g = dg * (1.0 - g**2)
    dz_o = do * o * (1.0 - o)
    grads = {
        "w_f": np.outer(dz_f, concat),
        "w_i": np.outer(dz_i, concat),
        "w_c": np.outer(dz_g, concat),
        "w_o": np.outer(dz_o, concat),
        "b_f": dz_f,
        "b_i": dz_i,
        "b_c": dz_g,
        "b_o": dz_o,
    }
    dconcat = (
        layer.w_f.T @ dz_f
        + layer.w_i.T @ dz_i
        + layer.w_c.T @ dz_g
        + layer.w_o.T @ dz_o
    )
    return grads, dconcat[hidden:], dconcat[:hidden], dc_prev


@dataclass
class LSTMParams:
    """Stacked LSTM layers plus a linear readout on the final hidden state."""

    layers: list[LSTMLayerParams]
    readout: DenseLayer


def lstm_stack(
    rng: np.random.Generator, n_features: int, hidden: int, n_layers: int
) -> LSTMParams:
    layers = []
    size_in = n_features
    for _ in range(n_layers):
        layers.append(lstm_layer(rng, size_in, hidden))
        size_in = hidden
    return LSTMParams(layers=layers, readout=dense_layer(rng, hidden, 1, "identity"))


def lstm_sequence_forward(
    params: LSTMParams, window: np.ndarray
) -> tuple[float, dict]:
    """Run a [T, n_features] window through the stack; predict from h_T."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 2:
        raise ConfigurationError(f"window must be [T, features], got {window.shape}")
    steps, _ = window.shape
    if steps < 1:
        raise ConfigurationError("window must contain at least one step")
    n_layers = len(params.layers)
    hidden = params.layers[0].hidden_size
    h = [np.zeros(hidden) for _ in range(n_layers)]
    c = [np.zeros(hidden) for _ in range(n_layers)]
    caches = [[None] * n_layers for _ in range(steps)]
    for t in range(steps):
        x = window[t]
        for k, layer in enumerate(params.layers):
            h[k], c[k], caches[t][k] = lstm_cell_forward(layer, x, h[k], c[k])
            x = h[k]
    pred, read_cache = dense_forward(params.readout, h[-1])
    return float(pred[0]), {"caches": caches, "read": read_cache, "steps": steps}


def lstm_param_arrays(params: LSTMParams) -> list[tuple[str, np.ndarray]]:
    """Stable (name, array) ordering used for flattening and checkpoints."""
    named = []
    for k, layer in enumerate(params.layers):
        for field_name in ("w_f", "b_f", "w_i", "b_i", "w_c", "b_c", "w_o", "b_o"):
            named.append((f"layer{k}.{field_name}", getattr(layer, field_name)))
    named.append(("readout.weights", params.readout.weights))
    named.append(("readout.bias", params.readout.bias))
    return named


def lstm_sequence_backward(
    params: LSTMParams, forward_state: dict, d_pred: float
) -> list[tuple[str, np.ndarray]]:
    """Backpropagation through time; gradient order matches lstm_param_arrays."""
    caches = forward_state["caches"]
    steps = forward_state["steps"]
    n_layers = len(params.layers)
    hidden = params.layers[0].hidden_size

    read_grads, dh_last = ffnn_backward(
        [params.readout], [forward_state["read"]], np.array([float(d_pred)])
    )
    acc = {
        name: np.zeros_like(arr) for name, arr in lstm_param_arrays(params)
    }
    acc["readout.weights"] += read_grads[0][0]
    acc["readout.bias"] += read_grads[0][1]

    dh = [np.zeros(hidden) for _ in range(n_layers)]
    dc = [np.zeros(hidden) for _ in range(n_layers)]
    dh[-1] = dh_last
    for t in range(steps - 1, -1, -1):
        dx_from_above = None
        for k in range(n_layers - 1, -1, -1):
            dh_k = dh[k] if dx_from_above is None else dh[k] + dx_from_above
            grads, dx, dh_prev, dc_prev = lstm_cell_backward(
                params.layers[k], caches[t][k], dh_k, dc[k]
            )
            for field_name, g in grads.items():
                acc[f"layer{k}.{field_name}"] += g
            dh[k] = dh_prev
            dc[k] = dc_prev
            dx_from_above = dx
    return [(name, acc[name]) for name, _ in lstm_param_arrays(params)]


# ---------------------------------------------------------------------------
# losses


def loss_value(kind: str, preds: np.ndarray, targets: np.ndarray) -> float:
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if preds.shape != targets.shape:
        raise ConfigurationError("prediction/target shapes disagree")
    if preds.size == 0:
        raise ConfigurationError("loss of an empty batch is undefined")
    if kind == "l1":
        return float(np.mean(np.abs(preds - targets)))
    if kind == "mse":
        return float(np.mean((preds - targets) ** 2))
    raise ConfigurationError(f"unknown loss kind {kind!r}")


def loss_grad(kind: str, preds: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Gradient of the mean loss w.r.t. each prediction (L1 subgradient at 0 is 0)."""
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n = preds.size
    if kind == "l1":
        return np.sign(preds - targets) / n
    if kind == "mse":
        return 2.0 * (preds - targets) / n
    raise ConfigurationError(f"unknown loss kind {kind!r}")


def rmse(preds: np.ndarray, targets: np.ndarray) -> float:
    return float(np.sqrt(loss_value("mse", preds, targets)))


# ---------------------------------------------------------------------------
# optimizers


@dataclass
class OptimizerState:
    kind: str
    learning_rate: float
    step: int = 0
    m: Optional[np.ndarray] = None  # adam first moment
    v: Optional[np.ndarray] = None  # adam second moment / rmsprop square average


def init_optimizer(kind: str, learning_rate: float, n_params: int) -> OptimizerState:
    if kind not in OPTIMIZER_KINDS:
        raise ConfigurationError(f"unknown optimizer {kind!r}")
    if learning_rate <= 0:
        raise ConfigurationError("learning rate must be positive")
    state = OptimizerState(kind=kind, learning_rate=learning_rate)
    if kind == "adam":
        state.m = np.zeros(n_params)
        state.v = np.zeros(n_params)
    elif kind == "rmsprop":
        state.v = np.zeros(n_params)
    return state


def optimizer_step(
    state: OptimizerState, params: np.ndarray, grads: np.ndarray
) -> np.ndarray:
    """One update; returns the new parameter vector (state advances in place)."""
    if params.shape != grads.shape:
        raise ConfigurationError("param/gradient shapes disagree")
    lr = state.learning_rate
    state.step += 1
    if state.kind == "sgd":
        return params - lr * grads
    if state.kind == "rmsprop":
        state.v = RMSPROP_ALPHA * state.v + (1.0 - RMSPROP_ALPHA) * grads**2
        return params - lr * grads / (np.sqrt(state.v) + RMSPROP_EPS)
    # adam, bias-corrected
    state.m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grads
    state.v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grads**2
    m_hat = state.m / (1.0 - ADAM_BETA1**state.step)
    v_hat = state.v / (1.0 - ADAM_BETA2**state.step)
    return params - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


# ---------------------------------------------------------------------------
# flattening and checkpoints


def flatten_arrays(arrays: Sequence[np.ndarray]) -> np.ndarray:
    if not arrays:
        return np.zeros(0)
    return np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays])


def unflatten_like(vector: np.ndarray, arrays: Sequence[np.ndarray]) -> list[np.ndarray]:
    total = sum(a.size for a in arrays)
    if vector.size != total:
        raise ConfigurationError(
            f"vector of size {vector.size} does not match templates ({total})"
        )
    out = []
    cursor = 0
    for a in arrays:
        out.append(vector[cursor : cursor + a.size].reshape(a.shape))
        cursor += a.size
    return out


def save_checkpoint(path: str | Path, named_arrays: dict[str, np.ndarray]) -> None:
    """JSON checkpoint; float64 values survive the round trip exactly."""
    payload = {
        "schema_version": 1,
        "arrays": {
            name: {"shape": list(arr.shape), "values": arr.ravel().tolist()}
            for name, arr in named_arrays.items()
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    payload = json.loads(Path(path).read_text())
    out = {}
    for name, entry in payload["arrays"].items():
        out[name] = np.array(entry["values"], dtype=float).reshape(entry["shape"])
    return out
