"""The four calibration models behind one train/predict interface.

* ``ffnn``  - feed-forward network on hourly feature vectors.
* ``lstm``  - stacked LSTM over short windows of past hours.
* ``vqr``   - variational quantum regressor: angle-embedded features, a
  strongly entangling ansatz, qubit-0 readout.
* ``qlstm`` - LSTM cell whose six internal transformations run through
  variational circuits, glued by small linear maps.

Every model consumes windows shaped ``[batch, window, n_features]`` (the
feed-forward models use window length 1) and predicts the reference PM2.5
concentration in ug/m3.  Inputs and targets are scaled to [-1, +1] with
range maps fitted on the training partition; training happens in scaled
space and losses are reported in original units through the exact affine
conversion (an L1 loss scales by the target half-span, an MSE loss by its
square).  Quantum parameters train by the parameter-shift rule, classical
ones by backpropagation, mixed via the chain rule.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import nn, vqc
from .data import RangeScaler, apply_scaler, invert_scaler
from .errors import ConfigurationError, TrainingDivergedError

MODEL_KINDS = ("ffnn", "lstm", "vqr", "qlstm")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    learning_rate: float
    optimizer: str = "sgd"
    loss: str = "l1"
    batch_size: int = 10
    window: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ConfigurationError("epochs must be non-negative")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning rate must be positive")
        if self.optimizer not in nn.OPTIMIZER_KINDS:
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.loss not in nn.LOSS_KINDS:
            raise ConfigurationError(f"unknown loss {self.loss!r}")
        if self.batch_size < 1:
            raise ConfigurationError("batch size must be at least 1")
        if self.window < 1:
            raise ConfigurationError("window must be at least 1")


# tuned defaults per model family
_DEFAULT_CONFIGS = {
    "ffnn": TrainConfig(200, 1e-4, "sgd", "l1", 10, 1),
    "vqr": TrainConfig(200, 1e-2, "adam", "mse", 10, 1),
    "lstm": TrainConfig(300, 1e-3, "rmsprop", "l1", 10, 3),
    "qlstm": TrainConfig(400, 1e-2, "adam", "l1", 10, 5),
}

_DEFAULT_OPTIONS = {
    "ffnn": {
        "hidden_sizes": (30, 15, 5),
        "activation": "tanh",
        "features": ("pm25", "temp", "hum", "press"),
    },
    "vqr": {
        "n_qubits": 4,
        "n_layers": 4,
        "architecture": "linear",
        "transform": "arctan",
        "features": ("pm25", "temp", "hum", "press"),
    },
    "lstm": {"hidden_size": 15, "n_layers": 2, "features": ("pm25",)},
    "qlstm": {
        "n_qubits": 5,
        "n_layers": 7,
        "hidden_size": 15,
        "shared_fc_out": True,
        "features": ("pm25",),
    },
}


def default_config(kind: str) -> TrainConfig:
    if kind not in MODEL_KINDS:
        raise ConfigurationError(f"unknown model kind {kind!r}")
    return _DEFAULT_CONFIGS[kind]


def default_options(kind: str) -> dict:
    if kind not in MODEL_KINDS:
        raise ConfigurationError(f"unknown model kind {kind!r}")
    return dict(_DEFAULT_OPTIONS[kind])


def _loss_to_original_units(kind: str, scaled_loss: float, halfspan: float) -> float:
    return scaled_loss * (halfspan if kind == "l1" else halfspan**2)


class _ModelBase:
    """Shared scaling, flattening, and prediction plumbing."""

    kind: str = ""
    feature_names: tuple[str, ...] = ()
    window: int = 1
    input_scaler: RangeScaler
    target_scaler: RangeScaler
    options: dict

    def param_arrays(self) -> list[tuple[str, np.ndarray]]:
        raise NotImplementedError

    def _loss_and_grad_scaled(self, x_scaled, y_scaled, loss_kind):
        raise NotImplementedError

    def _predict_scaled(self, x_scaled: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- parameters -------------------------------------------------------

    def get_flat(self) -> np.ndarray:
        return nn.flatten_arrays([a for _, a in self.param_arrays()])

    def set_flat(self, vector: np.ndarray) -> None:
        arrays = [a for _, a in self.param_arrays()]
        for current, new in zip(arrays, nn.unflatten_like(vector, arrays)):
            np.copyto(current, new)

    def param_count(self) -> int:
        return int(sum(a.size for _, a in self.param_arrays()))

    def param_breakdown(self) -> dict[str, int]:
        groups: dict[str, int] = {}
        for name, arr in self.param_arrays():
            group = name.split(".", 1)[0]
            groups[group] = groups.get(group, 0) + int(arr.size)
        return groups

    # -- scaling ----------------------------------------------------------

    def scale_windows(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 3 or x.shape[2] != len(self.feature_names):
            raise ConfigurationError(
                f"expected windows [batch, T, {len(self.feature_names)}], "
                f"got shape {x.shape}"
            )
        if x.shape[1] != self.window:
            raise ConfigurationError(
                f"{self.kind} expects window length {self.window}, got {x.shape[1]}"
            )
        return apply_scaler(self.input_scaler, x)

    def scale_targets(self, y: np.ndarray) -> np.ndarray:
        return apply_scaler(self.target_scaler, np.asarray(y, dtype=float))

    @property
    def target_halfspan(self) -> float:
        return float(self.target_scaler.halfspan[0])

    # -- prediction -------------------------------------------------------

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Calibrated PM2.5 in ug/m3 for raw windows [batch, T, features]."""
        preds_scaled = self._predict_scaled(self.scale_windows(x))
        return invert_scaler(self.target_scaler, preds_scaled)


# ---------------------------------------------------------------------------
# feed-forward


class FFNNModel(_ModelBase):
    kind = "ffnn"

    def __init__(
        self,
        feature_names: Sequence[str],
        input_scaler: RangeScaler,
        target_scaler: RangeScaler,
        hidden_sizes: Sequence[int] = (30, 15, 5),
        activation: str = "tanh",
        seed: int = 0,
    ):
        self.feature_names = tuple(feature_names)
        self.window = 1
        self.input_scaler = input_scaler
        self.target_scaler = target_scaler
        self.options = {
            "hidden_sizes": tuple(int(h) for h in hidden_sizes),
            "activation": activation,
            "features": self.feature_names,
        }
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 10]))
        sizes = [len(self.feature_names), *self.options["hidden_sizes"], 1]
        self.layers = [
            nn.dense_layer(
                rng,
                sizes[k],
                sizes[k + 1],
                activation if k < len(sizes) - 2 else "identity",
            )
            for k in range(len(sizes) - 1)
        ]

    def param_arrays(self):
        named = []
        for k, layer in enumerate(self.layers):
            named.append((f"dense{k}.weights", layer.weights))
            named.append((f"dense{k}.bias", layer.bias))
        return named

    def _predict_scaled(self, x_scaled):
        return np.array(
            [nn.ffnn_forward(self.layers, row[0])[0][0] for row in x_scaled]
        )

    def _loss_and_grad_scaled(self, x_scaled, y_scaled, loss_kind):
        batch = x_scaled.shape[0]
        preds = np.empty(batch)
        caches = []
        for b in range(batch):
            out, cache = nn.ffnn_forward(self.layers, x_scaled[b, 0])
            preds[b] = out[0]
            caches.append(cache)
        d_preds = nn.loss_grad(loss_kind, preds, y_scaled)
        accum = [np.zeros_like(a) for _, a in self.param_arrays()]
        for b in range(batch):
            grads, _ = nn.ffnn_backward(self.layers, caches[b], np.array([d_preds[b]]))
            flat_pairs = [g for pair in grads for g in pair]
            for acc, g in zip(accum, flat_pairs):
                acc += g
        return nn.loss_value(loss_kind, preds, y_scaled), nn.flatten_arrays(accum)


# ---------------------------------------------------------------------------
# LSTM


class LSTMModel(_ModelBase):
    kind = "lstm"

    def __init__(
        self,
        feature_names: Sequence[str],
        input_scaler: RangeScaler,
        target_scaler: RangeScaler,
        hidden_size: int = 15,
        n_layers: int = 2,
        window: int = 3,
        seed: int = 0,
    ):
        self.feature_names = tuple(feature_names)
        self.window = int(window)
        self.input_scaler = input_scaler
        self.target_scaler = target_scaler
        self.options = {
            "hidden_size": int(hidden_size),
            "n_layers": int(n_layers),
            "features": self.feature_names,
        }
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 11]))
        self.params = nn.lstm_stack(
            rng, len(self.feature_names), int(hidden_size), int(n_layers)
        )

    def param_arrays(self):
        return nn.lstm_param_arrays(self.params)

    def _predict_scaled(self, x_scaled):
        return np.array(
            [nn.lstm_sequence_forward(self.params, w)[0] for w in x_scaled]
        )

    def _loss_and_grad_scaled(self, x_scaled, y_scaled, loss_kind):
        batch = x_scaled.shape[0]
        preds = np.empty(batch)
        states = []
        for b in range(batch):
            preds[b], state = nn.lstm_sequence_forward(self.params, x_scaled[b])
            states.append(state)
        d_preds = nn.loss_grad(loss_kind, preds, y_scaled)
        accum = [np.zeros_like(a) for _, a in self.param_arrays()]
        for b in range(batch):
            grads = nn.lstm_sequence_backward(self.params, states[b], d_preds[b])
            for acc, (_, g) in zip(accum, grads):
                acc += g
        return nn.loss_value(loss_kind, preds, y_scaled), nn.flatten_arrays(accum)


# ---------------------------------------------------------------------------
# variational quantum regressor


class VQRModel(_ModelBase):
    kind = "vqr"

    def __init__(
        self,
        feature_names: Sequence[str],
        input_scaler: RangeScaler,
        target_scaler: RangeScaler,
        n_qubits: int = 4,
        n_layers: int = 4,
        architecture: str = "linear",
        transform: str = "arctan",
        seed: int = 0,
    ):
        self.feature_names = tuple(feature_names)
        if len(self.feature_names) != n_qubits:
            raise ConfigurationError(
                f"vqr encodes one feature per qubit: {len(self.feature_names)} "
                f"features vs {n_qubits} qubits"
            )
        if architecture not in ("linear", "nonlinear"):
            raise ConfigurationError("vqr architecture must be linear or nonlinear")
        self.window = 1
        self.input_scaler = input_scaler
        self.target_scaler = target_scaler
        self.options = {
            "n_qubits": int(n_qubits),
            "n_layers": int(n_layers),
            "architecture": architecture,
            "transform": transform,
            "features": self.feature_names,
        }
        builder = (
            vqc.linear_vqr_template
            if architecture == "linear"
            else vqc.nonlinear_vqr_template
        )
        self.template = builder(int(n_qubits), int(n_layers), transform=transform)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 12]))
        self.params = vqc.init_params(self.template, rng)
        self._readout = np.zeros(int(n_qubits))
        self._readout[0] = 1.0

    def param_arrays(self):
        return [("quantum.angles", self.params)]

    def predict_one(self, features: Sequence[float]) -> float:
        """Calibrate a single raw feature vector."""
        x = np.asarray(features, dtype=float)[None, None, :]
        return float(self.predict(x)[0])

    def raw_expectation(self, x_scaled_row: np.ndarray) -> float:
        """Qubit-0 readout in [-1, 1] for one already-scaled feature vector."""
        return float(vqc.evaluate(self.template, self.params, x_scaled_row)[0])

    def _predict_scaled(self, x_scaled):
        if x_scaled.shape[0] == 0:
            return np.zeros(0)
        angles = np.stack(
            [
                vqc._angle_table(self.template, self.params, row[0])
                for row in x_scaled
            ]
        )
        return vqc._run_rows(self.template, angles)[:, 0]

    def _loss_and_grad_scaled(self, x_scaled, y_scaled, loss_kind):
        preds = self._predict_scaled(x_scaled)
        d_preds = nn.loss_grad(loss_kind, preds, y_scaled)
        weights = np.zeros((x_scaled.shape[0], self.template.n_qubits))
        weights[:, 0] = d_preds
        grad_params, _ = vqc.parameter_shift_grad_batch(
            self.template, self.params, x_scaled[:, 0, :], weights
        )
        return nn.loss_value(loss_kind, preds, y_scaled), grad_params.sum(axis=0)


# ---------------------------------------------------------------------------
# quantum LSTM


class QLSTMModel(_ModelBase):
    """LSTM cell whose gates run through six ring-RX variational circuits.

    One linear map (``fc_in``) compresses [h_prev, x_t] to one angle per
    qubit; circuits 1-4 drive the forget/input/update/output gates through
    a shared expansion (``fc_out``) back to the hidden size; a dedicated
    projection feeds circuits 5-6, which produce the next hidden state and
    the per-step prediction.
    """

    kind = "qlstm"
    GATE_NAMES = ("forget", "input", "update", "output", "hidden", "readout")

    def __init__(
        self,
        feature_names: Sequence[str],
        input_scaler: RangeScaler,
        target_scaler: RangeScaler,
        n_qubits: int = 5,
        n_layers: int = 7,
        hidden_size: int = 15,
        window: int = 5,
        shared_fc_out: bool = True,
        seed: int = 0,
    ):
        self.feature_names = tuple(feature_names)
        self.window = int(window)
        self.input_scaler = input_scaler
        self.target_scaler = target_scaler
        self.options = {
            "n_qubits": int(n_qubits),
            "n_layers": int(n_layers),
            "hidden_size": int(hidden_size),
            "shared_fc_out": bool(shared_fc_out),
            "features": self.feature_names,
        }
        self.template = vqc.ring_rx_template(int(n_qubits), int(n_layers))
        n, hidden = int(n_qubits), int(hidden_size)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 13]))
        n_features = len(self.feature_names)
        self.fc_in = nn.dense_layer(rng, hidden + n_features, n, "identity")
        self.proj = nn.dense_layer(rng, hidden, n, "identity")
        if shared_fc_out:
            self.fc_out = [nn.dense_layer(rng, n, hidden, "identity")]
        else:
            self.fc_out = [
                nn.dense_layer(rng, n, hidden, "identity") for _ in range(6)
            ]
        self.readout = nn.dense_layer(rng, hidden, 1, "identity")
        self.vqc_params = [vqc.init_params(self.template, rng) for _ in range(6)]

    @property
    def hidden_size(self) -> int:
        return self.options["hidden_size"]

    @property
    def n_qubits(self) -> int:
        return self.options["n_qubits"]

    def _fc_out(self, gate_index: int) -> nn.DenseLayer:
        return self.fc_out[0] if len(self.fc_out) == 1 else self.fc_out[gate_index]

    def param_arrays(self):
        named = [
            ("fc_in.weights", self.fc_in.weights),
            ("fc_in.bias", self.fc_in.bias),
            ("projection.weights", self.proj.weights),
            ("projection.bias", self.proj.bias),
        ]
        for k, layer in enumerate(self.fc_out):
            named.append((f"fc_out{k}.weights", layer.weights))
            named.append((f"fc_out{k}.bias", layer.bias))
        named.append(("readout.weights", self.readout.weights))
        named.append(("readout.bias", self.readout.bias))
        for k, params in enumerate(self.vqc_params):
            named.append((f"quantum.{self.GATE_NAMES[k]}", params))
        return named

    # -- cell -------------------------------------------------------------

    def cell_forward(
        self, x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, float, dict]:
        """One time step on scaled inputs; returns (h, c, y, cache)."""
        concat = np.concatenate([h_prev, np.asarray(x_t, dtype=float)])
        v = self.fc_in.weights @ concat + self.fc_in.bias
        e = [vqc.evaluate(self.template, self.vqc_params[k], v) for k in range(4)]
        z = [self._fc_out(k).weights @ e[k] + self._fc_out(k).bias for k in range(4)]
        f, i, o = nn.sigmoid(z[0]), nn.sigmoid(z[1]), nn.sigmoid(z[3])
        g = np.tanh(z[2])
        c = f * c_prev + i * g
        tc = np.tanh(c)
        u = o * tc
        w = self.proj.weights @ u + self.proj.bias
        e5 = vqc.evaluate(self.template, self.vqc_params[4], w)
        h = self._fc_out(4).weights @ e5 + self._fc_out(4).bias
        e6 = vqc.evaluate(self.template, self.vqc_params[5], w)
        q = self._fc_out(5).weights @ e6 + self._fc_out(5).bias
        y = float((self.readout.weights @ q + self.readout.bias)[0])
        cache = {
            "concat": concat,
            "v": v,
            "e": e,
            "f": f,
            "i": i,
            "g": g,
            "o": o,
            "c_prev": c_prev,
            "c": c,
            "tc": tc,
            "u": u,
            "w": w,
            "e5": e5,
            "e6": e6,
            "q": q,
        }
        return h, c, y, cache

    def sequence_forward(self, window_scaled: np.ndarray) -> tuple[float, list[dict]]:
        hidden = self.hidden_size
        h = np.zeros(hidden)
        c = np.zeros(hidden)
        caches = []
        y = 0.0
        for t in range(window_scaled.shape[0]):
            h, c, y, cache = self.cell_forward(window_scaled[t], h, c)
            caches.append(cache)
        return y, caches

    def _predict_scaled(self, x_scaled):
        return np.array([self.sequence_forward(w)[0] for w in x_scaled])

    # -- backward ---------------------------------------------------------

    def _backward_sample(self, caches: list[dict], d_pred: float, accum: dict) -> None:
        """Backpropagation through time for one window, into accum arrays."""
        hidden = self.hidden_size
        steps = len(caches)
        dh = np.zeros(hidden)
        dc = np.zeros(hidden)
        shared = len(self.fc_out) == 1

        def fc_out_key(k: int) -> str:
            return "fc_out0" if shared else f"fc_out{k}"

        for t in range(steps - 1, -1, -1):
            cache = caches[t]
            dw = np.zeros(self.n_qubits)
            if t == steps - 1 and d_pred != 0.0:
                accum["readout.weights"] += d_pred * cache["q"][None, :]
                accum["readout.bias"] += d_pred
                dq = self.readout.weights[0] * d_pred
                accum[fc_out_key(5) + ".weights"] += np.outer(dq, cache["e6"])
                accum[fc_out_key(5) + ".bias"] += dq
                de6 = self._fc_out(5).weights.T @ dq
                g6, dw6 = vqc.parameter_shift_grad(
                    self.template, self.vqc_params[5], cache["w"], de6
                )
                accum["quantum." + self.GATE_NAMES[5]] += g6
                dw += dw6
            # hidden-state path through circuit 5
            if np.any(dh):
                accum[fc_out_key(4) + ".weights"] += np.outer(dh, cache["e5"])
                accum[fc_out_key(4) + ".bias"] += dh
                de5 = self._fc_out(4).weights.T @ dh
                g5, dw5 = vqc.parameter_shift_grad(
                    self.template, self.vqc_params[4], cache["w"], de5
                )
                accum["quantum." + self.GATE_NAMES[4]] += g5
                dw += dw5

            accum["projection.weights"] += np.outer(dw, cache["u"])
            accum["projection.bias"] += dw
            du = self.proj.weights.T @ dw

            do = du * cache["tc"]
            dc = dc + du * cache["o"] * (1.0 - cache["tc"] ** 2)
            df = dc * cache["c_prev"]
            di = dc * cache["g"]
            dg = dc * cache["i"]
            dc_prev = dc * cache["f"]

            dz = [
                df * cache["f"] * (1.0 - cache["f"]),
                di * cache["i"] * (1.0 - cache["i"]),
                dg * (1.0 - cache["g"] ** 2),
                do * cache["o"] * (1.0 - cache["o"]),
            ]
            dv = np.zeros(self.n_qubits)
            for k in range(4):
                accum[fc_out_key(k) + ".weights"] += np.outer(dz[k], cache["e"][k])
                accum[fc_out_key(k) + ".bias"] += dz[k]
                de_k = self._fc_out(k).weights.T @ dz[k]
                gk, dvk = vqc.parameter_shift_grad(
                    self.template, self.vqc_params[k], cache["v"], de_k
                )
                accum["quantum." + self.GATE_NAMES[k]] += gk
                dv += dvk

            accum["fc_in.weights"] += np.outer(dv, cache["concat"])
            accum["fc_in.bias"] += dv
            dconcat = self.fc_in.weights.T @ dv
            dh = dconcat[:hidden]
            dc = dc_prev

    def _loss_and_grad_scaled(self, x_scaled, y_scaled, loss_kind):
        batch = x_scaled.shape[0]
        preds = np.empty(batch)
        all_caches = []
        for b in range(batch):
            preds[b], caches = self.sequence_forward(x_scaled[b])
            all_caches.append(caches)
        d_preds = nn.loss_grad(loss_kind, preds, y_scaled)
        accum = {name: np.zeros_like(a) for name, a in self.param_arrays()}
        for b in range(batch):
            self._backward_sample(all_caches[b], d_preds[b], accum)
        flat = nn.flatten_arrays([accum[name] for name, _ in self.param_arrays()])
        return nn.loss_value(loss_kind, preds, y_scaled), flat


# ---------------------------------------------------------------------------
# construction, training, evaluation


def build_model(
    kind: str,
    feature_names: Sequence[str],
    input_scaler: RangeScaler,
    target_scaler: RangeScaler,
    options: Optional[dict] = None,
    window: int = 1,
    seed: int = 0,
):
    """Instantiate an untrained model of the given kind."""
    if kind not in MODEL_KINDS:
        raise ConfigurationError(f"unknown model kind {kind!r}")
    opts = default_options(kind)
    opts.update(options or {})
    opts.pop("features", None)
    if kind == "ffnn":
        return FFNNModel(
            feature_names,
            input_scaler,
            target_scaler,
            hidden_sizes=opts["hidden_sizes"],
            activation=opts.get("activation", "tanh"),
            seed=seed,
        )
    if kind == "lstm":
        return LSTMModel(
            feature_names,
            input_scaler,
            target_scaler,
            hidden_size=opts["hidden_size"],
            n_layers=opts["n_layers"],
            window=window,
            seed=seed,
        )
    if kind == "vqr":
        return VQRModel(
            feature_names,
            input_scaler,
            target_scaler,
            n_qubits=opts["n_qubits"],
            n_layers=opts["n_layers"],
            architecture=opts["architecture"],
            transform=opts.get("transform", "arctan"),
            seed=seed,
        )
    return QLSTMModel(
        feature_names,
        input_scaler,
        target_scaler,
        n_qubits=opts["n_qubits"],
        n_layers=opts["n_layers"],
        hidden_size=opts["hidden_size"],
        window=window,
        shared_fc_out=opts.get("shared_fc_out", True),
        seed=seed,
    )


def count_trainable_params(model) -> int:
    return model.param_count()


def hybrid_backward(model, x_raw: np.ndarray, y_raw: np.ndarray, loss_kind: str):
    """Mean loss over a raw batch and its gradient w.r.t. the flat parameters.

    Both are expressed in original units; the scaled-space loss the training
    loop minimises differs only by the constant target-span factor.
    """
    xs = model.scale_windows(np.asarray(x_raw, dtype=float))
    ys = model.scale_targets(np.asarray(y_raw, dtype=float))
    loss_scaled, grad = model._loss_and_grad_scaled(xs, ys, loss_kind)
    factor = model.target_halfspan if loss_kind == "l1" else model.target_halfspan**2
    return loss_scaled * factor, grad * factor


def train(
    model, x_raw: np.ndarray, y_raw: np.ndarray, config: TrainConfig
) -> tuple[object, list[float]]:
    """Mini-batch training; returns the model and per-epoch train losses (ug/m3)."""
    x_raw = np.asarray(x_raw, dtype=float)
    y_raw = np.asarray(y_raw, dtype=float)
    n = y_raw.size
    if n == 0:
        raise ConfigurationError("training set is empty")
    xs = model.scale_windows(x_raw)
    ys = model.scale_targets(y_raw)
    order_rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 99]))
    optimizer = nn.init_optimizer(
        config.optimizer, config.learning_rate, model.param_count()
    )
    history: list[float] = []
    halfspan = model.target_halfspan
    for epoch in range(config.epochs):
        order = order_rng.permutation(n)
        running = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss_scaled, grad = model._loss_and_grad_scaled(
                xs[batch], ys[batch], config.loss
            )
            if not (math.isfinite(loss_scaled) and np.all(np.isfinite(grad))):
                raise TrainingDivergedError(epoch)
            model.set_flat(nn.optimizer_step(optimizer, model.get_flat(), grad))
            running += loss_scaled * batch.size
        history.append(
            _loss_to_original_units(config.loss, running / n, halfspan)
        )
    return model, history


def evaluate_losses(model, x_raw: np.ndarray, y_raw: np.ndarray) -> dict[str, float]:
    """L1/MSE/RMSE between calibrated predictions and reference, in ug/m3."""
    preds = model.predict(x_raw)
    return {
        "l1": nn.loss_value("l1", preds, y_raw),
        "mse": nn.loss_value("mse", preds, y_raw),
        "rmse": nn.rmse(preds, y_raw),
    }


def fit_model(kind: str, dataset, config: TrainConfig, options: Optional[dict] = None):
    """Select features, window, fit scalers on the training rows, and train."""
    if kind in ("ffnn", "vqr") and config.window != 1:
        raise ConfigurationError(f"{kind} uses single-hour inputs; set window=1")
    opts = default_options(kind)
    opts.update(options or {})
    features = tuple(opts["features"])
    sub = dataset.select_features(features)
    from .data import fit_scaler, make_windows  # local import avoids a cycle

    x, y, _ = make_windows(sub, config.window)
    if y.size == 0:
        raise ConfigurationError(
            f"no {config.window}-hour windows fit in the training partition"
        )
    input_scaler = fit_scaler(sub.features, names=features)
    target_scaler = fit_scaler(sub.target, names=("ref_pm25",))
    model = build_model(
        kind,
        features,
        input_scaler,
        target_scaler,
        options=opts,
        window=config.window,
        seed=config.seed,
    )
    return train(model, x, y, config)


def predictions_rows(model, dataset) -> list[dict]:
    """Per-hour prediction rows (timestamp, raw, calibrated, reference)."""
    sub = dataset.select_features(model.feature_names)
    from .data import make_windows

    x, y, ends = make_windows(sub, model.window)
    if y.size == 0:
        return []
    preds = model.predict(x)
    raw_col = list(dataset.feature_names).index("pm25")
    raw_by_stamp = {int(t): float(v) for t, v in zip(dataset.timestamps, dataset.features[:, raw_col])}
    return [
        {
            "timestamp": int(t),
            "raw_pm25": raw_by_stamp[int(t)],
            "calibrated_pm25": float(p),
            "reference_pm25": float(ref),
        }
        for t, p, ref in zip(ends, preds, y)
    ]


# ---------------------------------------------------------------------------
# checkpoints


def save_model(model, path: str | Path) -> None:
    payload = {
        "schema_version": 1,
        "kind": model.kind,
        "window": model.window,
        "options": _jsonable(model.options),
        "feature_names": list(model.feature_names),
        "input_scaler": {
            "minimum": model.input_scaler.minimum.tolist(),
            "maximum": model.input_scaler.maximum.tolist(),
        },
        "target_scaler": {
            "minimum": model.target_scaler.minimum.tolist(),
            "maximum": model.target_scaler.maximum.tolist(),
        },
        "arrays": {
            name: {"shape": list(arr.shape), "values": arr.ravel().tolist()}
            for name, arr in model.param_arrays()
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_model(path: str | Path):
    payload = json.loads(Path(path).read_text())
    input_scaler = RangeScaler(
        np.array(payload["input_scaler"]["minimum"]),
        np.array(payload["input_scaler"]["maximum"]),
    )
    target_scaler = RangeScaler(
        np.array(payload["target_scaler"]["minimum"]),
        np.array(payload["target_scaler"]["maximum"]),
    )
    options = dict(payload["options"])
    options["features"] = tuple(payload["feature_names"])
    if "hidden_sizes" in options:
        options["hidden_sizes"] = tuple(options["hidden_sizes"])
    model = build_model(
        payload["kind"],
        payload["feature_names"],
        input_scaler,
        target_scaler,
        options=options,
        window=payload["window"],
    )
    arrays = dict(model.param_arrays())
    for name, entry in payload["arrays"].items():
        if name not in arrays:
            raise ConfigurationError(f"checkpoint array {name!r} unknown to {model.kind}")
        np.copyto(arrays[name], np.array(entry["values"]).reshape(entry["shape"]))
    return model


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def config_to_dict(config: TrainConfig) -> dict:
    return asdict(config)


def config_from_dict(payload: dict, kind: Optional[str] = None) -> TrainConfig:
    base = config_to_dict(default_config(kind)) if kind else {}
    base.update(payload or {})
    known = {f for f in TrainConfig.__dataclass_fields__}
    unknown = set(base) - known
    if unknown:
        raise ConfigurationError(f"unknown training fields {sorted(unknown)}")
    return TrainConfig(**base)
