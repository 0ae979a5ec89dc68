"""Variational circuit templates, evaluation, and parameter-shift gradients.

A :class:`CircuitTemplate` is an ordered list of segments.  An embedding
segment encodes classical inputs as rotation angles (optionally through an
``arctan`` squashing transform); an ansatz segment consumes a contiguous
slice of a flat trainable-parameter vector.  Supported ansatz families:

* ``strongly_entangling`` - per qubit a RZ/RY/RZ rotation triple followed
  by a ring of CNOTs whose control-target distance grows with the layer
  index (``r = (layer mod (n-1)) + 1``).
* ``ring_rx`` - one RX rotation per qubit followed by a nearest-neighbour
  CNOT ring.

Gradients use the exact two-point parameter-shift rule (shift pi/2,
coefficient 1/2), applied both to ansatz parameters and to encoded inputs;
for an ``arctan`` embedding the chain-rule factor 1/(1+x^2) is included.
Evaluations of the shifted circuits run batched over a shared ``[rows,
2**n]`` amplitude array, which yields results identical to evaluating each
circuit on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np

from . import sim
from .errors import ConfigurationError
from .sim import GateSpec

AXES = ("X", "Y")
TRANSFORMS = ("identity", "arctan")
ANSATZ_KINDS = ("strongly_entangling", "ring_rx")

SHIFT = math.pi / 2.0


@dataclass(frozen=True)
class Embedding:
    """Angle-encode selected input features, one qubit per feature."""

    axis: str = "Y"
    feature_slots: tuple[int, ...] = ()
    transform: str = "identity"

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise ConfigurationError(f"embedding axis must be one of {AXES}")
        if self.transform not in TRANSFORMS:
            raise ConfigurationError(f"transform must be one of {TRANSFORMS}")


@dataclass(frozen=True)
class Ansatz:
    """A trainable block consuming params[param_slots[0]:param_slots[1]]."""

    kind: str
    n_layers: int
    param_slots: tuple[int, int]

    def __post_init__(self) -> None:
        if self.kind not in ANSATZ_KINDS:
            raise ConfigurationError(f"ansatz kind must be one of {ANSATZ_KINDS}")
        if self.n_layers < 1:
            raise ConfigurationError("ansatz needs at least one layer")
        start, stop = self.param_slots
        if start < 0 or stop < start:
            raise ConfigurationError(f"bad param slot range {self.param_slots}")


Segment = Union[Embedding, Ansatz]


def ansatz_param_count(kind: str, n_qubits: int, n_layers: int) -> int:
    per_layer = 3 * n_qubits if kind == "strongly_entangling" else n_qubits
    return n_layers * per_layer


@dataclass(frozen=True)
class CircuitTemplate:
    """Ordered embedding/ansatz segments on a fixed number of qubits."""

    n_qubits: int
    input_dim: int
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        if not 1 <= self.n_qubits <= sim.MAX_QUBITS:
            raise ConfigurationError(
                f"n_qubits must be in [1, {sim.MAX_QUBITS}], got {self.n_qubits}"
            )
        if self.input_dim < 0:
            raise ConfigurationError("input_dim must be non-negative")
        if not self.segments:
            raise ConfigurationError("template needs at least one segment")
        ranges = []
        for seg in self.segments:
            if isinstance(seg, Embedding):
                if len(seg.feature_slots) > self.n_qubits:
                    raise ConfigurationError(
                        f"{len(seg.feature_slots)} features exceed "
                        f"{self.n_qubits} qubits"
                    )
                for slot in seg.feature_slots:
                    if not 0 <= slot < self.input_dim:
                        raise ConfigurationError(
                            f"feature slot {slot} out of range for "
                            f"input_dim {self.input_dim}"
                        )
            elif isinstance(seg, Ansatz):
                start, stop = seg.param_slots
                expected = ansatz_param_count(seg.kind, self.n_qubits, seg.n_layers)
                if stop - start != expected:
                    raise ConfigurationError(
                        f"{seg.kind} with {seg.n_layers} layers on "
                        f"{self.n_qubits} qubits needs {expected} params, "
                        f"slot range holds {stop - start}"
                    )
                ranges.append((start, stop))
            else:
                raise ConfigurationError(f"unknown segment type {type(seg).__name__}")
        ranges.sort()
        cursor = 0
        for start, stop in ranges:
            if start != cursor:
                raise ConfigurationError(
                    "ansatz param slots must tile [0, total_params) without "
                    f"gaps or overlaps; found range ({start}, {stop}) after {cursor}"
                )
            cursor = stop

    @property
    def total_params(self) -> int:
        return sum(
            seg.param_slots[1] - seg.param_slots[0]
            for seg in self.segments
            if isinstance(seg, Ansatz)
        )


# ---------------------------------------------------------------------------
# gate-list construction


def _transform_angles(values: np.ndarray, transform: str) -> np.ndarray:
    return np.arctan(values) if transform == "arctan" else values


def build_angle_embedding(
    features: Sequence[float],
    axis: str = "Y",
    transform: str = "identity",
    n_qubits: Optional[int] = None,
) -> list[GateSpec]:
    """One rotation per feature, feature i on qubit i."""
    if axis not in AXES:
        raise ConfigurationError(f"embedding axis must be one of {AXES}")
    if transform not in TRANSFORMS:
        raise ConfigurationError(f"transform must be one of {TRANSFORMS}")
    feats = np.asarray(features, dtype=float)
    if n_qubits is not None and feats.size > n_qubits:
        raise ConfigurationError(
            f"{feats.size} features exceed {n_qubits} qubits"
        )
    angles = _transform_angles(feats, transform)
    kind = "R" + axis
    return [GateSpec(kind, q, angle=float(a)) for q, a in enumerate(angles)]


def build_strongly_entangling(
    n_qubits: int, n_layers: int, params: Sequence[float]
) -> list[GateSpec]:
    """RZ/RY/RZ triples per qubit, then a CNOT ring with layer-dependent range."""
    params = np.asarray(params, dtype=float)
    expected = ansatz_param_count("strongly_entangling", n_qubits, n_layers)
    if params.size != expected:
        raise ConfigurationError(
            f"expected {expected} params for strongly entangling "
            f"({n_qubits} qubits, {n_layers} layers), got {params.size}"
        )
    gates: list[GateSpec] = []
    k = 0
    for layer in range(n_layers):
        for q in range(n_qubits):
            gates.append(GateSpec("RZ", q, angle=float(params[k])))
            gates.append(GateSpec("RY", q, angle=float(params[k + 1])))
            gates.append(GateSpec("RZ", q, angle=float(params[k + 2])))
            k += 3
        if n_qubits >= 2:
            reach = (layer % (n_qubits - 1)) + 1
            for q in range(n_qubits):
                gates.append(GateSpec("CNOT", (q + reach) % n_qubits, control=q))
    return gates


def build_ring_rx_ansatz(
    n_qubits: int, n_layers: int, params: Sequence[float]
) -> list[GateSpec]:
    """One RX per qubit, then a nearest-neighbour CNOT ring, per layer."""
    params = np.asarray(params, dtype=float)
    expected = ansatz_param_count("ring_rx", n_qubits, n_layers)
    if params.size != expected:
        raise ConfigurationError(
            f"expected {expected} params for ring RX "
            f"({n_qubits} qubits, {n_layers} layers), got {params.size}"
        )
    gates: list[GateSpec] = []
    k = 0
    for _layer in range(n_layers):
        for q in range(n_qubits):
            gates.append(GateSpec("RX", q, angle=float(params[k])))
            k += 1
        if n_qubits >= 2:
            for q in range(n_qubits):
                gates.append(GateSpec("CNOT", (q + 1) % n_qubits, control=q))
    return gates


_ANSATZ_BUILDERS = {
    "strongly_entangling": build_strongly_entangling,
    "ring_rx": build_ring_rx_ansatz,
}


def _check_args(template: CircuitTemplate, params, inputs) -> tuple[np.ndarray, np.ndarray]:
    params = np.asarray(params, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    if params.shape != (template.total_params,):
        raise ConfigurationError(
            f"expected {template.total_params} params, got shape {params.shape}"
        )
    if inputs.shape != (template.input_dim,):
        raise ConfigurationError(
            f"expected {template.input_dim} inputs, got shape {inputs.shape}"
        )
    return params, inputs


def template_gates(
    template: CircuitTemplate, params: Sequence[float], inputs: Sequence[float]
) -> list[GateSpec]:
    """Lower a template to a concrete gate list for given params and inputs."""
    params, inputs = _check_args(template, params, inputs)
    gates: list[GateSpec] = []
    for seg in template.segments:
        if isinstance(seg, Embedding):
            gates.extend(
                build_angle_embedding(
                    inputs[list(seg.feature_slots)],
                    seg.axis,
                    seg.transform,
                    template.n_qubits,
                )
            )
        else:
            start, stop = seg.param_slots
            gates.extend(
                _ANSATZ_BUILDERS[seg.kind](
                    template.n_qubits, seg.n_layers, params[start:stop]
                )
            )
    return gates


def evaluate(
    template: CircuitTemplate, params: Sequence[float], inputs: Sequence[float]
) -> np.ndarray:
    """Run the circuit from |0...0> and return all Pauli-Z expectations."""
    gates = template_gates(template, params, inputs)
    state = sim.apply_circuit(sim.init_zero_state(template.n_qubits), gates)
    return sim.expectation_z_all(state)


# ---------------------------------------------------------------------------
# lowered representation: ops referencing a flat angle table, used for the
# batched evaluation of shifted circuits

_ROT, _CNOT = 0, 1


@lru_cache(maxsize=None)
def _lowered(template: CircuitTemplate):
    """ops: (_ROT, kind, target, angle_idx) | (_CNOT, control, target);
    sources: per angle slot, ("p", param_idx) or ("x", input_idx, transform)."""
    ops: list[tuple] = []
    sources: list[tuple] = []
    for seg in template.segments:
        if isinstance(seg, Embedding):
            kind = "R" + seg.axis
            for q, slot in enumerate(seg.feature_slots):
                ops.append((_ROT, kind, q, len(sources)))
                sources.append(("x", slot, seg.transform))
        else:
            start, stop = seg.param_slots
            structural = _ANSATZ_BUILDERS[seg.kind](
                template.n_qubits, seg.n_layers, np.arange(stop - start, dtype=float)
            )
            for gate in structural:
                if gate.kind == "CNOT":
                    ops.append((_CNOT, gate.control, gate.target))
                else:
                    # the structural build used the local param index as angle
                    ops.append((_ROT, gate.kind, gate.target, len(sources)))
                    sources.append(("p", start + int(gate.angle)))
    return tuple(ops), tuple(sources)


def _angle_table(
    template: CircuitTemplate, params: np.ndarray, inputs: np.ndarray
) -> np.ndarray:
    _, sources = _lowered(template)
    angles = np.empty(len(sources), dtype=float)
    for a, src in enumerate(sources):
        if src[0] == "p":
            angles[a] = params[src[1]]
        else:
            _, slot, transform = src
            x = inputs[slot]
            angles[a] = math.atan(x) if transform == "arctan" else x
    return angles


def _run_rows(template: CircuitTemplate, angle_rows: np.ndarray) -> np.ndarray:
    """Evaluate many circuits sharing the template structure.

    ``angle_rows`` has shape [rows, n_angles]; returns [rows, n_qubits]
    Pauli-Z expectations.
    """
    ops, _ = _lowered(template)
    rows = angle_rows.shape[0]
    dim = 1 << template.n_qubits
    amps = np.zeros((rows, dim), dtype=np.complex128)
    amps[:, 0] = 1.0
    for op in ops:
        if op[0] == _ROT:
            _, kind, target, angle_idx = op
            sim._rotate_rows(amps, kind, angle_rows[:, angle_idx], target)
        else:
            _, control, target = op
            sim._cnot_rows(amps, control, target)
    return np.stack(
        [sim._expect_z_rows(amps, q) for q in range(template.n_qubits)], axis=1
    )


def parameter_shift_grad_batch(
    template: CircuitTemplate,
    params: Sequence[float],
    inputs_batch: np.ndarray,
    output_weights_batch: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row gradients of f_b = sum_q w[b, q] * <Z_q>(params, inputs[b]).

    Returns ``(grad_params [B, P], grad_inputs [B, input_dim])``.  All
    shifted circuits for the whole batch are evaluated in one batched run.
    """
    params = np.asarray(params, dtype=float)
    inputs_batch = np.atleast_2d(np.asarray(inputs_batch, dtype=float))
    weights = np.atleast_2d(np.asarray(output_weights_batch, dtype=float))
    if params.shape != (template.total_params,):
        raise ConfigurationError(
            f"expected {template.total_params} params, got shape {params.shape}"
        )
    if inputs_batch.shape[1] != template.input_dim:
        raise ConfigurationError(
            f"expected inputs with {template.input_dim} columns, "
            f"got {inputs_batch.shape[1]}"
        )
    if weights.shape != (inputs_batch.shape[0], template.n_qubits):
        raise ConfigurationError(
            "output weights must have one row per input row and one column "
            f"per qubit; got {weights.shape}"
        )
    batch = inputs_batch.shape[0]
    _, sources = _lowered(template)
    n_angles = len(sources)
    grad_params = np.zeros((batch, template.total_params))
    grad_inputs = np.zeros((batch, template.input_dim))
    if n_angles == 0 or not np.any(weights):
        return grad_params, grad_inputs

    base = np.stack(
        [_angle_table(template, params, inputs_batch[b]) for b in range(batch)]
    )
    # rows: for each sample, 2 * n_angles shifted copies (+pi/2 then -pi/2)
    rows = np.repeat(base, 2 * n_angles, axis=0)
    offsets = np.zeros((2 * n_angles, n_angles))
    ar = np.arange(n_angles)
    offsets[2 * ar, ar] = SHIFT
    offsets[2 * ar + 1, ar] = -SHIFT
    rows += np.tile(offsets, (batch, 1))
    exps = _run_rows(template, rows)  # [batch * 2A, n_qubits]
    f = np.einsum("bq,baq->ba", weights, exps.reshape(batch, 2 * n_angles, -1))
    dangle = 0.5 * (f[:, 0::2] - f[:, 1::2])  # [batch, n_angles]

    for a, src in enumerate(sources):
        if src[0] == "p":
            grad_params[:, src[1]] += dangle[:, a]
        else:
            _, slot, transform = src
            if transform == "arctan":
                chain = 1.0 / (1.0 + inputs_batch[:, slot] ** 2)
            else:
                chain = 1.0
            grad_inputs[:, slot] += dangle[:, a] * chain
    return grad_params, grad_inputs


def parameter_shift_grad(
    template: CircuitTemplate,
    params: Sequence[float],
    inputs: Sequence[float],
    output_weights: Optional[Sequence[float]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradient of f = sum_q w_q * <Z_q> w.r.t. params and inputs.

    ``output_weights`` defaults to reading qubit 0 only.  The same rule
    differentiates encoded inputs (with the arctan chain rule when that
    transform is active); an input appearing in several embedding segments
    accumulates all its shift terms.
    """
    params, inputs = _check_args(template, params, inputs)
    if output_weights is None:
        weights = np.zeros(template.n_qubits)
        weights[0] = 1.0
    else:
        weights = np.asarray(output_weights, dtype=float)
        if weights.shape != (template.n_qubits,):
            raise ConfigurationError(
                f"output_weights must have length {template.n_qubits}"
            )
    gp, gx = parameter_shift_grad_batch(
        template, params, inputs[None, :], weights[None, :]
    )
    return gp[0], gx[0]


# ---------------------------------------------------------------------------
# ready-made templates and parameter initialisation


def linear_vqr_template(
    n_qubits: int, n_layers: int, axis: str = "Y", transform: str = "arctan"
) -> CircuitTemplate:
    """Single embedding followed by one strongly entangling block."""
    total = ansatz_param_count("strongly_entangling", n_qubits, n_layers)
    return CircuitTemplate(
        n_qubits,
        n_qubits,
        (
            Embedding(axis, tuple(range(n_qubits)), transform),
            Ansatz("strongly_entangling", n_layers, (0, total)),
        ),
    )


def nonlinear_vqr_template(
    n_qubits: int, n_layers: int, axis: str = "Y", transform: str = "arctan"
) -> CircuitTemplate:
    """Data re-uploading: n_layers repetitions of [embedding; one SE layer]."""
    per = ansatz_param_count("strongly_entangling", n_qubits, 1)
    segments: list[Segment] = []
    start = 0
    for _ in range(n_layers):
        segments.append(Embedding(axis, tuple(range(n_qubits)), transform))
        segments.append(Ansatz("strongly_entangling", 1, (start, start + per)))
        start += per
    return CircuitTemplate(n_qubits, n_qubits, tuple(segments))


def ring_rx_template(
    n_qubits: int, n_layers: int, transform: str = "identity"
) -> CircuitTemplate:
    """RX angle embedding followed by a ring-RX ansatz (recurrent-cell circuit)."""
    total = ansatz_param_count("ring_rx", n_qubits, n_layers)
    return CircuitTemplate(
        n_qubits,
        n_qubits,
        (
            Embedding("X", tuple(range(n_qubits)), transform),
            Ansatz("ring_rx", n_layers, (0, total)),
        ),
    )


def init_params(template: CircuitTemplate, rng: np.random.Generator) -> np.ndarray:
    """Trainable angles drawn uniformly from [0, 2*pi)."""
    return rng.uniform(0.0, 2.0 * math.pi, template.total_params)


# ---------------------------------------------------------------------------
# JSON round trip


def template_to_dict(template: CircuitTemplate) -> dict:
    segments = []
    for seg in template.segments:
        if isinstance(seg, Embedding):
            segments.append(
                {
                    "type": "embedding",
                    "axis": seg.axis,
                    "feature_slots": list(seg.feature_slots),
                    "transform": seg.transform,
                }
            )
        else:
            segments.append(
                {
                    "type": "ansatz",
                    "kind": seg.kind,
                    "n_layers": seg.n_layers,
                    "param_slots": list(seg.param_slots),
                }
            )
    return {
        "n_qubits": template.n_qubits,
        "input_dim": template.input_dim,
        "segments": segments,
    }


def template_from_dict(payload: dict) -> CircuitTemplate:
    segments: list[Segment] = []
    for seg in payload["segments"]:
        if seg["type"] == "embedding":
            segments.append(
                Embedding(seg["axis"], tuple(seg["feature_slots"]), seg["transform"])
            )
        elif seg["type"] == "ansatz":
            segments.append(
                Ansatz(seg["kind"], seg["n_layers"], tuple(seg["param_slots"]))
            )
        else:
            raise ConfigurationError(f"unknown segment type {seg['type']!r}")
    return CircuitTemplate(payload["n_qubits"], payload["input_dim"], tuple(segments))
