"""Tour of the statevector simulator: gates, circuits, measurements.

Run with: python demos/01_quantum_simulator.py
"""

import numpy as np

from qscale.sim import (
    GateSpec,
    apply_circuit,
    apply_gate,
    expectation_z,
    expectation_z_all,
    init_zero_state,
)


def main() -> None:
    print("== single-qubit rotations ==")
    state = init_zero_state(1)
    print(f"|0>                 amplitudes: {state.amplitudes}")
    flipped = apply_gate(state, GateSpec("RY", 0, angle=np.pi))
    print(f"RY(pi)|0>           amplitudes: {np.round(flipped.amplitudes, 12)}")
    print(f"<Z> before: {expectation_z(state, 0):+.3f}   after: "
          f"{expectation_z(flipped, 0):+.3f}")

    print()
    print("== a Bell pair from RY + CNOT ==")
    circuit = [
        GateSpec("RY", 0, angle=np.pi / 2),  # equal superposition on qubit 0
        GateSpec("CNOT", 1, control=0),      # copy it onto qubit 1
    ]
    bell = apply_circuit(init_zero_state(2), circuit)
    print(f"amplitudes: {np.round(bell.amplitudes, 6)}")
    print(f"per-qubit <Z>: {np.round(expectation_z_all(bell), 12)}")
    probs = np.abs(bell.amplitudes) ** 2
    print(f"outcome probabilities |00>,|10>,|01>,|11>: {np.round(probs, 6)}")

    print()
    print("== states are values: applying a gate never mutates the input ==")
    before = init_zero_state(1)
    _ = apply_gate(before, GateSpec("RX", 0, angle=1.0))
    print(f"original state still |0>: {before.amplitudes}")

    print()
    print("== rotation angles land where the algebra says ==")
    theta = np.pi / 3
    rotated = apply_gate(init_zero_state(1), GateSpec("RY", 0, angle=theta))
    print(f"<Z> after RY({theta:.4f}) = {expectation_z(rotated, 0):.6f}")
    print(f"cos(theta)            = {np.cos(theta):.6f}")


if __name__ == "__main__":
    main()
