"""Dense statevector simulation for the RY / RZ / CNOT gate set.

Bit convention: qubit ``k`` is bit ``k`` of the basis-state index, so qubit 0
is the least significant bit (little-endian).  ``|q1 q0> = |10>`` with qubit 0
set is index 1.

All kernels accept amplitude arrays with arbitrary leading batch dimensions,
``(..., 2**n)``, and per-row rotation angles broadcastable to the batch shape.
The :class:`StateVector` wrapper is the single-state public surface.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_QUBITS = 14


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"expected {1 << self.n_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())


def _check_size(n_qubits: int) -> None:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")


def _check_qubit(n_qubits: int, q: int) -> None:
    if not 0 <= q < n_qubits:
        raise IndexError(f"qubit {q} out of range for {n_qubits} qubits")


def zero_amplitudes(n_qubits: int, batch_shape: tuple[int, ...] = ()) -> np.ndarray:
    _check_size(n_qubits)
    amps = np.zeros(batch_shape + (1 << n_qubits,), dtype=np.complex128)
    amps[..., 0] = 1.0
    return amps


def new_zero_state(n_qubits: int) -> StateVector:
    return StateVector(n_qubits, zero_amplitudes(n_qubits))


# ---------------------------------------------------------------------------
# batched kernels (operate in place on (..., 2**n) arrays)


def _split(amps: np.ndarray, n_qubits: int, q: int) -> np.ndarray:
    # (..., high, bit_q, low) view; bit_q axis selects the pair partner
    return amps.reshape(amps.shape[:-1] + (1 << (n_qubits - 1 - q), 2, 1 << q))


def ry_inplace(amps: np.ndarray, n_qubits: int, q: int, angle) -> None:
    view = _split(amps, n_qubits, q)
    half = 0.5 * np.asarray(angle, dtype=np.float64)
    c = np.cos(half)[..., None, None]
    s = np.sin(half)[..., None, None]
    a0 = view[..., 0, :].copy()
    a1 = view[..., 1, :]
    view[..., 0, :] = c * a0 - s * a1
    view[..., 1, :] = s * a0 + c * a1


def rz_inplace(amps: np.ndarray, n_qubits: int, q: int, angle) -> None:
    view = _split(amps, n_qubits, q)
    half = 0.5 * np.asarray(angle, dtype=np.float64)
    phase = np.exp(-1j * half)[..., None, None]
    view[..., 0, :] *= phase
    view[..., 1, :] *= np.conj(phase)


@lru_cache(maxsize=None)
def _cnot_pairs(n_qubits: int, control: int, target: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(1 << n_qubits)
    sel = ((idx >> control) & 1 == 1) & ((idx >> target) & 1 == 0)
    lo = idx[sel]
    return lo, lo | (1 << target)


def cnot_inplace(amps: np.ndarray, n_qubits: int, control: int, target: int) -> None:
    lo, hi = _cnot_pairs(n_qubits, control, target)
    tmp = amps[..., lo].copy()
    amps[..., lo] = amps[..., hi]
    amps[..., hi] = tmp


# ---------------------------------------------------------------------------
# single-state API


def apply_ry(state: StateVector, q: int, angle: float) -> StateVector:
    _check_qubit(state.n_qubits, q)
    out = state.copy()
    ry_inplace(out.amplitudes, out.n_qubits, q, angle)
    return out


def apply_rz(state: StateVector, q: int, angle: float) -> StateVector:
    _check_qubit(state.n_qubits, q)
    out = state.copy()
    rz_inplace(out.amplitudes, out.n_qubits, q, angle)
    return out


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(state.n_qubits, control)
    _check_qubit(state.n_qubits, target)
    if control == target:
        raise ValueError("control and target must differ")
    out = state.copy()
    cnot_inplace(out.amplitudes, out.n_qubits, control, target)
    return out


# ---------------------------------------------------------------------------
# dense reference (tests only)

_I2 = np.eye(2, dtype=np.complex128)
_P0 = np.diag([1.0, 0.0]).astype(np.complex128)
_P1 = np.diag([0.0, 1.0]).astype(np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)


def ry_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz_matrix(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def embed(ops: dict[int, np.ndarray], n_qubits: int) -> np.ndarray:
    """Kronecker product with qubit ``n-1`` leftmost (little-endian indices)."""
    out = np.ones((1, 1), dtype=np.complex128)
    for q in reversed(range(n_qubits)):
        out = np.kron(out, ops.get(q, _I2))
    return out


def cnot_matrix(n_qubits: int, control: int, target: int) -> np.ndarray:
    return embed({control: _P0}, n_qubits) + embed({control: _P1, target: _X}, n_qubits)


def dense_matrix_oracle(circuit, inputs, params) -> StateVector:
    """Evolve |0...0> by the explicit 2^n x 2^n circuit unitary.

    Independent of the strided kernels above; used to certify them.
    """
    n = circuit.n_qubits
    if n > 3:
        raise ValueError("dense oracle limited to n_qubits <= 3")
    inputs = np.asarray(inputs, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    if inputs.shape != (n,) or params.shape != (circuit.n_params,):
        raise ValueError("input/parameter length mismatch")
    unitary = embed({k: ry_matrix(inputs[k]) for k in range(n)}, n)
    layout = params.reshape(circuit.n_layers, n, 2)
    for layer in layout:
        rot = embed({k: rz_matrix(layer[k, 1]) @ ry_matrix(layer[k, 0]) for k in range(n)}, n)
        unitary = rot @ unitary
        if circuit.entangle:
            for k in range(n - 1):
                unitary = cnot_matrix(n, k, k + 1) @ unitary
    psi0 = np.zeros(1 << n, dtype=np.complex128)
    psi0[0] = 1.0
    return StateVector(n, unitary @ psi0)
