"""Angle encoding + hardware-efficient ansatz, Pauli-Z readout and shot sampling.

Parameter layout is ``[layer][qubit][RY, RZ]``.  Within a layer each qubit gets
RY then RZ (time order), followed by the CNOT cascade ``CNOT(k, k+1)`` for
ascending ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .statevector import (
    StateVector,
    cnot_inplace,
    rz_inplace,
    ry_inplace,
    zero_amplitudes,
    _check_qubit,
    _check_size,
)


@dataclass(frozen=True)
class CircuitSpec:
    n_qubits: int = 8
    n_layers: int = 3
    entangle: bool = True  # False gives the product-state ablation

    def __post_init__(self) -> None:
        _check_size(self.n_qubits)
        if self.n_layers < 0:
            raise ValueError("n_layers must be >= 0")

    @property
    def n_params(self) -> int:
        return 2 * self.n_qubits * self.n_layers

    @property
    def gate_count(self) -> int:
        """Variational gates only (encoding excluded): L * (2n rotations + n-1 CNOTs)."""
        n_cnot = self.n_qubits - 1 if self.entangle else 0
        return self.n_layers * (2 * self.n_qubits + n_cnot)

    def to_config(self) -> dict[str, object]:
        return {"n_qubits": self.n_qubits, "n_layers": self.n_layers, "entangle": self.entangle}

    @classmethod
    def from_config(cls, cfg: dict) -> "CircuitSpec":
        unknown = set(cfg) - {"n_qubits", "n_layers", "entangle"}
        if unknown:
            raise KeyError(f"unknown circuit keys: {sorted(unknown)}")
        return cls(
            n_qubits=int(cfg.get("n_qubits", 8)),
            n_layers=int(cfg.get("n_layers", 3)),
            entangle=_as_bool(cfg.get("entangle", True)),
        )


def _as_bool(v) -> bool:
    if isinstance(v, str):
        return v.strip().lower() in {"1", "true", "yes", "on"}
    return bool(v)


def _check_len(arr: np.ndarray, n: int, what: str) -> None:
    if arr.shape[-1] != n:
        raise ValueError(f"{what} has length {arr.shape[-1]}, expected {n}")


# ---------------------------------------------------------------------------
# batched evaluation


def run(spec: CircuitSpec, z: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Final amplitudes for a batch of encodings ``z (..., n)`` and angles ``params (..., p)``.

    Leading dimensions of ``z`` and ``params`` broadcast against each other.
    """
    z = np.asarray(z, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    _check_len(z, spec.n_qubits, "encoding")
    _check_len(params, spec.n_params, "params")
    n = spec.n_qubits
    batch = np.broadcast_shapes(z.shape[:-1], params.shape[:-1])
    amps = zero_amplitudes(n, batch)
    for k in range(n):
        ry_inplace(amps, n, k, z[..., k])
    _ansatz_inplace(amps, spec, params)
    return amps


def _ansatz_inplace(amps: np.ndarray, spec: CircuitSpec, params: np.ndarray) -> None:
    n = spec.n_qubits
    j = 0
    for _ in range(spec.n_layers):
        for k in range(n):
            ry_inplace(amps, n, k, params[..., j])
            rz_inplace(amps, n, k, params[..., j + 1])
            j += 2
        if spec.entangle:
            for k in range(n - 1):
                cnot_inplace(amps, n, k, k + 1)


@lru_cache(maxsize=None)
def z_signs(n_qubits: int) -> np.ndarray:
    """(2^n, n) matrix of Z eigenvalues (+1 for bit 0, -1 for bit 1)."""
    idx = np.arange(1 << n_qubits)[:, None]
    bits = (idx >> np.arange(n_qubits)[None, :]) & 1
    return 1.0 - 2.0 * bits


def expectations(spec: CircuitSpec, z: np.ndarray, params: np.ndarray) -> np.ndarray:
    amps = run(spec, z, params)
    return (amps.real**2 + amps.imag**2) @ z_signs(spec.n_qubits)


# ---------------------------------------------------------------------------
# single-state API


def encode(spec: CircuitSpec, z) -> StateVector:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (spec.n_qubits,):
        raise ValueError(f"encoding must have shape ({spec.n_qubits},), got {z.shape}")
    amps = zero_amplitudes(spec.n_qubits)
    for k in range(spec.n_qubits):
        ry_inplace(amps, spec.n_qubits, k, z[k])
    return StateVector(spec.n_qubits, amps)


def apply_ansatz(state: StateVector, spec: CircuitSpec, params) -> StateVector:
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (spec.n_params,):
        raise ValueError(f"params must have shape ({spec.n_params},), got {params.shape}")
    if state.n_qubits != spec.n_qubits:
        raise ValueError("state and circuit qubit counts differ")
    out = state.copy()
    _ansatz_inplace(out.amplitudes, spec, params)
    return out


def expect_z_all(state: StateVector) -> np.ndarray:
    return state.probabilities() @ z_signs(state.n_qubits)


def observable_variance_z(state: StateVector, q: int) -> float:
    """Var[Z_q] = <Z^2> - <Z>^2 = 1 - <Z_q>^2."""
    _check_qubit(state.n_qubits, q)
    ez = expect_z_all(state)[q]
    return float(max(0.0, 1.0 - ez * ez))


def sample_shots(state: StateVector, n_shots: int, seed: int) -> np.ndarray:
    """Draw ``n_shots`` joint computational-basis outcomes; returns (n_shots, n) bits.

    Sampling is over the full 2^n outcome distribution, so correlations between
    qubits are kept.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    probs = state.probabilities()
    total = probs.sum()
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"state not normalised (sum |a|^2 = {total})")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(probs / total)
    cdf[-1] = 1.0
    outcomes = np.searchsorted(cdf, rng.random(n_shots), side="right")
    return ((outcomes[:, None] >> np.arange(state.n_qubits)[None, :]) & 1).astype(np.int8)


def bits_to_spins(bits: np.ndarray) -> np.ndarray:
    """Map measured bits to Z eigenvalues: 0 -> +1, 1 -> -1."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)
