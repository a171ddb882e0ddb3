"""Hybrid quantum-classical physics-informed networks on an exact statevector simulator."""

from .circuit import CircuitSpec
from .hybrid_model import ClassicalPINN, HybridModel, TrainConfig, fit, transfer_protocol
from .physics import PhysicsConfig
from .statevector import StateVector, new_zero_state

__all__ = [
    "CircuitSpec",
    "ClassicalPINN",
    "HybridModel",
    "PhysicsConfig",
    "StateVector",
    "TrainConfig",
    "fit",
    "new_zero_state",
    "transfer_protocol",
]

__version__ = "0.1.0"
