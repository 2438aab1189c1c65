"""haarforge: scalable pseudorandom quantum state generators.

A library + CLI that prepares pseudorandom quantum states (PRS) and
pseudorandom function-like state (PRFS) isometries by rotating qubits
one at a time with symmetric-Beta angles and applying dyadic random
phases, all driven by a finite-precision deterministic sampling stack.
Ships with a statistical verification harness (sampler laws, Haar-moment
agreement, perturbation bounds, circuit/direct path equivalence).
"""

__version__ = "0.1.0"

from .numerics import FixedPointValue, round_down, round_half_up
from .generator import PrecisionConfig, StateParams
from .tape import RandomTape, TapeExhausted

__all__ = [
    "FixedPointValue",
    "PrecisionConfig",
    "RandomTape",
    "StateParams",
    "TapeExhausted",
    "round_down",
    "round_half_up",
    "__version__",
]
