"""Gate-level statevector simulation of the state-preparation circuits.

This is the independent cross-validation path: the amplitude stage
writes each branch's dyadic rotation angle into an ancilla register,
rotates the next data qubit through a ladder of controlled y-rotations,
and uncomputes; the phase stage XORs each leaf's phase word into an
ancilla, applies one phase-shift gate per ancilla bit, and uncomputes.

Register layout (most significant wire first): input wires (m), data
wires (n), ancilla wires.  The classical-function gates are applied as
their net per-basis-branch action (an XOR permutation); the function's
scratch output register is never materialized as qubits, since the
compute/uncompute pair leaves it untouched on every branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .generator import PrecisionConfig, _theta_numerator
from .oracle import amp_index, phase_index, prfs_index
from .sampling import randomness_budget_beta, sample_rounded_beta
from .tape import RandomTape

# Cross-validation only needs small instances; float64 tolerances in the
# test batteries are sized for these caps.
MAX_LAMBDA_PRIME = 24
MAX_WIRES = 26

ANCILLA_LEAK_TOL = 1e-20


@dataclass(frozen=True)
class RegisterLayout:
    """Wire bookkeeping for one circuit run."""

    m: int
    n: int
    ancilla_bits: int

    @property
    def wires(self) -> int:
        return self.m + self.n + self.ancilla_bits

    @property
    def dim(self) -> int:
        return 1 << self.wires

    def data_wire(self, t: int) -> int:
        return self.m + t

    def ancilla_wire(self, k: int) -> int:
        """Wire of ancilla bit k, 1-based MSB-first."""
        return self.m + self.n + k - 1

    def check(self):
        if self.ancilla_bits < 1 or self.wires > MAX_WIRES:
            raise ValueError(f"register of {self.wires} wires out of range")


@dataclass(frozen=True)
class Gate:
    """One circuit operation.

    kinds: "ry" (target, angle), "phase" (target, angle), "cry"
    (control, target, angle), "oracle_compute"/"oracle_uncompute"
    (level, words) where words[x << t | z] is the ancilla pattern XORed
    onto branch (x, z).
    """

    kind: str
    target: int | None = None
    control: int | None = None
    angle: float | None = None
    level: int | None = None
    words: tuple[int, ...] | None = None

    def describe(self) -> str:
        if self.kind in ("ry", "phase"):
            return f"{self.kind}(angle={self.angle:.6g}) on wire {self.target}"
        if self.kind == "cry":
            return (f"cry(angle={self.angle:.6g}) control {self.control} "
                    f"target {self.target}")
        return f"{self.kind} level {self.level}"


def apply_gate(state: np.ndarray, gate: Gate, layout: RegisterLayout) -> np.ndarray:
    """Apply one gate in place and return the state."""
    if len(state) != layout.dim:
        raise ValueError("state dimension does not match the layout")
    if gate.kind == "ry":
        _check_wire(gate.target, layout)
        return _apply_ry(state, layout.wires, gate.target, gate.angle)
    if gate.kind == "phase":
        _check_wire(gate.target, layout)
        return _apply_phase(state, layout.wires, gate.target, gate.angle)
    if gate.kind == "cry":
        _check_wire(gate.target, layout)
        _check_wire(gate.control, layout)
        if gate.control == gate.target:
            raise ValueError("control and target collide")
        return _apply_cry(state, layout.wires, gate.control, gate.target, gate.angle)
    if gate.kind in ("oracle_compute", "oracle_uncompute"):
        return _apply_branch_xor(state, layout, gate.level, gate.words)
    raise ValueError(f"unknown gate kind {gate.kind!r}")


def _check_wire(wire, layout):
    if wire is None or not 0 <= wire < layout.wires:
        raise ValueError(f"wire {wire} out of range")


def _apply_ry(state, wires, target, angle):
    psi = state.reshape([2] * wires)
    psi = np.moveaxis(psi, target, 0)
    half = angle / 2.0
    c, s = math.cos(half), math.sin(half)
    a0, a1 = psi[0].copy(), psi[1].copy()
    psi[0] = c * a0 - s * a1
    psi[1] = s * a0 + c * a1
    return state


def _apply_phase(state, wires, target, angle):
    psi = np.moveaxis(state.reshape([2] * wires), target, 0)
    psi[1] *= complex(math.cos(angle), math.sin(angle))
    return state


def _apply_cry(state, wires, control, target, angle):
    psi = state.reshape([2] * wires)
    psi = np.moveaxis(psi, (control, target), (0, 1))
    half = angle / 2.0
    c, s = math.cos(half), math.sin(half)
    a0, a1 = psi[1, 0].copy(), psi[1, 1].copy()
    psi[1, 0] = c * a0 - s * a1
    psi[1, 1] = s * a0 + c * a1
    return state


def _apply_branch_xor(state, layout, level, words):
    """XOR a per-branch word into the ancilla register (self-inverse)."""
    branches = 1 << (layout.m + level)
    rest = 1 << (layout.n - level)
    anc = 1 << layout.ancilla_bits
    psi = state.reshape(branches, rest, anc)
    base = np.arange(anc)
    for branch, word in enumerate(words):
        if word:
            psi[branch] = psi[branch][:, base ^ word]
    return state


def controlled_rotation(state: np.ndarray, layout: RegisterLayout, target: int,
                        fused: bool = False, debug: bool = False) -> np.ndarray:
    """Rotate the target by the dyadic angle held in the ancilla register:
    for each ancilla basis value theta (as a fraction of a turn), |0> goes
    to cos(2 pi theta)|0> + sin(2 pi theta)|1>.

    The default path applies one controlled y-rotation per ancilla bit;
    the fused path applies the per-branch rotation in one pass.  Both
    realize the same map.
    """
    if debug:
        psi = np.moveaxis(state.reshape([2] * layout.wires), target, 0)
        leak = float(np.sum(np.abs(psi[1]) ** 2))
        if leak > ANCILLA_LEAK_TOL:
            raise ValueError(f"rotation target not |0> (mass {leak:.3e})")
    if fused:
        return _controlled_rotation_fused(state, layout, target)
    kappa = layout.ancilla_bits
    for k in range(1, kappa + 1):
        gate = Gate(kind="cry", control=layout.ancilla_wire(k), target=target,
                    angle=2.0 * math.pi * 2.0 ** (1 - k))
        apply_gate(state, gate, layout)
    return state


def _controlled_rotation_fused(state, layout, target):
    kappa = layout.ancilla_bits
    psi = np.moveaxis(state.reshape([2] * layout.wires), target, 0)
    psi = psi.reshape(2, -1, 1 << kappa)
    ang = 2.0 * math.pi * np.arange(1 << kappa) / float(1 << kappa)
    c, s = np.cos(ang), np.sin(ang)
    a0, a1 = psi[0].copy(), psi[1].copy()
    psi[0] = c * a0 - s * a1
    psi[1] = s * a0 + c * a1
    return state


# --------------------------------------------------------------------------
# Angle/phase tables from the oracle
# --------------------------------------------------------------------------

def _theta_words(oracle, cfg: PrecisionConfig, t: int) -> tuple[int, ...]:
    """Ancilla word (rotation-angle numerator) per branch at level t."""
    grid_bits = cfg.beta_grid_bits
    budget = randomness_budget_beta(grid_bits)
    alpha = 1 << (cfg.n - t - 1)
    words = []
    for x in range(1 << cfg.m):
        for z in range(1 << t):
            idx = amp_index(t, z) if cfg.m == 0 else prfs_index(x, cfg.n, z, t)
            tape = RandomTape(oracle.eval(idx), bit_length=budget)
            beta = sample_rounded_beta(grid_bits, alpha, tape)
            words.append(_theta_numerator(beta.as_fraction(), cfg.theta_bits))
    return tuple(words)


def _phase_words(oracle, cfg: PrecisionConfig) -> tuple[int, ...]:
    """Phase word (first lambda_prime output bits) per leaf branch."""
    lp = cfg.lambda_prime
    words = []
    for x in range(1 << cfg.m):
        for z in range(1 << cfg.n):
            idx = phase_index(z, cfg.n) if cfg.m == 0 else prfs_index(x, cfg.n, z)
            words.append(RandomTape(oracle.eval(idx)).read_int(lp))
    return tuple(words)


# --------------------------------------------------------------------------
# Circuit stages
# --------------------------------------------------------------------------

def _check_caps(cfg: PrecisionConfig, ancilla_bits: int):
    if cfg.lambda_prime > MAX_LAMBDA_PRIME:
        raise ValueError(
            f"circuit path is capped at lambda + 2m <= {MAX_LAMBDA_PRIME}")
    RegisterLayout(cfg.m, cfg.n, ancilla_bits).check()


def _split_ancilla(state: np.ndarray, layout: RegisterLayout) -> np.ndarray:
    """Verify the ancilla register is all-zeros and project it out."""
    psi = state.reshape(-1, 1 << layout.ancilla_bits)
    leak = float(np.sum(np.abs(psi[:, 1:]) ** 2))
    if leak > ANCILLA_LEAK_TOL:
        raise AssertionError(f"ancilla register not returned to zero: {leak:.3e}")
    return psi[:, 0].copy()


def run_amplitude_stage(oracle, cfg: PrecisionConfig,
                        input_state: np.ndarray | None = None,
                        fused: bool = False,
                        trace: list[str] | None = None) -> np.ndarray:
    """Amplitude half of the preparation: qubit-by-qubit Beta rotations.

    Returns the (m+n)-qubit state with the angle ancilla verified zero
    and projected out; amplitudes are real and nonnegative when the
    input is a basis state.
    """
    _check_caps(cfg, cfg.theta_bits)
    layout = RegisterLayout(cfg.m, cfg.n, cfg.theta_bits)
    state = np.zeros(layout.dim, dtype=np.complex128)
    if input_state is None:
        if cfg.m != 0:
            raise ValueError("m > 0 needs an input state")
        state[0] = 1.0
    else:
        if len(input_state) != 1 << cfg.m:
            raise ValueError("input state dimension must be 2**m")
        state.reshape(1 << cfg.m, -1)[:, 0] = input_state
    for t in range(cfg.n):
        words = _theta_words(oracle, cfg, t)
        for kind in ("oracle_compute", None, "oracle_uncompute"):
            if kind is None:
                controlled_rotation(state, layout, layout.data_wire(t), fused=fused)
                if trace is not None:
                    trace.append(f"level {t}: controlled rotation on data wire {t}")
            else:
                apply_gate(state, Gate(kind=kind, level=t, words=words), layout)
                if trace is not None:
                    trace.append(f"level {t}: {kind}")
    return _split_ancilla(state, layout)


def run_phase_stage(state: np.ndarray, oracle, cfg: PrecisionConfig,
                    trace: list[str] | None = None) -> np.ndarray:
    """Phase half: multiply each leaf amplitude by e^(2 pi i w / 2**lp)
    where w is that leaf's phase word.  Magnitudes are untouched."""
    lp = cfg.lambda_prime
    _check_caps(cfg, lp)
    layout = RegisterLayout(cfg.m, cfg.n, lp)
    if len(state) != 1 << (cfg.m + cfg.n):
        raise ValueError("state dimension must be 2**(m+n)")
    full = np.zeros(layout.dim, dtype=np.complex128)
    full.reshape(-1, 1 << lp)[:, 0] = state
    words = _phase_words(oracle, cfg)
    apply_gate(full, Gate(kind="oracle_compute", level=cfg.n, words=words), layout)
    for k in range(1, lp + 1):
        gate = Gate(kind="phase", target=layout.ancilla_wire(k),
                    angle=2.0 * math.pi / float(1 << k))
        apply_gate(full, gate, layout)
        if trace is not None:
            trace.append(f"phase ladder bit {k}")
    apply_gate(full, Gate(kind="oracle_uncompute", level=cfg.n, words=words), layout)
    return _split_ancilla(full, layout)


def run_full_circuit(oracle, cfg: PrecisionConfig, fused: bool = False,
                     trace: list[str] | None = None) -> np.ndarray:
    """Full preparation for a plain (m = 0) state: amplitudes then phases."""
    if cfg.m != 0:
        raise ValueError("run_full_circuit needs m = 0")
    state = run_amplitude_stage(oracle, cfg, fused=fused, trace=trace)
    return run_phase_stage(state, oracle, cfg, trace=trace)


def run_full_circuit_keyed(oracle, cfg: PrecisionConfig,
                           input_state: np.ndarray,
                           fused: bool = False) -> np.ndarray:
    """Full preparation with an m-qubit input register: basis input |x>
    yields |x> tensor psi_x, and superpositions map linearly."""
    if cfg.m < 1:
        raise ValueError("run_full_circuit_keyed needs m >= 1")
    state = run_amplitude_stage(oracle, cfg, input_state=input_state, fused=fused)
    return run_phase_stage(state, oracle, cfg)
