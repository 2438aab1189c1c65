"""Direct construction of the Beta-tree states and keyed isometry columns.

A state over n qubits is built from a complete binary tree of Beta
values b_{t,z} (level t in [0, n), prefix z) and one phase u_z per leaf:
the leaf weight is the telescoping product of b / (1-b) factors down the
tree, and the amplitude at z is e^(2*pi*i*u_z) * sqrt(weight).  The
production path converts each Beta value to a dyadic rotation angle
first, exactly like the gate-level circuit does, so the two paths agree
to float precision.

Bit order: z's first bit is the first (most significant) qubit; leaf z
lands at amplitude-array position z with that bit on top.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np

from .numerics import GUARD_BITS, FixedPointValue, as_exact_fraction
from .oracle import (KeyedPrfOracle, PrfKey, TrulyRandomOracle, amp_index,
                     phase_index, prfs_index)
from .sampling import randomness_budget_beta, sample_rounded_beta
from .tape import RandomTape

STATE_FORMAT = "haarforge-state"
STATE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class PrecisionConfig:
    """All precision and size parameters in one place.

    n: output qubits; m: input qubits (0 for a plain state generator);
    lam: security parameter.  Derived: lambda_prime = lam + 2m, the Beta
    rounding step eps1 = 2**-(n+lambda_prime) and the phase step
    eps2 = 2**-lambda_prime.
    """

    n: int
    lam: int
    m: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.lam < 1:
            raise ValueError("lam must be >= 1")
        if self.m < 0:
            raise ValueError("m must be >= 0")

    @property
    def lambda_prime(self) -> int:
        return self.lam + 2 * self.m

    @property
    def beta_grid_bits(self) -> int:
        return self.n + self.lambda_prime

    @property
    def theta_bits(self) -> int:
        return self.n + self.lambda_prime

    @property
    def eps1(self) -> Fraction:
        return Fraction(1, 1 << (self.n + self.lambda_prime))

    @property
    def eps2(self) -> Fraction:
        return Fraction(1, 1 << self.lambda_prime)

    @property
    def oracle_input_bits(self) -> int:
        return self.n + self.m + 1

    @property
    def oracle_output_bytes(self) -> int:
        return (randomness_budget_beta(self.beta_grid_bits) + 7) // 8


@dataclass
class StateParams:
    """The (Beta values, phases) family defining one output state.

    betas[(t, z)] in [0, 1] for t in [0, n), z in [0, 2**t); phases[z] in
    [0, 1) for z in [0, 2**n).  Values are exact rationals.
    """

    n: int
    betas: dict[tuple[int, int], Fraction] = field(default_factory=dict)
    phases: dict[int, Fraction] = field(default_factory=dict)

    def validate(self):
        for t in range(self.n):
            for z in range(1 << t):
                b = self.betas.get((t, z))
                if b is None:
                    raise ValueError(f"missing Beta value at level {t}, prefix {z}")
                if not 0 <= b <= 1:
                    raise ValueError(f"Beta value at ({t}, {z}) outside [0, 1]")
        for z in range(1 << self.n):
            u = self.phases.get(z)
            if u is None:
                raise ValueError(f"missing phase for leaf {z}")
            if not 0 <= u < 1:
                raise ValueError(f"phase at leaf {z} outside [0, 1)")


def make_oracle(cfg: PrecisionConfig, backend: str, *, seed: bytes | None = None,
                key: PrfKey | None = None):
    """Build the randomness oracle for a configuration.

    backend "random" needs a master seed; backend "prf" needs a PrfKey
    (or a seed to generate one).
    """
    bits, nbytes = cfg.oracle_input_bits, cfg.oracle_output_bytes
    if backend == "random":
        if seed is None:
            raise ValueError("random backend needs a master seed")
        return TrulyRandomOracle(bits, nbytes, seed)
    if backend == "prf":
        if key is None:
            if seed is None:
                raise ValueError("prf backend needs a key or a seed")
            key = PrfKey.generate(cfg.n, cfg.m, cfg.lam, seed)
        return KeyedPrfOracle(bits, nbytes, key)
    raise ValueError(f"unknown backend {backend!r}")


# --------------------------------------------------------------------------
# Rotation angles
# --------------------------------------------------------------------------

def _theta_numerator(b: Fraction, bits: int) -> int:
    """Numerator of arccos(sqrt(b)) / (2 pi) floored onto the 2**-bits grid.

    The values 0, 1/2 and 1 are the only grid Betas whose angle is itself
    dyadic (1/4, 1/8, 0); they are resolved exactly so the floor can never
    land on the wrong side.  Everything else is irrational and decided at
    working precision.
    """
    if not 0 <= b <= 1:
        raise ValueError("Beta value outside [0, 1]")
    if b == 1:
        return 0
    if b == 0:
        return 1 << (bits - 2)
    if b == Fraction(1, 2) and bits >= 3:
        return 1 << (bits - 3)
    with gmpy2.context(precision=bits + GUARD_BITS):
        root = gmpy2.sqrt(gmpy2.mpfr(b.numerator) / b.denominator)
        theta = gmpy2.acos(root) / (2 * gmpy2.const_pi())
        return int(gmpy2.floor(theta * (1 << bits)))


def _cos_sin_of_theta(theta_num: int, bits: int) -> tuple[float, float]:
    """(cos, sin) of 2 pi theta for a grid angle, rounded once to float64."""
    with gmpy2.context(precision=bits + GUARD_BITS):
        ang = 2 * gmpy2.const_pi() * gmpy2.mpfr(theta_num) / (1 << bits)
        return float(gmpy2.cos(ang)), float(gmpy2.sin(ang))


def theta_from_beta(b, cfg: PrecisionConfig) -> tuple[FixedPointValue, float]:
    """Dyadic rotation angle for a Beta value, plus the squared amplitude
    cos^2(2 pi theta) it actually realizes (within 2 pi * eps1 of b)."""
    bits = cfg.theta_bits
    num = _theta_numerator(as_exact_fraction(b), bits)
    cos_v, _ = _cos_sin_of_theta(num, bits)
    return FixedPointValue(num, bits), cos_v * cos_v


# --------------------------------------------------------------------------
# Parameter extraction and state assembly
# --------------------------------------------------------------------------

def build_params_from_oracle(oracle, cfg: PrecisionConfig,
                             x: int | None = None) -> StateParams:
    """Sample the full Beta tree and phase table for one output state.

    x selects the input sector for keyed-input families (required iff
    cfg.m > 0).  Deterministic given the oracle.
    """
    if (x is None) != (cfg.m == 0):
        raise ValueError("x must be given exactly when m > 0")
    if x is not None and not 0 <= x < 1 << cfg.m:
        raise ValueError(f"input value {x} out of range")
    grid_bits = cfg.beta_grid_bits
    budget = randomness_budget_beta(grid_bits)
    params = StateParams(n=cfg.n)
    for t in range(cfg.n):
        alpha = 1 << (cfg.n - t - 1)
        for z in range(1 << t):
            idx = amp_index(t, z) if x is None else prfs_index(x, cfg.n, z, t)
            tape = RandomTape(oracle.eval(idx), bit_length=budget)
            value = sample_rounded_beta(grid_bits, alpha, tape)
            params.betas[(t, z)] = value.as_fraction()
    lp = cfg.lambda_prime
    for z in range(1 << cfg.n):
        idx = phase_index(z, cfg.n) if x is None else prfs_index(x, cfg.n, z)
        word = RandomTape(oracle.eval(idx)).read_int(lp)
        params.phases[z] = Fraction(word, 1 << lp)
    return params


def build_state(params: StateParams, cfg: PrecisionConfig) -> np.ndarray:
    """Assemble the state for raw parameters (no angle rounding).

    Leaf weights are accumulated as exact rationals, so they telescope to
    total weight exactly 1; each weight is rounded to float64 once.
    """
    params.validate()
    n = cfg.n
    weights = [Fraction(1)]
    for t in range(n):
        nxt = []
        for z, w in enumerate(weights):
            b = params.betas[(t, z)]
            nxt.append(w * b)
            nxt.append(w * (1 - b))
        weights = nxt
    amps = np.empty(1 << n, dtype=np.complex128)
    for z, w in enumerate(weights):
        phase = 2.0 * math.pi * float(params.phases[z])
        amps[z] = math.sqrt(float(w)) * complex(math.cos(phase), math.sin(phase))
    return amps


def _rotated_state(params: StateParams, cfg: PrecisionConfig) -> np.ndarray:
    """Assemble the state the way the circuit does: each Beta value becomes
    a dyadic angle, and leaf amplitudes are products of cos/sin factors."""
    params.validate()
    n, bits = cfg.n, cfg.theta_bits
    factors = [1.0]
    for t in range(n):
        nxt = []
        for z, f in enumerate(factors):
            num = _theta_numerator(params.betas[(t, z)], bits)
            cos_v, sin_v = _cos_sin_of_theta(num, bits)
            nxt.append(f * cos_v)
            nxt.append(f * sin_v)
        factors = nxt
    amps = np.empty(1 << n, dtype=np.complex128)
    for z, f in enumerate(factors):
        phase = 2.0 * math.pi * float(params.phases[z])
        amps[z] = f * complex(math.cos(phase), math.sin(phase))
    return amps


def generate_prs(oracle, cfg: PrecisionConfig) -> np.ndarray:
    """Production path for a plain pseudorandom state (m = 0)."""
    if cfg.m != 0:
        raise ValueError("generate_prs needs m = 0")
    return _rotated_state(build_params_from_oracle(oracle, cfg), cfg)


def generate_prfs_column(oracle, cfg: PrecisionConfig, x: int) -> np.ndarray:
    """The n-qubit state attached to basis input x by the keyed isometry."""
    if cfg.m < 1:
        raise ValueError("generate_prfs_column needs m >= 1")
    return _rotated_state(build_params_from_oracle(oracle, cfg, x), cfg)


def assemble_isometry(columns: list[np.ndarray], m: int) -> np.ndarray:
    """Stack per-input states into the (2^(n+m), 2^m) isometry matrix
    mapping |x> to |x>|psi_x>."""
    if len(columns) != 1 << m:
        raise ValueError("need one column per basis input")
    dim_out = len(columns[0]) << m
    v = np.zeros((dim_out, 1 << m), dtype=np.complex128)
    for x, col in enumerate(columns):
        v[x * len(col):(x + 1) * len(col), x] = col
    return v


def perturb_params(params: StateParams, delta1: float, delta2: float,
                   rng) -> StateParams:
    """Move every Beta value by less than delta1 (clamped to [0, 1]) and
    every phase by less than delta2 (wrapped into [0, 1))."""
    if delta1 < 0 or delta2 < 0:
        raise ValueError("perturbation bounds must be nonnegative")
    out = StateParams(n=params.n)
    for key, b in params.betas.items():
        shift = Fraction(_open_uniform(rng, delta1))
        out.betas[key] = min(max(b + shift, Fraction(0)), Fraction(1))
    for z, u in params.phases.items():
        shift = Fraction(_open_uniform(rng, delta2))
        out.phases[z] = (u + shift) % 1
    return out


def _open_uniform(rng, delta: float) -> float:
    if delta == 0:
        return 0.0
    shift = delta * (2.0 * rng.random() - 1.0)
    return 0.0 if shift <= -delta else shift


# --------------------------------------------------------------------------
# State export
# --------------------------------------------------------------------------

def state_json_text(amps: np.ndarray, n: int, m: int = 0) -> str:
    """Canonical JSON text for a state: array of [re, im] pairs, index 0
    first.  Byte-stable for identical amplitudes."""
    doc = {
        "format": STATE_FORMAT,
        "version": STATE_FORMAT_VERSION,
        "n": n,
        "m": m,
        "amplitudes": [[float(a.real), float(a.imag)] for a in amps],
    }
    return json.dumps(doc, indent=1) + "\n"


def save_state_json(path, amps: np.ndarray, n: int, m: int = 0) -> None:
    with open(path, "w") as fh:
        fh.write(state_json_text(amps, n, m))


def load_state_json(path) -> tuple[np.ndarray, int, int]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != STATE_FORMAT:
        raise ValueError(f"not a {STATE_FORMAT} file")
    if doc.get("version") != STATE_FORMAT_VERSION:
        raise ValueError(f"unsupported version {doc.get('version')}")
    amps = np.array([complex(re, im) for re, im in doc["amplitudes"]],
                    dtype=np.complex128)
    return amps, int(doc["n"]), int(doc.get("m", 0))


def save_state_bin(path, amps: np.ndarray) -> None:
    """Raw export: little-endian float64 pairs (re, im), index 0 first."""
    flat = np.empty(2 * len(amps), dtype="<f8")
    flat[0::2] = np.asarray(amps).real
    flat[1::2] = np.asarray(amps).imag
    with open(path, "wb") as fh:
        fh.write(flat.tobytes())


def load_state_bin(path) -> np.ndarray:
    flat = np.fromfile(path, dtype="<f8")
    return (flat[0::2] + 1j * flat[1::2]).astype(np.complex128)
