"""Classical randomness oracles behind the state generators.

A function oracle maps an integer index to a fixed-length byte string.
The truly-random backend memoizes lazily generated independent uniform
strings; the keyed backend is a binary-tree PRF over a length-doubling
generator realized as counter-mode output of AES keyed by the node
label, expanded at the leaf to the full output length.

Index conventions: level t and prefix z of the amplitude tree map to
2**t + z; the phase row for leaf z maps to 2**n + z; keyed-input state
families shift everything by x * 2**(n+1) per input value x.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

_GGM_PERSON = b"haarforge-ggm"
_RANDOM_TAG = b"haarforge-random-oracle"
_KEYGEN_TAG = b"haarforge-keygen"


def amp_index(t: int, z: int) -> int:
    """Oracle row feeding the Beta value at tree level t, prefix z."""
    if t < 0:
        raise ValueError("level must be nonnegative")
    if not 0 <= z < 1 << t:
        raise ValueError(f"prefix {z} out of range for level {t}")
    return (1 << t) + z


def phase_index(z: int, n: int) -> int:
    """Oracle row feeding the phase word of leaf z."""
    if not 0 <= z < 1 << n:
        raise ValueError(f"leaf {z} out of range for {n} qubits")
    return (1 << n) + z


def prfs_index(x: int, n: int, z: int, t: int | None = None) -> int:
    """Oracle row for keyed-input families: amplitude row (t, z) when t is
    given, phase row for leaf z when t is None, both shifted into the
    x-sector."""
    if x < 0:
        raise ValueError("input value must be nonnegative")
    offset = x << (n + 1)
    if t is None:
        return offset + phase_index(z, n)
    return offset + amp_index(t, z)


@dataclass(frozen=True)
class PrfKey:
    """lam bits of key material plus the parameters it was drawn for."""

    material: bytes
    n: int
    m: int
    lam: int

    def __post_init__(self):
        if len(self.material) != (self.lam + 7) // 8:
            raise ValueError("key material must hold exactly lam bits")

    @classmethod
    def generate(cls, n: int, m: int, lam: int, seed: bytes) -> "PrfKey":
        raw = hashlib.shake_256(_KEYGEN_TAG + seed).digest((lam + 7) // 8)
        return cls(material=_mask_to_bits(raw, lam), n=n, m=m, lam=lam)

    @classmethod
    def from_hex(cls, hex_material: str, n: int, m: int, lam: int) -> "PrfKey":
        return cls(material=_mask_to_bits(bytes.fromhex(hex_material), lam),
                   n=n, m=m, lam=lam)


def _mask_to_bits(raw: bytes, nbits: int) -> bytes:
    """Keep the first nbits (MSB-first), zeroing any padding bits."""
    nbytes = (nbits + 7) // 8
    if len(raw) < nbytes:
        raise ValueError(f"need at least {nbytes} bytes of key material")
    value = int.from_bytes(raw[:nbytes], "big")
    pad = 8 * nbytes - nbits
    value &= ~((1 << pad) - 1) if pad else ~0
    return value.to_bytes(nbytes, "big")


class TrulyRandomOracle:
    """Independent uniform output per index, lazily derived from a seed.

    Safe under concurrent queries: the memo table uses insert-if-absent,
    and both racers compute the same bytes.
    """

    def __init__(self, input_bits: int, output_bytes: int, master_seed: bytes):
        if input_bits < 1 or output_bytes < 1:
            raise ValueError("input_bits and output_bytes must be positive")
        self.input_bits = input_bits
        self.output_bytes = output_bytes
        self._seed = bytes(master_seed)
        self._memo: dict[int, bytes] = {}

    def eval(self, index: int) -> bytes:
        if not 0 <= index < 1 << self.input_bits:
            raise ValueError(f"index {index} out of range")
        cached = self._memo.get(index)
        if cached is None:
            stream = hashlib.shake_256(
                _RANDOM_TAG + self._seed + index.to_bytes(16, "big")
            ).digest(self.output_bytes)
            cached = self._memo.setdefault(index, stream)
        return cached


class KeyedPrfOracle:
    """Binary-tree PRF: descend one AES call per input bit, then expand the
    leaf key in counter mode to the output length.  Cost is O(input_bits +
    output_bytes) per query and carries no state between queries."""

    def __init__(self, input_bits: int, output_bytes: int, key: PrfKey):
        if input_bits < 1 or output_bytes < 1:
            raise ValueError("input_bits and output_bytes must be positive")
        self.input_bits = input_bits
        self.output_bytes = output_bytes
        self._root = hashlib.blake2b(
            key.material, digest_size=16, person=_GGM_PERSON
        ).digest()

    @staticmethod
    def _child(node: bytes, branch: int) -> bytes:
        enc = Cipher(algorithms.AES(node), modes.ECB()).encryptor()
        return enc.update(branch.to_bytes(16, "big"))

    def eval(self, index: int) -> bytes:
        if not 0 <= index < 1 << self.input_bits:
            raise ValueError(f"index {index} out of range")
        node = self._root
        for level in range(self.input_bits - 1, -1, -1):
            node = self._child(node, (index >> level) & 1)
        ctr = Cipher(algorithms.AES(node), modes.CTR(bytes(16))).encryptor()
        return ctr.update(bytes(self.output_bytes))


FunctionOracle = TrulyRandomOracle | KeyedPrfOracle
