"""Consumable bit tapes that make every sampler a deterministic function.

A tape is a finite bit string read MSB-first in fixed-size blocks; the
block layout of each consumer is part of the public contract (see the
README).  Reading past the end raises, never wraps.
"""

from __future__ import annotations

import hashlib


class TapeExhausted(Exception):
    """A sampler tried to read more bits than the tape holds."""


class RandomTape:
    """Finite bit string with a read cursor.

    Bits are indexed MSB-first within the backing bytes: bit 0 is the top
    bit of byte 0.  `read_int(k)` consumes the next k bits as a big-endian
    unsigned integer.
    """

    def __init__(self, data: bytes, bit_length: int | None = None):
        if bit_length is None:
            bit_length = 8 * len(data)
        if bit_length > 8 * len(data):
            raise ValueError("bit_length exceeds the backing data")
        self._value = int.from_bytes(data, "big") >> (8 * len(data) - bit_length) if data else 0
        self._bit_length = bit_length
        self.cursor = 0

    @classmethod
    def from_hex(cls, hex_string: str, bit_length: int | None = None) -> "RandomTape":
        return cls(bytes.fromhex(hex_string), bit_length)

    @classmethod
    def from_seed(cls, seed: bytes, bit_length: int, label: bytes = b"") -> "RandomTape":
        """Deterministic tape expanded from a seed with SHAKE-256."""
        shake = hashlib.shake_256(label + seed)
        return cls(shake.digest((bit_length + 7) // 8), bit_length)

    @property
    def bit_length(self) -> int:
        return self._bit_length

    @property
    def remaining(self) -> int:
        return self._bit_length - self.cursor

    def read_int(self, nbits: int) -> int:
        if nbits < 0:
            raise ValueError("nbits must be nonnegative")
        if self.cursor + nbits > self._bit_length:
            raise TapeExhausted(
                f"tape has {self.remaining} bits left, {nbits} requested"
            )
        shift = self._bit_length - self.cursor - nbits
        self.cursor += nbits
        return (self._value >> shift) & ((1 << nbits) - 1)
