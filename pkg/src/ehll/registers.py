"""Bit-packed register storage.

Registers of 1..8 bits are packed contiguously, least-significant-bit
first within each byte, and may straddle byte boundaries.  True packing
matters: the memory accounting of the sketches (6 bits per HyperLogLog
register, 7 per ExtendedHyperLogLog cell, 4-bit TailCut offsets) is only
real if the buffer is exactly ``ceil(m * width / 8)`` bytes.

Scalar get/set serve the per-element insert path; ``values()`` /
``set_values()`` unpack and repack the whole array with vectorized bit
arithmetic for the batch paths.

Arrays are single-writer: concurrent readers are safe only while no
writer is active, and instances can be handed between threads.
"""

from __future__ import annotations

import numpy as np

_U8 = np.uint8
_U16 = np.uint16


class PackedRegisterArray:
    """``m`` unsigned registers of ``width`` bits each, bit-packed."""

    __slots__ = ("m", "width", "buffer")

    def __init__(self, m: int, width: int, fill: int = 0):
        if m < 1:
            raise ValueError("register count must be >= 1")
        if not 1 <= width <= 8:
            raise ValueError("register width must be in [1, 8]")
        if not 0 <= fill < (1 << width):
            raise ValueError(f"fill {fill} does not fit in {width} bits")
        self.m = m
        self.width = width
        self.buffer = np.zeros((m * width + 7) // 8, dtype=_U8)
        if fill:
            self.set_values(np.full(m, fill, dtype=np.int64))

    def get(self, j: int) -> int:
        if not 0 <= j < self.m:
            raise IndexError(f"register index {j} out of range [0, {self.m})")
        bit = j * self.width
        byte, shift = bit >> 3, bit & 7
        word = int(self.buffer[byte])
        if shift + self.width > 8:
            word |= int(self.buffer[byte + 1]) << 8
        return (word >> shift) & ((1 << self.width) - 1)

    def set(self, j: int, v: int) -> None:
        if not 0 <= j < self.m:
            raise IndexError(f"register index {j} out of range [0, {self.m})")
        if not 0 <= v < (1 << self.width):
            raise ValueError(f"value {v} does not fit in {self.width} bits")
        bit = j * self.width
        byte, shift = bit >> 3, bit & 7
        mask = ((1 << self.width) - 1) << shift
        word = int(self.buffer[byte])
        if shift + self.width > 8:
            word |= int(self.buffer[byte + 1]) << 8
            word = (word & ~mask) | (v << shift)
            self.buffer[byte] = word & 0xFF
            self.buffer[byte + 1] = word >> 8
        else:
            self.buffer[byte] = (word & ~mask & 0xFF) | (v << shift)

    def values(self) -> np.ndarray:
        """Unpack all registers into an int64 array."""
        bits = np.arange(self.m, dtype=np.int64) * self.width
        byte, shift = bits >> 3, (bits & 7).astype(_U16)
        lo = self.buffer[byte].astype(_U16)
        hi = np.zeros(self.m, dtype=_U16)
        has_hi = byte + 1 < len(self.buffer)
        hi[has_hi] = self.buffer[byte[has_hi] + 1]
        word = lo | (hi << _U16(8))
        return ((word >> shift) & _U16((1 << self.width) - 1)).astype(np.int64)

    def set_values(self, vals: np.ndarray) -> None:
        """Repack the whole array from an int array of register values."""
        vals = np.asarray(vals, dtype=np.int64)
        if vals.shape != (self.m,):
            raise ValueError(f"expected {self.m} values, got shape {vals.shape}")
        if vals.min() < 0 or vals.max() >= (1 << self.width):
            raise ValueError(f"values do not fit in {self.width} bits")
        bits = np.arange(self.m, dtype=np.int64) * self.width
        byte, shift = bits >> 3, (bits & 7)
        word = vals.astype(_U16) << shift.astype(_U16)
        buf = np.zeros(len(self.buffer), dtype=_U8)
        np.bitwise_or.at(buf, byte, (word & _U16(0xFF)).astype(_U8))
        hi = (word >> _U16(8)).astype(_U8)
        has_hi = hi != 0
        np.bitwise_or.at(buf, byte[has_hi] + 1, hi[has_hi])
        self.buffer = buf

    def zero_count(self) -> int:
        """Number of registers equal to 0 (the V of LinearCounting)."""
        return int(np.count_nonzero(self.values() == 0))

    def memory_bits(self) -> int:
        """Register payload bits, excluding the constant-size object header."""
        return self.m * self.width

    def copy(self) -> "PackedRegisterArray":
        dup = PackedRegisterArray.__new__(PackedRegisterArray)
        dup.m, dup.width = self.m, self.width
        dup.buffer = self.buffer.copy()
        return dup

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PackedRegisterArray)
            and self.m == other.m
            and self.width == other.width
            and np.array_equal(self.buffer, other.buffer)
        )

    def __repr__(self) -> str:
        return f"PackedRegisterArray(m={self.m}, width={self.width})"


class BitArray:
    """``m`` single-bit registers (LSB-first packing within each byte)."""

    __slots__ = ("m", "buffer")

    def __init__(self, m: int, fill: int = 0):
        if m < 1:
            raise ValueError("bit count must be >= 1")
        if fill not in (0, 1):
            raise ValueError("fill must be 0 or 1")
        self.m = m
        self.buffer = np.zeros((m + 7) // 8, dtype=_U8)
        if fill:
            self.buffer[:] = 0xFF
            self._clear_tail()

    def _clear_tail(self) -> None:
        # Bits beyond m in the last byte stay zero so buffers compare equal.
        tail = self.m & 7
        if tail:
            self.buffer[-1] &= (1 << tail) - 1

    def get(self, j: int) -> int:
        if not 0 <= j < self.m:
            raise IndexError(f"bit index {j} out of range [0, {self.m})")
        return (int(self.buffer[j >> 3]) >> (j & 7)) & 1

    def set(self, j: int, v: int) -> None:
        if not 0 <= j < self.m:
            raise IndexError(f"bit index {j} out of range [0, {self.m})")
        if v not in (0, 1):
            raise ValueError("bit value must be 0 or 1")
        if v:
            self.buffer[j >> 3] |= _U8(1 << (j & 7))
        else:
            self.buffer[j >> 3] &= _U8(~(1 << (j & 7)) & 0xFF)

    def values(self) -> np.ndarray:
        return np.unpackbits(self.buffer, count=self.m, bitorder="little").astype(np.int64)

    def set_values(self, vals: np.ndarray) -> None:
        vals = np.asarray(vals)
        if vals.shape != (self.m,):
            raise ValueError(f"expected {self.m} values, got shape {vals.shape}")
        self.buffer = np.packbits(vals.astype(bool), bitorder="little")
        pad = (self.m + 7) // 8 - len(self.buffer)
        if pad:
            self.buffer = np.concatenate([self.buffer, np.zeros(pad, dtype=_U8)])

    def or_with(self, other: "BitArray") -> None:
        """Word-wise OR merge (used by the bitmap sketch union)."""
        if self.m != other.m:
            raise ValueError("bit array size mismatch")
        self.buffer |= other.buffer

    def zero_count(self) -> int:
        ones = int(np.bitwise_count(self.buffer).sum())
        return self.m - ones

    def memory_bits(self) -> int:
        return self.m

    def copy(self) -> "BitArray":
        dup = BitArray.__new__(BitArray)
        dup.m = self.m
        dup.buffer = self.buffer.copy()
        return dup

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitArray)
            and self.m == other.m
            and np.array_equal(self.buffer, other.buffer)
        )

    def __repr__(self) -> str:
        return f"BitArray(m={self.m})"


def new(m: int, width: int, fill: int = 0) -> PackedRegisterArray:
    """Construct a packed array with all registers equal to ``fill``."""
    return PackedRegisterArray(m, width, fill)
