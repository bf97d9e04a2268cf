"""Deterministic 64-bit hashing and hash decomposition.

Every sketch in this package consumes elements through the same pipeline:
hash the element to a 64-bit word, split the word into a bucket address
and a geometric rank.  The rank of a uniform word is the 1-indexed
position of its least significant set bit, which is Geo(1/2) distributed,
so each register effectively observes i.i.d. geometric samples.

The mixer is SplitMix64-style (public domain finalizer constants).  It is
seedable, platform independent, and bijective on 64-bit words -- the
bijectivity is what lets the simulation harness build streams of exactly
``n`` distinct elements from seeded counters.

Two addressing modes exist:

* power-of-two ``m = 2**b``: bucket is the top ``b`` bits, the rank is
  taken from the remaining ``64 - b`` bits (the classic layout);
* arbitrary ``m``: bucket comes from the top 32 bits via a fixed-point
  range reduction and the rank from the low 32 bits, keeping the two
  independent.  This mode exists for matched-memory experiments such as
  ``m = 1195`` and supports cardinalities up to roughly ``2**30``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_SEED_TWEAK = 0x9E3779B97F4A7C15  # golden-ratio increment

_U = np.uint64


def mix64(x: int) -> int:
    """SplitMix64 finalizer: bijective avalanche mix of a 64-bit word."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` on a uint64 array (wrapping arithmetic)."""
    x = x.astype(np.uint64, copy=True)
    x ^= x >> _U(30)
    x *= _U(_MIX1)
    x ^= x >> _U(27)
    x *= _U(_MIX2)
    x ^= x >> _U(31)
    return x


@dataclass(frozen=True)
class HashedElement:
    """A 64-bit digest of one stream element."""

    raw: int


@dataclass(frozen=True)
class BucketizedHash:
    """Hash split into a bucket address and a geometric rank."""

    bucket: int
    geo: int


def _canonical_bytes(element) -> bytes:
    if isinstance(element, bytes):
        return element
    if isinstance(element, bytearray) or isinstance(element, memoryview):
        return bytes(element)
    if isinstance(element, str):
        return element.encode("utf-8")
    if isinstance(element, (int, np.integer)):
        return (int(element) & MASK64).to_bytes(8, "little")
    raise TypeError(f"cannot hash element of type {type(element).__name__}")


def hash64(element, seed: int = 0) -> HashedElement:
    """Hash a byte sequence (or str / 64-bit int) to a 64-bit digest.

    Deterministic across runs and platforms: the input is absorbed in
    8-byte little-endian blocks (zero padded), followed by the byte
    length, each block passing through the mixer.
    """
    data = _canonical_bytes(element)
    state = mix64((seed ^ _SEED_TWEAK) & MASK64)
    for off in range(0, len(data), 8):
        block = int.from_bytes(data[off:off + 8], "little")
        state = mix64(state ^ block)
    state = mix64(state ^ len(data))
    return HashedElement(state)


def hash64_u64_array(values: np.ndarray, seed: int = 0) -> np.ndarray:
    """Vectorized :func:`hash64` for arrays of 64-bit integer elements.

    Bit-identical to ``hash64(int(v).to_bytes(8, 'little'), seed)`` for
    every entry, so batch-built sketches match element-at-a-time ones.
    """
    state0 = mix64((seed ^ _SEED_TWEAK) & MASK64)
    state = mix64_array(values.astype(np.uint64) ^ _U(state0))
    state ^= _U(8)  # byte length of one u64 block
    return mix64_array(state)


def rho(y: int, width: int) -> int:
    """1-indexed position of the least significant set bit of ``y``.

    ``y`` is interpreted as a ``width``-bit word; ``rho(0) == width + 1``
    (saturation -- the all-zero remainder must not crash and keeps the
    rank monotone in the number of trailing zeros).
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    if y == 0:
        return width + 1
    return (y & -y).bit_length()


def rho_array(y: np.ndarray, width: int) -> np.ndarray:
    """Vectorized :func:`rho` on a uint64 array."""
    y = y.astype(np.uint64, copy=False)
    nonzero = y != 0
    ym1 = np.where(nonzero, y - _U(1), _U(0))
    trailing = np.bitwise_count((y ^ ym1) >> _U(1)).astype(np.int64)
    return np.where(nonzero, trailing + 1, np.int64(width + 1))


def bucketize(h: HashedElement, b: int) -> BucketizedHash:
    """Split a digest into (top ``b`` bits, rank of the low ``64-b`` bits)."""
    if not 4 <= b <= 18:
        raise ValueError(f"precision b must be in [4, 18], got {b}")
    w = 64 - b
    bucket = h.raw >> w
    geo = rho(h.raw & ((1 << w) - 1), w)
    return BucketizedHash(bucket, geo)


def split_hash(raw: int, m: int) -> tuple[int, int]:
    """Split a digest for an arbitrary register count ``m``.

    Power-of-two ``m`` uses the classic top-bits layout.  Otherwise the
    bucket is ``(m * top32) >> 32`` and the rank comes from the low 32
    bits, so bucket and rank stay independent.
    """
    b = m.bit_length() - 1
    if m == 1 << b and 4 <= b <= 18:
        w = 64 - b
        return raw >> w, rho(raw & ((1 << w) - 1), w)
    return (m * (raw >> 32)) >> 32, rho(raw & 0xFFFFFFFF, 32)


def split_hash_array(raw: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`split_hash`; returns int64 (buckets, ranks)."""
    raw = raw.astype(np.uint64, copy=False)
    b = m.bit_length() - 1
    if m == 1 << b and 4 <= b <= 18:
        w = 64 - b
        bucket = (raw >> _U(w)).astype(np.int64)
        geo = rho_array(raw & _U((1 << w) - 1), w)
        return bucket, geo
    top = raw >> _U(32)
    bucket = ((_U(m) * top) >> _U(32)).astype(np.int64)
    geo = rho_array(raw & _U(0xFFFFFFFF), 32)
    return bucket, geo


def geo_width(m: int) -> int:
    """Width of the rank domain for register count ``m`` (max rank is width+1)."""
    b = m.bit_length() - 1
    if m == 1 << b and 4 <= b <= 18:
        return 64 - b
    return 32


def stream_u64(n: int, stream_seed: int) -> np.ndarray:
    """A synthetic stream of exactly ``n`` distinct 64-bit elements.

    Seeded counters through the bijective mixer: injective, hence exactly
    ``n`` distinct values, with no coupon-collector correction needed.
    The seed itself is mixed first so that nearby seeds (trial indices)
    yield counter blocks that are astronomically unlikely to overlap.
    """
    base = mix64(stream_seed & MASK64)
    return mix64_array(np.arange(n, dtype=np.uint64) + _U(base))
