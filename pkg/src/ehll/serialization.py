"""Binary sketch files.

Layout (all integers little-endian):

    magic   4 bytes  b"EHS1"
    version 1 byte   currently 1
    kind    1 byte   1=pcsa 2=hll 3=ehll 4=hll-tc 5=ehll-tc
    b       1 byte   precision (register count is 2**b)
    seed    8 bytes  hash seed
    base    1 byte   TailCut kinds only
    payload          packed register bytes, then bit-array bytes,
                     least-significant-bit first within each byte

Payload sizes are implied exactly by (kind, b); deserialization rejects
wrong magic, version, kind tag, or any length mismatch before touching
the payload.  Only power-of-two sketches are serializable: the one-byte
precision field cannot express the ad-hoc register counts used by
matched-memory experiments.
"""

from __future__ import annotations

import numpy as np

from .sketches import EhllSketch, HllSketch, PcsaSketch
from .tailcut import EhllTcSketch, HllTcSketch

MAGIC = b"EHS1"
VERSION = 1

KIND_TAGS = {"pcsa": 1, "hll": 2, "ehll": 3, "hll-tc": 4, "ehll-tc": 5}
TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}
_CLASSES = {
    "pcsa": PcsaSketch,
    "hll": HllSketch,
    "ehll": EhllSketch,
    "hll-tc": HllTcSketch,
    "ehll-tc": EhllTcSketch,
}


class SketchFormatError(ValueError):
    """Raised when bytes do not parse as a valid sketch file."""


def _precision_of(sketch) -> int:
    b = sketch.m.bit_length() - 1
    if sketch.m != 1 << b or not 4 <= b <= 18:
        raise ValueError(
            f"only power-of-two sketches serialize (m={sketch.m}); "
            "matched-memory register counts are in-memory only")
    return b


def _payload_parts(sketch) -> list[np.ndarray]:
    if isinstance(sketch, PcsaSketch):
        return [sketch.bitmaps.buffer]
    if isinstance(sketch, HllSketch):
        return [sketch.registers.buffer]
    if isinstance(sketch, EhllSketch):
        return [sketch.ranks.buffer, sketch.bits.buffer]
    if isinstance(sketch, HllTcSketch):
        return [sketch.offsets.buffer]
    if isinstance(sketch, EhllTcSketch):
        return [sketch.offsets.buffer, sketch.bits.buffer]
    raise TypeError(f"cannot serialize {type(sketch).__name__}")


def serialize(sketch) -> bytes:
    """Encode a sketch; ``deserialize(serialize(s)) == s`` bit-exactly."""
    b = _precision_of(sketch)
    is_tc = isinstance(sketch, (HllTcSketch, EhllTcSketch))
    header = bytearray(MAGIC)
    header.append(VERSION)
    header.append(KIND_TAGS[sketch.kind])
    header.append(b)
    header += (sketch.seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    if is_tc:
        if not 0 <= sketch.base <= 0xFF:
            raise ValueError(f"base {sketch.base} does not fit the header byte")
        header.append(sketch.base)
    return bytes(header) + b"".join(part.tobytes() for part in _payload_parts(sketch))


def deserialize(data: bytes):
    """Decode a sketch file, rejecting malformed input without partial reads."""
    if len(data) < 15:
        raise SketchFormatError("file shorter than the fixed header")
    if data[:4] != MAGIC:
        raise SketchFormatError(f"bad magic {data[:4]!r}")
    if data[4] != VERSION:
        raise SketchFormatError(f"unsupported version {data[4]}")
    tag, b = data[5], data[6]
    if tag not in TAG_KINDS:
        raise SketchFormatError(f"unknown sketch kind tag {tag}")
    if not 4 <= b <= 18:
        raise SketchFormatError(f"precision {b} out of range [4, 18]")
    kind = TAG_KINDS[tag]
    seed = int.from_bytes(data[7:15], "little")
    pos = 15
    sketch = _CLASSES[kind](b=b, seed=seed)
    if kind in ("hll-tc", "ehll-tc"):
        if len(data) < 16:
            raise SketchFormatError("missing base counter byte")
        sketch.base = data[15]
        pos = 16

    parts = _payload_parts(sketch)
    expected = pos + sum(len(p) for p in parts)
    if len(data) != expected:
        raise SketchFormatError(
            f"payload length {len(data) - pos} does not match expected {expected - pos}")
    for part in parts:
        raw = np.frombuffer(data[pos:pos + len(part)], dtype=np.uint8)
        part[:] = raw
        pos += len(part)

    if hasattr(sketch, "resync_term_sum"):
        sketch.resync_term_sum()
    if hasattr(sketch, "_zero_offsets"):
        sketch._zero_offsets = int(np.count_nonzero(sketch.offsets.values() == 0))
    return sketch


def save(sketch, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(sketch))


def load(path):
    with open(path, "rb") as fh:
        return deserialize(fh.read())
