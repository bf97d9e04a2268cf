"""TailCut variants: a shared base counter plus 4-bit per-cell offsets.

The stored effective value of cell ``j`` is ``base + offset[j]``; an
offset of 15 means "saturated at base + 15" and the cell is treated as
that ceiling everywhere (estimates and change probabilities are
deterministic functions of the stored state, never of lost history).
After any insert that lifts the last zero offset, the common minimum is
promoted into the base and all offsets drop by it, which never changes
an effective value.

Saturation makes these sketches order-dependent and their merge only
approximate: an early huge rank clamps against a still-small base and
the lost excess cannot be recovered.  Both facts are documented
behavior, not bugs, and are exercised by the tests.

The two-field variant composes the same offset scheme with the neighbor
bit.  When a clamp actually truncates a cell's rank, the neighbor bit is
stored as 0: the bit would describe the rank just below the *stored*
ceiling, and no such evidence was retained.

``insert_batch`` processes chunks vectorized whenever no rank in the
chunk can reach the clamp ceiling (the common case); chunks that could
clamp are replayed element by element, so batch and sequential inserts
are bit-identical.
"""

from __future__ import annotations

import math

import numpy as np

from . import analysis
from .registers import BitArray, PackedRegisterArray
from .sketches import (
    LC_THRESHOLD,
    RawEstimate,
    _KahanSum,
    _SketchBase,
    _cells_from_presence,
    _shadow_counts,
    ehll_indicator_from_cells,
    hll_indicator_from_registers,
    merge_ehll_cells,
)

OFFSET_WIDTH = 4
OFFSET_MAX = (1 << OFFSET_WIDTH) - 1
_BATCH_CHUNK = 4096


class _TailCutBase(_SketchBase):
    """Base-plus-offset storage shared by both TailCut sketches."""

    def __init__(self, b: int | None = None, m: int | None = None, seed: int = 0):
        super().__init__(b, m, seed)
        self.base = 0
        self.offsets = PackedRegisterArray(self.m, OFFSET_WIDTH)
        self._zero_offsets = self.m
        self._term_sum = _KahanSum(float(self.m))

    def effective_values(self) -> np.ndarray:
        """Stored effective register values ``base + offset``."""
        return self.offsets.values() + self.base

    def _promote_base(self) -> None:
        """Shift the common minimum offset into the base (no effective change)."""
        offs = self.offsets.values()
        d = int(offs.min())
        if d > 0:
            self.base += d
            offs -= d
            self.offsets.set_values(offs)
        self._zero_offsets = int(np.count_nonzero(offs == 0))
        self.resync_term_sum()

    def _after_offset_change(self, old_off: int, new_off: int) -> None:
        if old_off == 0 and new_off > 0:
            self._zero_offsets -= 1
            if self._zero_offsets == 0:
                self._promote_base()

    def change_probability(self) -> float:
        return self._term_sum.value / self.m

    def memory_bits(self) -> int:
        raise NotImplementedError

    def _encode_effective(self, eff: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
        """Canonical (base, offsets, truncated-mask) encoding of effective values."""
        base = int(eff.min())
        raw = eff - base
        truncated = raw > OFFSET_MAX
        return base, np.minimum(raw, OFFSET_MAX), truncated


class HllTcSketch(_TailCutBase):
    """Max-rank sketch stored as base counter plus 4-bit offsets."""

    kind = "hll-tc"

    def insert(self, element) -> bool:
        bucket, geo = self._split(element)
        return self._insert_bg(bucket, geo)

    def _insert_bg(self, bucket: int, geo: int) -> bool:
        off = self.offsets.get(bucket)
        eff = self.base + off
        if geo <= eff:
            return False
        new_off = min(geo - self.base, OFFSET_MAX)
        if new_off == off:
            return False  # saturated cell cannot move further
        self.offsets.set(bucket, new_off)
        old_term = math.ldexp(1.0, -eff) if off < OFFSET_MAX else 0.0
        new_term = math.ldexp(1.0, -(self.base + new_off)) if new_off < OFFSET_MAX else 0.0
        self._term_sum.add(new_term - old_term)
        self._after_offset_change(off, new_off)
        return True

    def insert_batch(self, values: np.ndarray) -> None:
        bucket, geo = self._split_batch(values)
        self._insert_bg_batch(bucket, geo)

    def _insert_bg_batch(self, bucket: np.ndarray, geo: np.ndarray) -> None:
        for lo in range(0, len(bucket), _BATCH_CHUNK):
            bu = bucket[lo:lo + _BATCH_CHUNK]
            ge = geo[lo:lo + _BATCH_CHUNK]
            if ge.max(initial=0) <= self.base + OFFSET_MAX:
                # no clamp reachable: capped max == plain max, order-free
                present = _shadow_counts(bu, ge, self.m, self.width)
                batch_max, _ = _cells_from_presence(present)
                eff = np.maximum(self.effective_values(), batch_max)
                self.offsets.set_values(eff - self.base)
                self._promote_base()
            else:
                for j, g in zip(bu.tolist(), ge.tolist()):
                    self._insert_bg(j, g)

    def indicator(self) -> float:
        return hll_indicator_from_registers(self.effective_values())

    def resync_term_sum(self) -> None:
        eff = self.effective_values()
        terms = np.exp2(-eff.astype(float))
        terms[self.offsets.values() == OFFSET_MAX] = 0.0
        self._term_sum.reset(float(terms.sum()))

    def estimate(self, asymptotic: bool = False) -> RawEstimate:
        alpha = 1.0 / (2.0 * analysis.LN2) if asymptotic else analysis.alpha_m(self.m)
        raw = alpha * self.m * self.m * self.indicator()
        if raw < LC_THRESHOLD * self.m:
            v = int(np.count_nonzero(self.effective_values() == 0))
            if v > 0:
                return RawEstimate(analysis.linear_counting(self.m, v), "linear-counting")
        return RawEstimate(raw, "raw")

    def merge(self, other: "HllTcSketch") -> "HllTcSketch":
        """Best-effort union on stored effective values (approximate)."""
        self._check_mergeable(other)
        eff = np.maximum(self.effective_values(), other.effective_values())
        out = self.copy()
        out.base, offs, _ = self._encode_effective(eff)
        out.offsets.set_values(offs)
        out._zero_offsets = int(np.count_nonzero(offs == 0))
        out.resync_term_sum()
        return out

    def memory_bits(self) -> int:
        return OFFSET_WIDTH * self.m  # the base counter rides in the header

    def copy(self) -> "HllTcSketch":
        dup = HllTcSketch.__new__(HllTcSketch)
        dup.m, dup.seed, dup.width = self.m, self.seed, self.width
        dup.base = self.base
        dup.offsets = self.offsets.copy()
        dup._zero_offsets = self._zero_offsets
        dup._term_sum = self._term_sum.copy()
        return dup

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, HllTcSketch)
            and (self.m, self.seed, self.base) == (other.m, other.seed, other.base)
            and self.offsets == other.offsets
        )


class EhllTcSketch(_TailCutBase):
    """Two-field sketch with TailCut offsets plus the neighbor-bit array."""

    kind = "ehll-tc"

    def __init__(self, b: int | None = None, m: int | None = None, seed: int = 0):
        super().__init__(b, m, seed)
        self.bits = BitArray(self.m, fill=1)

    def insert(self, element) -> bool:
        bucket, geo = self._split(element)
        return self._insert_bg(bucket, geo)

    def _cell_term(self, off: int, x: int) -> float:
        """Stored-state change-probability term for one cell."""
        eff = self.base + off
        if off < OFFSET_MAX:
            return math.ldexp(3 - 2 * x, -eff)
        # saturated: a larger rank flips the bit to 0 (term 2^-eff) and a
        # rank at eff-1 only matters when the bit is 0 (term 2^-(eff-1))
        return math.ldexp(1.0, -eff) if x == 1 else math.ldexp(1.0, -(eff - 1))

    def _insert_bg(self, bucket: int, geo: int) -> bool:
        off = self.offsets.get(bucket)
        x = self.bits.get(bucket)
        eff = self.base + off
        if geo == eff + 1:
            new_eff, new_x = geo, 1
        elif geo > eff + 1:
            new_eff, new_x = geo, 0
        elif geo == eff - 1 and x == 0:
            new_eff, new_x = eff, 1
        else:
            return False
        new_off = new_eff - self.base
        if new_off > OFFSET_MAX:
            new_off, new_x = OFFSET_MAX, 0  # truncated: no evidence retained
        if new_off == off and new_x == x:
            return False
        old_term = self._cell_term(off, x)
        self.offsets.set(bucket, new_off)
        self.bits.set(bucket, new_x)
        self._term_sum.add(self._cell_term(new_off, new_x) - old_term)
        self._after_offset_change(off, new_off)
        return True

    def insert_batch(self, values: np.ndarray) -> None:
        bucket, geo = self._split_batch(values)
        self._insert_bg_batch(bucket, geo)

    def _insert_bg_batch(self, bucket: np.ndarray, geo: np.ndarray) -> None:
        for lo in range(0, len(bucket), _BATCH_CHUNK):
            bu = bucket[lo:lo + _BATCH_CHUNK]
            ge = geo[lo:lo + _BATCH_CHUNK]
            if ge.max(initial=0) <= self.base + OFFSET_MAX:
                present = _shadow_counts(bu, ge, self.m, self.width)
                k_new, x_new = _cells_from_presence(present)
                k, x = merge_ehll_cells(
                    self.effective_values(), self.bits.values(), k_new, x_new)
                self.offsets.set_values(k - self.base)
                self.bits.set_values(x)
                self._promote_base()
            else:
                for j, g in zip(bu.tolist(), ge.tolist()):
                    self._insert_bg(j, g)

    def indicator(self) -> float:
        return ehll_indicator_from_cells(self.effective_values(), self.bits.values())

    def resync_term_sum(self) -> None:
        offs = self.offsets.values()
        x = self.bits.values()
        eff = (offs + self.base).astype(float)
        terms = np.exp2(-eff) * (3.0 - 2.0 * x)
        sat = offs == OFFSET_MAX
        terms[sat] = np.where(x[sat] == 1, np.exp2(-eff[sat]), np.exp2(-(eff[sat] - 1)))
        self._term_sum.reset(float(terms.sum()))

    def estimate(self, asymptotic: bool = False) -> RawEstimate:
        gamma = analysis.asymptotic_constants()[0] if asymptotic else analysis.gamma_m(self.m)
        raw = gamma * self.m * self.m * self.indicator()
        if raw < LC_THRESHOLD * self.m:
            v = int(np.count_nonzero(self.effective_values() == 0))
            if v > 0:
                return RawEstimate(analysis.linear_counting(self.m, v), "linear-counting")
        return RawEstimate(raw, "raw")

    def merge(self, other: "EhllTcSketch") -> "EhllTcSketch":
        """Best-effort union via the cell merge rule, re-clamped (approximate)."""
        self._check_mergeable(other)
        k, x = merge_ehll_cells(
            self.effective_values(), self.bits.values(),
            other.effective_values(), other.bits.values())
        out = self.copy()
        out.base, offs, truncated = self._encode_effective(k)
        x = np.where(truncated, 0, x)
        out.offsets.set_values(offs)
        out.bits.set_values(x)
        out._zero_offsets = int(np.count_nonzero(offs == 0))
        out.resync_term_sum()
        return out

    def memory_bits(self) -> int:
        return (OFFSET_WIDTH + 1) * self.m

    def copy(self) -> "EhllTcSketch":
        dup = EhllTcSketch.__new__(EhllTcSketch)
        dup.m, dup.seed, dup.width = self.m, self.seed, self.width
        dup.base = self.base
        dup.offsets = self.offsets.copy()
        dup.bits = self.bits.copy()
        dup._zero_offsets = self._zero_offsets
        dup._term_sum = self._term_sum.copy()
        return dup

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EhllTcSketch)
            and (self.m, self.seed, self.base) == (other.m, other.seed, other.base)
            and self.offsets == other.offsets
            and self.bits == other.bits
        )
