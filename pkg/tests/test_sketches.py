"""Core sketch behavior: transitions, indicators, estimates, merges."""

import math

import numpy as np
import pytest

from ehll.analysis import PCSA_PHI, alpha_m
from ehll.hashing import stream_u64
from ehll.oracle import derive_cells, shadow_from_stream, union_sketch
from ehll.sketches import (
    EhllSketch,
    HllSketch,
    PcsaSketch,
    ehll_indicator_from_cells,
    hll_indicator_from_registers,
)


def _random_stream(rng, n):
    return rng.integers(0, 2**63, size=n, dtype=np.uint64)


# ---------------------------------------------------------------------------
# bitmap sketch

def test_pcsa_insert_flags():
    s = PcsaSketch(b=4)
    assert s.insert(b"first") is True
    assert s.insert(b"first") is False


def test_pcsa_duplicate_insensitive():
    s = PcsaSketch(b=4, seed=3)
    t = PcsaSketch(b=4, seed=3)
    items = [b"a", b"b", b"c"]
    s.insert_all(items)
    t.insert_all(items * 5 + items[::-1])
    assert s == t


def test_pcsa_first_zero_tracks_log_phi_n():
    # mean first-zero index ~ log2(phi * n / m) within one binary order
    s = PcsaSketch(b=6, seed=0)
    s.insert_batch(stream_u64(10_000, 99))
    mean_r = float(s._first_zero_indexes().mean())
    expected = math.log2(PCSA_PHI * 10_000 / 64)
    assert abs(mean_r - expected) < 1.0


def test_pcsa_estimate_formula():
    s = PcsaSketch(b=4)
    assert s.estimate().value == pytest.approx(16 / PCSA_PHI)
    assert s.estimate().regime == "raw"
    single = PcsaSketch(m=1)
    for i in range(3):
        single.bitmaps.set(i, 1)
    assert single.estimate().value == pytest.approx(2.0 ** 3 / PCSA_PHI)
    assert single.estimate().value == pytest.approx(10.34, abs=0.01)


def test_pcsa_relative_error():
    # stochastic-averaged bitmap error ~ 0.78/sqrt(m), 500 trials, +-20%
    m, n, trials = 256, 100_000, 500
    rel = np.empty(trials)
    for t in range(trials):
        s = PcsaSketch(m=m, seed=0)
        s.insert_batch(stream_u64(n, 1000 + t))
        rel[t] = s.estimate().value / n - 1.0
    rmse = float(np.sqrt((rel**2).mean()))
    target = 0.78 / math.sqrt(m)
    assert abs(rmse - target) / target < 0.20


# ---------------------------------------------------------------------------
# max-rank sketch

def test_hll_insert_and_idempotence():
    s = HllSketch(b=4)
    changed = s.insert(b"x")
    assert changed is True
    assert s.insert(b"x") is False


def test_hll_registers_match_shadow():
    stream = [f"tok{i}".encode() for i in range(10_000)]
    s = HllSketch(b=6, seed=5)
    s.insert_all(stream)
    shadow = shadow_from_stream(stream, s.m, seed=5)
    hll_cells, _ = derive_cells(shadow)
    assert s.registers.values().tolist() == hll_cells


def test_hll_indicator_values():
    s = HllSketch(b=4)
    assert s.indicator() == pytest.approx(1.0 / 16)
    assert hll_indicator_from_registers([3]) == pytest.approx(8.0)
    assert hll_indicator_from_registers([1, 2]) == pytest.approx(4.0 / 3.0)


def test_hll_estimate_empty_is_zero():
    s = HllSketch(b=6)
    est = s.estimate()
    assert est.value == 0.0
    assert est.regime == "linear-counting"


def test_hll_estimate_regime_boundary():
    # all registers nonzero but raw below the threshold: falls back to raw
    s = HllSketch(b=4)
    s.registers.set_values(np.ones(16, dtype=np.int64))
    s.resync_term_sum()
    raw = alpha_m(16) * 16 * 16 * s.indicator()
    assert raw < 2.5 * 16
    est = s.estimate()
    assert est.regime == "raw"
    assert est.value == pytest.approx(raw)


def test_hll_small_range_uses_linear_counting():
    s = HllSketch(b=10, seed=0)
    s.insert_batch(stream_u64(50, 7))
    est = s.estimate()
    assert est.regime == "linear-counting"
    big = HllSketch(b=10, seed=0)
    big.insert_batch(stream_u64(100_000, 7))
    assert big.estimate().regime == "raw"


def test_hll_linear_counting_near_exact():
    # occupancy counting is nearly unbiased when n << m
    n, trials = 50, 300
    est = np.empty(trials)
    for t in range(trials):
        s = HllSketch(b=10, seed=0)
        s.insert_batch(stream_u64(n, 8800 + t))
        est[t] = s.estimate().value
    assert abs(float(est.mean()) - n) / n < 0.02


# ---------------------------------------------------------------------------
# two-field sketch

def test_ehll_transitions():
    s = EhllSketch(b=4)
    # fresh cell (0,1): rank 1 is the +1 step
    assert s._insert_bg(2, 1) is True
    assert (s.ranks.get(2), s.bits.get(2)) == (1, 1)
    # fresh cell, rank 3 jumps past the neighbor
    assert s._insert_bg(5, 3) is True
    assert (s.ranks.get(5), s.bits.get(5)) == (3, 0)
    # neighbor coupon fills in, then repeats are silent
    assert s._insert_bg(5, 2) is True
    assert (s.ranks.get(5), s.bits.get(5)) == (3, 1)
    assert s._insert_bg(5, 2) is False
    # rank below k-1 never changes anything
    assert s._insert_bg(5, 1) is False


def test_ehll_indicator_values():
    s = EhllSketch(b=4)
    assert s.indicator() == pytest.approx(1.0 / 16)
    assert ehll_indicator_from_cells([3], [0]) == pytest.approx(8.0 / 3.0)
    assert ehll_indicator_from_cells([1, 2], [1, 0]) == pytest.approx(4.0 / 5.0)


def test_ehll_cells_match_shadow():
    stream = [f"item{i}".encode() for i in range(10_000)]
    s = EhllSketch(b=6, seed=9)
    s.insert_all(stream)
    shadow = shadow_from_stream(stream, s.m, seed=9)
    _, ehll_cells = derive_cells(shadow)
    got = list(zip(s.ranks.values().tolist(), s.bits.values().tolist()))
    assert got == ehll_cells


def test_ehll_estimate_empty_and_small_range():
    s = EhllSketch(b=10)
    assert s.estimate().value == 0.0
    s.insert_batch(stream_u64(50, 3))
    assert s.estimate().regime == "linear-counting"


def test_change_probability_fresh_and_fixed_state():
    s = EhllSketch(b=4)
    assert s.change_probability() == pytest.approx(1.0)
    h = HllSketch(b=4)
    assert h.change_probability() == pytest.approx(1.0)
    single = EhllSketch(m=1)
    single.ranks.set(0, 3)
    single.bits.set(0, 0)
    single.resync_term_sum()
    assert single.change_probability() == pytest.approx(3.0 / 8.0)


def test_change_probability_incremental_matches_exact():
    rng = np.random.default_rng(21)
    for cls in (HllSketch, EhllSketch):
        s = cls(b=5, seed=1)
        qs = []
        for v in _random_stream(rng, 3000).tolist():
            s.insert(v)
            qs.append(s.change_probability())
        incremental = s.change_probability()
        s.resync_term_sum()
        assert incremental == pytest.approx(s.change_probability(), rel=1e-12)
        # q never increases along a stream
        assert all(b <= a + 1e-15 for a, b in zip(qs, qs[1:]))


def test_indicator_monotone_nondecreasing():
    rng = np.random.default_rng(22)
    for cls in (HllSketch, EhllSketch):
        s = cls(b=4, seed=2)
        last = 0.0
        for v in _random_stream(rng, 500).tolist():
            s.insert(v)
            ind = s.indicator()
            assert ind >= last - 1e-15
            last = ind


def test_order_independence_bit_exact():
    rng = np.random.default_rng(23)
    base = _random_stream(rng, 400)
    perm = rng.permutation(base)
    dup = np.concatenate([base, base[::2]])
    for cls in (PcsaSketch, HllSketch, EhllSketch):
        a, b, c = cls(b=5, seed=7), cls(b=5, seed=7), cls(b=5, seed=7)
        a.insert_all(base.tolist())
        b.insert_all(perm.tolist())
        c.insert_all(dup.tolist())
        assert a == b
        assert a == c


def test_batch_equals_scalar():
    rng = np.random.default_rng(24)
    stream = _random_stream(rng, 3000)
    for cls in (PcsaSketch, HllSketch, EhllSketch):
        scalar = cls(b=6, seed=11)
        scalar.insert_all(stream.tolist())
        batch = cls(b=6, seed=11)
        batch.insert_batch(stream)
        assert scalar == batch
        # split batches against one shot
        split = cls(b=6, seed=11)
        split.insert_batch(stream[:1000])
        split.insert_batch(stream[1000:])
        assert split == batch


def test_merge_identity_commutativity():
    rng = np.random.default_rng(25)
    sa = _random_stream(rng, 300).tolist()
    sb = _random_stream(rng, 300).tolist()
    for cls in (PcsaSketch, HllSketch, EhllSketch):
        a, b, empty = cls(b=5, seed=1), cls(b=5, seed=1), cls(b=5, seed=1)
        a.insert_all(sa)
        b.insert_all(sb)
        assert a.merge(empty) == a
        assert a.merge(b) == b.merge(a)
        assert a.merge(a) == a


def test_merge_equals_union_stream():
    rng = np.random.default_rng(26)
    for cls, kind in ((PcsaSketch, "pcsa"), (HllSketch, "hll"), (EhllSketch, "ehll")):
        for overlap in (0.0, 0.5, 1.0):
            pool = _random_stream(rng, 600)
            cut = int(300 * (1 - overlap))
            sa = pool[:300].tolist()
            sb = pool[cut:cut + 300].tolist()
            a, b = cls(b=4, seed=3), cls(b=4, seed=3)
            a.insert_all(sa)
            b.insert_all(sb)
            assert a.merge(b) == union_sketch(sa, sb, kind, b=4, seed=3)


def test_merge_guards():
    a = HllSketch(b=4, seed=1)
    with pytest.raises(ValueError):
        a.merge(HllSketch(b=5, seed=1))
    with pytest.raises(ValueError):
        a.merge(HllSketch(b=4, seed=2))
    with pytest.raises(ValueError):
        a.merge(EhllSketch(b=4, seed=1))


def test_memory_bits_matched_pairing():
    assert EhllSketch(b=10).memory_bits() == 7168
    assert HllSketch(m=1195).memory_bits() == 7170
    assert PcsaSketch(b=10).memory_bits() == 1024 * 55


def test_general_m_estimates_reasonably():
    s = HllSketch(m=1195, seed=0)
    s.insert_batch(stream_u64(100_000, 17))
    assert abs(s.estimate().value / 100_000 - 1) < 0.15


def test_statistical_accuracy_moderate_scale():
    # relative RMSE ~ sqrt(variance constant / m) at n >> m, 400 trials
    m, n, trials = 256, 20_000, 400
    rel_e = np.empty(trials)
    rel_h = np.empty(trials)
    for t in range(trials):
        stream = stream_u64(n, 5000 + t)
        e = EhllSketch(m=m, seed=0)
        e.insert_batch(stream)
        rel_e[t] = e.estimate().value / n - 1.0
        h = HllSketch(m=m, seed=0)
        h.insert_batch(stream)
        rel_h[t] = h.estimate().value / n - 1.0
    rmse_e = float(np.sqrt((rel_e**2).mean()))
    rmse_h = float(np.sqrt((rel_h**2).mean()))
    assert abs(rmse_e - math.sqrt(0.776 / m)) / math.sqrt(0.776 / m) < 0.15
    assert abs(rmse_h - 1.04 / math.sqrt(m)) / (1.04 / math.sqrt(m)) < 0.15
    # and the mean is nearly unbiased thanks to the quadrature constants
    assert abs(rel_e.mean()) < 0.01
    assert abs(rel_h.mean()) < 0.01
