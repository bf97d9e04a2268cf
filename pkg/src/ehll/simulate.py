"""Monte-Carlo accuracy campaigns: many seeded streams, checkpointed estimates.

Each trial builds a fresh synthetic stream of exactly ``n`` distinct
64-bit elements (seeded counters through the bijective mixer), feeds it
to one sketch configuration, and records the estimate at evenly spaced
checkpoints.  Aggregates are relative bias and relative RMSE per
checkpoint, emitted as CSV (and optionally a simple SVG chart).

Matched-memory mode sizes the compared sketches to equal register
payload bits within one register of rounding: with a baseline of
``m0 = 2**b`` two-field cells (7 bits each), the max-rank sketch gets
``ceil(7/6 * m0)`` registers and its TailCut variant ``5/4 * m0``.

Trials are vectorized: the mergeable sketches derive their registers
from a per-bucket rank-occupancy matrix, and the martingale estimators
reduce to a scan over state-change events (a few thousand per trial),
whose change probabilities come from one cumulative sum in arrival
order.  Both paths are tested bit-for-bit (to float tolerance) against
the element-at-a-time reference implementations.

Per-trial RNG streams are derived from ``(seed, trial index)`` alone and
results are keyed by trial index, so any worker count yields the same
aggregate rows as a sequential run.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import analysis
from .hashing import (
    MASK64,
    _SEED_TWEAK,
    geo_width,
    hash64_u64_array,
    mix64,
    split_hash_array,
    stream_u64,
)
from .martingale import MartingaleCounter
from .sketches import (
    LC_THRESHOLD,
    EhllSketch,
    HllSketch,
    PcsaSketch,
    ehll_indicator_from_cells,
    hll_indicator_from_registers,
    _cells_from_presence,
)
from .tailcut import EhllTcSketch, HllTcSketch

SKETCH_CLASSES = {
    "pcsa": PcsaSketch,
    "hll": HllSketch,
    "ehll": EhllSketch,
    "hll-tc": HllTcSketch,
    "ehll-tc": EhllTcSketch,
}

#: matched-memory register multipliers relative to the two-field baseline
MEMORY_MATCH = {"hll": (7, 6), "hll-tc": (5, 4), "ehll": (1, 1), "ehll-tc": (1, 1)}


@dataclass(frozen=True)
class SimulationConfig:
    kinds: tuple[str, ...] = ("ehll",)
    b: int = 10
    n: int = 100_000
    trials: int = 2000
    checkpoints: int = 50
    seed: int = 0
    martingale: bool = False
    match_memory: bool = False
    asymptotic: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.trials < 2:
            raise ValueError("trials must be >= 2")
        if self.checkpoints < 1:
            raise ValueError("checkpoints must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        for kind in self.kinds:
            if kind not in SKETCH_CLASSES:
                raise ValueError(f"unknown sketch kind {kind!r}")
            if self.match_memory and kind not in MEMORY_MATCH:
                raise ValueError(f"matched-memory mode does not size {kind!r}")
            if self.martingale and kind == "pcsa":
                raise ValueError("the bitmap sketch has no change probability")

    def registers_for(self, kind: str) -> int:
        m0 = 1 << self.b
        if not self.match_memory:
            return m0
        num, den = MEMORY_MATCH[kind]
        return -(-num * m0 // den)  # ceil

    def checkpoint_positions(self) -> np.ndarray:
        step = -(-self.n // self.checkpoints)
        pos = np.minimum(np.arange(1, self.checkpoints + 1) * step, self.n)
        return np.unique(pos)


@dataclass(frozen=True)
class SimulationRow:
    sketch: str
    m: int
    memory_bits: int
    n: int
    mean_est: float
    rel_bias: float
    rel_rmse: float
    trials: int


def trial_stream_seed(seed: int, trial: int) -> int:
    """Deterministic per-trial stream seed; never a shared mutable RNG."""
    return mix64((seed + (trial + 1) * _SEED_TWEAK) & MASK64)


# ---------------------------------------------------------------------------
# vectorized trial paths

def _estimate_from_presence(kind: str, present: np.ndarray, m: int,
                            asymptotic: bool) -> float:
    if kind == "pcsa":
        rows = present
        all_ones = rows.all(axis=1)
        first_zero = np.where(all_ones, rows.shape[1], np.argmin(rows, axis=1))
        return m / analysis.PCSA_PHI * 2.0 ** float(first_zero.mean())
    c1, c2 = _cells_from_presence(present)
    if kind == "hll":
        alpha = 1.0 / (2.0 * analysis.LN2) if asymptotic else analysis.alpha_m(m)
        raw = alpha * m * m * hll_indicator_from_registers(c1)
    else:
        gamma = (analysis.asymptotic_constants()[0] if asymptotic
                 else analysis.gamma_m(m))
        raw = gamma * m * m * ehll_indicator_from_cells(c1, c2)
    if raw < LC_THRESHOLD * m:
        v = int(np.count_nonzero(c1 == 0))
        if v > 0:
            return analysis.linear_counting(m, v)
    return raw


def _mergeable_trial(kind: str, m: int, bucket: np.ndarray, geo: np.ndarray,
                     positions: np.ndarray, width: int, asymptotic: bool) -> np.ndarray:
    lanes = width + 1
    flat = np.zeros(m * lanes, dtype=bool)
    out = np.empty(len(positions))
    prev = 0
    key = bucket * lanes + (geo - 1)
    for i, pos in enumerate(positions):
        flat |= np.bincount(key[prev:pos], minlength=m * lanes).astype(bool)
        prev = pos
        out[i] = _estimate_from_presence(kind, flat.reshape(m, lanes), m, asymptotic)
    return out


def _tailcut_trial(kind: str, m: int, seed: int, bucket: np.ndarray,
                   geo: np.ndarray, positions: np.ndarray, asymptotic: bool) -> np.ndarray:
    sketch = SKETCH_CLASSES[kind](m=m, seed=seed)
    out = np.empty(len(positions))
    prev = 0
    for i, pos in enumerate(positions):
        sketch._insert_bg_batch(bucket[prev:pos], geo[prev:pos])
        prev = pos
        out[i] = sketch.estimate(asymptotic=asymptotic).value
    return out


_RANK_STRIDE = 128  # > max rank, so per-bucket offsets keep cummax segmented


def martingale_trace(kind: str, m: int, bucket: np.ndarray, geo: np.ndarray,
                     positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(E, V) of the martingale estimator at each checkpoint, fully vectorized.

    State changes are sparse, so the trial reduces to locating them,
    reconstructing each cell's state just before and after, and prefix
    summing the change-probability deltas in arrival order.
    """
    two_field = kind == "ehll"
    n = len(bucket)
    order = np.argsort(bucket, kind="stable")
    bs, gs, arrival = bucket[order], geo[order], order

    # exclusive per-bucket running max via offset-encoded cummax
    enc = gs + bs * _RANK_STRIDE
    shifted = np.empty(n, dtype=np.int64)
    shifted[1:] = enc[:-1]
    seg_start = np.empty(n, dtype=bool)
    seg_start[0] = True
    seg_start[1:] = bs[1:] != bs[:-1]
    shifted[seg_start] = bs[seg_start] * _RANK_STRIDE  # rank-0 floor
    prior_max = np.maximum.accumulate(shifted) - bs * _RANK_STRIDE

    grows = gs > prior_max
    if two_field:
        # neighbor-bit event: rank == prior_max - 1, never seen before in bucket
        occ = np.lexsort((arrival, gs, bs))
        first_in_occ = np.empty(n, dtype=bool)
        first_in_occ[0] = True
        first_in_occ[1:] = (bs[occ][1:] != bs[occ][:-1]) | (gs[occ][1:] != gs[occ][:-1])
        first_seen = np.empty(n, dtype=bool)
        first_seen[occ] = first_in_occ
        fills = (~grows) & (gs == prior_max - 1) & first_seen
        events = grows | fills
    else:
        events = grows

    ev_bucket = bs[events]
    ev_grow = grows[events]
    ev_rank = gs[events]
    ev_prior = prior_max[events]
    k_after = np.where(ev_grow, ev_rank, ev_prior)
    k_before = ev_prior

    if two_field:
        x_after = np.where(ev_grow, (ev_rank == ev_prior + 1).astype(np.int64), 1)
        x_before = np.empty(len(k_after), dtype=np.int64)
        x_before[1:] = x_after[:-1]
        ev_start = np.empty(len(k_after), dtype=bool)
        if len(k_after):
            ev_start[0] = True
            ev_start[1:] = ev_bucket[1:] != ev_bucket[:-1]
            x_before[ev_start] = 1  # empty cell is (0, 1)
        term_after = np.exp2(-k_after.astype(float)) * (3.0 - 2.0 * x_after)
        term_before = np.exp2(-k_before.astype(float)) * (3.0 - 2.0 * x_before)
    else:
        term_after = np.exp2(-k_after.astype(float))
        term_before = np.exp2(-k_before.astype(float))

    ev_arrival = arrival[events]
    if len(ev_arrival) == 0:
        zero = np.zeros(len(positions))
        return zero, zero.copy()
    by_arrival = np.argsort(ev_arrival)
    delta = (term_after - term_before)[by_arrival]
    arrivals = ev_arrival[by_arrival]

    sums = m + np.cumsum(delta)
    pre = np.empty(len(delta))
    pre[0] = m
    pre[1:] = sums[:-1]
    q = pre / m
    cum_e = np.cumsum(1.0 / q)
    cum_v = np.cumsum((1.0 - q) / (q * q))

    idx = np.searchsorted(arrivals, positions)
    e_at = np.where(idx > 0, cum_e[np.maximum(idx - 1, 0)], 0.0)
    v_at = np.where(idx > 0, cum_v[np.maximum(idx - 1, 0)], 0.0)
    return e_at, v_at


def _martingale_slow_trial(kind: str, m: int, seed: int, elements: np.ndarray,
                           positions: np.ndarray) -> np.ndarray:
    counter = MartingaleCounter(SKETCH_CLASSES[kind](m=m, seed=seed))
    out = np.empty(len(positions))
    prev = 0
    for i, pos in enumerate(positions):
        for value in elements[prev:pos].tolist():
            counter.insert(value)
        prev = pos
        out[i] = counter.estimate()
    return out


def run_trial(kind: str, m: int, n: int, positions: np.ndarray, seed: int,
              trial: int, martingale: bool, asymptotic: bool) -> np.ndarray:
    """Checkpoint estimates for one seeded trial of one sketch configuration."""
    elements = stream_u64(n, trial_stream_seed(seed, trial))
    if martingale and kind in ("hll-tc", "ehll-tc"):
        return _martingale_slow_trial(kind, m, seed, elements, positions)
    hashed = hash64_u64_array(elements, seed)
    bucket, geo = split_hash_array(hashed, m)
    if martingale:
        return martingale_trace(kind, m, bucket, geo, positions)[0]
    if kind in ("hll-tc", "ehll-tc"):
        return _tailcut_trial(kind, m, seed, bucket, geo, positions, asymptotic)
    return _mergeable_trial(kind, m, bucket, geo, positions, geo_width(m), asymptotic)


def _trial_block(args) -> tuple[str, int, np.ndarray]:
    kind, m, n, positions, seed, lo, hi, martingale, asymptotic = args
    block = np.empty((hi - lo, len(positions)))
    for t in range(lo, hi):
        block[t - lo] = run_trial(kind, m, n, positions, seed, t, martingale, asymptotic)
    return kind, lo, block


def _estimates_matrix(config: SimulationConfig, kind: str) -> np.ndarray:
    m = config.registers_for(kind)
    positions = config.checkpoint_positions()
    out = np.empty((config.trials, len(positions)))
    if config.workers <= 1:
        for t in range(config.trials):
            out[t] = run_trial(kind, m, config.n, positions, config.seed, t,
                               config.martingale, config.asymptotic)
        return out
    chunk = -(-config.trials // (config.workers * 4))
    tasks = [(kind, m, config.n, positions, config.seed, lo,
              min(lo + chunk, config.trials), config.martingale, config.asymptotic)
             for lo in range(0, config.trials, chunk)]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        for _, lo, block in pool.map(_trial_block, tasks):
            out[lo:lo + len(block)] = block
    return out


def simulate(config: SimulationConfig) -> list[SimulationRow]:
    """Run the campaign and aggregate per-checkpoint accuracy rows."""
    positions = config.checkpoint_positions()
    rows: list[SimulationRow] = []
    for kind in config.kinds:
        m = config.registers_for(kind)
        mem = SKETCH_CLASSES[kind](m=m, seed=config.seed).memory_bits()
        label = f"martingale-{kind}" if config.martingale else kind
        est = _estimates_matrix(config, kind)
        for i, pos in enumerate(positions):
            rel = est[:, i] / pos - 1.0
            rows.append(SimulationRow(
                sketch=label, m=m, memory_bits=mem, n=int(pos),
                mean_est=float(est[:, i].mean()),
                rel_bias=float(rel.mean()),
                rel_rmse=float(np.sqrt(np.mean(rel * rel))),
                trials=config.trials,
            ))
    rows.sort(key=lambda r: (r.sketch, r.n))
    return rows


CSV_HEADER = "sketch,m,memory_bits,n,mean_est,rel_bias,rel_rmse,trials"


def rows_to_csv(rows: list[SimulationRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(f"{r.sketch},{r.m},{r.memory_bits},{r.n},"
                     f"{r.mean_est:.10g},{r.rel_bias:.10g},{r.rel_rmse:.10g},{r.trials}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# minimal static SVG rendering (convenience only)

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def rows_to_svg(rows: list[SimulationRow], width: int = 640, height: int = 420) -> str:
    """One polyline of relative RMSE vs n per sketch label."""
    groups: dict[str, list[SimulationRow]] = {}
    for r in rows:
        groups.setdefault(r.sketch, []).append(r)
    xs = sorted({r.n for r in rows})
    ys = [r.rel_rmse for r in rows]
    if not xs or not ys:
        raise ValueError("no rows to plot")
    x0, x1 = min(xs), max(xs)
    y1 = max(ys) * 1.05 or 1.0
    ml, mr, mt, mb = 60, 16, 20, 44
    pw, ph = width - ml - mr, height - mt - mb

    def px(n: float) -> float:
        return ml + (0.0 if x1 == x0 else (n - x0) / (x1 - x0)) * pw

    def py(v: float) -> float:
        return mt + ph - v / y1 * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
        f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">'
        "distinct elements n</text>",
        f'<text x="14" y="{mt + ph / 2:.1f}" transform="rotate(-90 14 {mt + ph / 2:.1f})" '
        'text-anchor="middle">relative RMSE</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = y1 * frac
        parts.append(f'<line x1="{ml - 4}" y1="{py(v):.1f}" x2="{ml}" y2="{py(v):.1f}" '
                     'stroke="black"/>')
        parts.append(f'<text x="{ml - 8}" y="{py(v) + 4:.1f}" text-anchor="end">'
                     f"{v:.4g}</text>")
    for x in (x0, (x0 + x1) // 2, x1):
        parts.append(f'<line x1="{px(x):.1f}" y1="{mt + ph}" x2="{px(x):.1f}" '
                     f'y2="{mt + ph + 4}" stroke="black"/>')
        parts.append(f'<text x="{px(x):.1f}" y="{mt + ph + 16}" text-anchor="middle">'
                     f"{x}</text>")
    for i, (label, group) in enumerate(sorted(groups.items())):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{px(r.n):.2f},{py(r.rel_rmse):.2f}"
                       for r in sorted(group, key=lambda r: r.n))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     'stroke-width="1.5"/>')
        ly = mt + 14 + 16 * i
        parts.append(f'<line x1="{ml + pw - 150}" y1="{ly - 4}" x2="{ml + pw - 126}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{ml + pw - 120}" y="{ly}">{label} (m={group[0].m})</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def paper_scale(config: SimulationConfig) -> SimulationConfig:
    """The full published campaign: 25,000 streams of 10^6 elements."""
    return replace(config, n=1_000_000, trials=25_000)
