"""
Distributed counting: exact merges, and the TailCut tradeoff
============================================================

Mergeable sketches built on separate shards combine into exactly the
sketch of the union, so distinct counting distributes for free.  The
TailCut variants shave the per-cell cost to 4 or 5 bits by storing
offsets from a shared base counter; the price is order dependence and a
merge that is only approximate once offsets saturate.
"""

import numpy as np

from ehll import EhllSketch, EhllTcSketch, HllTcSketch
from ehll.hashing import stream_u64
from ehll.oracle import union_sketch

# --- exact distributed counting -------------------------------------------
pool = stream_u64(120_000, stream_seed=3)
shards = np.array_split(pool, 4)  # overlapping shards are fine too

partials = []
for shard in shards:
    s = EhllSketch(b=10, seed=0)
    s.insert_batch(shard)
    partials.append(s)

merged = partials[0]
for s in partials[1:]:
    merged = merged.merge(s)

whole = EhllSketch(b=10, seed=0)
whole.insert_batch(pool)
print(f"merge of 4 shards == one-pass sketch: {merged == whole}")
print(f"estimate {merged.estimate().value:.0f} (true {len(pool)})")

# --- TailCut: same accuracy class, 5 bits per cell -------------------------
tc = EhllTcSketch(b=10, seed=0)
tc.insert_batch(pool)
print(f"\ntwo-field cells: {whole.memory_bits()} payload bits, "
      f"tail-cut: {tc.memory_bits()} bits (base counter {tc.base})")
print(f"tail-cut estimate {tc.estimate().value:.0f}")

# matched memory: 4-bit max-rank offsets vs 5-bit two-field cells
print(f"hll-tc at m=1280: {HllTcSketch(m=1280).memory_bits()} bits == "
      f"ehll-tc at m=1024: {EhllTcSketch(b=10).memory_bits()} bits")

# --- the caveat: early giant ranks clamp against a small base --------------
a = HllTcSketch(m=16)
b = HllTcSketch(m=16)
hits = [(j, 5) for j in range(16)]
for j, g in [(0, 30)] + hits:   # spike arrives first: clamped at offset 15
    a._insert_bg(j, g)
for j, g in hits + [(0, 30)]:   # spike arrives last: base has risen
    b._insert_bg(j, g)
print(f"\nsame multiset, different order: equal states? {a == b}")
print(f"  spiked cell stored as {a.effective_values()[0]} vs "
      f"{b.effective_values()[0]} (rank 30 was clamped in the first order)")
print(f"  estimates {a.estimate().value:.4f} vs {b.estimate().value:.4f}")

# without saturation the tail-cut merge is still exact
sa, sb = pool[:500].tolist(), pool[400:900].tolist()
x = HllTcSketch(b=6, seed=1)
x.insert_all(sa)
y = HllTcSketch(b=6, seed=1)
y.insert_all(sb)
u = union_sketch(sa, sb, "hll-tc", b=6, seed=1)
print(f"unsaturated tail-cut merge equals union sketch: {x.merge(y) == u}")
