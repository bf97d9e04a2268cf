"""
Counting distinct elements in a stream
======================================

A sketch summarizes a stream in a few kilobytes and answers "how many
distinct elements so far?" within a few percent.  This walkthrough feeds
the same synthetic stream to each sketch family and compares footprints.
"""

from ehll import EhllSketch, HllSketch, PcsaSketch
from ehll.hashing import stream_u64

n = 200_000
stream = stream_u64(n, stream_seed=7)  # exactly n distinct 64-bit values

# precision b=10 means 2^10 = 1024 registers
sketches = {
    "bitmap (pcsa)": PcsaSketch(b=10),
    "max-rank (hll)": HllSketch(b=10),
    "two-field (ehll)": EhllSketch(b=10),
}

print(f"true cardinality: {n}")
for name, sketch in sketches.items():
    sketch.insert_batch(stream)
    est = sketch.estimate()
    err = est.value / n - 1.0
    print(f"{name:18s} estimate {est.value:10.0f}  ({err:+.2%})  "
          f"memory {sketch.memory_bits() / 8 / 1024:.2f} KiB  regime {est.regime}")

# small cardinalities switch to occupancy counting and are near exact
small = EhllSketch(b=10)
small.insert_all(f"user-{i}" for i in range(40))
est = small.estimate()
print(f"\n40 distinct tokens -> {est.value:.2f} via {est.regime}")

# duplicates never move the estimate: the sketch state is a pure
# function of the set of elements seen
once = EhllSketch(b=10, seed=3)
many = EhllSketch(b=10, seed=3)
once.insert_all(["a", "b", "c"])
many.insert_all(["a", "b", "c"] * 1000)
print(f"duplicate floods are invisible: {once == many}")
