"""Martingale transform: sequential unbiased counting over any sketch.

Wraps a sketch that exposes ``change_probability`` and, every time an
insert actually changes the sketch, adds ``1/q`` to a running estimate
and ``(1-q)/q^2`` to a retrospective variance, where ``q`` is the change
probability of the state *before* the insert.  Pre-update evaluation is
what makes the estimate exactly unbiased: a new distinct element changes
the sketch with probability ``q``, so the expected increment is
``q * 1/q = 1`` per new distinct element.  (Post-update evaluation
over-counts, since every changing transition lowers ``q``.)

The running estimate is strictly order-dependent and there is
deliberately no merge operation: the information being exploited is the
sequence of sketch states, which a union of sketches does not retain.

The wrapped sketch maintains its change-probability sum incrementally;
to bound floating drift the sum is recomputed exactly from the registers
every ``2**20`` updates (and on demand via :meth:`resync`).

A counter is strictly single-threaded (sequential semantics are the
whole point) but can be handed off between threads.
"""

from __future__ import annotations

import math

RESYNC_INTERVAL = 1 << 20


class MartingaleCounter:
    """Running unbiased estimator and retrospective variance over a sketch."""

    __slots__ = ("inner", "estimate_value", "retro_var", "updates_since_resync")

    def __init__(self, inner):
        if not hasattr(inner, "change_probability"):
            raise TypeError(
                f"{type(inner).__name__} does not expose change_probability")
        self.inner = inner
        self.estimate_value = 0.0
        self.retro_var = 0.0
        self.updates_since_resync = 0

    def insert(self, element) -> None:
        q = self.inner.change_probability()
        if self.inner.insert(element):
            self.estimate_value += 1.0 / q
            self.retro_var += (1.0 - q) / (q * q)
        self.updates_since_resync += 1
        if self.updates_since_resync >= RESYNC_INTERVAL:
            self.resync()

    def insert_all(self, elements) -> None:
        for e in elements:
            self.insert(e)

    def estimate(self) -> float:
        return self.estimate_value

    def retro_variance(self) -> float:
        return self.retro_var

    def standard_error(self) -> float:
        """sqrt of the retrospective variance: a running error-bar readout."""
        return math.sqrt(self.retro_var)

    def resync(self) -> None:
        """Exactly recompute the inner change-probability sum; E and V untouched."""
        self.inner.resync_term_sum()
        self.updates_since_resync = 0
