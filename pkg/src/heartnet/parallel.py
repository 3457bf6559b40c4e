"""Deterministic per-neuron work scheduling.

A :class:`NeuronPool` splits a layer's neuron indices into one contiguous
range per worker and waits for all ranges before returning (one barrier
per layer).  Each neuron is always computed by exactly one worker with
the same arithmetic as the sequential path, so results are bit-identical
for every worker count; threads only change who runs which range.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

# Layers narrower than this run inline even when workers > 1: scheduling
# overhead would dominate, and per-neuron results never depend on where
# they are computed.
MIN_PARALLEL_ITEMS = 64


def _ranges(n_items: int, n_chunks: int):
    base, extra = divmod(n_items, n_chunks)
    lo = 0
    for i in range(n_chunks):
        hi = lo + base + (1 if i < extra else 0)
        if hi > lo:
            yield lo, hi
        lo = hi


class NeuronPool:
    """Reusable thread pool that runs ``task(lo, hi)`` over neuron ranges."""

    def __init__(self, workers: int = 1, min_items: int = MIN_PARALLEL_ITEMS):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.workers = workers
        self.min_items = min_items
        self._executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def run(self, n_items: int, task: Callable[[int, int], None]) -> None:
        """Apply ``task`` to cover range(n_items); returns after all ranges
        finish (the per-layer barrier)."""
        if n_items <= 0:
            return
        if self._executor is None or n_items < self.min_items:
            task(0, n_items)
            return
        futures = [
            self._executor.submit(task, lo, hi)
            for lo, hi in _ranges(n_items, self.workers)
        ]
        for future in futures:
            future.result()

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self) -> "NeuronPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
