"""Synthetic stores for exercising the driver's abort rules.

Each wraps a reference store (memory persistence unless one is given) and
implements the same :class:`~rdfload.store.base.Store` interface.
"""
from __future__ import annotations

import time
from typing import Callable, Optional, Sequence

from rdfload.store.base import LoadResult, Store, StoreCrashed, batch_triples
from rdfload.store.reference import ReferenceStore


class DelegatingStore(Store):
    def __init__(self, inner: Optional[Store] = None):
        self.inner = inner if inner is not None else ReferenceStore()

    def load_batch(self, batch) -> LoadResult:
        return self.inner.load_batch(batch)

    def match(self, s=None, p=None, o=None, **kwargs):
        return self.inner.match(s, p, o, **kwargs)

    def snapshot_metrics(self):
        return self.inner.snapshot_metrics()

    def close(self) -> None:
        self.inner.close()


class SlowStore(DelegatingStore):
    """Spends ``delay_per_triple`` seconds per inserted triple."""

    name = "slow"

    def __init__(self, delay_per_triple: float, inner: Optional[Store] = None,
                 sleep: Callable[[float], None] = time.sleep):
        super().__init__(inner)
        if delay_per_triple < 0:
            raise ValueError("delay_per_triple must be >= 0")
        self.delay_per_triple = delay_per_triple
        self._sleep = sleep

    def load_batch(self, batch) -> LoadResult:
        triples = batch_triples(batch)
        if self.delay_per_triple:
            self._sleep(self.delay_per_triple * len(triples))
        return self.inner.load_batch(triples)


class CrashingStore(DelegatingStore):
    """Inserts ``crash_after`` triples in total, then fails fatally."""

    name = "crashing"

    def __init__(self, crash_after: int, inner: Optional[Store] = None):
        super().__init__(inner)
        if crash_after < 0:
            raise ValueError("crash_after must be >= 0")
        self.crash_after = crash_after
        self.attempted = 0

    def load_batch(self, batch) -> LoadResult:
        triples = batch_triples(batch)
        room = self.crash_after - self.attempted
        if len(triples) > room:
            if room > 0:
                self.inner.load_batch(triples[:room])
            self.attempted = self.crash_after
            raise StoreCrashed(f"simulated crash after {self.crash_after} insertions")
        self.attempted += len(triples)
        return self.inner.load_batch(triples)


class ScriptedStore(DelegatingStore):
    """Batch ``k`` takes ``len(batch) / speeds[k]`` seconds on the given clock."""

    name = "scripted"

    def __init__(self, speeds: Sequence[float], sleep: Callable[[float], None],
                 inner: Optional[Store] = None):
        super().__init__(inner)
        if any(v <= 0 for v in speeds):
            raise ValueError("scripted speeds must be positive")
        self.speeds = list(speeds)
        self._sleep = sleep
        self.calls = 0

    def load_batch(self, batch) -> LoadResult:
        triples = batch_triples(batch)
        speed = self.speeds[min(self.calls, len(self.speeds) - 1)]
        self.calls += 1
        self._sleep(len(triples) / speed)
        return self.inner.load_batch(triples)
