"""Store interface, the reference triple store, and synthetic test stores."""
from __future__ import annotations

from typing import Any, Mapping, Optional

from rdfload.store.adapters import CrashingStore, DelegatingStore, ScriptedStore, SlowStore
from rdfload.store.base import (
    LoadResult,
    Store,
    StoreConfig,
    StoreCrashed,
    StoreError,
    StoreFormatError,
    StoreMetricsSnapshot,
)
from rdfload.store.reference import ReferenceStore, choose_index, store_open

__all__ = [
    "CrashingStore", "DelegatingStore", "LoadResult", "ReferenceStore", "ScriptedStore",
    "SlowStore", "Store", "StoreConfig", "StoreCrashed", "StoreError", "StoreFormatError",
    "StoreMetricsSnapshot", "STORE_KINDS", "choose_index", "open_store", "slow_store",
    "crashing_store", "store_open",
]

STORE_KINDS = ("reference", "slow", "crashing")
_CONFIG_KEYS = {"persistence", "data_dir", "flush_threshold", "merge_fanout"}


def slow_store(delay_per_triple: float, **kwargs) -> SlowStore:
    return SlowStore(delay_per_triple, **kwargs)


def crashing_store(crash_after: int, **kwargs) -> CrashingStore:
    return CrashingStore(crash_after, **kwargs)


def open_store(kind: str = "reference", config: Optional[Mapping[str, Any]] = None) -> Store:
    """Build a store by name from a flat config mapping (as given on the CLI).

    Reference-store keys: ``persistence``, ``data_dir``, ``flush_threshold``,
    ``merge_fanout``.  ``slow`` additionally needs ``delay_per_triple`` and
    ``crashing`` needs ``crash_after``; both wrap a reference store built
    from the remaining keys.
    """
    config = dict(config or {})
    needed = {"slow": "delay_per_triple", "crashing": "crash_after"}.get(kind)
    if needed and needed not in config:
        raise ValueError(f"store kind {kind!r} needs {needed!r} in its config")
    extra = {}
    if kind == "slow":
        extra["delay_per_triple"] = float(config.pop("delay_per_triple"))
    elif kind == "crashing":
        extra["crash_after"] = int(config.pop("crash_after"))
    elif kind != "reference":
        raise ValueError(f"unknown store kind {kind!r}; choose from {', '.join(STORE_KINDS)}")
    unknown = set(config) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown store config keys: {', '.join(sorted(unknown))}")
    inner = ReferenceStore(StoreConfig(**config))
    if kind == "slow":
        return SlowStore(extra["delay_per_triple"], inner=inner)
    if kind == "crashing":
        return CrashingStore(extra["crash_after"], inner=inner)
    return inner
