from __future__ import annotations

import abc
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional, Union

from rdfload.terms import Term, Triple


class StoreError(Exception):
    pass


class StoreCrashed(StoreError):
    """Fatal store failure; the driver ends the run with termination ``crashed``."""


class StoreFormatError(StoreError):
    """The data directory does not hold a compatible store."""


class LoadResult(NamedTuple):
    inserted: int
    duplicates: int


@dataclass(frozen=True)
class StoreMetricsSnapshot:
    triple_count: int
    dictionary_size: int
    disk_bytes: int


@dataclass
class StoreConfig:
    persistence: str = "memory"
    data_dir: Optional[Path] = None
    flush_threshold: int = 1_000_000
    merge_fanout: int = 4

    def __post_init__(self):
        if self.persistence not in ("memory", "disk"):
            raise ValueError(f"persistence must be 'memory' or 'disk', not {self.persistence!r}")
        if self.persistence == "disk" and self.data_dir is None:
            raise ValueError("disk persistence needs a data directory")
        if self.data_dir is not None:
            self.data_dir = Path(self.data_dir)
        if self.flush_threshold < 1:
            raise ValueError("flush_threshold must be >= 1")
        if self.merge_fanout < 2:
            raise ValueError("merge_fanout must be >= 2")


BatchLike = Union["Batch", Iterable[Triple]]  # noqa: F821


def batch_triples(batch) -> list:
    triples = getattr(batch, "triples", batch)
    return triples if isinstance(triples, list) else list(triples)


class Store(abc.ABC):
    """What the benchmark driver loads into.

    In-process stores signal a crash by raising from :meth:`load_batch`.
    A handle is single-writer; :meth:`match` may be called between loads
    from the same thread.
    """

    name = "store"

    @abc.abstractmethod
    def load_batch(self, batch: BatchLike) -> LoadResult:
        ...

    @abc.abstractmethod
    def match(self, s: Optional[Term] = None, p: Optional[Term] = None,
              o: Optional[Term] = None) -> Iterator[Triple]:
        ...

    @abc.abstractmethod
    def snapshot_metrics(self) -> StoreMetricsSnapshot:
        ...

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
