"""Sorted id-triple runs.

A run is a 1-d numpy array of 24-byte void records, each record three
big-endian uint64 term ids in index order.  Byte-wise comparison of such
records is lexicographic comparison of the id tuples, so numpy's void sort
and ``searchsorted`` give index order directly, and the same bytes are the
on-disk format.
"""
from __future__ import annotations

import itertools
import os
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

RECORD = np.dtype("V24")
_BE = np.dtype(">u8")
_U64_MAX = np.iinfo(np.uint64).max

ORDERS: dict[str, tuple[int, int, int]] = {
    "spo": (0, 1, 2),
    "pos": (1, 2, 0),
    "osp": (2, 0, 1),
}

MAGIC = b"RDFLRUN\x01"
_HEADER = struct.Struct("<8s3s5xQ8x")  # magic, order, count
HEADER_SIZE = _HEADER.size


class RunFormatError(ValueError):
    pass


def ids_to_array(triples) -> np.ndarray:
    """``(n, 3)`` native uint64 array from an iterable of id triples."""
    if not isinstance(triples, (list, tuple)):
        triples = list(triples)
    flat = np.fromiter(itertools.chain.from_iterable(triples), dtype=np.uint64,
                       count=3 * len(triples))
    return flat.reshape(-1, 3)


def to_records(ids: np.ndarray, order: str) -> np.ndarray:
    """Permute ``(n, 3)`` spo ids into ``order`` and view as records (unsorted)."""
    perm = ORDERS[order]
    keyed = np.ascontiguousarray(ids[:, perm], dtype=_BE)
    return keyed.view(RECORD).reshape(-1)


def sorted_run(ids: np.ndarray, order: str) -> np.ndarray:
    run = to_records(ids, order)
    run.sort()
    return run


def from_records(run: np.ndarray, order: str) -> np.ndarray:
    """Inverse of :func:`to_records`: back to ``(n, 3)`` spo ids."""
    keyed = np.asarray(run).view(_BE).reshape(-1, 3).astype(np.uint64)
    out = np.empty_like(keyed)
    out[:, ORDERS[order]] = keyed
    return out


def contains(run: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Boolean mask: which records in ``keys`` occur in the sorted ``run``."""
    if len(run) == 0 or len(keys) == 0:
        return np.zeros(len(keys), dtype=bool)
    idx = np.searchsorted(run, keys)
    np.minimum(idx, len(run) - 1, out=idx)
    hit = np.asarray(run[idx]).view(_BE).reshape(-1, 3) == keys.view(_BE).reshape(-1, 3)
    return hit.all(axis=1)


def _bound_key(prefix: Sequence[int], fill: int) -> np.ndarray:
    vals = list(prefix) + [fill] * (3 - len(prefix))
    return np.array(vals, dtype=_BE).view(RECORD)


def prefix_range(run: np.ndarray, prefix: Sequence[int]) -> tuple[int, int]:
    """Half-open slice of ``run`` whose records start with ``prefix``."""
    if not prefix:
        return 0, len(run)
    lo = int(np.searchsorted(run, _bound_key(prefix, 0), side="left")[0])
    hi = int(np.searchsorted(run, _bound_key(prefix, _U64_MAX), side="right")[0])
    return lo, hi


def merge(runs: Sequence[np.ndarray]) -> np.ndarray:
    """Merge disjoint sorted runs; stable sort exploits the existing order."""
    if len(runs) == 1:
        return np.array(runs[0])
    merged = np.concatenate([np.asarray(r) for r in runs])
    merged.sort(kind="stable")
    return merged


def write_run(path: Path, run: np.ndarray, order: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, order.encode("ascii"), len(run)))
        fh.write(np.ascontiguousarray(run).tobytes())
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def read_run(path: Path, order: str) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(HEADER_SIZE)
    if len(head) != HEADER_SIZE:
        raise RunFormatError(f"{path}: truncated run header")
    magic, run_order, count = _HEADER.unpack(head)
    if magic != MAGIC:
        raise RunFormatError(f"{path}: not a run file (bad magic)")
    if run_order.decode("ascii") != order:
        raise RunFormatError(f"{path}: holds {run_order!r} order, expected {order!r}")
    expected = HEADER_SIZE + count * RECORD.itemsize
    if os.path.getsize(path) != expected:
        raise RunFormatError(f"{path}: size does not match record count")
    if count == 0:
        return np.empty(0, dtype=RECORD)
    return np.memmap(path, dtype=RECORD, mode="r", offset=HEADER_SIZE, shape=(count,))
