"""Embedded reference triple store.

Terms are dictionary-encoded to dense integer ids.  New id triples go to an
in-memory set; once it reaches ``flush_threshold`` entries it is written out
as three sorted runs (SPO, POS, OSP), one per index ordering.  When a level
collects ``merge_fanout`` runs they are merged into a single run one level
up, so the amount of merge work grows with the store: loading slows down
as the store gets bigger, which is the effect the benchmark measures.

Disk layout (``persistence="disk"``)::

    MANIFEST.json            commit point, rewritten via temp file + rename
    dict-000003.terms        terms first interned before flush #3, in id order
    run-000003.spo|pos|osp   sorted runs (see rdfload.store.runs)

Anything not referenced from the manifest is debris from an interrupted
flush and is removed when the store is opened.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from rdfload._accel import kernels
from rdfload.store import runs
from rdfload.store.base import (
    LoadResult,
    Store,
    StoreConfig,
    StoreCrashed,
    StoreError,
    StoreFormatError,
    StoreMetricsSnapshot,
    batch_triples,
)
from rdfload.terms import Term, Triple, key_term, term_key

log = logging.getLogger(__name__)

FORMAT = "rdfload-store"
FORMAT_VERSION = 1
MANIFEST = "MANIFEST.json"
DICT_HEADER = "#rdfload-dict"

_new = tuple.__new__


def choose_index(s_bound: bool, p_bound: bool, o_bound: bool) -> str:
    """Index whose key order turns the bound positions into a prefix."""
    if s_bound and o_bound and not p_bound:
        return "osp"
    if s_bound:
        return "spo"
    if p_bound:
        return "pos"
    if o_bound:
        return "osp"
    return "spo"


class RunSet:
    """The three index runs produced by one flush or one merge."""

    __slots__ = ("seq", "arrays")

    def __init__(self, seq: int, arrays: dict):
        self.seq = seq
        self.arrays = arrays

    def __len__(self) -> int:
        return len(self.arrays["spo"])


def dir_size(path: Path) -> int:
    total = 0
    for root, _, files in os.walk(path):
        for name in files:
            try:
                total += os.stat(os.path.join(root, name)).st_size
            except FileNotFoundError:
                pass
    return total


class ReferenceStore(Store):
    name = "reference"

    def __init__(self, config: Optional[StoreConfig] = None):
        self.config = config or StoreConfig()
        self._ids: dict = {}
        self._terms: list = []
        self._buffer: set = set()
        self._buffer_runs: dict = {}
        self._levels: list[list[RunSet]] = []
        self._next_seq = 0
        self._dict_segments: list[str] = []
        self._persisted_terms = 0
        self.merge_work = 0
        self.merge_count = 0
        self.flush_count = 0
        self._closed = False
        if self.disk:
            self._open_dir()

    @property
    def disk(self) -> bool:
        return self.config.persistence == "disk"

    @property
    def data_dir(self) -> Optional[Path]:
        return self.config.data_dir

    # --- persistence -------------------------------------------------------

    def _open_dir(self) -> None:
        d = self.data_dir
        try:
            d.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreError(f"cannot create data directory {d}: {exc}") from exc
        if (d / MANIFEST).exists():
            self._load_manifest()
            return
        if any(d.iterdir()):
            raise StoreFormatError(f"{d} is not empty and holds no store manifest")
        try:
            self._commit()
        except OSError as exc:
            raise StoreError(f"cannot write to data directory {d}: {exc}") from exc

    def _load_manifest(self) -> None:
        d = self.data_dir
        try:
            manifest = json.loads((d / MANIFEST).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise StoreFormatError(f"unreadable manifest in {d}: {exc}") from exc
        if manifest.get("format") != FORMAT:
            raise StoreFormatError(f"{d} does not hold an {FORMAT} directory")
        if manifest.get("version") != FORMAT_VERSION:
            raise StoreFormatError(
                f"{d} has format version {manifest.get('version')}, expected {FORMAT_VERSION}")
        for name in manifest["dictionary"]:
            self._read_dict_segment(d / name)
        self._dict_segments = list(manifest["dictionary"])
        self._persisted_terms = len(self._terms)
        try:
            for level in manifest["levels"]:
                self._levels.append([
                    RunSet(seq, {o: runs.read_run(self._run_path(seq, o), o) for o in runs.ORDERS})
                    for seq in level])
        except (OSError, runs.RunFormatError) as exc:
            raise StoreFormatError(str(exc)) from exc
        self._next_seq = manifest["next_seq"]
        self.merge_work = manifest.get("merge_work", 0)
        self.merge_count = manifest.get("merge_count", 0)
        self.flush_count = manifest.get("flush_count", 0)
        self._remove_debris()

    def _read_dict_segment(self, path: Path) -> None:
        with open(path, "r", encoding="utf-8", newline="\n") as fh:
            header = fh.readline().split()
            if len(header) != 3 or header[0] != DICT_HEADER or header[1] != str(FORMAT_VERSION):
                raise StoreFormatError(f"{path}: not a dictionary segment")
            first_id = int(header[2].partition("=")[2])
            if first_id != len(self._terms):
                raise StoreFormatError(f"{path}: starts at id {first_id}, expected {len(self._terms)}")
            parse_term = kernels.parse_term
            for line in fh:
                key = term_key(parse_term(line.rstrip("\n")))
                self._ids[key] = len(self._terms)
                self._terms.append(key)

    def _write_dict_segment(self, seq: int) -> None:
        fresh = self._terms[self._persisted_terms:]
        if not fresh:
            return
        name = f"dict-{seq:06d}.terms"
        path = self.data_dir / name
        tmp = path.with_name(name + ".tmp")
        ser = kernels.serialize_term
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{DICT_HEADER} {FORMAT_VERSION} first_id={self._persisted_terms}\n")
            fh.write("".join(ser(t) + "\n" for t in fresh))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
        self._dict_segments.append(name)
        self._persisted_terms = len(self._terms)

    def _run_path(self, seq: int, order: str) -> Path:
        return self.data_dir / f"run-{seq:06d}.{order}"

    def _commit(self) -> None:
        manifest = {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "dictionary": self._dict_segments,
            "levels": [[rs.seq for rs in level] for level in self._levels],
            "next_seq": self._next_seq,
            "triple_count": sum(len(rs) for level in self._levels for rs in level),
            "merge_work": self.merge_work,
            "merge_count": self.merge_count,
            "flush_count": self.flush_count,
        }
        path = self.data_dir / MANIFEST
        tmp = path.with_name(MANIFEST + ".tmp")
        tmp.write_text(json.dumps(manifest, indent=1), encoding="utf-8")
        os.replace(tmp, path)

    def _remove_debris(self) -> None:
        live = {MANIFEST, *self._dict_segments}
        live.update(self._run_path(rs.seq, o).name
                    for level in self._levels for rs in level for o in runs.ORDERS)
        for entry in self.data_dir.iterdir():
            if entry.is_file() and entry.name not in live:
                log.info("removing uncommitted file %s", entry)
                entry.unlink()

    def _persist_runset(self, rs: RunSet) -> None:
        for order, arr in rs.arrays.items():
            path = self._run_path(rs.seq, order)
            runs.write_run(path, arr, order)
            rs.arrays[order] = runs.read_run(path, order)

    # --- loading -----------------------------------------------------------

    def load_batch(self, batch) -> LoadResult:
        if self._closed:
            raise StoreError("store is closed")
        triples = batch_triples(batch)
        try:
            return self._load(triples)
        except (MemoryError, OSError) as exc:
            raise StoreCrashed(f"{type(exc).__name__}: {exc}") from exc

    def _load(self, triples: list) -> LoadResult:
        first_new = len(self._terms)
        ids = kernels.intern_triples(triples, self._ids, self._terms)
        fresh = set(ids)
        duplicates = len(ids) - len(fresh)
        if self._buffer:
            before = len(fresh)
            fresh -= self._buffer
            duplicates += before - len(fresh)
        if self._levels and fresh:
            # a triple using a term first seen in this batch cannot be stored yet
            old = [t for t in fresh if t[0] < first_new and t[1] < first_new and t[2] < first_new]
            if old:
                keys = runs.to_records(runs.ids_to_array(old), "spo")
                seen = np.zeros(len(old), dtype=bool)
                for level in self._levels:
                    for rs in level:
                        seen |= runs.contains(rs.arrays["spo"], keys)
                if seen.any():
                    found = [t for t, hit in zip(old, seen.tolist()) if hit]
                    fresh.difference_update(found)
                    duplicates += len(found)
        if fresh:
            self._buffer |= fresh
            self._buffer_runs = {}
        if len(self._buffer) >= self.config.flush_threshold:
            self.flush()
        return LoadResult(len(fresh), duplicates)

    def flush(self) -> None:
        """Write the buffer out as a level-0 run set and compact."""
        if not self._buffer:
            if self.disk:
                self._commit()
            return
        ids = runs.ids_to_array(self._buffer)
        seq = self._next_seq
        self._next_seq += 1
        rs = RunSet(seq, {o: runs.sorted_run(ids, o) for o in runs.ORDERS})
        if self.disk:
            self._write_dict_segment(seq)
            self._persist_runset(rs)
        if not self._levels:
            self._levels.append([])
        self._levels[0].append(rs)
        self._buffer = set()
        self._buffer_runs = {}
        self.flush_count += 1
        obsolete = self._compact()
        if self.disk:
            self._commit()
            for old in obsolete:
                for order in runs.ORDERS:
                    self._run_path(old.seq, order).unlink(missing_ok=True)

    def _compact(self) -> list[RunSet]:
        obsolete: list[RunSet] = []
        level = 0
        while level < len(self._levels):
            group = self._levels[level]
            if len(group) >= self.config.merge_fanout:
                self._levels[level] = []
                seq = self._next_seq
                self._next_seq += 1
                merged = RunSet(seq, {o: runs.merge([g.arrays[o] for g in group])
                                      for o in runs.ORDERS})
                self.merge_work += len(merged) * len(runs.ORDERS)
                self.merge_count += 1
                if self.disk:
                    self._persist_runset(merged)
                if level + 1 == len(self._levels):
                    self._levels.append([])
                self._levels[level + 1].append(merged)
                obsolete.extend(group)
            level += 1
        return obsolete

    # --- reading -----------------------------------------------------------

    def _buffer_run(self, order: str) -> np.ndarray:
        run = self._buffer_runs.get(order)
        if run is None:
            if self._buffer:
                run = runs.sorted_run(runs.ids_to_array(self._buffer), order)
            else:
                run = np.empty(0, dtype=runs.RECORD)
            self._buffer_runs[order] = run
        return run

    def match(self, s: Optional[Term] = None, p: Optional[Term] = None,
              o: Optional[Term] = None, *, index: Optional[str] = None) -> Iterator[Triple]:
        """Stored triples matching the bound positions.

        ``index`` forces a particular ordering (``"spo"``, ``"pos"``,
        ``"osp"``); by default the one that makes the bound positions a key
        prefix is used.  Results reflect the store at call time.
        """
        bound: list = []
        for term in (s, p, o):
            if term is None:
                bound.append(None)
                continue
            tid = self._ids.get(term)
            if tid is None:
                return iter(())
            bound.append(tid)
        if index is None:
            index = choose_index(*(b is not None for b in bound))
        perm = runs.ORDERS[index]
        prefix = []
        for pos in perm:
            if bound[pos] is None:
                break
            prefix.append(bound[pos])
        sources = [self._buffer_run(index)]
        sources.extend(rs.arrays[index] for level in self._levels for rs in level)
        chunks = []
        for arr in sources:
            lo, hi = runs.prefix_range(arr, prefix)
            if hi > lo:
                chunks.append(runs.from_records(arr[lo:hi], index))
        return self._decode(chunks, bound)

    def _decode(self, chunks, bound) -> Iterator[Triple]:
        terms = self._terms
        for chunk in chunks:
            for pos, tid in enumerate(bound):
                if tid is not None:
                    chunk = chunk[chunk[:, pos] == tid]
            for a, b, c in chunk.tolist():
                yield _new(Triple, (key_term(terms[a]), key_term(terms[b]), key_term(terms[c])))

    def __contains__(self, triple) -> bool:
        return next(iter(self.match(*triple)), None) is not None

    def __len__(self) -> int:
        return len(self._buffer) + sum(len(rs) for level in self._levels for rs in level)

    def snapshot_metrics(self) -> StoreMetricsSnapshot:
        disk_bytes = dir_size(self.data_dir) if self.disk else 0
        return StoreMetricsSnapshot(len(self), len(self._terms), disk_bytes)

    def content_digest(self) -> str:
        """SHA-256 over the term dictionary and the stored id triples."""
        h = hashlib.sha256()
        ser = kernels.serialize_term
        for term in self._terms:
            h.update(ser(term).encode("utf-8"))
            h.update(b"\n")
        parts = [self._buffer_run("spo")]
        parts.extend(rs.arrays["spo"] for level in self._levels for rs in level)
        merged = runs.merge(parts) if len(parts) > 1 else parts[0]
        h.update(np.ascontiguousarray(merged).tobytes())
        return h.hexdigest()

    def close(self) -> None:
        if self._closed:
            return
        if self.disk:
            self.flush()
        self._closed = True


def store_open(config: Optional[StoreConfig] = None, **kwargs) -> ReferenceStore:
    """Open (or create) a reference store; keyword arguments build a StoreConfig."""
    if config is None:
        config = StoreConfig(**kwargs)
    elif kwargs:
        raise TypeError("pass either a StoreConfig or keyword arguments, not both")
    return ReferenceStore(config)
