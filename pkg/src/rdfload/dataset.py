"""Dataset preparation: batch splitting, dataset statistics, synthetic data."""
from __future__ import annotations

import heapq
import json
import logging
import math
import os
import random
import shutil
import tempfile
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional, Union

from rdfload._accel import kernels
from rdfload.ntriples import NTriplesParser, gc_paused, iter_file
from rdfload.terms import Term, TermKind, Triple

log = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 50_000
BATCH_NAME = "batch-{:06d}.nt"
BATCH_GLOB = "batch-*.nt"

_new = tuple.__new__


@dataclass
class Batch:
    index: int
    triples: list

    @property
    def size(self) -> int:
        return len(self.triples)


def read_batch(path: Union[str, Path], index: int = 0) -> Batch:
    with gc_paused():
        return Batch(index, list(iter_file(path, strict=True)))


def list_batch_files(directory: Union[str, Path]) -> list[Path]:
    """Batch files of a directory in load order (zero-padded names sort numerically)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"batch directory {directory} does not exist")
    return sorted(directory.glob(BATCH_GLOB))


class SplitResult(NamedTuple):
    paths: list
    discarded: int


def split_batches(input_path: Union[str, Path], output_dir: Union[str, Path],
                  batch_size: int = DEFAULT_BATCH_SIZE, *, overwrite: bool = False) -> SplitResult:
    """Split an N-Triples file into files of exactly ``batch_size`` triples.

    A trailing remainder shorter than ``batch_size`` is counted and dropped.
    Batches are staged in a hidden directory and only moved into place once
    the whole input has parsed, so a syntax error leaves no batch files.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    existing = sorted(out.glob(BATCH_GLOB))
    if existing and not overwrite:
        raise FileExistsError(f"{out} already holds batch files; pass overwrite=True to replace them")
    staging = Path(tempfile.mkdtemp(prefix=".split-", dir=out))
    ser = kernels.serialize_triple
    try:
        staged: list[Path] = []
        pending: list[str] = []
        for s, p, o in iter_file(input_path, strict=True):
            pending.append(ser(s, p, o))
            if len(pending) == batch_size:
                path = staging / BATCH_NAME.format(len(staged))
                path.write_bytes("".join(pending).encode("utf-8"))
                staged.append(path)
                pending = []
        discarded = len(pending)
        for old in existing:
            old.unlink()
        final = []
        for path in staged:
            dest = out / path.name
            os.replace(path, dest)
            final.append(dest)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    if not final:
        log.warning("%s holds fewer than %d triples; no batches written, %d discarded",
                    input_path, batch_size, discarded)
    elif discarded:
        log.info("discarded the trailing %d triples of %s", discarded, input_path)
    return SplitResult(final, discarded)


@dataclass
class DatasetStats:
    triples: int
    subjects: int
    predicates: int
    objects: int
    mean_bpt: float
    subject_degree_histogram: dict = field(default_factory=dict)
    predicate_frequency: dict = field(default_factory=dict)
    literals: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["subject_degree_histogram"] = {str(k): v for k, v in
                                         sorted(self.subject_degree_histogram.items())}
        d["predicate_frequency"] = dict(sorted(self.predicate_frequency.items(),
                                               key=lambda kv: (-kv[1], kv[0])))
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetStats":
        d = dict(d)
        d["subject_degree_histogram"] = {int(k): v for k, v in d["subject_degree_histogram"].items()}
        return cls(**d)


class _SpillingCounter:
    """Exact key counts with bounded memory: sorted chunks go to temp files."""

    def __init__(self, threshold: int, tmpdir: str):
        self.threshold = threshold
        self.tmpdir = tmpdir
        self.counts: Counter = Counter()
        self.files: list[str] = []

    def update(self, keys: Iterable[str]) -> None:
        self.counts.update(keys)
        if len(self.counts) > self.threshold:
            self._spill()

    def _spill(self) -> None:
        fd, path = tempfile.mkstemp(suffix=".keys", dir=self.tmpdir)
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            for key in sorted(self.counts):
                fh.write(f"{key}\t{self.counts[key]}\n")
        self.files.append(path)
        self.counts.clear()

    @staticmethod
    def _read(path: str) -> Iterator[tuple[str, int]]:
        with open(path, "r", encoding="utf-8", newline="\n") as fh:
            for line in fh:
                key, _, n = line.rstrip("\n").rpartition("\t")
                yield key, int(n)

    def items(self) -> Iterator[tuple[str, int]]:
        """Distinct keys in sorted order with their total counts."""
        streams = [self._read(p) for p in self.files]
        streams.append(iter(sorted(self.counts.items())))
        current, total = None, 0
        for key, n in heapq.merge(*streams):
            if key != current:
                if current is not None:
                    yield current, total
                current, total = key, 0
            total += n
        if current is not None:
            yield current, total


class StatsAccumulator:
    """One-pass dataset statistics.

    Distinct terms are counted exactly.  By default term sets live in memory
    as dictionary ids; with ``spill_threshold`` set, subject and object keys
    are spilled to sorted temp files whenever more than that many distinct
    keys are held, and counted by a k-way merge at the end.
    """

    def __init__(self, spill_threshold: Optional[int] = None, tmpdir: Optional[str] = None,
                 chunk: int = 8192):
        self.triples = 0
        self.nbytes = 0
        self.literals = 0
        self._chunk = chunk
        self._pending: list = []
        self._predicates: Counter = Counter()
        self._spill = spill_threshold is not None
        if self._spill:
            self._tmp = tempfile.TemporaryDirectory(prefix="rdfload-stats-", dir=tmpdir)
            self._subjects = _SpillingCounter(spill_threshold, self._tmp.name)
            self._objects = _SpillingCounter(spill_threshold, self._tmp.name)
        else:
            self._ids: dict = {}
            self._terms: list = []
            self._subject_ids: Counter = Counter()
            self._object_ids: set = set()

    def add(self, triple: Triple) -> None:
        self._pending.append(triple)
        if len(self._pending) >= self._chunk:
            self._drain()

    def add_many(self, triples: Iterable[Triple]) -> None:
        for t in triples:
            self.add(t)

    def _drain(self) -> None:
        chunk = self._pending
        if not chunk:
            return
        self._pending = []
        nbytes = kernels.triple_nbytes
        self.triples += len(chunk)
        self.nbytes += sum(nbytes(s, p, o) for s, p, o in chunk)
        self.literals += sum(1 for t in chunk if t[2][0] == TermKind.LITERAL)
        self._predicates.update(t[1] for t in chunk)
        if self._spill:
            ser = kernels.serialize_term
            self._subjects.update(ser(t[0]) for t in chunk)
            self._objects.update(ser(t[2]) for t in chunk)
        else:
            ids = kernels.intern_triples(chunk, self._ids, self._terms)
            self._subject_ids.update(t[0] for t in ids)
            self._object_ids.update(t[2] for t in ids)

    def result(self) -> DatasetStats:
        self._drain()
        if self._spill:
            degree_hist: Counter = Counter()
            subjects = 0
            for _, n in self._subjects.items():
                subjects += 1
                degree_hist[n] += 1
            objects = sum(1 for _ in self._objects.items())
            self._tmp.cleanup()
        else:
            subjects = len(self._subject_ids)
            objects = len(self._object_ids)
            degree_hist = Counter(self._subject_ids.values())
        return DatasetStats(
            triples=self.triples,
            subjects=subjects,
            predicates=len(self._predicates),
            objects=objects,
            mean_bpt=self.nbytes / self.triples if self.triples else 0.0,
            subject_degree_histogram=dict(sorted(degree_hist.items())),
            predicate_frequency={p.value: n for p, n in self._predicates.items()},
            literals=self.literals,
        )


def compute_stats(input_path: Union[str, Path], *, spill_threshold: Optional[int] = None,
                  tmpdir: Optional[str] = None) -> DatasetStats:
    """Statistics of an N-Triples file in one streaming pass (strict parsing).

    Statements are counted with multiplicity; terms are deduplicated, with
    blank nodes compared by label.  ``mean_bpt`` uses canonical line lengths.
    """
    acc = StatsAccumulator(spill_threshold=spill_threshold, tmpdir=tmpdir)
    acc.add_many(iter_file(input_path, strict=True, parser=NTriplesParser(strict=True)))
    return acc.result()


# --- synthetic datasets ----------------------------------------------------

class InfeasibleProfile(ValueError):
    pass


XSD_INTEGER = "http://www.w3.org/2001/XMLSchema#integer"
_BASE = "http://example.org/"
_WORDS = ("alpha", "river", "stone", "north", "signal", "quartz", "meadow", "copper",
          "ember", "harbor", "lumen", "cinder", "tundra", "vector", "orchid", "falcon")
_LANGS = ("en", "de", "pl", "fr", None)


@dataclass
class SynthProfile:
    """Shape of a synthetic dataset.

    ``regular``: subject ``i`` carries predicates ``p00..p{k-1}`` in order,
    objects drawn from a pool of ``object_cardinality`` values.
    ``irregular``: every triple gets a fresh subject and a fresh object with
    randomised IRI shapes, and a random predicate; ``n_subjects`` and
    ``object_cardinality`` do not apply.
    """

    n_triples: int
    regularity: str = "regular"
    n_subjects: Optional[int] = None
    n_predicates: int = 12
    object_cardinality: Union[int, str] = "unbounded"
    literal_fraction: float = 0.5
    seed: int = 42

    def check(self) -> None:
        if self.regularity not in ("regular", "irregular"):
            raise InfeasibleProfile(f"regularity must be 'regular' or 'irregular', not {self.regularity!r}")
        if self.n_triples < 1:
            raise InfeasibleProfile("n_triples must be >= 1")
        if self.n_predicates < 1:
            raise InfeasibleProfile("n_predicates must be >= 1")
        if not 0.0 <= self.literal_fraction <= 1.0:
            raise InfeasibleProfile("literal_fraction must lie in [0, 1]")
        if not -(2 ** 63) <= self.seed < 2 ** 64:
            raise InfeasibleProfile("seed must fit in 64 bits")
        card = self.object_cardinality
        if card != "unbounded" and (not isinstance(card, int) or card < 1):
            raise InfeasibleProfile("object_cardinality must be a positive count or 'unbounded'")
        if self.regularity == "regular":
            if self.n_triples < self.n_predicates:
                raise InfeasibleProfile(
                    f"{self.n_triples} triples cannot use all {self.n_predicates} predicates")
            n_subj = self.subjects_needed if self.n_subjects is None else self.n_subjects
            if n_subj * self.n_predicates < self.n_triples:
                raise InfeasibleProfile(
                    f"{n_subj} subjects x {self.n_predicates} predicates < {self.n_triples} triples")

    @property
    def subjects_needed(self) -> int:
        return math.ceil(self.n_triples / self.n_predicates)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, data: dict) -> "SynthProfile":
        data = dict(data)
        card = data.get("object_cardinality")
        if card is not None and card != "unbounded":
            data["object_cardinality"] = int(card)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown profile fields: {', '.join(sorted(unknown))}")
        return cls(**data)


def _regular_triples(profile: SynthProfile, rng: random.Random) -> Iterator[Triple]:
    k = profile.n_predicates
    preds = [_new(Term, (TermKind.IRI, f"{_BASE}vocab/p{j:02d}", None, None)) for j in range(k)]
    card = profile.object_cardinality
    lf = profile.literal_fraction
    subj = None
    for i in range(profile.n_triples):
        s_idx, j = divmod(i, k)
        if j == 0:
            subj = _new(Term, (TermKind.IRI, f"{_BASE}obs/{s_idx}", None, None))
        is_lit = rng.random() < lf
        idx = i if card == "unbounded" else rng.randrange(card)
        if is_lit:
            obj = _new(Term, (TermKind.LITERAL, str(idx), XSD_INTEGER, None))
        else:
            obj = _new(Term, (TermKind.IRI, f"{_BASE}value/{idx}", None, None))
        yield _new(Triple, (subj, preds[j], obj))


def _token(rng: random.Random) -> str:
    return format(rng.getrandbits(rng.randint(16, 96)), "x")


def _irregular_triples(profile: SynthProfile, rng: random.Random) -> Iterator[Triple]:
    k = profile.n_predicates
    preds = [_new(Term, (TermKind.IRI, f"{_BASE}vocab/p{j:02d}", None, None)) for j in range(k)]
    lf = profile.literal_fraction
    for i in range(profile.n_triples):
        subj = _new(Term, (TermKind.IRI, f"{_BASE}{_token(rng)}/s{i}", None, None))
        pred = preds[rng.randrange(k)]
        if rng.random() < lf:
            words = " ".join(rng.choice(_WORDS) for _ in range(rng.randint(1, 8)))
            obj = _new(Term, (TermKind.LITERAL, f"{words} {i}", None, rng.choice(_LANGS)))
        else:
            obj = _new(Term, (TermKind.IRI, f"{_BASE}{_token(rng)}/{_token(rng)}/o{i}", None, None))
        yield _new(Triple, (subj, pred, obj))


def synthetic_triples(profile: SynthProfile) -> Iterator[Triple]:
    profile.check()
    rng = random.Random(profile.seed)
    if profile.regularity == "regular":
        return _regular_triples(profile, rng)
    return _irregular_triples(profile, rng)


def generate_synthetic(profile: SynthProfile, output_path: Union[str, Path]) -> DatasetStats:
    """Write a deterministic synthetic N-Triples file; returns its statistics."""
    profile.check()
    output_path = Path(output_path)
    tmp = output_path.with_name(output_path.name + ".tmp")
    acc = StatsAccumulator()
    ser = kernels.serialize_triple
    buf: list[str] = []
    with open(tmp, "wb") as fh:
        for t in synthetic_triples(profile):
            buf.append(ser(*t))
            acc.add(t)
            if len(buf) >= 8192:
                fh.write("".join(buf).encode("utf-8"))
                buf.clear()
        fh.write("".join(buf).encode("utf-8"))
    os.replace(tmp, output_path)
    return acc.result()
