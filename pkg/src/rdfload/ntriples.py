"""Streaming N-Triples parsing and canonical serialization.

Canonical form: single spaces between terms, `` .`` plus LF, and only the
escapes the grammar forces inside literals (``\\"``, ``\\\\``, ``\\n``,
``\\r``).  An explicit ``xsd:string`` datatype is dropped on parse.
"""
from __future__ import annotations

import contextlib
import gc
import io
import logging
import os
from typing import BinaryIO, Iterable, Iterator, Optional, Tuple, Union

from rdfload._accel import kernels
from rdfload.terms import LineSyntaxError, Term, TermKind, Triple  # noqa: F401

log = logging.getLogger(__name__)

_new = tuple.__new__
PathLike = Union[str, "os.PathLike[str]"]


class NTriplesSyntaxError(ValueError):
    """A malformed line; ``line`` is 1-based, ``column`` 0-based."""

    def __init__(self, line: int, column: int, token: str, message: str):
        super().__init__(f"line {line}, column {column}: {message} (at {token!r})")
        self.line = line
        self.column = column
        self.token = token
        self.message = message


def _token_at(text: str, column: int) -> str:
    if column >= len(text):
        return "<end of line>"
    end = column
    while end < len(text) and end - column < 40 and text[end] not in " \t":
        end += 1
    return text[column:end] or text[column]


class NTriplesParser:
    """Single-consumer streaming parser.

    In strict mode the first malformed line raises :class:`NTriplesSyntaxError`.
    In lenient mode malformed lines are skipped and counted in ``skipped``;
    the first ``max_recorded_errors`` are kept in ``errors``.

    ``max_line_bytes`` records the longest raw line seen, which is the only
    buffer the parser holds on to.
    """

    def __init__(self, strict: bool = True, max_recorded_errors: int = 100):
        self.strict = strict
        self.max_recorded_errors = max_recorded_errors
        self.skipped = 0
        self.errors: list[NTriplesSyntaxError] = []
        self.max_line_bytes = 0
        self.lines = 0

    def _fail(self, err: NTriplesSyntaxError) -> None:
        if self.strict:
            raise err
        self.skipped += 1
        if len(self.errors) < self.max_recorded_errors:
            self.errors.append(err)
        log.debug("skipping malformed line: %s", err)

    def parse(self, stream: Iterable[bytes]) -> Iterator[Tuple[int, Triple]]:
        parse_line = kernels.parse_line
        longest = self.max_line_bytes
        lineno = self.lines
        try:
            for raw in stream:
                lineno += 1
                if len(raw) > longest:
                    longest = len(raw)
                if raw.endswith(b"\n"):
                    raw = raw[:-1]
                    if raw.endswith(b"\r"):
                        raw = raw[:-1]
                try:
                    text = raw.decode("utf-8")
                except UnicodeDecodeError as exc:
                    self._fail(NTriplesSyntaxError(lineno, exc.start, repr(raw[exc.start:exc.start + 4]),
                                                   "invalid UTF-8"))
                    continue
                try:
                    terms = parse_line(text)
                except LineSyntaxError as exc:
                    self._fail(NTriplesSyntaxError(lineno, exc.column, _token_at(text, exc.column),
                                                   exc.message))
                    continue
                if terms is not None:
                    yield lineno, _new(Triple, terms)
        finally:
            self.lines = lineno
            self.max_line_bytes = longest


def parse_stream(stream: Iterable[bytes], strict: bool = True,
                 parser: Optional[NTriplesParser] = None) -> Iterator[Tuple[int, Triple]]:
    """Yield ``(line_number, triple)`` pairs from a binary line stream."""
    if parser is None:
        parser = NTriplesParser(strict=strict)
    return parser.parse(stream)


def iter_file(path: PathLike, strict: bool = True,
              parser: Optional[NTriplesParser] = None) -> Iterator[Triple]:
    """Triples of an N-Triples file, in file order."""
    with open(path, "rb") as fh:
        for _, triple in parse_stream(fh, strict=strict, parser=parser):
            yield triple


@contextlib.contextmanager
def gc_paused():
    """Suspend the cyclic garbage collector (reference counting still frees memory).

    Parsed terms and triples never form cycles, but building hundreds of
    thousands of them at once makes the collector rescan everything alive
    repeatedly; pausing it keeps parse cost linear in batch size.
    """
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


def parse_bytes(data: bytes, strict: bool = True) -> list[Triple]:
    return [t for _, t in parse_stream(io.BytesIO(data), strict=strict)]


def parse_term(text: str) -> Term:
    """Parse a single term written in N-Triples syntax."""
    try:
        return kernels.parse_term(text)
    except LineSyntaxError as exc:
        raise NTriplesSyntaxError(1, exc.column, _token_at(text, exc.column), exc.message) from None


def serialize_term(term: Term) -> str:
    return kernels.serialize_term(term)


def serialize_triple(triple: Triple) -> bytes:
    """One canonical N-Triples line, LF-terminated, UTF-8 encoded."""
    return kernels.serialize_triple(*triple).encode("utf-8")


def line_byte_length(triple: Triple) -> int:
    """Byte length of ``serialize_triple(triple)``, terminator included."""
    return kernels.triple_nbytes(*triple)


def write_triples(triples: Iterable[Triple], fh: BinaryIO, chunk: int = 4096) -> int:
    """Write canonical lines to a binary file; returns the number written."""
    ser = kernels.serialize_triple
    buf: list[str] = []
    count = 0
    for s, p, o in triples:
        buf.append(ser(s, p, o))
        if len(buf) >= chunk:
            fh.write("".join(buf).encode("utf-8"))
            count += len(buf)
            buf.clear()
    if buf:
        fh.write("".join(buf).encode("utf-8"))
        count += len(buf)
    return count
