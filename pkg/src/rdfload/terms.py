"""RDF term and triple value types.

Terms are plain named tuples so they hash and compare fast when interned by
the store.  The unchecked constructors are used by the parser kernels, which
only ever build valid terms; the helper functions below validate.
"""
from __future__ import annotations

import enum
import re
from typing import NamedTuple, Optional

XSD_STRING = "http://www.w3.org/2001/XMLSchema#string"


class TermKind(enum.IntEnum):
    IRI = 0
    BNODE = 1
    LITERAL = 2


class Term(NamedTuple):
    kind: TermKind
    value: str
    datatype: Optional[str] = None
    language: Optional[str] = None

    def __str__(self) -> str:
        from rdfload._accel import kernels
        return kernels.serialize_term(self)

    @property
    def is_literal(self) -> bool:
        return self.kind == TermKind.LITERAL


KINDS = (TermKind.IRI, TermKind.BNODE, TermKind.LITERAL)


def term_key(t) -> tuple:
    """Exact-tuple twin of a term (int kind); equal to and hashing like the Term.

    Long-lived tables hold keys instead of Terms because the garbage
    collector stops tracking exact tuples of atoms, but never NamedTuples.
    """
    return (int(t[0]), t[1], t[2], t[3])


def key_term(k: tuple) -> Term:
    return tuple.__new__(Term, (KINDS[k[0]], k[1], k[2], k[3]))


class Triple(NamedTuple):
    subject: Term
    predicate: Term
    object: Term


class LineSyntaxError(ValueError):
    """Raised by the line kernels; ``column`` is a 0-based character offset."""

    def __init__(self, column: int, message: str):
        super().__init__(message)
        self.column = column
        self.message = message


_IRI_FORBIDDEN = frozenset('<>"{}|^`\\') | frozenset(chr(c) for c in range(0x21))
_SCHEME = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*:")
_PN_BASE = (
    "A-Za-z\u00C0-\u00D6\u00D8-\u00F6\u00F8-\u02FF\u0370-\u037D\u037F-\u1FFF"
    "\u200C-\u200D\u2070-\u218F\u2C00-\u2FEF\u3001-\uD7FF\uF900-\uFDCF"
    "\uFDF0-\uFFFD\U00010000-\U000EFFFF"
)
PN_CHARS_U = _PN_BASE + "_:"
PN_CHARS = PN_CHARS_U + "\\-0-9\u00B7\u0300-\u036F\u203F-\u2040"
BNODE_LABEL_RE = f"[{PN_CHARS_U}0-9](?:[{PN_CHARS}.]*[{PN_CHARS}])?"
_BNODE_LABEL = re.compile(BNODE_LABEL_RE)
_LANGTAG = re.compile(r"[a-zA-Z]+(?:-[a-zA-Z0-9]+)*")


def valid_iri(value: str) -> bool:
    return (bool(value) and _SCHEME.match(value) is not None
            and not any(c in _IRI_FORBIDDEN for c in value))


def iri(value: str) -> Term:
    if not valid_iri(value):
        raise ValueError(f"invalid IRI: {value!r}")
    return Term(TermKind.IRI, value)


def bnode(label: str) -> Term:
    if _BNODE_LABEL.fullmatch(label) is None:
        raise ValueError(f"invalid blank node label: {label!r}")
    return Term(TermKind.BNODE, label)


def literal(value: str, datatype: Optional[str] = None,
            language: Optional[str] = None) -> Term:
    """Build a literal; an explicit ``xsd:string`` datatype is dropped."""
    if datatype is not None and language is not None:
        raise ValueError("a literal cannot carry both a datatype and a language tag")
    if datatype == XSD_STRING:
        datatype = None
    if datatype is not None and not valid_iri(datatype):
        raise ValueError(f"invalid datatype IRI: {datatype!r}")
    if language is not None and _LANGTAG.fullmatch(language) is None:
        raise ValueError(f"invalid language tag: {language!r}")
    return Term(TermKind.LITERAL, value, datatype, language)


def validate_term(term: Term) -> None:
    kind = TermKind(term.kind)
    if kind != TermKind.LITERAL and (term.datatype is not None or term.language is not None):
        raise ValueError("only literals may carry a datatype or language tag")
    if kind == TermKind.IRI:
        iri(term.value)
    elif kind == TermKind.BNODE:
        bnode(term.value)
    else:
        if term.datatype == XSD_STRING:
            raise ValueError("xsd:string must be implicit")
        literal(term.value, term.datatype, term.language)


def validate_triple(triple: Triple) -> None:
    s, p, o = triple
    if s.kind == TermKind.LITERAL:
        raise ValueError("literal in subject position")
    if p.kind != TermKind.IRI:
        raise ValueError("predicate must be an IRI")
    for term in triple:
        validate_term(term)
