"""Pure-Python implementations of the hot per-line kernels.

The compiled module ``rdfload._kernels`` exposes the same functions with the
same semantics; ``rdfload._accel`` picks one at import time.

``parse_line`` tries one anchored regex first and falls back to the
character scanner, which is the reference for error columns and for the
rare lines the regex does not cover (escaped IRIs, comments, blank lines).
"""
from __future__ import annotations

import re

from rdfload.terms import (
    _IRI_FORBIDDEN,
    _LANGTAG,
    _SCHEME,
    BNODE_LABEL_RE,
    XSD_STRING,
    LineSyntaxError,
    Term,
    TermKind,
)

BACKEND = "python"

_new = tuple.__new__
_IRI = TermKind.IRI
_BNODE = TermKind.BNODE
_LITERAL = TermKind.LITERAL

_BNODE_LABEL = re.compile(BNODE_LABEL_RE)
_HEX = frozenset("0123456789abcdefABCDEF")
_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f",
          '"': '"', "'": "'", "\\": "\\"}

_IRI_CHARS = r'[^\x00-\x20<>"{}|^`\\]'
_IRI_FAST = r"<([A-Za-z][A-Za-z0-9+.\-]*:" + _IRI_CHARS + r"*)>"
_LIT_BODY = (r'[^"\\\n\r]*(?:\\(?:[tbnrf"\'\\]|u[0-9A-Fa-f]{4}|U[0-9A-Fa-f]{8})'
             r'[^"\\\n\r]*)*')
_FAST = re.compile(
    r"[ \t]*(?:" + _IRI_FAST + r"|_:(" + BNODE_LABEL_RE + r"))"
    r"[ \t]*" + _IRI_FAST +
    r"[ \t]*(?:" + _IRI_FAST + r"|_:(" + BNODE_LABEL_RE + r")"
    r'|"(' + _LIT_BODY + r')"(?:@([a-zA-Z]+(?:-[a-zA-Z0-9]+)*)|\^\^' + _IRI_FAST + r")?)"
    r"[ \t]*\.[ \t]*(?:#.*)?\Z"
)
_ESC = re.compile(r'\\(?:([tbnrf"\'\\])|u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8}))')


def _esc_repl(m: re.Match) -> str:
    if m.group(1) is not None:
        return _ECHAR[m.group(1)]
    cp = int(m.group(2) or m.group(3), 16)
    if cp > 0x10FFFF or 0xD800 <= cp <= 0xDFFF:
        raise LineSyntaxError(0, "escape is not a Unicode scalar value")
    return chr(cp)


def parse_line(line: str):
    """Parse one N-Triples line (terminator already stripped).

    Returns ``(s, p, o)`` terms, or ``None`` for blank and comment lines.
    """
    m = _FAST.match(line)
    if m is None:
        return _scan_line(line)
    s_iri, s_bn, p, o_iri, o_bn, o_lit, lang, dt = m.groups()
    subj = _new(Term, (_IRI, s_iri, None, None)) if s_iri is not None \
        else _new(Term, (_BNODE, s_bn, None, None))
    pred = _new(Term, (_IRI, p, None, None))
    if o_iri is not None:
        obj = _new(Term, (_IRI, o_iri, None, None))
    elif o_bn is not None:
        obj = _new(Term, (_BNODE, o_bn, None, None))
    else:
        if "\\" in o_lit:
            try:
                o_lit = _ESC.sub(_esc_repl, o_lit)
            except LineSyntaxError:
                return _scan_line(line)
        if dt == XSD_STRING:
            dt = None
        obj = _new(Term, (_LITERAL, o_lit, dt, lang))
    return subj, pred, obj


def _skip_ws(line: str, i: int, n: int) -> int:
    while i < n and (line[i] == " " or line[i] == "\t"):
        i += 1
    return i


def _uchar(line: str, i: int, n: int):
    width = 4 if line[i + 1] == "u" else 8
    digits = line[i + 2:i + 2 + width]
    if len(digits) != width or any(c not in _HEX for c in digits):
        raise LineSyntaxError(i, "malformed unicode escape")
    cp = int(digits, 16)
    if cp > 0x10FFFF or 0xD800 <= cp <= 0xDFFF:
        raise LineSyntaxError(i, "escape is not a Unicode scalar value")
    return chr(cp), i + 2 + width


def _scan_iri(line: str, i: int, n: int):
    start = i
    i += 1
    parts = []
    chunk = i
    while True:
        if i >= n:
            raise LineSyntaxError(start, "unterminated IRI")
        c = line[i]
        if c == ">":
            break
        if c == "\\":
            if i + 1 < n and line[i + 1] in "uU":
                parts.append(line[chunk:i])
                ch, j = _uchar(line, i, n)
                if ch in _IRI_FORBIDDEN:
                    raise LineSyntaxError(i, "escaped character not allowed in IRI")
                parts.append(ch)
                i = chunk = j
                continue
            raise LineSyntaxError(i, "invalid escape in IRI")
        if c in _IRI_FORBIDDEN:
            raise LineSyntaxError(i, f"character {c!r} not allowed in IRI")
        i += 1
    parts.append(line[chunk:i])
    value = "".join(parts)
    if _SCHEME.match(value) is None:
        raise LineSyntaxError(start, "IRI is not absolute")
    return value, i + 1


def _scan_bnode(line: str, i: int, n: int):
    m = _BNODE_LABEL.match(line, i + 2)
    if m is None:
        raise LineSyntaxError(i, "invalid blank node label")
    return m.group(), m.end()


def _scan_literal(line: str, i: int, n: int):
    start = i
    i += 1
    parts = []
    chunk = i
    while True:
        if i >= n:
            raise LineSyntaxError(start, "unterminated literal")
        c = line[i]
        if c == '"':
            break
        if c == "\\":
            parts.append(line[chunk:i])
            if i + 1 < n and line[i + 1] in "uU":
                ch, i = _uchar(line, i, n)
            elif i + 1 < n and line[i + 1] in _ECHAR:
                ch = _ECHAR[line[i + 1]]
                i += 2
            else:
                raise LineSyntaxError(i, "invalid escape in literal")
            parts.append(ch)
            chunk = i
            continue
        if c == "\n" or c == "\r":
            raise LineSyntaxError(i, "raw line break in literal")
        i += 1
    parts.append(line[chunk:i])
    value = "".join(parts)
    i += 1
    datatype = language = None
    if i < n and line[i] == "@":
        m = _LANGTAG.match(line, i + 1)
        if m is None:
            raise LineSyntaxError(i, "invalid language tag")
        language = m.group()
        i = m.end()
    elif line.startswith("^^", i):
        if i + 2 >= n or line[i + 2] != "<":
            raise LineSyntaxError(i + 2, "expected datatype IRI after '^^'")
        datatype, i = _scan_iri(line, i + 2, n)
        if datatype == XSD_STRING:
            datatype = None
    return _new(Term, (_LITERAL, value, datatype, language)), i


def scan_term(line: str, i: int):
    """Scan one term starting at ``i``; returns ``(term, end)``."""
    n = len(line)
    c = line[i] if i < n else ""
    if c == "<":
        value, i = _scan_iri(line, i, n)
        return _new(Term, (_IRI, value, None, None)), i
    if c == "_" and line.startswith("_:", i):
        value, i = _scan_bnode(line, i, n)
        return _new(Term, (_BNODE, value, None, None)), i
    if c == '"':
        return _scan_literal(line, i, n)
    raise LineSyntaxError(i, "expected an RDF term")


def _scan_line(line: str):
    n = len(line)
    i = _skip_ws(line, 0, n)
    if i == n or line[i] == "#":
        return None
    c = line[i]
    if c == "<":
        value, i = _scan_iri(line, i, n)
        subj = _new(Term, (_IRI, value, None, None))
    elif line.startswith("_:", i):
        value, i = _scan_bnode(line, i, n)
        subj = _new(Term, (_BNODE, value, None, None))
    else:
        raise LineSyntaxError(i, "expected IRI or blank node as subject")
    i = _skip_ws(line, i, n)
    if i >= n or line[i] != "<":
        raise LineSyntaxError(i, "expected IRI as predicate")
    value, i = _scan_iri(line, i, n)
    pred = _new(Term, (_IRI, value, None, None))
    i = _skip_ws(line, i, n)
    if i >= n or line[i] not in '<_"' or (line[i] == "_" and not line.startswith("_:", i)):
        raise LineSyntaxError(i, "expected IRI, blank node or literal as object")
    obj, i = scan_term(line, i)
    i = _skip_ws(line, i, n)
    if i >= n or line[i] != ".":
        raise LineSyntaxError(i, "expected '.' to end the statement")
    i = _skip_ws(line, i + 1, n)
    if i < n and line[i] != "#":
        raise LineSyntaxError(i, "unexpected content after '.'")
    return subj, pred, obj


def parse_term(text: str) -> Term:
    term, end = scan_term(text, 0)
    if end != len(text):
        raise LineSyntaxError(end, "trailing characters after term")
    return term


def _escape(v: str) -> str:
    if "\\" in v or '"' in v or "\n" in v or "\r" in v:
        v = (v.replace("\\", "\\\\").replace('"', '\\"')
              .replace("\n", "\\n").replace("\r", "\\r"))
    return v


def serialize_term(t) -> str:
    kind = t[0]
    if kind == 0:
        return "<" + t[1] + ">"
    if kind == 1:
        return "_:" + t[1]
    if t[3] is not None:
        return '"' + _escape(t[1]) + '"@' + t[3]
    if t[2] is not None:
        return '"' + _escape(t[1]) + '"^^<' + t[2] + ">"
    return '"' + _escape(t[1]) + '"'


def serialize_triple(s, p, o) -> str:
    return serialize_term(s) + " " + serialize_term(p) + " " + serialize_term(o) + " .\n"


def _u8len(s: str) -> int:
    return len(s) if s.isascii() else len(s.encode("utf-8"))


def term_nbytes(t) -> int:
    kind = t[0]
    v = t[1]
    if kind != 2:
        return _u8len(v) + 2
    n = _u8len(v) + 2 + v.count("\\") + v.count('"') + v.count("\n") + v.count("\r")
    if t[3] is not None:
        n += len(t[3]) + 1
    elif t[2] is not None:
        n += _u8len(t[2]) + 4
    return n


def triple_nbytes(s, p, o) -> int:
    # three terms, two separating spaces, " .\n"
    return term_nbytes(s) + term_nbytes(p) + term_nbytes(o) + 5


def intern_triples(triples, ids: dict, terms: list) -> list:
    """Map term triples to id triples, assigning fresh ids in first-seen order.

    New terms are stored as exact tuples with an int kind (see
    ``terms.term_key``) so the tables stay invisible to the cyclic GC.
    """
    out = []
    append = out.append
    get = ids.get
    for s, p, o in triples:
        a = get(s)
        if a is None:
            a = len(terms)
            k = (int(s[0]), s[1], s[2], s[3])
            ids[k] = a
            terms.append(k)
        b = get(p)
        if b is None:
            b = len(terms)
            k = (int(p[0]), p[1], p[2], p[3])
            ids[k] = b
            terms.append(k)
        c = get(o)
        if c is None:
            c = len(terms)
            k = (int(o[0]), o[1], o[2], o[3])
            ids[k] = c
            terms.append(k)
        append((a, b, c))
    return out
