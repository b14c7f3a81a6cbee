# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled per-line kernels; mirrors rdfload._pykernels function for function."""
from rdfload.terms import XSD_STRING, LineSyntaxError, Term, TermKind

BACKEND = "cython"

cdef object _new = tuple.__new__
cdef object _Term = Term
cdef object _IRI = TermKind.IRI
cdef object _BNODE = TermKind.BNODE
cdef object _LITERAL = TermKind.LITERAL
cdef str _XSD_STRING = XSD_STRING


cdef inline bint _is_ws(Py_UCS4 c):
    return c == u' ' or c == u'\t'


cdef inline bint _iri_forbidden(Py_UCS4 c):
    return (c <= 0x20 or c == u'<' or c == u'>' or c == u'"' or c == u'{'
            or c == u'}' or c == u'|' or c == u'^' or c == u'`' or c == u'\\')


cdef inline bint _is_hex(Py_UCS4 c):
    return (u'0' <= c <= u'9') or (u'a' <= c <= u'f') or (u'A' <= c <= u'F')


cdef inline bint _is_alpha(Py_UCS4 c):
    return (u'a' <= c <= u'z') or (u'A' <= c <= u'Z')


cdef inline bint _is_digit(Py_UCS4 c):
    return u'0' <= c <= u'9'


cdef inline bint _pn_base(Py_UCS4 c):
    if c < 0x80:
        return _is_alpha(c)
    return ((0xC0 <= c <= 0xD6) or (0xD8 <= c <= 0xF6) or (0xF8 <= c <= 0x2FF)
            or (0x370 <= c <= 0x37D) or (0x37F <= c <= 0x1FFF) or (0x200C <= c <= 0x200D)
            or (0x2070 <= c <= 0x218F) or (0x2C00 <= c <= 0x2FEF) or (0x3001 <= c <= 0xD7FF)
            or (0xF900 <= c <= 0xFDCF) or (0xFDF0 <= c <= 0xFFFD) or (0x10000 <= c <= 0xEFFFF))


cdef inline bint _pn_u(Py_UCS4 c):
    return _pn_base(c) or c == u'_' or c == u':'


cdef inline bint _pn(Py_UCS4 c):
    return (_pn_u(c) or c == u'-' or _is_digit(c) or c == 0xB7
            or (0x300 <= c <= 0x36F) or (0x203F <= c <= 0x2040))


cdef Py_ssize_t _skip_ws(str line, Py_ssize_t i, Py_ssize_t n):
    while i < n and _is_ws(line[i]):
        i += 1
    return i


cdef Py_UCS4 _uchar(str line, Py_ssize_t i, Py_ssize_t n) except? 0xFFFFFFFF:
    cdef Py_ssize_t width = 4 if line[i + 1] == u'u' else 8
    cdef Py_ssize_t k
    cdef unsigned long cp = 0
    cdef Py_UCS4 c
    if i + 2 + width > n:
        raise LineSyntaxError(i, "malformed unicode escape")
    for k in range(i + 2, i + 2 + width):
        c = line[k]
        if not _is_hex(c):
            raise LineSyntaxError(i, "malformed unicode escape")
        if c <= 0x39:
            cp = cp * 16 + (<unsigned long>c - 0x30)
        elif c <= 0x46:
            cp = cp * 16 + (<unsigned long>c - 0x41 + 10)
        else:
            cp = cp * 16 + (<unsigned long>c - 0x61 + 10)
    if cp > 0x10FFFF or 0xD800 <= cp <= 0xDFFF:
        raise LineSyntaxError(i, "escape is not a Unicode scalar value")
    return <Py_UCS4>cp


cdef bint _has_scheme(str v):
    cdef Py_ssize_t n = len(v), i
    cdef Py_UCS4 c
    if n == 0 or not _is_alpha(v[0]):
        return False
    for i in range(1, n):
        c = v[i]
        if c == u':':
            return True
        if not (_is_alpha(c) or _is_digit(c) or c == u'+' or c == u'.' or c == u'-'):
            return False
    return False


cdef tuple _scan_iri(str line, Py_ssize_t i, Py_ssize_t n):
    cdef Py_ssize_t start = i, chunk
    cdef Py_UCS4 c, ch
    cdef list parts = None
    cdef str value
    i += 1
    chunk = i
    while True:
        if i >= n:
            raise LineSyntaxError(start, "unterminated IRI")
        c = line[i]
        if c == u'>':
            break
        if c == u'\\':
            if i + 1 < n and (line[i + 1] == u'u' or line[i + 1] == u'U'):
                if parts is None:
                    parts = []
                parts.append(line[chunk:i])
                ch = _uchar(line, i, n)
                if _iri_forbidden(ch):
                    raise LineSyntaxError(i, "escaped character not allowed in IRI")
                parts.append(ch)
                i += 6 if line[i + 1] == u'u' else 10
                chunk = i
                continue
            raise LineSyntaxError(i, "invalid escape in IRI")
        if _iri_forbidden(c):
            raise LineSyntaxError(i, f"character {c!r} not allowed in IRI")
        i += 1
    if parts is None:
        value = line[chunk:i]
    else:
        parts.append(line[chunk:i])
        value = "".join(parts)
    if not _has_scheme(value):
        raise LineSyntaxError(start, "IRI is not absolute")
    return value, i + 1


cdef tuple _scan_bnode(str line, Py_ssize_t i, Py_ssize_t n):
    cdef Py_ssize_t j = i + 2, end
    cdef Py_UCS4 c
    if j >= n or not (_pn_u(line[j]) or _is_digit(line[j])):
        raise LineSyntaxError(i, "invalid blank node label")
    j += 1
    end = j
    while j < n:
        c = line[j]
        if c == u'.':
            j += 1
        elif _pn(c):
            j += 1
            end = j
        else:
            break
    return line[i + 2:end], end


cdef Py_ssize_t _scan_langtag(str line, Py_ssize_t i, Py_ssize_t n):
    # returns end of tag starting at i, or -1
    cdef Py_ssize_t j = i, k
    while j < n and _is_alpha(line[j]):
        j += 1
    if j == i:
        return -1
    while j < n and line[j] == u'-':
        k = j + 1
        while k < n and (_is_alpha(line[k]) or _is_digit(line[k])):
            k += 1
        if k == j + 1:
            break
        j = k
    return j


cdef tuple _scan_literal(str line, Py_ssize_t i, Py_ssize_t n):
    cdef Py_ssize_t start = i, chunk, end
    cdef Py_UCS4 c, e
    cdef list parts = None
    cdef str value
    cdef object datatype = None, language = None
    i += 1
    chunk = i
    while True:
        if i >= n:
            raise LineSyntaxError(start, "unterminated literal")
        c = line[i]
        if c == u'"':
            break
        if c == u'\\':
            if parts is None:
                parts = []
            parts.append(line[chunk:i])
            e = line[i + 1] if i + 1 < n else 0
            if e == u'u' or e == u'U':
                parts.append(_uchar(line, i, n))
                i += 6 if e == u'u' else 10
            elif e == u't':
                parts.append(u'\t'); i += 2
            elif e == u'b':
                parts.append(u'\b'); i += 2
            elif e == u'n':
                parts.append(u'\n'); i += 2
            elif e == u'r':
                parts.append(u'\r'); i += 2
            elif e == u'f':
                parts.append(u'\f'); i += 2
            elif e == u'"' or e == u"'" or e == u'\\':
                parts.append(e); i += 2
            else:
                raise LineSyntaxError(i, "invalid escape in literal")
            chunk = i
            continue
        if c == u'\n' or c == u'\r':
            raise LineSyntaxError(i, "raw line break in literal")
        i += 1
    if parts is None:
        value = line[chunk:i]
    else:
        parts.append(line[chunk:i])
        value = "".join(parts)
    i += 1
    if i < n and line[i] == u'@':
        end = _scan_langtag(line, i + 1, n)
        if end < 0:
            raise LineSyntaxError(i, "invalid language tag")
        language = line[i + 1:end]
        i = end
    elif i + 1 < n and line[i] == u'^' and line[i + 1] == u'^':
        if i + 2 >= n or line[i + 2] != u'<':
            raise LineSyntaxError(i + 2, "expected datatype IRI after '^^'")
        datatype, i = _scan_iri(line, i + 2, n)
        if datatype == _XSD_STRING:
            datatype = None
    return _new(_Term, (_LITERAL, value, datatype, language)), i


cdef tuple _scan_term(str line, Py_ssize_t i, Py_ssize_t n):
    cdef Py_UCS4 c
    if i >= n:
        raise LineSyntaxError(i, "expected an RDF term")
    c = line[i]
    if c == u'<':
        value, i = _scan_iri(line, i, n)
        return _new(_Term, (_IRI, value, None, None)), i
    if c == u'_' and i + 1 < n and line[i + 1] == u':':
        value, i = _scan_bnode(line, i, n)
        return _new(_Term, (_BNODE, value, None, None)), i
    if c == u'"':
        return _scan_literal(line, i, n)
    raise LineSyntaxError(i, "expected an RDF term")


def scan_term(str line, Py_ssize_t i):
    return _scan_term(line, i, len(line))


def parse_term(str text):
    term, end = _scan_term(text, 0, len(text))
    if end != len(text):
        raise LineSyntaxError(end, "trailing characters after term")
    return term


def parse_line(str line):
    cdef Py_ssize_t n = len(line)
    cdef Py_ssize_t i = _skip_ws(line, 0, n)
    cdef Py_UCS4 c
    if i == n or line[i] == u'#':
        return None
    c = line[i]
    if c == u'<':
        value, i = _scan_iri(line, i, n)
        subj = _new(_Term, (_IRI, value, None, None))
    elif c == u'_' and i + 1 < n and line[i + 1] == u':':
        value, i = _scan_bnode(line, i, n)
        subj = _new(_Term, (_BNODE, value, None, None))
    else:
        raise LineSyntaxError(i, "expected IRI or blank node as subject")
    i = _skip_ws(line, i, n)
    if i >= n or line[i] != u'<':
        raise LineSyntaxError(i, "expected IRI as predicate")
    value, i = _scan_iri(line, i, n)
    pred = _new(_Term, (_IRI, value, None, None))
    i = _skip_ws(line, i, n)
    if i >= n:
        raise LineSyntaxError(i, "expected IRI, blank node or literal as object")
    c = line[i]
    if not (c == u'<' or c == u'"' or (c == u'_' and i + 1 < n and line[i + 1] == u':')):
        raise LineSyntaxError(i, "expected IRI, blank node or literal as object")
    obj, i = _scan_term(line, i, n)
    i = _skip_ws(line, i, n)
    if i >= n or line[i] != u'.':
        raise LineSyntaxError(i, "expected '.' to end the statement")
    i = _skip_ws(line, i + 1, n)
    if i < n and line[i] != u'#':
        raise LineSyntaxError(i, "unexpected content after '.'")
    return subj, pred, obj


cdef str _escape(str v):
    if u'\\' in v or u'"' in v or u'\n' in v or u'\r' in v:
        v = (v.replace(u'\\', u'\\\\').replace(u'"', u'\\"')
              .replace(u'\n', u'\\n').replace(u'\r', u'\\r'))
    return v


def serialize_term(t):
    cdef long kind = t[0]
    if kind == 0:
        return u'<' + <str>t[1] + u'>'
    if kind == 1:
        return u'_:' + <str>t[1]
    if t[3] is not None:
        return u'"' + _escape(t[1]) + u'"@' + <str>t[3]
    if t[2] is not None:
        return u'"' + _escape(t[1]) + u'"^^<' + <str>t[2] + u'>'
    return u'"' + _escape(t[1]) + u'"'


def serialize_triple(s, p, o):
    return serialize_term(s) + u' ' + serialize_term(p) + u' ' + serialize_term(o) + u' .\n'


cdef Py_ssize_t _u8len(str s):
    cdef Py_ssize_t n = 0
    cdef Py_UCS4 c
    if s.isascii():
        return len(s)
    for c in s:
        if c < 0x80:
            n += 1
        elif c < 0x800:
            n += 2
        elif c < 0x10000:
            n += 3
        else:
            n += 4
    return n


cdef Py_ssize_t _literal_body_nbytes(str s):
    cdef Py_ssize_t n = 0
    cdef Py_UCS4 c
    for c in s:
        if c < 0x80:
            n += 2 if (c == u'"' or c == u'\\' or c == u'\n' or c == u'\r') else 1
        elif c < 0x800:
            n += 2
        elif c < 0x10000:
            n += 3
        else:
            n += 4
    return n


cdef Py_ssize_t _term_nbytes(object t):
    cdef long kind = t[0]
    cdef Py_ssize_t n
    if kind != 2:
        return _u8len(<str>t[1]) + 2
    n = _literal_body_nbytes(<str>t[1]) + 2
    if t[3] is not None:
        n += len(<str>t[3]) + 1
    elif t[2] is not None:
        n += _u8len(<str>t[2]) + 4
    return n


def term_nbytes(t):
    return _term_nbytes(t)


def triple_nbytes(s, p, o):
    return _term_nbytes(s) + _term_nbytes(p) + _term_nbytes(o) + 5


cdef inline tuple _key(object t):
    return (<long>t[0], t[1], t[2], t[3])


def intern_triples(triples, dict ids, list terms):
    cdef list out = []
    cdef object a, b, c
    cdef tuple k
    for s, p, o in triples:
        a = ids.get(s)
        if a is None:
            a = len(terms)
            k = _key(s)
            ids[k] = a
            terms.append(k)
        b = ids.get(p)
        if b is None:
            b = len(terms)
            k = _key(p)
            ids[k] = b
            terms.append(k)
        c = ids.get(o)
        if c is None:
            c = len(terms)
            k = _key(o)
            ids[k] = c
            terms.append(k)
        out.append((a, b, c))
    return out
