"""The compiled and pure-Python kernels must agree on every input."""
import random

import pytest
from hypothesis import given, settings

from rdfload import _accel
from rdfload.terms import LineSyntaxError, Term, TermKind, Triple

from .helpers import random_triple, triples
from .test_ntriples import MALFORMED

BACKENDS = _accel.available_backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
PY = BACKENDS["python"]
CY = BACKENDS.get("cython")


def _outcome(fn, *args):
    try:
        return ("ok", fn(*args))
    except LineSyntaxError as exc:
        return ("err", exc.column)
    except ValueError as exc:
        return ("err", type(exc).__name__)


def test_backend_selection():
    assert _accel.BACKEND in BACKENDS
    assert PY.BACKEND == "python"


@needs_both
@settings(max_examples=300, deadline=None)
@given(triples)
def test_serialize_parse_parity(t):
    line = PY.serialize_triple(*t)
    assert CY.serialize_triple(*t) == line
    assert CY.parse_line(line[:-1]) == PY.parse_line(line[:-1]) == tuple(t)
    assert CY.triple_nbytes(*t) == PY.triple_nbytes(*t) == len(line.encode("utf-8"))
    for term in t:
        assert CY.term_nbytes(term) == PY.term_nbytes(term)


@needs_both
@pytest.mark.parametrize("line,why", MALFORMED, ids=[m[1] for m in MALFORMED])
def test_error_columns_agree(line, why):
    text = line.decode("utf-8", "replace")
    assert _outcome(CY.parse_line, text) == _outcome(PY.parse_line, text), why


@needs_both
def test_mutated_lines_agree():
    # random single-character corruptions of valid lines
    rng = random.Random(7)
    noise = '<>"\\ _:@^.#\tx-é'
    for _ in range(3000):
        line = PY.serialize_triple(*random_triple(rng))[:-1]
        i = rng.randrange(len(line) + 1)
        bad = line[:i] + rng.choice(noise) + line[i + rng.randint(0, 1):]
        assert _outcome(CY.parse_line, bad) == _outcome(PY.parse_line, bad), bad


@needs_both
def test_intern_parity():
    rng = random.Random(3)
    data = [random_triple(rng) for _ in range(500)]
    data += data[:100]
    results = []
    for k in (PY, CY):
        ids, terms = {}, []
        out = k.intern_triples(data, ids, terms)
        results.append((out, terms, ids))
    assert results[0] == results[1]
    out, terms, ids = results[0]
    assert len(ids) == len(terms)
    assert all(ids[terms[i]] == i for i in range(len(terms)))
    assert [tuple(terms[i] for i in row) for row in out] == [tuple(t) for t in data]


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_intern_keys_are_plain_tuples(name):
    k = BACKENDS[name]
    ids, terms = {}, []
    k.intern_triples([Triple(Term(TermKind.IRI, "http://a"), Term(TermKind.IRI, "http://p"),
                             Term(TermKind.LITERAL, "x", None, "en"))], ids, terms)
    assert all(type(t) is tuple and type(t[0]) is int for t in terms)
    # parsed terms still find their ids
    assert ids[Term(TermKind.LITERAL, "x", None, "en")] == 2
