"""Shared strategies, random generators and independent oracles for the tests."""
from __future__ import annotations

import random
import string

from hypothesis import strategies as st

from rdfload.terms import Term, TermKind, Triple, XSD_STRING

IRI_FORBIDDEN = set('<>"{}|^`\\') | {chr(c) for c in range(0x21)}

_iri_chars = st.characters(blacklist_categories=("Cs",),
                           blacklist_characters="".join(sorted(IRI_FORBIDDEN)))
_lang = st.from_regex(r"\A[a-zA-Z]{1,8}(-[a-zA-Z0-9]{1,8}){0,2}\Z")
_bn_first = st.sampled_from(string.ascii_letters + string.digits + "_é")
_bn_mid = st.text(alphabet=string.ascii_letters + string.digits + "_-.·é", max_size=10)
_bn_last = st.sampled_from(string.ascii_letters + string.digits + "_-·")

iris = st.builds(lambda scheme, rest: Term(TermKind.IRI, f"{scheme}:{rest}"),
                 st.sampled_from(["http", "https", "urn", "tag"]),
                 st.text(alphabet=_iri_chars, max_size=30))
bnodes = st.one_of(
    _bn_first.map(lambda c: Term(TermKind.BNODE, c)),
    st.builds(lambda a, m, z: Term(TermKind.BNODE, a + m + z), _bn_first, _bn_mid, _bn_last),
)
_lit_text = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=40)
literals = st.one_of(
    st.builds(lambda v: Term(TermKind.LITERAL, v), _lit_text),
    st.builds(lambda v, l: Term(TermKind.LITERAL, v, None, l), _lit_text, _lang),
    st.builds(lambda v, d: Term(TermKind.LITERAL, v, d.value, None), _lit_text,
              iris.filter(lambda t: t.value != XSD_STRING)),
)
triples = st.builds(Triple, st.one_of(iris, bnodes), iris, st.one_of(iris, bnodes, literals))


# --- plain random generators (for fixed-size corpora) ----------------------

_TRICKY = ['"', "\\", "\n", "\r", "\t", "é", "漢", "😀", " ", "'", "\u0001", "\\u0041"]


def random_term(rng: random.Random, kind: str) -> Term:
    if kind == "iri":
        path = "".join(rng.choice(string.ascii_letters + "/#-_.~é漢") for _ in range(rng.randint(0, 12)))
        return Term(TermKind.IRI, f"http://ex{rng.randint(0, 9)}.org/{path}")
    if kind == "bnode":
        return Term(TermKind.BNODE, f"b{rng.randint(0, 10**6)}" + rng.choice(["", "-x", ".y", "_z"]))
    body = "".join(rng.choice(_TRICKY + list(string.ascii_letters)) for _ in range(rng.randint(0, 15)))
    r = rng.random()
    if r < 0.3:
        return Term(TermKind.LITERAL, body, None, rng.choice(["en", "en-GB", "pl", "x-abc-1"]))
    if r < 0.6:
        return Term(TermKind.LITERAL, body, rng.choice([
            "http://www.w3.org/2001/XMLSchema#integer", "http://ex.org/dt#custom"]), None)
    return Term(TermKind.LITERAL, body)


def random_triple(rng: random.Random) -> Triple:
    return Triple(random_term(rng, rng.choice(["iri", "bnode"])), random_term(rng, "iri"),
                  random_term(rng, rng.choice(["iri", "bnode", "literal"])))


def small_universe_triples(rng: random.Random, n: int, dup_fraction: float = 0.1) -> list:
    """``n`` triples over a small term universe, ``dup_fraction`` of them repeats."""
    subjects = [Term(TermKind.IRI, f"http://ex.org/s{i}") for i in range(60)] + \
        [Term(TermKind.BNODE, f"b{i}") for i in range(20)]
    preds = [Term(TermKind.IRI, f"http://ex.org/p{i}") for i in range(8)]
    objects = subjects[:40] + [Term(TermKind.LITERAL, f"v{i}") for i in range(40)] + \
        [Term(TermKind.LITERAL, f"{i}", None, "en") for i in range(10)]
    out = []
    for _ in range(n):
        if out and rng.random() < dup_fraction:
            out.append(rng.choice(out))
        else:
            out.append(Triple(rng.choice(subjects), rng.choice(preds), rng.choice(objects)))
    return out


# --- oracles ---------------------------------------------------------------

def oracle_serialize_term(t: Term) -> str:
    """Straight-line transcription of the canonical rules, independent of the kernels."""
    if t.kind == TermKind.IRI:
        return "<" + t.value + ">"
    if t.kind == TermKind.BNODE:
        return "_:" + t.value
    body = []
    for c in t.value:
        body.append({'"': '\\"', "\\": "\\\\", "\n": "\\n", "\r": "\\r"}.get(c, c))
    out = '"' + "".join(body) + '"'
    if t.language is not None:
        return out + "@" + t.language
    if t.datatype is not None:
        return out + "^^<" + t.datatype + ">"
    return out


def oracle_line(t: Triple) -> bytes:
    return (" ".join(oracle_serialize_term(x) for x in t) + " .\n").encode("utf-8")


def oracle_match(triples, s=None, p=None, o=None) -> set:
    return {t for t in set(triples)
            if (s is None or t[0] == s) and (p is None or t[1] == p) and (o is None or t[2] == o)}


def oracle_mls(entries: dict, stores, platforms, d, b):
    """Literal transcription: numerator over S x P with undefined as 0, denominator counts defined."""
    num, den = 0.0, 0
    for s in stores:
        for p in platforms:
            v = entries.get((d, s, p, b))
            if v is None:
                num += 0
            else:
                num += v
                den += 1
    return None if den == 0 else num / den


def oracle_rls(entries: dict, datasets, stores, platforms, b) -> dict:
    mls = {d: oracle_mls(entries, stores, platforms, d, b) for d in datasets}
    d_def = [d for d in datasets if mls[d] is not None]
    out = {}
    for d in datasets:
        if d in d_def:
            out[d] = mls[d] * len(d_def) / sum(mls[x] for x in d_def)
        else:
            out[d] = None
    return out


def random_partial_matrix(rng: random.Random, max_d=6, max_sp=4, max_b=100) -> tuple:
    """Entries of a partial LS matrix shaped like real runs: each (d, s, p) run is a prefix."""
    nd = rng.randint(1, max_d)
    pairs = rng.randint(1, max_sp)
    nb = rng.randint(1, max_b)
    datasets = [f"d{i}" for i in range(nd)]
    stores = [f"s{i}" for i in range(rng.randint(1, pairs))]
    platforms = [f"p{i}" for i in range(max(1, pairs // len(stores)))]
    entries = {}
    for d in datasets:
        length = rng.randint(1, nb)
        base = rng.uniform(50, 5e5)
        for s in stores:
            for p in platforms:
                if rng.random() < 0.15:
                    continue  # run absent entirely
                stop = rng.randint(0, length)  # truncated run (crash or threshold)
                for b in range(stop):
                    entries[(d, s, p, b)] = base * rng.uniform(0.2, 5)
    return entries, datasets, stores, platforms, nb
