import os
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdfload.store import (CrashingStore, ReferenceStore, SlowStore, StoreConfig, StoreCrashed,
                           StoreError, StoreFormatError, choose_index, open_store, store_open)
from rdfload.store import runs
from rdfload.store.reference import dir_size
from rdfload.terms import Term, TermKind, Triple
from tests import helpers


def _t(s, p, o):
    return Triple(Term(TermKind.IRI, f"http://{s}"), Term(TermKind.IRI, f"http://{p}"),
                  Term(TermKind.IRI, f"http://{o}"))


def _patterns(triples, rng, k=40):
    """Every bound/unbound shape, with terms drawn from the data plus one unknown term."""
    unknown = Term(TermKind.IRI, "http://nowhere")
    out = []
    for _ in range(k):
        s, p, o = rng.choice(triples)
        for mask in range(8):
            out.append((s if mask & 4 else None, p if mask & 2 else None, o if mask & 1 else None))
    out.append((unknown, None, None))
    return out


@pytest.fixture(params=["memory", "memory-runs", "disk"])
def store(request, tmp_path):
    if request.param == "memory":
        s = store_open()
    elif request.param == "memory-runs":
        s = store_open(flush_threshold=500, merge_fanout=2)
    else:
        s = store_open(persistence="disk", data_dir=tmp_path / "db", flush_threshold=700)
    yield s
    s.close()


def test_empty_snapshot():
    assert store_open().snapshot_metrics().__dict__ == {"triple_count": 0, "dictionary_size": 0,
                                                         "disk_bytes": 0}


def test_simple_match_examples(store):
    a, b = _t("s1", "p1", "o1"), _t("s1", "p2", "o2")
    store.load_batch([a, b])
    assert set(store.match(a.subject)) == {a, b}
    assert set(store.match(None, a.predicate, a.object)) == {a}


def test_batch_set_semantics(store):
    ts = [_t(f"s{i}", "p", f"o{i}") for i in range(2000)]
    assert store.load_batch(ts) == (2000, 0)
    assert store.load_batch(ts) == (0, 2000)
    assert store.snapshot_metrics().triple_count == 2000
    assert store.load_batch([_t("x", "p", "y"), _t("x", "p", "y")]) == (1, 1)


def test_randomized_index_agreement(store, backend):
    rng = random.Random(5)
    data = helpers.small_universe_triples(rng, 10_000, dup_fraction=0.1)
    total_inserted = 0
    for i in range(0, len(data), 1_500):
        res = store.load_batch(data[i:i + 1_500])
        assert res.inserted + res.duplicates == len(data[i:i + 1_500])
        total_inserted += res.inserted
    distinct = set(data)
    assert total_inserted == len(distinct) == store.snapshot_metrics().triple_count
    assert set(store.match()) == distinct
    for pat in _patterns(data, rng):
        expected = helpers.oracle_match(data, *pat)
        chosen = list(store.match(*pat))
        assert len(chosen) == len(set(chosen))
        assert set(chosen) == expected, pat
        for index in runs.ORDERS:
            assert set(store.match(*pat, index=index)) == expected
    for i in range(0, len(data), 1_500):
        assert store.load_batch(data[i:i + 1_500]).inserted == 0


def test_index_selection_rule():
    assert choose_index(True, False, False) == "spo"
    assert choose_index(True, True, False) == "spo"
    assert choose_index(True, True, True) == "spo"
    assert choose_index(False, True, False) == "pos"
    assert choose_index(False, True, True) == "pos"
    assert choose_index(False, False, True) == "osp"
    assert choose_index(True, False, True) == "osp"
    assert choose_index(False, False, False) == "spo"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(helpers.triples, max_size=25), max_size=6), st.integers(1, 40))
def test_union_cardinality_property(batches, threshold):
    s = store_open(flush_threshold=threshold, merge_fanout=2)
    for b in batches:
        s.load_batch(b)
    union = {t for b in batches for t in b}
    assert s.snapshot_metrics().triple_count == len(union)
    assert set(s.match()) == union


def test_dictionary_bijective():
    s = store_open(flush_threshold=50)
    rng = random.Random(1)
    data = [helpers.random_triple(rng) for _ in range(500)]
    s.load_batch(data)
    s.load_batch(data[:100])
    terms = {x for t in data for x in t}
    assert len(s._terms) == len(terms) == s.snapshot_metrics().dictionary_size
    assert {s._terms[i]: i for i in range(len(s._terms))} == s._ids
    assert all(s._ids[s._terms[i]] == i for i in range(len(s._terms)))


def test_merge_work_monotone(tmp_path):
    s = store_open(persistence="disk", data_dir=tmp_path / "db", flush_threshold=1_000)
    rng = random.Random(2)
    seen = []
    for k in range(40):
        s.load_batch([helpers.random_triple(rng) for _ in range(500)])
        seen.append((len(s), s.merge_work))
    assert s.merge_count > 0
    assert all(a[1] <= b[1] for a, b in zip(seen, seen[1:]))
    assert all(a[0] <= b[0] for a, b in zip(seen, seen[1:]))
    s.close()


def test_disk_reopen_persists(tmp_path):
    d = tmp_path / "db"
    rng = random.Random(9)
    data = [helpers.random_triple(rng) for _ in range(3000)]
    s = store_open(persistence="disk", data_dir=d, flush_threshold=800)
    s.load_batch(data[:2000])
    assert s.snapshot_metrics().disk_bytes > 0
    s.load_batch(data[2000:])
    digest = s.content_digest()
    s.close()
    assert s.snapshot_metrics().disk_bytes == dir_size(d) > 0
    r = store_open(persistence="disk", data_dir=d)
    assert r.content_digest() == digest
    assert set(r.match()) == set(data)
    assert r.load_batch(data[:500]).inserted == 0
    extra = [_t("new", "p", "o")]
    assert r.load_batch(extra).inserted == 1
    r.close()
    assert len(store_open(persistence="disk", data_dir=d)) == len(set(data)) + 1


def test_unflushed_triples_lost_without_close(tmp_path):
    d = tmp_path / "db"
    s = store_open(persistence="disk", data_dir=d, flush_threshold=10)
    s.load_batch([_t(f"s{i}", "p", "o") for i in range(10)])  # flushed
    s.load_batch([_t("late", "p", "o")])  # buffered only
    r = store_open(persistence="disk", data_dir=d)
    assert len(r) == 10


def test_rejects_foreign_directories(tmp_path):
    d = tmp_path / "junk"
    d.mkdir()
    (d / "file.txt").write_text("hello")
    with pytest.raises(StoreFormatError):
        store_open(persistence="disk", data_dir=d)
    d2 = tmp_path / "db"
    s = store_open(persistence="disk", data_dir=d2, flush_threshold=5)
    s.load_batch([_t(f"s{i}", "p", "o") for i in range(5)])
    s.close()
    run_file = next(d2.glob("run-*.spo"))
    run_file.write_bytes(b"NOTARUN!" + run_file.read_bytes()[8:])
    with pytest.raises(StoreFormatError):
        store_open(persistence="disk", data_dir=d2)
    manifest = d2 / "MANIFEST.json"
    manifest.write_text(manifest.read_text().replace('"format_version": 1', '"format_version": 99'))
    with pytest.raises(StoreFormatError):
        store_open(persistence="disk", data_dir=d2)


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_read_only_directory(tmp_path):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    try:
        with pytest.raises(StoreError):
            store_open(persistence="disk", data_dir=ro / "db")
    finally:
        ro.chmod(0o700)


def test_unwritable_data_dir_path(tmp_path):
    f = tmp_path / "plainfile"
    f.write_text("x")
    with pytest.raises(StoreError):
        store_open(persistence="disk", data_dir=f / "db")


def test_run_primitives():
    rng = np.random.default_rng(0)
    ids = rng.integers(0, 50, size=(400, 3), dtype=np.uint64)
    ids = np.unique(ids, axis=0)
    for order, perm in runs.ORDERS.items():
        run = runs.sorted_run(ids, order)
        keyed = [tuple(int(x) for x in row[list(perm)]) for row in ids]
        decoded = runs.from_records(run, order)
        assert [tuple(int(x) for x in r[list(perm)]) for r in decoded] == sorted(keyed)
        lo, hi = runs.prefix_range(run, [int(ids[0][perm[0]])])
        assert hi - lo == sum(1 for k in keyed if k[0] == int(ids[0][perm[0]]))
    spo = runs.sorted_run(ids, "spo")
    probe = runs.to_records(np.array([[1000, 0, 0]], dtype=np.uint64), "spo")
    assert not runs.contains(spo, probe)[0]
    assert runs.contains(spo, runs.to_records(ids[:5], "spo")).all()


def test_adapters():
    ts = [_t(f"s{i}", "p", "o") for i in range(10)]
    slept = []
    slow = SlowStore(0.5, sleep=slept.append)
    slow.load_batch(ts)
    assert slept == [5.0] and slow.snapshot_metrics().triple_count == 10
    assert SlowStore(0).load_batch(ts) == (10, 0)
    c = CrashingStore(15)
    c.load_batch(ts)
    with pytest.raises(StoreCrashed):
        c.load_batch([_t(f"x{i}", "p", "o") for i in range(10)])
    assert open_store("slow", {"delay_per_triple": 0}).load_batch(ts).inserted == 10
    with pytest.raises(ValueError):
        open_store("crashing", {})
    with pytest.raises(ValueError):
        open_store("reference", {"nope": 1})


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        StoreConfig(persistence="cloud")
    with pytest.raises(ValueError):
        StoreConfig(persistence="disk")
    with pytest.raises(ValueError):
        StoreConfig(flush_threshold=0)
    s = ReferenceStore()
    s.close()
    with pytest.raises(StoreError):
        s.load_batch([_t("a", "b", "c")])
