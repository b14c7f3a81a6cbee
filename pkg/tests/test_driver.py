import json
import logging
import time

import pytest

from rdfload import driver
from rdfload.clock import VirtualClock
from rdfload.dataset import read_batch, split_batches
from rdfload.driver import (BatchRecord, ConfigurationError, PlatformDescriptor, ResourceSampler,
                            RunFileError, RunRecord, Termination, WindowStats, emit_run, read_run,
                            run_benchmark)
from rdfload.ntriples import write_triples
from rdfload.store import CrashingStore, ScriptedStore, SlowStore, store_open
from rdfload.terms import Term, TermKind, Triple

LABELS = {"dataset": "ds", "store": "st", "platform": "pl"}


def _batches(tmp_path, n_batches, size, name="b"):
    p = Term(TermKind.IRI, "http://ex.org/p")
    ts = [Triple(Term(TermKind.IRI, f"http://ex.org/s{i}"), p, Term(TermKind.LITERAL, str(i)))
          for i in range(n_batches * size)]
    src = tmp_path / f"{name}.nt"
    with open(src, "wb") as fh:
        write_triples(ts, fh)
    return split_batches(src, tmp_path / name, size).paths


class FakeSampler:
    """Sampler stand-in that burns virtual time at window edges."""

    def __init__(self, clock, cost=1000.0):
        self.clock, self.cost, self.windows = clock, cost, 0

    def begin_window(self):
        self.clock.advance(self.cost)

    def end_window(self):
        self.clock.advance(self.cost)
        self.windows += 1
        return WindowStats(123, 0.5, [])


class TimedStore:
    def __init__(self, clock, per_batch):
        self.inner, self.clock, self.per_batch = store_open(), clock, per_batch
        self.name = "timed"

    def load_batch(self, batch):
        self.clock.advance(self.per_batch)
        return self.inner.load_batch(batch)

    def snapshot_metrics(self):
        self.clock.advance(500.0)
        return self.inner.snapshot_metrics()


def test_completed_run(tmp_path):
    files = _batches(tmp_path, 3, 100)
    run = run_benchmark(store_open(), files, labels=LABELS, out=tmp_path / "r.jsonl")
    assert run.termination == Termination.COMPLETED
    assert [r.batch_index for r in run.batch_records] == [0, 1, 2]
    assert all(r.triples == 100 and r.load_seconds > 0 for r in run.batch_records)
    assert all(r.ls == pytest.approx(r.triples / r.load_seconds) for r in run.batch_records)
    run.check()
    assert read_run(tmp_path / "r.jsonl") == run


def test_timing_covers_only_parse_and_insert(tmp_path, monkeypatch):
    clock = VirtualClock()
    files = _batches(tmp_path, 3, 50)
    real_read = driver.read_batch

    def slow_read(path, index):
        clock.advance(2.0)  # parsing
        return real_read(path, index)

    monkeypatch.setattr(driver, "read_batch", slow_read)
    real_batch = driver.RunWriter.batch

    def slow_write(self, rec):
        clock.advance(700.0)
        real_batch(self, rec)

    monkeypatch.setattr(driver.RunWriter, "batch", slow_write)
    store = TimedStore(clock, per_batch=3.0)
    run = run_benchmark(store, files, labels=LABELS, clock=clock, sampler=FakeSampler(clock),
                        out=tmp_path / "r.jsonl", split_parse_time=True, threshold_tps=1)
    assert [r.load_seconds for r in run.batch_records] == [5.0, 5.0, 5.0]
    assert [r.parse_seconds for r in run.batch_records] == [2.0, 2.0, 2.0]
    assert [r.ls for r in run.batch_records] == [10.0, 10.0, 10.0]
    assert run.termination == Termination.COMPLETED
    assert run.batch_records[0].peak_rss_bytes == 123


def test_slow_store_below_threshold(tmp_path):
    clock = VirtualClock()
    files = _batches(tmp_path, 3, 200)
    store = SlowStore(0.015, sleep=clock.sleep)
    run = run_benchmark(store, files, labels=LABELS, clock=clock)
    assert run.termination == Termination.BELOW_THRESHOLD
    assert len(run.batch_records) == 1
    assert run.batch_records[0].ls == pytest.approx(1 / 0.015)
    run.check()


def test_crashing_store(tmp_path):
    files = _batches(tmp_path, 3, 500)
    run = run_benchmark(CrashingStore(750), files, labels=LABELS, out=tmp_path / "c.jsonl")
    assert run.termination == Termination.CRASHED
    assert len(run.batch_records) == 1
    assert "crash" in run.error
    back = read_run(tmp_path / "c.jsonl")
    assert back == run and back.loaded_triples == 500


def test_crash_in_first_batch_gives_valid_empty_run(tmp_path):
    files = _batches(tmp_path, 2, 10)
    run = run_benchmark(CrashingStore(3), files, labels=LABELS, out=tmp_path / "e.jsonl")
    back = read_run(tmp_path / "e.jsonl")
    assert back.batch_records == [] and back.termination == Termination.CRASHED


JUST_BELOW = 40 / (0.5 + 2 ** -20)


@pytest.mark.parametrize("speeds,stop_at", [
    ([160, 320, 80, JUST_BELOW, 640], 3),
    ([80, 80, 80, 80, 80], None),
    ([40, 640, 640, 640, 640], 0),
    ([640, 320, 160, JUST_BELOW, 40], 3),
    ([640, 320, 160, 80, 40], None),  # slow last batch: nothing left to abort
])
def test_abort_exactness(tmp_path, speeds, stop_at):
    # 40-triple batches at these speeds take dyadic times, so the virtual clock is exact
    clock = VirtualClock()
    files = _batches(tmp_path, 5, 40)
    run = run_benchmark(ScriptedStore(speeds, clock.sleep), files, labels=LABELS, clock=clock,
                        sampler=FakeSampler(clock, 0))
    assert [r.ls for r in run.batch_records] == pytest.approx(speeds[:len(run.batch_records)], rel=1e-12)
    if stop_at is None:
        assert run.termination == Termination.COMPLETED
        assert len(run.batch_records) == 5
    else:
        assert run.termination == Termination.BELOW_THRESHOLD
        assert len(run.batch_records) == stop_at + 1
        assert all(r.ls >= 80 for r in run.batch_records[:-1])
    run.check()


def test_missing_file_is_config_error(tmp_path):
    files = _batches(tmp_path, 2, 10)
    store = CrashingStore(10**9)
    with pytest.raises(ConfigurationError):
        run_benchmark(store, files + [tmp_path / "b" / "batch-000099.nt"], labels=LABELS)
    assert store.attempted == 0
    with pytest.raises(ConfigurationError):
        run_benchmark(store, [], labels=LABELS)
    with pytest.raises(ConfigurationError):
        run_benchmark(store, files, labels=LABELS, threshold_tps=0)


def test_filename_order_and_reproducibility(tmp_path):
    files = _batches(tmp_path, 4, 50)
    a, b = store_open(), store_open()
    run_benchmark(a, list(reversed(files)), labels=LABELS)
    run_benchmark(b, files, labels=LABELS)
    assert a.content_digest() == b.content_digest()
    assert a._terms == _terms_in_order(files)


def _terms_in_order(paths):
    seen = {}
    for path in paths:
        for t in read_batch(path).triples:
            for x in t:
                seen.setdefault(x, None)
    return list(seen)


def test_emit_read_round_trip(tmp_path):
    run = RunRecord("d", "s", "p", 2**30, [BatchRecord(0, 10, 0.5, 20.0, None, None, 0)],
                    Termination.CRASHED, 80.0, 10, 3, 10.0, {"dataset": "d", "x": "a=b c"},
                    PlatformDescriptor("pi4", "arm", 4 * 2**30, "linux", "6.1", 2**30), "boom")
    emit_run(run, tmp_path / "r.jsonl")
    assert read_run(tmp_path / "r.jsonl") == run


def test_results_file_layout(tmp_path):
    files = _batches(tmp_path, 2, 10)
    run_benchmark(store_open(), files, labels=LABELS, out=tmp_path / "r.jsonl")
    lines = [json.loads(x) for x in (tmp_path / "r.jsonl").read_text().splitlines()]
    assert [x["type"] for x in lines] == ["header", "batch", "batch", "termination"]
    head = lines[0]
    for key in ("labels", "platform", "threshold_tps", "batch_size", "tool_version"):
        assert key in head
    assert head["labels"] == LABELS and head["batch_size"] == 10


def test_missing_termination_line(tmp_path):
    files = _batches(tmp_path, 2, 10)
    run_benchmark(store_open(), files, labels=LABELS, out=tmp_path / "r.jsonl")
    lines = (tmp_path / "r.jsonl").read_text().splitlines()
    (tmp_path / "cut.jsonl").write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(RunFileError):
        read_run(tmp_path / "cut.jsonl")
    got = read_run(tmp_path / "cut.jsonl", allow_incomplete=True)
    assert got.termination == Termination.CRASHED and len(got.batch_records) == 2


def test_run_invariant_checks():
    ok = RunRecord("d", "s", "p", batch_records=[BatchRecord(0, 1, 1.0, 1.0)], batches_total=2,
                   termination=Termination.COMPLETED)
    with pytest.raises(ValueError):
        ok.check()
    with pytest.raises(ValueError):
        RunRecord("d", "s", "p", batch_records=[BatchRecord(1, 1, 1.0, 1.0)], batches_total=2,
                  termination=Termination.CRASHED).check()
    with pytest.raises(ValueError):
        PlatformDescriptor("x", total_ram_bytes=10, memory_limit_bytes=11)


def test_sampler_windows_partition_samples():
    s = ResourceSampler(hz=200).start()
    try:
        s.begin_window()
        time.sleep(0.1)
        w1 = s.end_window()
        s.begin_window()
        time.sleep(0.1)
        w2 = s.end_window()
    finally:
        s.stop()
    assert w1.samples and w2.samples
    assert w1.samples[-1].t < w2.samples[0].t
    assert w1.peak_rss_bytes == max(x.rss_bytes for x in w1.samples)
    running = [max(x.rss_bytes for x in w1.samples[:i + 1]) for i in range(len(w1.samples))]
    assert running == sorted(running)


def test_sampler_idle_cpu_near_zero():
    s = ResourceSampler(hz=0)
    s.begin_window()
    time.sleep(0.2)
    w = s.end_window()
    assert w.cpu_seconds is not None and w.cpu_seconds < 0.1


def test_sampler_failure_degrades_to_null(tmp_path, caplog):
    s = ResourceSampler(hz=0)

    class Broken:
        def cpu_times(self):
            raise OSError("no /proc")

        memory_info = cpu_times

    s._proc = Broken()
    files = _batches(tmp_path, 2, 10)
    with caplog.at_level(logging.WARNING):
        run = run_benchmark(store_open(), files, labels=LABELS, sampler=s)
    assert run.termination == Termination.COMPLETED
    assert all(r.peak_rss_bytes is None and r.cpu_seconds is None for r in run.batch_records)
    assert "resource sampling failed" in caplog.text


def test_memory_limit_warning(tmp_path, caplog):
    files = _batches(tmp_path, 1, 10)
    with caplog.at_level(logging.WARNING):
        run = run_benchmark(store_open(), files, labels=LABELS, memory_limit_bytes=1)
    assert run.memory_limit_bytes == 1
    assert "exceeds the recorded memory limit" in caplog.text
