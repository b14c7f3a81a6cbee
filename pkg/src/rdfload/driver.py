"""Benchmark driver: sequential batch loading with abort rules.

A run loads batch files strictly one after another.  Each batch's timed
window covers parsing the file and inserting it into the store; resource
readings, store metrics and result-file writes happen outside that window.
The run ends at the first store failure (``crashed``), at the first batch
whose loading speed is strictly below ``threshold_tps``
(``below-speed-threshold``), or when every batch has loaded
(``completed``).  A slow final batch still counts as ``completed``, since
there is nothing left to abort.
"""
from __future__ import annotations

import datetime as _dt
import enum
import json
import logging
import os
import platform as _platform
import queue
import socket
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, NamedTuple, Optional, Sequence, Union

from rdfload import __version__
from rdfload.dataset import read_batch
from rdfload.ntriples import NTriplesParser, parse_stream
from rdfload.store.base import Store

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD_TPS = 80.0
DEFAULT_SAMPLE_HZ = 10.0
RUN_FORMAT = "rdfload-run"
RUN_FORMAT_VERSION = 1


class Termination(str, enum.Enum):
    COMPLETED = "completed"
    CRASHED = "crashed"
    BELOW_THRESHOLD = "below-speed-threshold"


class ConfigurationError(ValueError):
    """The run cannot start; raised before any batch is loaded."""


class RunFileError(ValueError):
    pass


@dataclass
class BatchRecord:
    batch_index: int
    triples: int
    load_seconds: float
    ls: float
    peak_rss_bytes: Optional[int] = None
    cpu_seconds: Optional[float] = None
    disk_bytes: Optional[int] = None
    parse_seconds: Optional[float] = None


@dataclass
class PlatformDescriptor:
    device: str
    cpu: Optional[str] = None
    total_ram_bytes: Optional[int] = None
    os: Optional[str] = None
    kernel: Optional[str] = None
    memory_limit_bytes: Optional[int] = None

    def __post_init__(self):
        if (self.memory_limit_bytes is not None and self.total_ram_bytes is not None
                and self.memory_limit_bytes > self.total_ram_bytes):
            raise ValueError(f"memory limit {self.memory_limit_bytes} exceeds total RAM "
                             f"{self.total_ram_bytes}")

    @classmethod
    def detect(cls, device: Optional[str] = None,
               memory_limit_bytes: Optional[int] = None) -> "PlatformDescriptor":
        total = None
        try:
            import psutil
            total = psutil.virtual_memory().total
        except Exception:  # noqa: BLE001 - best effort metadata
            pass
        return cls(device=device or socket.gethostname(), cpu=_cpu_model(),
                   total_ram_bytes=total, os=_platform.platform(), kernel=_platform.release(),
                   memory_limit_bytes=memory_limit_bytes)


def _cpu_model() -> Optional[str]:
    try:
        with open("/proc/cpuinfo", encoding="utf-8") as fh:
            for line in fh:
                if line.lower().startswith(("model name", "hardware")):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return _platform.processor() or None


@dataclass
class RunRecord:
    dataset_id: str
    store_id: str
    platform_id: str
    memory_limit_bytes: Optional[int] = None
    batch_records: list = field(default_factory=list)
    termination: Termination = Termination.COMPLETED
    threshold_tps: float = DEFAULT_THRESHOLD_TPS
    batch_size: int = 0
    batches_total: int = 0
    sample_hz: float = DEFAULT_SAMPLE_HZ
    labels: dict = field(default_factory=dict)
    platform: Optional[PlatformDescriptor] = None
    error: Optional[str] = None
    tool_version: str = __version__
    started_at: Optional[str] = None

    @property
    def loaded_triples(self) -> int:
        return self.batch_size * len(self.batch_records)

    @property
    def dataset_triples(self) -> int:
        return self.batch_size * self.batches_total

    def check(self) -> None:
        for k, rec in enumerate(self.batch_records):
            if rec.batch_index != k:
                raise ValueError(f"batch records are not contiguous at position {k}")
            if rec.load_seconds <= 0:
                raise ValueError("load_seconds must be positive")
        covers = len(self.batch_records) == self.batches_total
        if (self.termination == Termination.COMPLETED) != covers:
            raise ValueError("termination 'completed' must coincide with loading every batch")
        if self.termination == Termination.BELOW_THRESHOLD:
            if not self.batch_records or not self.batch_records[-1].ls < self.threshold_tps:
                raise ValueError("below-speed-threshold run must end with a sub-threshold batch")


# --- resource sampling -----------------------------------------------------

class Sample(NamedTuple):
    t: float
    rss_bytes: int
    cpu_seconds: float


class WindowStats(NamedTuple):
    peak_rss_bytes: Optional[int]
    cpu_seconds: Optional[float]
    samples: list


class ResourceSampler:
    """Samples RSS and CPU time of a process on a background thread.

    The thread only reads process counters and hands samples over through a
    queue; :meth:`end_window` drains it.  Samples taken between
    :meth:`end_window` and the next :meth:`begin_window` are dropped, so
    consecutive windows never share samples.  If process counters cannot
    be read, every metric is ``None`` and a warning is logged once.
    """

    def __init__(self, hz: float = DEFAULT_SAMPLE_HZ, pid: Optional[int] = None):
        self.hz = hz
        self._queue: queue.SimpleQueue = queue.SimpleQueue()
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._cpu0: Optional[float] = None
        try:
            import psutil
            self._proc = psutil.Process(pid)
            self._read_proc()
        except Exception as exc:  # noqa: BLE001 - any failure means "unsupported"
            log.warning("resource sampling unavailable (%s); metrics will be null", exc)
            self._proc = None

    @property
    def available(self) -> bool:
        return self._proc is not None

    def _read_proc(self) -> Sample:
        cpu = self._proc.cpu_times()
        return Sample(time.monotonic(), self._proc.memory_info().rss, cpu.user + cpu.system)

    def read(self) -> Optional[Sample]:
        if self._proc is None:
            return None
        try:
            return self._read_proc()
        except Exception as exc:  # noqa: BLE001
            log.warning("resource sampling failed (%s); metrics will be null", exc)
            self._proc = None
            return None

    def _loop(self) -> None:
        period = 1.0 / self.hz
        while not self._stop.wait(period):
            s = self.read()
            if s is None:
                return
            self._queue.put(s)

    def start(self) -> "ResourceSampler":
        if self.available and self.hz > 0 and self._thread is None:
            self._thread = threading.Thread(target=self._loop, name="rdfload-sampler", daemon=True)
            self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None

    def _drain(self) -> list:
        out = []
        while True:
            try:
                out.append(self._queue.get_nowait())
            except queue.Empty:
                return out

    def begin_window(self) -> None:
        self._drain()
        s = self.read()
        self._cpu0 = s.cpu_seconds if s else None

    def end_window(self) -> WindowStats:
        samples = self._drain()
        last = self.read()
        if last is None:
            return WindowStats(None, None, samples)
        samples.append(last)
        peak = max(s.rss_bytes for s in samples)
        cpu = last.cpu_seconds - self._cpu0 if self._cpu0 is not None else None
        return WindowStats(peak, cpu, samples)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


# --- results file ----------------------------------------------------------

def _header(run: RunRecord) -> dict:
    return {
        "type": "header",
        "format": RUN_FORMAT,
        "format_version": RUN_FORMAT_VERSION,
        "tool": "rdfload",
        "tool_version": run.tool_version,
        "dataset_id": run.dataset_id,
        "store_id": run.store_id,
        "platform_id": run.platform_id,
        "memory_limit_bytes": run.memory_limit_bytes,
        "threshold_tps": run.threshold_tps,
        "batch_size": run.batch_size,
        "batches_total": run.batches_total,
        "sample_hz": run.sample_hz,
        "labels": run.labels,
        "platform": asdict(run.platform) if run.platform else None,
        "started_at": run.started_at,
    }


class RunWriter:
    """Writes a results file incrementally: header, batch lines, termination."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8", newline="\n")

    def _line(self, obj: dict) -> None:
        self._fh.write(json.dumps(obj) + "\n")
        self._fh.flush()

    def header(self, run: RunRecord) -> None:
        self._line(_header(run))

    def batch(self, rec: BatchRecord) -> None:
        self._line({"type": "batch", **asdict(rec)})

    def termination(self, run: RunRecord) -> None:
        self._line({"type": "termination", "termination": run.termination.value,
                    "batches_loaded": len(run.batch_records), "error": run.error})

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def emit_run(run: RunRecord, path: Union[str, Path]) -> Path:
    with RunWriter(path) as w:
        w.header(run)
        for rec in run.batch_records:
            w.batch(rec)
        w.termination(run)
    return Path(path)


def read_run(path: Union[str, Path], allow_incomplete: bool = False) -> RunRecord:
    """Load a results file.

    A file without a termination line comes from a process that died
    mid-run; it is rejected unless ``allow_incomplete``, in which case it
    reads as a crashed run.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        objs = [json.loads(line) for line in fh if line.strip()]
    if not objs or objs[0].get("type") != "header":
        raise RunFileError(f"{path}: first line is not a run header")
    head = objs[0]
    if head.get("format") != RUN_FORMAT:
        raise RunFileError(f"{path}: not an {RUN_FORMAT} file")
    if head.get("format_version") != RUN_FORMAT_VERSION:
        raise RunFileError(f"{path}: unsupported format version {head.get('format_version')}")
    tail = objs[-1] if objs[-1].get("type") == "termination" else None
    body = objs[1:-1] if tail else objs[1:]
    records = []
    for obj in body:
        if obj.get("type") != "batch":
            raise RunFileError(f"{path}: unexpected {obj.get('type')!r} line")
        obj = dict(obj)
        del obj["type"]
        records.append(BatchRecord(**obj))
    if tail is None:
        if not allow_incomplete:
            raise RunFileError(f"{path}: no termination line (run interrupted?)")
        termination, error = Termination.CRASHED, "results file ended without a termination line"
    else:
        termination, error = Termination(tail["termination"]), tail.get("error")
    plat = head.get("platform")
    return RunRecord(
        dataset_id=head["dataset_id"], store_id=head["store_id"], platform_id=head["platform_id"],
        memory_limit_bytes=head.get("memory_limit_bytes"), batch_records=records,
        termination=termination, threshold_tps=head["threshold_tps"],
        batch_size=head["batch_size"], batches_total=head["batches_total"],
        sample_hz=head.get("sample_hz", DEFAULT_SAMPLE_HZ), labels=head.get("labels", {}),
        platform=PlatformDescriptor(**plat) if plat else None, error=error,
        tool_version=head.get("tool_version", ""), started_at=head.get("started_at"),
    )


# --- the run ---------------------------------------------------------------

def _count_triples(path: Path) -> int:
    with open(path, "rb") as fh:
        return sum(1 for _ in parse_stream(fh, parser=NTriplesParser(strict=True)))


def run_benchmark(store: Store, batch_files: Sequence[Union[str, Path]], *,
                  labels: Optional[Mapping[str, str]] = None,
                  threshold_tps: float = DEFAULT_THRESHOLD_TPS,
                  sample_hz: float = DEFAULT_SAMPLE_HZ,
                  memory_limit_bytes: Optional[int] = None,
                  platform: Optional[PlatformDescriptor] = None,
                  out: Optional[Union[str, Path]] = None,
                  clock: Callable[[], float] = time.perf_counter,
                  split_parse_time: bool = False,
                  sampler: Optional[ResourceSampler] = None) -> RunRecord:
    """Load ``batch_files`` (sorted by file name) into ``store`` and measure each batch.

    ``labels`` should carry ``dataset``, ``store`` and ``platform``; missing
    ones default to the batch directory name, the store's name and the
    host name.  With ``out`` the results file is written as the run goes,
    so partial results survive.  The store is not closed.
    """
    if threshold_tps <= 0:
        raise ConfigurationError("threshold_tps must be positive")
    files = sorted((Path(f) for f in batch_files), key=lambda p: p.name)
    if not files:
        raise ConfigurationError("no batch files to load")
    missing = [str(f) for f in files if not f.is_file()]
    if missing:
        raise ConfigurationError(f"missing batch files: {', '.join(missing[:5])}")
    labels = dict(labels or {})
    labels.setdefault("dataset", files[0].parent.name)
    labels.setdefault("store", getattr(store, "name", type(store).__name__))
    if platform is None:
        platform = PlatformDescriptor.detect(labels.get("platform"), memory_limit_bytes)
    labels.setdefault("platform", platform.device)
    if memory_limit_bytes is None:
        memory_limit_bytes = platform.memory_limit_bytes

    run = RunRecord(
        dataset_id=labels["dataset"], store_id=labels["store"], platform_id=labels["platform"],
        memory_limit_bytes=memory_limit_bytes, threshold_tps=float(threshold_tps),
        batch_size=_count_triples(files[0]), batches_total=len(files), sample_hz=sample_hz,
        labels=labels, platform=platform,
        started_at=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    )
    own_sampler = sampler is None
    if own_sampler:
        sampler = ResourceSampler(sample_hz).start()
    writer = RunWriter(out) if out is not None else None
    warned_rss = False
    try:
        if writer:
            writer.header(run)
        for k, path in enumerate(files):
            sampler.begin_window()
            t0 = clock()
            batch = read_batch(path, k)
            t_parsed = clock()
            try:
                store.load_batch(batch)
            except Exception as exc:  # noqa: BLE001 - any store failure ends the run
                run.termination = Termination.CRASHED
                run.error = f"{type(exc).__name__}: {exc}"
                log.warning("store crashed in batch %d: %s", k, run.error)
                break
            t1 = clock()
            window = sampler.end_window()
            try:
                disk_bytes = store.snapshot_metrics().disk_bytes
            except Exception as exc:  # noqa: BLE001
                log.warning("store metrics unavailable (%s)", exc)
                disk_bytes = None
            elapsed = max(t1 - t0, 1e-9)
            rec = BatchRecord(
                batch_index=k, triples=batch.size, load_seconds=elapsed,
                ls=batch.size / elapsed, peak_rss_bytes=window.peak_rss_bytes,
                cpu_seconds=window.cpu_seconds, disk_bytes=disk_bytes,
                parse_seconds=(t_parsed - t0) if split_parse_time else None,
            )
            run.batch_records.append(rec)
            if writer:
                writer.batch(rec)
            if (memory_limit_bytes and rec.peak_rss_bytes and not warned_rss
                    and rec.peak_rss_bytes > memory_limit_bytes):
                log.warning("RSS %d exceeds the recorded memory limit %d (not enforced)",
                            rec.peak_rss_bytes, memory_limit_bytes)
                warned_rss = True
            # a slow final batch ends nothing: the dataset is fully loaded
            if rec.ls < threshold_tps and k < len(files) - 1:
                run.termination = Termination.BELOW_THRESHOLD
                log.info("batch %d loaded at %.1f t/s < %.1f; stopping", k, rec.ls, threshold_tps)
                break
        else:
            run.termination = Termination.COMPLETED
        if writer:
            writer.termination(run)
    finally:
        if writer:
            writer.close()
        if own_sampler:
            sampler.stop()
    return run


def default_output_path(labels: Mapping[str, str], directory: Optional[Union[str, Path]] = None) -> Path:
    directory = Path(directory or os.environ.get("RDFLOAD_OUTPUT_DIR", "."))
    name = "__".join(labels.get(k, "unknown") for k in ("dataset", "store", "platform"))
    return directory / f"{name}.jsonl"
