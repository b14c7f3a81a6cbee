"""Cross-dataset loading-speed analysis.

Per-batch loading speeds (LS) from many runs form a partial matrix over
(dataset, store, platform, batch).  For each dataset and batch the mean
loading speed (MLS) averages LS over the store/platform pairs that loaded
that batch.  The relative loading speed (RLS) divides MLS by the mean MLS
of all datasets defined at the same batch, so that per batch the defined
RLS values average to exactly 1.

Undefined values are NaN inside arrays and ``None`` at the API surface.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import statistics
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from rdfload.driver import BatchRecord, RunRecord, Termination, read_run

log = logging.getLogger(__name__)

PathLike = Union[str, Path]
PUBLISHED_EXCLUDE = ("politiquices", "digital-agenda-indicators")
PUBLISHED_TRIM_TO = 21_800_000
LOW_COVERAGE = 0.5


class AnalysisError(ValueError):
    pass


def platform_key(run: RunRecord) -> str:
    """Platform identity: the device label plus the memory limit, if any."""
    if run.memory_limit_bytes is None:
        return run.platform_id
    return f"{run.platform_id}@{run.memory_limit_bytes}"


def _load_runs(runs: Iterable[Union[RunRecord, PathLike]]) -> list[RunRecord]:
    return [r if isinstance(r, RunRecord) else read_run(r) for r in runs]


# --- LS matrix -------------------------------------------------------------

@dataclass
class LsMatrix:
    """Dense view of the partial map (d, s, p, b) -> LS; NaN marks undefined."""

    datasets: tuple
    stores: tuple
    platforms: tuple
    values: np.ndarray  # shape (D, S, P, B)
    batch_size: int

    def __post_init__(self):
        shape = (len(self.datasets), len(self.stores), len(self.platforms))
        if self.values.ndim != 4 or self.values.shape[:3] != shape:
            raise ValueError(f"values shape {self.values.shape} does not match domain {shape}")
        if np.any(self.values[~np.isnan(self.values)] <= 0):
            raise ValueError("LS values must be positive")

    @classmethod
    def from_entries(cls, entries: Mapping[tuple, float], batch_size: int,
                     datasets: Sequence[str] = (), stores: Sequence[str] = (),
                     platforms: Sequence[str] = ()) -> "LsMatrix":
        ds = sorted(set(datasets) | {k[0] for k in entries})
        ss = sorted(set(stores) | {k[1] for k in entries})
        ps = sorted(set(platforms) | {k[2] for k in entries})
        nb = max((k[3] for k in entries), default=-1) + 1
        vals = np.full((len(ds), len(ss), len(ps), nb), np.nan)
        di = {d: i for i, d in enumerate(ds)}
        si = {s: i for i, s in enumerate(ss)}
        pi = {p: i for i, p in enumerate(ps)}
        for (d, s, p, b), v in entries.items():
            vals[di[d], si[s], pi[p], b] = v
        return cls(tuple(ds), tuple(ss), tuple(ps), vals, batch_size)

    @property
    def n_batches(self) -> int:
        return self.values.shape[3]

    def entries(self) -> dict:
        out = {}
        for d, s, p, b in zip(*np.nonzero(~np.isnan(self.values))):
            out[(self.datasets[d], self.stores[s], self.platforms[p], int(b))] = \
                float(self.values[d, s, p, b])
        return out

    def __len__(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.values)))

    def ls(self, d: str, s: str, p: str, b: int) -> Optional[float]:
        if b >= self.n_batches:
            return None
        v = self.values[self.datasets.index(d), self.stores.index(s), self.platforms.index(p), b]
        return None if math.isnan(v) else float(v)

    def scaled(self, c: float) -> "LsMatrix":
        return LsMatrix(self.datasets, self.stores, self.platforms, self.values * c, self.batch_size)


def build_ls_matrix(runs: Iterable[Union[RunRecord, PathLike]],
                    on_duplicate: str = "error") -> LsMatrix:
    """Collect per-batch LS of every run; only completed batches contribute.

    Two runs with the same (dataset, store, platform) labels are an error
    unless ``on_duplicate="last"``, in which case the later one wins.
    """
    if on_duplicate not in ("error", "last"):
        raise ValueError("on_duplicate must be 'error' or 'last'")
    runs = _load_runs(runs)
    if not runs:
        raise AnalysisError("no runs to analyze")
    sizes = {r.batch_size for r in runs}
    if len(sizes) != 1:
        raise AnalysisError(f"runs use different batch sizes {sorted(sizes)}; batches are not comparable")
    by_key: dict = {}
    for r in runs:
        key = (r.dataset_id, r.store_id, platform_key(r))
        if key in by_key and on_duplicate == "error":
            raise AnalysisError(f"duplicate run for dataset={key[0]} store={key[1]} platform={key[2]}")
        by_key[key] = r
    entries = {}
    for (d, s, p), r in by_key.items():
        for rec in r.batch_records:
            entries[(d, s, p, rec.batch_index)] = rec.ls
    return LsMatrix.from_entries(entries, sizes.pop(), datasets=[k[0] for k in by_key],
                                 stores=[k[1] for k in by_key], platforms=[k[2] for k in by_key])


# --- MLS / RLS -------------------------------------------------------------

def mls_matrix(m: LsMatrix) -> np.ndarray:
    """(D, B) array of MLS; NaN where no store/platform pair loaded the batch."""
    d, s, p, nb = m.values.shape
    vals = m.values.reshape(d, s * p, nb)
    defined = ~np.isnan(vals)
    num = np.where(defined, vals, 0.0).sum(axis=1)
    den = defined.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.maximum(den, 1), np.nan)


def rls_from_mls(mls: np.ndarray) -> np.ndarray:
    defined = ~np.isnan(mls)
    k = defined.sum(axis=0)
    total = np.where(defined, mls, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(defined, mls * k / total, np.nan)


def _none(v) -> Optional[float]:
    return None if math.isnan(v) else float(v)


def mls(m: LsMatrix, d: str, b: int) -> Optional[float]:
    if d not in m.datasets:
        raise KeyError(d)
    if b >= m.n_batches:
        return None
    return _none(mls_matrix(m)[m.datasets.index(d), b])


def rls(m: LsMatrix, d: str, b: int) -> Optional[float]:
    if d not in m.datasets:
        raise KeyError(d)
    if b >= m.n_batches:
        return None
    return _none(rls_from_mls(mls_matrix(m))[m.datasets.index(d), b])


@dataclass
class RlsTable:
    datasets: tuple
    batch_size: int
    mls: np.ndarray  # (D, B)
    rls: np.ndarray  # (D, B)

    @classmethod
    def from_matrix(cls, m: LsMatrix) -> "RlsTable":
        mm = mls_matrix(m)
        return cls(m.datasets, m.batch_size, mm, rls_from_mls(mm))

    @property
    def n_batches(self) -> int:
        return self.mls.shape[1]

    def d_def(self, b: int) -> set:
        return {d for i, d in enumerate(self.datasets) if not math.isnan(self.mls[i, b])}

    def series(self, d: str) -> list:
        """RLS of ``d`` per batch, ``None`` where undefined."""
        return [_none(v) for v in self.rls[self.datasets.index(d)]]

    def rows(self) -> Iterable[dict]:
        k = (~np.isnan(self.mls)).sum(axis=0)
        for i, d in enumerate(self.datasets):
            for b in range(self.n_batches):
                if not math.isnan(self.mls[i, b]):
                    yield {"dataset": d, "batch": b, "mls": float(self.mls[i, b]),
                           "rls": float(self.rls[i, b]), "d_def_size": int(k[b])}


# --- trimming --------------------------------------------------------------

def trim_and_filter(m: LsMatrix, exclude: Sequence[str] = (),
                    trim_to: Union[int, str, None] = None) -> LsMatrix:
    """Drop ``exclude`` datasets and keep only the first batches.

    ``trim_to`` is a triple count (whole batches are kept) or
    ``"min-common"``: keep batches up to the last one at which every
    retained dataset still has some LS entry.
    """
    unknown = set(exclude) - set(m.datasets)
    if unknown:
        log.warning("excluded datasets not present in the results: %s", ", ".join(sorted(unknown)))
    keep = [i for i, d in enumerate(m.datasets) if d not in set(exclude)]
    if not keep:
        raise AnalysisError("every dataset was excluded")
    vals = m.values[keep]
    if trim_to == "min-common":
        per_batch = (~np.isnan(vals)).any(axis=(1, 2))  # (D, B)
        common = np.nonzero(per_batch.all(axis=0))[0]
        if len(common) == 0:
            raise AnalysisError("the retained datasets share no batch")
        vals = vals[..., :int(common[-1]) + 1]
    elif trim_to is not None:
        if isinstance(trim_to, str) or int(trim_to) < 0:
            raise ValueError(f"trim_to must be a triple count or 'min-common', not {trim_to!r}")
        n = int(trim_to) // m.batch_size
        if n == 0:
            raise AnalysisError(f"trim_to={trim_to} is smaller than one batch of {m.batch_size}")
        vals = vals[..., :n]
    out = LsMatrix(tuple(m.datasets[i] for i in keep), m.stores, m.platforms, vals, m.batch_size)
    if len(out) == 0:
        raise AnalysisError("trimming left no LS entries")
    return out


# --- aggregation -----------------------------------------------------------

class SeriesPoint(NamedTuple):
    window_center: float
    mean: float
    ci_low: float
    ci_high: float
    n: int


def _z(ci: float) -> float:
    if not 0 < ci < 1:
        raise ValueError("ci must be in (0, 1)")
    return statistics.NormalDist().inv_cdf((1 + ci) / 2)


def aggregate_series(series: Union[Sequence[Optional[float]], Mapping[int, Optional[float]]],
                     window_triples: int, batch_size: int, ci: float = 0.95) -> list[SeriesPoint]:
    """Average a per-batch series over non-overlapping windows of ``window_triples``.

    The interval is mean +/- z * s / sqrt(n) with the sample standard
    deviation s and the normal quantile z (1.96 for 95%).  A single value
    gives a zero-width interval.  Windows with no defined value are omitted.
    """
    if window_triples <= 0 or window_triples % batch_size:
        raise ValueError(f"window {window_triples} is not a positive multiple of batch size {batch_size}")
    if not isinstance(series, Mapping):
        series = dict(enumerate(series))
    per = window_triples // batch_size
    z = _z(ci)
    groups: dict = defaultdict(list)
    for b, v in series.items():
        if v is not None and not math.isnan(v):
            groups[b // per].append(v)
    points = []
    for w in sorted(groups):
        vals = groups[w]
        mean = statistics.fmean(vals)
        half = z * statistics.stdev(vals) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
        points.append(SeriesPoint((w + 0.5) * window_triples, mean, mean - half, mean + half, len(vals)))
    return points


@dataclass
class CoveragePoint:
    store: str
    platform: str
    window_center: float
    mean: float
    ci_low: float
    ci_high: float
    n: int
    coverage: float
    low_coverage: bool


def store_platform_series(m: LsMatrix, window_triples: int = 1_000_000,
                          ci: float = 0.95) -> list[CoveragePoint]:
    """LS per store/platform averaged over datasets, then over windows.

    Only defined values are averaged; ``coverage`` is the fraction of
    (dataset, batch) cells in the window that were defined, flagged when
    below one half.
    """
    out = []
    nd = len(m.datasets)
    per = window_triples // m.batch_size
    for si, s in enumerate(m.stores):
        for pi, p in enumerate(m.platforms):
            vals = m.values[:, si, pi, :]
            defined = ~np.isnan(vals)
            if not defined.any():
                continue
            with np.errstate(invalid="ignore"):
                mean_b = np.where(defined.any(axis=0), np.nansum(vals, axis=0) / defined.sum(axis=0), np.nan)
            for pt in aggregate_series(mean_b.tolist(), window_triples, m.batch_size, ci):
                w = int(pt.window_center // window_triples)
                cells = defined[:, w * per:(w + 1) * per]
                cov = float(cells.sum()) / (nd * per)
                out.append(CoveragePoint(s, p, *pt, coverage=cov, low_coverage=cov < LOW_COVERAGE))
    return out


# --- reports ---------------------------------------------------------------

@dataclass
class CompletionRow:
    dataset: str
    store: str
    platform: str
    dataset_triples: int
    loaded_triples: int
    fully_loaded: bool
    termination: str


def completion_report(runs: Iterable[Union[RunRecord, PathLike]]) -> list[CompletionRow]:
    rows = []
    for r in _load_runs(runs):
        rows.append(CompletionRow(r.dataset_id, r.store_id, platform_key(r), r.dataset_triples,
                                  r.loaded_triples, r.termination == Termination.COMPLETED,
                                  r.termination.value))
    return rows


@dataclass
class MedianSummary:
    medians: dict
    ratio: Optional[float]
    fastest: Optional[str]
    slowest: Optional[str]
    excluded: list = field(default_factory=list)


def median_rls_summary(table: RlsTable) -> MedianSummary:
    """Median of defined RLS values per dataset, and the max/min ratio of medians.

    Even counts take the midpoint of the two middle values.
    """
    if not table.datasets:
        raise AnalysisError("empty RLS table")
    medians, excluded = {}, []
    for i, d in enumerate(table.datasets):
        vals = table.rls[i][~np.isnan(table.rls[i])]
        if len(vals) == 0:
            log.warning("dataset %s has no defined RLS; left out of the summary", d)
            excluded.append(d)
            continue
        medians[d] = float(statistics.median(vals.tolist()))
    if not medians:
        return MedianSummary({}, None, None, None, excluded)
    fastest = max(medians, key=medians.get)
    slowest = min(medians, key=medians.get)
    return MedianSummary(medians, medians[fastest] / medians[slowest], fastest, slowest, excluded)


# --- outputs ---------------------------------------------------------------

def write_csv(rows: Iterable, path: PathLike, columns: Optional[Sequence[str]] = None) -> Path:
    rows = [asdict(r) if hasattr(r, "__dataclass_fields__") else
            (r._asdict() if hasattr(r, "_asdict") else dict(r)) for r in rows]
    if columns is None:
        columns = list(rows[0]) if rows else []
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        w.writerows(rows)
    return path


@dataclass
class AnalysisResult:
    matrix: LsMatrix
    table: RlsTable
    summary: MedianSummary
    completion: list
    rls_series: dict
    store_series: list
    config: dict

    def report(self) -> dict:
        k = (~np.isnan(self.table.mls)).sum(axis=0)
        return {
            "config": self.config,
            "datasets": list(self.table.datasets),
            "stores": list(self.matrix.stores),
            "platforms": list(self.matrix.platforms),
            "batch_size": self.matrix.batch_size,
            "n_batches": self.table.n_batches,
            "d_def_min": int(k.min()) if len(k) else 0,
            "d_def_max": int(k.max()) if len(k) else 0,
            "median_rls": self.summary.medians,
            "max_min_ratio": self.summary.ratio,
            "fastest": self.summary.fastest,
            "slowest": self.summary.slowest,
            "excluded_from_summary": self.summary.excluded,
        }


def analyze(runs: Iterable[Union[RunRecord, PathLike]], *, exclude: Sequence[str] = (),
            trim_to: Union[int, str, None] = None, window_triples: int = 500_000,
            store_window_triples: int = 1_000_000, ci: float = 0.95,
            on_duplicate: str = "error") -> AnalysisResult:
    runs = _load_runs(runs)
    full = build_ls_matrix(runs, on_duplicate)
    m = trim_and_filter(full, exclude, trim_to)
    table = RlsTable.from_matrix(m)
    series = {d: aggregate_series(table.series(d), window_triples, m.batch_size, ci)
              for d in table.datasets}
    config = {"exclude": list(exclude), "trim_to": trim_to, "window_triples": window_triples,
              "store_window_triples": store_window_triples, "ci": ci, "runs": len(runs)}
    return AnalysisResult(m, table, median_rls_summary(table), completion_report(runs), series,
                          store_platform_series(full, store_window_triples, ci), config)


def write_analysis(result: AnalysisResult, out_dir: PathLike) -> dict:
    """Write the CSV tables and ``report.json``; returns name -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "rls": write_csv(result.table.rows(), out / "rls.csv",
                         ["dataset", "batch", "mls", "rls", "d_def_size"]),
        "rls_series": write_csv(
            ({"dataset": d, **pt._asdict()} for d, pts in result.rls_series.items() for pt in pts),
            out / "rls_series.csv", ["dataset", *SeriesPoint._fields]),
        "store_platform_series": write_csv(result.store_series, out / "store_platform_series.csv",
                                           [f.name for f in fields(CoveragePoint)]),
        "median_rls": write_csv(({"dataset": d, "median_rls": v} for d, v in result.summary.medians.items()),
                                out / "median_rls.csv", ["dataset", "median_rls"]),
        "completion": write_csv(result.completion, out / "completion.csv",
                                [f.name for f in fields(CompletionRow)]),
    }
    report = out / "report.json"
    report.write_text(json.dumps(result.report(), indent=2) + "\n", encoding="utf-8")
    paths["report"] = report
    return paths


# --- published results ingest ----------------------------------------------

INGEST_COLUMNS = ("dataset", "store", "platform", "batch")


def ingest_long_csv(path: PathLike, batch_size: int = 50_000) -> list[RunRecord]:
    """Turn a long-format per-batch CSV into runs.

    Required columns: ``dataset``, ``store``, ``platform``, ``batch`` and
    either ``ls`` (triples/second) or ``load_seconds``.  Optional:
    ``memory_limit`` (bytes), ``triples`` (defaults to ``batch_size``),
    ``termination`` and ``batches_total``.  Missing termination is inferred
    as ``completed`` when ``batches_total`` is given and reached, otherwise
    ``crashed``; it only affects completion reports, not RLS.
    """
    groups: dict = defaultdict(list)
    meta: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or ())
        missing = [c for c in INGEST_COLUMNS if c not in cols]
        if missing or not ({"ls", "load_seconds"} & cols):
            raise AnalysisError(f"{path}: missing columns {missing or ['ls or load_seconds']}")
        for row in reader:
            mem = row.get("memory_limit") or None
            key = (row["dataset"], row["store"], row["platform"], int(mem) if mem else None)
            triples = int(row.get("triples") or batch_size)
            if row.get("ls"):
                ls = float(row["ls"])
                seconds = triples / ls
            else:
                seconds = float(row["load_seconds"])
                ls = triples / seconds
            groups[key].append(BatchRecord(int(row["batch"]), triples, seconds, ls))
            m = meta.setdefault(key, {})
            if row.get("termination"):
                m["termination"] = row["termination"]
            if row.get("batches_total"):
                m["batches_total"] = int(row["batches_total"])
    runs = []
    for key, recs in groups.items():
        recs.sort(key=lambda r: r.batch_index)
        if [r.batch_index for r in recs] != list(range(len(recs))):
            raise AnalysisError(f"{path}: batches of {key[:3]} are not contiguous from 0")
        m = meta.get(key, {})
        total = m.get("batches_total", len(recs))
        term = m.get("termination") or ("completed" if total == len(recs) and "batches_total" in m
                                        else "crashed")
        d, s, p, mem = key
        runs.append(RunRecord(d, s, p, mem, recs, Termination(term), batch_size=batch_size,
                              batches_total=total, labels={"dataset": d, "store": s, "platform": p}))
    return runs
