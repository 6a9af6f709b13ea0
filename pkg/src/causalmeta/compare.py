"""Random-effects versus causal agreement across many meta-analyses."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .causal import pool_causal
from .classical import pool_random
from .effects import CorrectionPolicy, study_effects
from .errors import MetaAnalysisError, NoValidDatasets
from .intervals import interval_jaccard
from .io import load_dataset
from .model import MetaDataset, Measure

METRICS = ("discrepancy", "len_re", "len_causal", "jaccard")
TABLE_HEADER = ("Measure", "Discrepancy", "CI length (RE)", "CI length (causal)", "CI overlap (%)")
RECORD_COLUMNS = (
    "dataset", "measure", "point_re", "point_causal", "ci_re_low", "ci_re_high",
    "ci_causal_low", "ci_causal_high", "discrepancy", "len_re", "len_causal", "jaccard",
)


@dataclass(frozen=True)
class ComparisonRecord:
    dataset: str
    measure: str
    point_re: float
    point_causal: float
    ci_re: tuple[float, float]
    ci_causal: tuple[float, float]
    discrepancy: float
    len_re: float
    len_causal: float
    jaccard: float

    @classmethod
    def from_intervals(cls, dataset: str, measure: str, point_re: float, point_causal: float,
                       ci_re: tuple[float, float], ci_causal: tuple[float, float]) -> "ComparisonRecord":
        return cls(
            dataset=dataset,
            measure=measure,
            point_re=point_re,
            point_causal=point_causal,
            ci_re=tuple(ci_re),
            ci_causal=tuple(ci_causal),
            discrepancy=abs(point_re - point_causal),
            len_re=ci_re[1] - ci_re[0],
            len_causal=ci_causal[1] - ci_causal[0],
            jaccard=interval_jaccard(ci_re, ci_causal),
        )

    def row(self) -> dict:
        return {
            "dataset": self.dataset,
            "measure": self.measure,
            "point_re": self.point_re,
            "point_causal": self.point_causal,
            "ci_re_low": self.ci_re[0],
            "ci_re_high": self.ci_re[1],
            "ci_causal_low": self.ci_causal[0],
            "ci_causal_high": self.ci_causal[1],
            "discrepancy": self.discrepancy,
            "len_re": self.len_re,
            "len_causal": self.len_causal,
            "jaccard": self.jaccard,
        }


def compare_one(ds: MetaDataset, measure: "Measure | str", ci_level: float = 0.95,
                correction: "CorrectionPolicy | str" = CorrectionPolicy.HALDANE,
                tau2_method: str = "dl") -> ComparisonRecord:
    """Random-effects and pooled-weight causal estimates of one dataset, compared
    on the natural scale (ratio intervals are exponentiated first)."""
    measure = Measure.parse(measure)
    re = pool_random(study_effects(ds, measure, correction), ci_level=ci_level, tau2_method=tau2_method)
    ca = pool_causal(ds, measure, "pooled", ci_level=ci_level, correction=correction)
    return ComparisonRecord.from_intervals(ds.name, measure.value, re.point, ca.point, re.ci, ca.ci)


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    sd: float


def _mean_sd(values: Sequence[float]) -> MetricSummary:
    a = np.asarray(values, dtype=np.float64)
    sd = float(np.std(a, ddof=1)) if a.size > 1 else 0.0
    return MetricSummary(float(a.mean()), sd)


@dataclass
class BatchResult:
    records: list[ComparisonRecord]
    failures: list[tuple[str, str]] = field(default_factory=list)
    measures: tuple[str, ...] = ()

    def summary(self) -> dict[str, dict[str, MetricSummary]]:
        """Mean and sample standard deviation of each metric, per measure."""
        out = {}
        for m in self.measures:
            recs = [r for r in self.records if r.measure == m]
            if recs:
                out[m] = {k: _mean_sd([getattr(r, k) for r in recs]) for k in METRICS}
        return out

    def counts(self) -> dict[str, int]:
        return {m: sum(r.measure == m for r in self.records) for m in self.measures}

    def to_dict(self) -> dict:
        return {
            "summary": {
                m: {k: {"mean": s.mean, "sd": s.sd} for k, s in d.items()}
                for m, d in self.summary().items()
            },
            "n_datasets": self.counts(),
            "records": [r.row() for r in self.records],
            "failures": [{"source": s, "error": e} for s, e in self.failures],
        }


def _load_all(paths: Iterable[Path]) -> tuple[list[MetaDataset], list[tuple[str, str]]]:
    datasets, failures = [], []
    for p in paths:
        try:
            datasets.append(load_dataset(p))
        except (MetaAnalysisError, OSError) as exc:
            failures.append((str(p), str(exc)))
    return datasets, failures


def dataset_files(directory: str | Path) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise NoValidDatasets(f"{d} is not a directory")
    return sorted(p for p in d.iterdir() if p.suffix.lower() in (".csv", ".json") and p.is_file())


def compare_datasets(datasets: Sequence[MetaDataset], measures: Sequence["Measure | str"] = ("rd", "rr", "or"),
                     ci_level: float = 0.95, correction: "CorrectionPolicy | str" = CorrectionPolicy.HALDANE,
                     tau2_method: str = "dl", workers: int = 1) -> BatchResult:
    measures = tuple(Measure.parse(m).value for m in measures)
    jobs = [(ds, m) for ds in sorted(datasets, key=lambda d: d.name) for m in measures]

    def run(job):
        ds, m = job
        try:
            return compare_one(ds, m, ci_level, correction, tau2_method), None
        except (MetaAnalysisError, ValueError, ZeroDivisionError) as exc:
            return None, (f"{ds.name} [{m}]", str(exc))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    records = [r for r, _ in results if r is not None]
    failures = [f for _, f in results if f is not None]
    return BatchResult(records, failures, measures)


def compare_batch(source: "str | Path | Sequence[str | Path]", measures: Sequence["Measure | str"] = ("rd", "rr", "or"),
                  ci_level: float = 0.95, correction: "CorrectionPolicy | str" = CorrectionPolicy.HALDANE,
                  tau2_method: str = "dl", workers: int = 1) -> BatchResult:
    """Compare every dataset file in a directory (or an explicit list of files).

    Unreadable or invalid files are listed in ``failures``; they never abort the
    batch. Records are ordered by dataset name.

    Raises
    ------
    NoValidDatasets
        No file produced a single comparison record.
    """
    if isinstance(source, (str, Path)):
        paths = dataset_files(source)
    else:
        paths = sorted(Path(p) for p in source)
    datasets, failures = _load_all(paths)
    result = compare_datasets(datasets, measures, ci_level, correction, tau2_method, workers)
    result.failures = failures + result.failures
    if not result.records:
        raise NoValidDatasets(f"no dataset could be compared ({len(result.failures)} failures)")
    return result


def _fmt(s: MetricSummary, percent: bool = False) -> str:
    if percent:
        return f"{100 * s.mean:.1f}% (± {100 * s.sd:.1f}%)"
    return f"{s.mean:.2f} (± {s.sd:.2f})"


def format_table(result: BatchResult) -> str:
    """Aligned text table: one row per measure, ``mean (± sd)`` in each cell."""
    rows = [TABLE_HEADER]
    for m, d in result.summary().items():
        rows.append((
            m.upper(),
            _fmt(d["discrepancy"]),
            _fmt(d["len_re"]),
            _fmt(d["len_causal"]),
            _fmt(d["jaccard"], percent=True),
        ))
    widths = [max(len(r[i]) for r in rows) for i in range(len(TABLE_HEADER))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    counts = result.counts()
    lines.append("")
    lines.append("datasets compared: " + ", ".join(f"{m}={c}" for m, c in counts.items()))
    if result.failures:
        lines.append(f"skipped: {len(result.failures)}")
        lines.extend(f"  {src}: {err}" for src, err in result.failures)
    return "\n".join(lines) + "\n"


def records_csv(records: Sequence[ComparisonRecord]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RECORD_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: (repr(v) if isinstance(v, float) and math.isfinite(v) else v) for k, v in r.row().items()})
    return buf.getvalue()
