"""Benchmark aggregation: success rates, target-level averaging, correlation,
moving averages and report emission."""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

RMSD_SUCCESS = 2.0  # Å, strict
SIMILARITY_THRESHOLD = 0.70
RMSD_ONLY = "rmsd_only"
RMSD_AND_VALID = "rmsd_and_valid"
CRITERIA = (RMSD_ONLY, RMSD_AND_VALID)
RECORD_FIELDS = ("entry_id", "target_id", "method", "rmsd", "pb_valid", "pocket_similarity", "relaxed", "run_id")


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class EvaluationRecord:
    entry_id: str
    target_id: str
    method: str
    rmsd: float
    pb_valid: bool
    pocket_similarity: float | None = None
    relaxed: bool = False
    run_id: str = "0"

    def __post_init__(self):
        if not (self.rmsd >= 0 and math.isfinite(self.rmsd)):
            raise MetricsError(f"{self.entry_id}: rmsd must be finite and non-negative")
        if self.pocket_similarity is not None and not 0 <= self.pocket_similarity <= 1:
            raise MetricsError(f"{self.entry_id}: pocket_similarity must lie in [0, 1]")

    def success(self, criterion: str = RMSD_ONLY, threshold: float = RMSD_SUCCESS) -> bool:
        if criterion not in CRITERIA:
            raise MetricsError(f"unknown criterion {criterion!r}")
        hit = self.rmsd < threshold
        return hit and self.pb_valid if criterion == RMSD_AND_VALID else hit


def _require(records) -> list[EvaluationRecord]:
    records = list(records)
    if not records:
        raise MetricsError("no records")
    return records


def success_rate(records, criterion: str = RMSD_ONLY, threshold: float = RMSD_SUCCESS) -> float:
    """Percentage of records that succeed (RMSD strictly below ``threshold``)."""
    records = _require(records)
    return 100.0 * sum(r.success(criterion, threshold) for r in records) / len(records)


def target_level_success(records, criterion: str = RMSD_ONLY, threshold: float = RMSD_SUCCESS) -> float:
    """Unweighted mean over targets of each target's success percentage."""
    records = _require(records)
    groups: dict[str, list] = defaultdict(list)
    for r in records:
        if not r.target_id:
            raise MetricsError(f"{r.entry_id}: missing target_id")
        groups[r.target_id].append(r)
    rates = [success_rate(groups[t], criterion, threshold) for t in sorted(groups)]
    return math.fsum(rates) / len(rates)


def pearson(x, y) -> float:
    """Sample Pearson correlation (two-pass, centred)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricsError("pearson needs two 1-D sequences of equal length")
    if len(x) < 2:
        raise MetricsError("pearson needs at least 2 points")
    dx = x - math.fsum(x) / len(x)
    dy = y - math.fsum(y) / len(y)
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    if sxx == 0 or syy == 0:
        raise MetricsError("correlation undefined for constant input")
    r = math.fsum(dx * dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def moving_average(values, window: int) -> list[float]:
    """Trailing means over every contiguous window; length ``n - window + 1``."""
    values = np.asarray(values, dtype=np.float64)
    if window < 1:
        raise MetricsError("window must be at least 1")
    if window > len(values):
        raise MetricsError(f"window {window} exceeds series length {len(values)}")
    windows = np.lib.stride_tricks.sliding_window_view(values, window)
    return [math.fsum(w) / window for w in windows]


def sorted_by_key(pairs, descending: bool = True) -> list[float]:
    """Values of ``(key, value)`` pairs ordered by key, stable on ties."""
    pairs = list(pairs)
    order = sorted(range(len(pairs)), key=lambda k: pairs[k][0], reverse=descending)
    return [pairs[k][1] for k in order]


def similarity_success_curve(records, window: int = 100, criterion: str = RMSD_ONLY,
                             threshold: float = RMSD_SUCCESS) -> list[float]:
    """Moving-average success (0/1) over records ordered by descending pocket similarity."""
    records = _require(records)
    missing = [r.entry_id for r in records if r.pocket_similarity is None]
    if missing:
        raise MetricsError(f"pocket_similarity missing for {len(missing)} record(s), e.g. {missing[0]}")
    ordered = sorted(records, key=lambda r: (-r.pocket_similarity, r.entry_id))
    return moving_average([float(r.success(criterion, threshold)) for r in ordered], window)


# --------------------------------------------------------------------------- record CSV

def _fmt_float(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in sorted(records, key=lambda r: (r.method, r.entry_id, r.run_id, r.relaxed)):
        w.writerow([r.entry_id, r.target_id, r.method, _fmt_float(r.rmsd), str(r.pb_valid).lower(),
                    _fmt_float(r.pocket_similarity), str(r.relaxed).lower(), r.run_id])
    return buf.getvalue()


def _parse_bool(v: str, what: str) -> bool:
    v = v.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise MetricsError(f"{what}: expected a boolean, got {v!r}")


def read_records(text: str) -> list[EvaluationRecord]:
    """Parse a record CSV. Rows carrying a non-empty ``status`` other than
    ``ok`` (as written by batch evaluation) are skipped."""
    reader = csv.DictReader(io.StringIO(text))
    missing = [f for f in ("entry_id", "rmsd", "pb_valid") if f not in (reader.fieldnames or ())]
    if missing:
        raise MetricsError(f"record CSV lacks column(s): {', '.join(missing)}")
    out = []
    for k, row in enumerate(reader, start=2):
        if (row.get("status") or "ok").strip() not in ("ok", ""):
            continue
        try:
            sim = (row.get("pocket_similarity") or "").strip()
            out.append(EvaluationRecord(
                entry_id=row["entry_id"].strip(),
                target_id=(row.get("target_id") or row["entry_id"]).strip(),
                method=(row.get("method") or "").strip(),
                rmsd=float(row["rmsd"]),
                pb_valid=_parse_bool(row["pb_valid"], "pb_valid"),
                pocket_similarity=float(sim) if sim else None,
                relaxed=_parse_bool(row.get("relaxed") or "false", "relaxed"),
                run_id=(row.get("run_id") or "0").strip() or "0",
            ))
        except (ValueError, TypeError) as exc:
            raise MetricsError(f"record CSV line {k}: {exc}") from None
    return out


# --------------------------------------------------------------------------- report

def _rates(records, threshold) -> dict:
    return {
        "success_rate_rmsd_only": success_rate(records, RMSD_ONLY, threshold),
        "success_rate_rmsd_and_valid": success_rate(records, RMSD_AND_VALID, threshold),
        "target_success_rmsd_only": target_level_success(records, RMSD_ONLY, threshold),
        "target_success_rmsd_and_valid": target_level_success(records, RMSD_AND_VALID, threshold),
        "n_records": len(records),
        "n_targets": len({r.target_id for r in records}),
    }


def _run_spread(records, threshold) -> dict | None:
    runs: dict[str, list] = defaultdict(list)
    for r in records:
        runs[r.run_id].append(r)
    if len(runs) < 2:
        return None
    out = {"n_runs": len(runs), "std_kind": "sample"}
    for crit in CRITERIA:
        vals = [success_rate(runs[k], crit, threshold) for k in sorted(runs)]
        out[f"{crit}_mean"] = statistics.fmean(vals)
        out[f"{crit}_std"] = statistics.stdev(vals)
    return out


def _method_summary(records, threshold, stratify, sim_threshold) -> dict:
    summary = _rates(records, threshold)
    summary["mean_rmsd"] = statistics.fmean(r.rmsd for r in records)
    for relaxed, key in ((False, "unrelaxed"), (True, "relaxed")):
        part = [r for r in records if r.relaxed is relaxed]
        summary[key] = _rates(part, threshold) if part else None
    summary["runs"] = _run_spread(records, threshold)
    if stratify:
        similar = [r for r in records if r.pocket_similarity >= sim_threshold]
        dissimilar = [r for r in records if r.pocket_similarity < sim_threshold]
        strata = {}
        for name, part in (("similar", similar), ("dissimilar", dissimilar)):
            strata[name] = dict(_rates(part, threshold), mean_rmsd=statistics.fmean(r.rmsd for r in part)) if part else None
        summary["strata"] = strata
        try:
            summary["pearson_similarity_rmsd"] = pearson([r.pocket_similarity for r in records],
                                                         [r.rmsd for r in records])
        except MetricsError:
            summary["pearson_similarity_rmsd"] = None
    return summary


def generate_report(records, stratify: bool = False, similarity_threshold: float = SIMILARITY_THRESHOLD,
                    rmsd_threshold: float = RMSD_SUCCESS) -> tuple[str, str]:
    """Return ``(record_csv, report_json)``; both independent of input order."""
    records = _require(records)
    if stratify:
        missing = sorted(r.entry_id for r in records if r.pocket_similarity is None)
        if missing:
            raise MetricsError(f"stratified report needs pocket_similarity; missing for {', '.join(missing[:5])}")
    records = sorted(records, key=lambda r: (r.method, r.entry_id, r.run_id, r.relaxed))
    methods: dict[str, list] = defaultdict(list)
    for r in records:
        methods[r.method].append(r)
    report = {
        "criteria": {"rmsd_threshold": rmsd_threshold, "rmsd_strict": True,
                     "similarity_threshold": similarity_threshold if stratify else None},
        "n_records": len(records),
        "overall": _rates(records, rmsd_threshold),
        "methods": {m: _method_summary(methods[m], rmsd_threshold, stratify, similarity_threshold)
                    for m in sorted(methods)},
    }
    return records_to_csv(records), json.dumps(report, sort_keys=True, indent=2) + "\n"


def format_percent(value: float) -> str:
    return f"{value:.2f}%"
