"""Correlation metrics, error-complementarity quadrants and split aggregation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

RESULT_COLUMNS = ("dataset", "method", "labels", "split_seed", "srocc", "plcc")
MEDIAN_COLUMNS = ("dataset", "method", "labels", "n_splits", "median_srocc", "median_plcc")


def _pair(x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("correlation needs at least two samples")
    return x, y


def plcc(x, y) -> float | None:
    """Pearson correlation; None when either input is constant."""
    x, y = _pair(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    return float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def srocc(x, y) -> float | None:
    """Spearman correlation: Pearson over average-tie ranks."""
    x, y = _pair(x, y)
    return plcc(rankdata(x, method="average"), rankdata(y, method="average"))


@dataclass
class EvalResult:
    srocc: float | None
    plcc: float | None
    n: int
    predictions: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)


def evaluate(predictions, labels) -> EvalResult:
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    keep = np.isfinite(y)
    p, y = p[keep], y[keep]
    return EvalResult(srocc(p, y), plcc(p, y), int(p.size), p, y)


def complementarity_quadrants(err_a, err_b, mos_range: float, fraction: float = 0.2):
    """Counts of (A good, B good), (A good, B bad), (A bad, B good), (A bad, B bad).

    An absolute error is good when it is at most ``fraction * mos_range``.
    """
    if mos_range <= 0:
        raise ValueError("mos_range must be positive")
    a = np.abs(np.asarray(err_a, dtype=np.float64))
    b = np.abs(np.asarray(err_b, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError("error arrays differ in length")
    thr = fraction * mos_range
    ga, gb = a <= thr, b <= thr
    return (
        int(np.sum(ga & gb)),
        int(np.sum(ga & ~gb)),
        int(np.sum(~ga & gb)),
        int(np.sum(~ga & ~gb)),
    )


def _median(values):
    vals = [v for v in values if v is not None]
    return float(np.median(vals)) if vals else None


def aggregate_splits(results) -> tuple:
    """Median SROCC and PLCC over splits (mean of the middle two for even counts)."""
    results = list(results)
    if not results:
        raise ValueError("no results to aggregate")
    return _median(r.srocc for r in results), _median(r.plcc for r in results)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_results_csv(rows, path) -> Path:
    """rows: dicts with RESULT_COLUMNS keys."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow([r["dataset"], r["method"], r["labels"], r["split_seed"],
                        _fmt(r["srocc"]), _fmt(r["plcc"])])
    return path


def median_rows(rows) -> list[dict]:
    """Group result rows by (dataset, method, labels), keeping first-seen order."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["dataset"], r["method"], r["labels"]), []).append(r)
    out = []
    for (dataset, method, labels), grp in groups.items():
        out.append({
            "dataset": dataset, "method": method, "labels": labels, "n_splits": len(grp),
            "median_srocc": _median(g["srocc"] for g in grp),
            "median_plcc": _median(g["plcc"] for g in grp),
        })
    return out


def write_medians_csv(rows, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEDIAN_COLUMNS)
        for r in median_rows(rows):
            w.writerow([r["dataset"], r["method"], r["labels"], r["n_splits"],
                        _fmt(r["median_srocc"]), _fmt(r["median_plcc"])])
    return path


def read_results_csv(path) -> list[dict]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            row = dict(r)
            for k in ("labels", "split_seed", "n_splits"):
                if k in row:
                    row[k] = int(row[k])
            for k in ("srocc", "plcc", "median_srocc", "median_plcc"):
                if k in row:
                    row[k] = float(row[k]) if row[k] else None
            out.append(row)
    return out
