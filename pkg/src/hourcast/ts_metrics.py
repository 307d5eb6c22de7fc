"""Series error metrics and the column-normalized ranking across models."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

METRICS = ("rmse", "mae", "ve", "ske", "s_ape", "nc_rmse")


def _pair(F, A):
    F = np.asarray(F, dtype=float)
    A = np.asarray(A, dtype=float)
    if F.shape != A.shape or F.ndim != 1:
        raise ValueError(f"series shapes differ: {F.shape} vs {A.shape}")
    if F.size == 0:
        raise ValueError("empty series")
    return F, A


def rmse(F, A) -> float:
    F, A = _pair(F, A)
    return float(np.sqrt(np.mean((F - A) ** 2)))


def mae(F, A) -> float:
    F, A = _pair(F, A)
    return float(np.mean(np.abs(F - A)))


def _cum_normalized(x: np.ndarray) -> np.ndarray:
    c = np.cumsum(x)
    top = c.max()
    return c / top if top > 0 else np.zeros_like(c)


def nc_rmse(F, A) -> float:
    """RMSE between the two cumulative series, each scaled by its own maximum."""
    F, A = _pair(F, A)
    if np.any(F < 0) or np.any(A < 0):
        raise ValueError("nc_rmse expects non-negative series")
    return rmse(_cum_normalized(F), _cum_normalized(A))


def s_ape(F, A) -> float:
    """Symmetric absolute percentage error of the series totals (0 when both are 0)."""
    F, A = _pair(F, A)
    sf, sa = F.sum(), A.sum()
    if sf + sa == 0:
        return 0.0
    return float(abs(sf - sa) / (sf + sa) * 100.0)


def volatility_error(F, A) -> float:
    F, A = _pair(F, A)
    ddof = 1 if F.size > 1 else 0
    return float(abs(np.std(F, ddof=ddof) - np.std(A, ddof=ddof)))


def adjusted_skewness(x) -> float:
    """Adjusted Fisher-Pearson coefficient G1; zero for a constant series."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        raise ValueError("skewness needs at least 3 observations")
    d = x - x.mean()
    m2 = np.mean(d ** 2)
    # constant up to rounding
    if m2 <= (1e-12 * np.max(np.abs(x))) ** 2:
        return 0.0
    g1 = np.mean(d ** 3) / m2 ** 1.5
    return float(g1 * math.sqrt(n * (n - 1)) / (n - 2))


def skewness_error(F, A) -> float:
    F, A = _pair(F, A)
    return abs(adjusted_skewness(F) - adjusted_skewness(A))


_FUNCS = {
    "rmse": rmse,
    "mae": mae,
    "ve": volatility_error,
    "ske": skewness_error,
    "s_ape": s_ape,
    "nc_rmse": nc_rmse,
}


@dataclass
class MetricRow:
    model: str
    rmse: float
    mae: float
    ve: float
    ske: float
    s_ape: float
    nc_rmse: float
    is_baseline: bool = False

    def values(self) -> np.ndarray:
        return np.array([getattr(self, m) for m in METRICS], dtype=float)


def score_series(model: str, F, A, is_baseline: bool = False) -> MetricRow:
    return MetricRow(model, *(_FUNCS[m](F, A) for m in METRICS), is_baseline=is_baseline)


def mean_rows(model: str, rows: Sequence[MetricRow], is_baseline: bool = False) -> MetricRow:
    """Uniform average of per-(topic, day) scores."""
    vals = np.mean([r.values() for r in rows], axis=0)
    return MetricRow(model, *vals.tolist(), is_baseline=is_baseline)


@dataclass
class RankTable:
    rows: list[MetricRow]
    onme: list[float]
    pifbb: list[float]
    best_baseline: str | None = None
    normalized: list[list[float]] = field(default_factory=list)

    def rank_of(self, model: str) -> int:
        return [r.model for r in self.rows].index(model) + 1

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "model", "RMSE", "MAE", "VE", "SkE", "S-APE", "NC-RMSE", "ONME", "PIFBB"])
            for i, (row, o, p) in enumerate(zip(self.rows, self.onme, self.pifbb), start=1):
                w.writerow([i, row.model, *(f"{v:.4f}" for v in row.values()), f"{o:.4f}", f"{p:.4f}"])

    def to_json(self) -> str:
        return json.dumps({
            "best_baseline": self.best_baseline,
            "rows": [dict(asdict(r), rank=i + 1, onme=o, pifbb=p)
                     for i, (r, o, p) in enumerate(zip(self.rows, self.onme, self.pifbb))],
        }, indent=2)


def onme_table(rows: Sequence[MetricRow]) -> RankTable:
    """Divide each metric column by its sum, average the six shares per model,
    rank ascending, and express each model's gain over the best baseline."""
    if len(rows) < 2:
        raise ValueError("ranking needs at least two models")
    M = np.array([r.values() for r in rows])
    if np.any(M < 0) or not np.all(np.isfinite(M)):
        raise ValueError("metric values must be finite and non-negative")
    sums = M.sum(axis=0)
    norm = np.divide(M, sums, out=np.zeros_like(M), where=sums > 0)
    onme = norm.mean(axis=1)
    order = sorted(range(len(rows)), key=lambda i: (onme[i], i))

    base_idx = [i for i, r in enumerate(rows) if r.is_baseline]
    best = min(base_idx, key=lambda i: (onme[i], i)) if base_idx else None
    if best is not None and onme[best] > 0:
        pifbb = 100.0 * (onme[best] - onme) / onme[best]
    else:
        pifbb = np.zeros(len(rows))
    return RankTable(
        rows=[rows[i] for i in order],
        onme=[float(onme[i]) for i in order],
        pifbb=[float(pifbb[i]) for i in order],
        best_baseline=rows[best].model if best is not None else None,
        normalized=[norm[i].tolist() for i in order],
    )


def per_topic_normalized(scores: dict[str, dict[str, MetricRow]], models: Sequence[str]) -> list[dict]:
    """Per-topic, per-metric scores of ``models`` scaled to sum to one (bar-chart data)."""
    out = []
    for topic in sorted(scores):
        for metric in METRICS:
            vals = np.array([getattr(scores[topic][m], metric) for m in models])
            total = vals.sum()
            shares = vals / total if total > 0 else np.zeros_like(vals)
            out.append({"topic": topic, "metric": metric,
                        **{m: float(s) for m, s in zip(models, shares)}})
    return out
