"""Time-bucketed kept/rejected/baseline evaluation and AUT summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TemporalSplit
from .errors import ConfigurationError, DomainError, DriftguardError, IntegrityError

PARTITIONS = ("baseline", "kept", "rejected")
METRICS = ("f1", "precision", "recall")


@dataclass(frozen=True)
class Confusion:
    """Binary confusion counts with the malicious class as positive."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn
        )

    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def metric(self, name: str) -> tuple[float, bool]:
        """(value, degenerate): zero-denominator cases report 0 and a flag."""
        if name == "precision":
            denom = self.tp + self.fp
            return (self.tp / denom, False) if denom else (0.0, True)
        if name == "recall":
            denom = self.tp + self.fn
            return (self.tp / denom, False) if denom else (0.0, True)
        if name == "f1":
            denom = 2 * self.tp + self.fp + self.fn
            return (2 * self.tp / denom, False) if denom else (0.0, True)
        raise ConfigurationError(f"unknown metric {name!r}")

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class PeriodReport:
    """Confusions for one period plus rejection accounting.

    ``drift_rates`` maps each ground-truth class to the fraction of that
    class's examples rejected in the period, the per-class quarantine signal.
    """

    index: int
    baseline: Confusion
    kept: Confusion
    rejected: Confusion
    rejection_rate: float
    drift_rates: dict[str, float]
    class_counts: dict[str, int]

    def metric(self, metric: str, partition: str) -> tuple[float, bool]:
        return getattr(self, partition).metric(metric)


@dataclass(frozen=True)
class TimeSeriesReport:
    periods: tuple[PeriodReport, ...]
    aut: dict[str, dict[str, float]]  # metric -> partition -> value


def period_metrics(decisions, truth: dict[str, str], positive_label: str, index: int = 0) -> PeriodReport:
    """Confusions for baseline, kept, and rejected partitions of one period.

    Every decision id must appear in ``truth``; kept and rejected counts sum
    to the baseline cell-wise by construction.
    """
    cells = {"baseline": [0, 0, 0, 0], "kept": [0, 0, 0, 0], "rejected": [0, 0, 0, 0]}
    class_counts: dict[str, int] = {}
    rejected_by_class: dict[str, int] = {}
    n_rejected = 0
    decisions = list(decisions)
    for d in decisions:
        if d.example_id not in truth:
            raise IntegrityError(f"decision {d.example_id!r} has no ground truth")
        actual = truth[d.example_id]
        class_counts[actual] = class_counts.get(actual, 0) + 1
        pred_pos = d.predicted == positive_label
        true_pos = actual == positive_label
        cell = (
            0 if pred_pos and true_pos else
            1 if pred_pos and not true_pos else
            2 if not pred_pos and not true_pos else 3
        )  # tp, fp, tn, fn
        cells["baseline"][cell] += 1
        if d.kept:
            cells["kept"][cell] += 1
        else:
            cells["rejected"][cell] += 1
            n_rejected += 1
            rejected_by_class[actual] = rejected_by_class.get(actual, 0) + 1
    total = len(decisions)
    drift_rates = {
        label: rejected_by_class.get(label, 0) / count
        for label, count in class_counts.items()
    }
    return PeriodReport(
        index=index,
        baseline=Confusion(*cells["baseline"]),
        kept=Confusion(*cells["kept"]),
        rejected=Confusion(*cells["rejected"]),
        rejection_rate=n_rejected / total if total else 0.0,
        drift_rates=drift_rates,
        class_counts=class_counts,
    )


def aut(values) -> float:
    """Trapezoidal area under a metric-versus-time curve, normalized to [0,1].

    With N periods this is the mean of the N-1 trapezoids, so a constant
    series scores its own value regardless of horizon. Needs >= 2 periods.
    """
    vals = np.asarray(list(values), dtype=np.float64)
    if vals.size < 2:
        raise DomainError(f"AUT needs at least 2 periods, got {vals.size}")
    return float(np.sum((vals[:-1] + vals[1:]) / 2.0) / (vals.size - 1))


def evaluate_stream(evaluator, split: TemporalSplit, positive_label: str | None = None) -> TimeSeriesReport:
    """Decide every test period and summarize with per-partition AUT values.

    ``positive_label`` defaults to the evaluator's own; every test example
    must carry a ground-truth label.
    """
    if positive_label is None:
        positive_label = getattr(evaluator, "positive_label_", None)
    if positive_label is None:
        raise ConfigurationError("positive_label needed: set it here or on the evaluator")
    reports = []
    for index, period in enumerate(split.test_periods):
        try:
            decisions = [evaluator.decide(ex) for ex in period.examples]
        except DriftguardError as exc:
            raise type(exc)(f"period {index}: {exc}") from exc
        truth = {}
        for ex in period.examples:
            if ex.label is None:
                raise IntegrityError(f"period {index}: example {ex.id!r} is unlabeled")
            truth[ex.id] = ex.label
        reports.append(period_metrics(decisions, truth, positive_label, index=index))
    aut_table = {
        metric: {
            partition: aut([r.metric(metric, partition)[0] for r in reports])
            for partition in PARTITIONS
        }
        for metric in METRICS
    }
    return TimeSeriesReport(periods=tuple(reports), aut=aut_table)


def report_to_dict(report: TimeSeriesReport) -> dict:
    """JSON-ready view of a TimeSeriesReport."""
    return {
        "aut": report.aut,
        "periods": [
            {
                "index": p.index,
                "rejection_rate": p.rejection_rate,
                "drift_rates": p.drift_rates,
                "class_counts": p.class_counts,
                "confusion": {
                    part: getattr(p, part).as_dict() for part in PARTITIONS
                },
                "metrics": {
                    part: {
                        m: dict(zip(("value", "degenerate"), p.metric(m, part)))
                        for m in METRICS
                    }
                    for part in PARTITIONS
                },
            }
            for p in report.periods
        ],
    }


def report_rows(report: TimeSeriesReport):
    """Flat (period, partition, metric, value, degenerate) rows for CSV."""
    rows = []
    for p in report.periods:
        for partition in PARTITIONS:
            for metric in METRICS:
                value, degenerate = p.metric(metric, partition)
                rows.append((p.index, partition, metric, value, degenerate))
        rows.append((p.index, "all", "rejection-rate", p.rejection_rate, False))
    return rows
