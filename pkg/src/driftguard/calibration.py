"""Threshold calibration: metric evaluation, random search, grid baseline.

The search treats per-class rejection thresholds as a point in [0,1]^D
(D = number of classes, doubled when confidence thresholds are enabled) and
maximizes an objective metric subject to a lower bound on a constraint
metric. A candidate replaces the incumbent when it strictly improves the
objective while satisfying the constraint, or ties the objective and
strictly improves the constraint. A third, safety clause prefers any
constraint-satisfying candidate while the incumbent violates the bound, so
the returned thresholds never violate a satisfiable constraint; it is inert
whenever the all-zeros starting point already satisfies the bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .errors import CalibrationError, ConfigurationError, DomainError
from .validation import check_int_at_least

_SEARCH_DOMAIN = 2  # sub-seed tag for threshold search draws

METRIC_NAMES = ("f1-kept", "precision-kept", "recall-kept", "kept-rate", "neg-rejection-rate")
QUALITY_METRICS = ("credibility", "cred+conf", "raw-probability")


@dataclass(frozen=True)
class ThresholdSet:
    """Per-class credibility thresholds, optionally paired with confidence ones."""

    cred: dict[str, float]
    conf: dict[str, float] | None = None

    def __post_init__(self):
        for mapping in (self.cred, self.conf or {}):
            for label, value in mapping.items():
                if not 0.0 <= value <= 1.0:
                    raise ConfigurationError(
                        f"threshold for {label!r} must lie in [0,1], got {value!r}"
                    )

    def to_dict(self) -> dict:
        out = {"cred": dict(self.cred)}
        if self.conf is not None:
            out["conf"] = dict(self.conf)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ThresholdSet":
        return cls(cred=dict(raw["cred"]), conf=dict(raw["conf"]) if raw.get("conf") else None)


@dataclass(frozen=True)
class SearchSpec:
    """Objective/constraint description for the threshold search.

    Mirrors the default deployment setting: maximize f1 of kept elements
    subject to a kept rate of at least 0.85, with a large iteration budget
    and early stopping after a run of non-improving draws.
    """

    objective: str = "f1-kept"
    constraint: str = "kept-rate"
    bound: float = 0.85
    max_iterations: int = 100_000
    no_update_stop: int = 3_000
    seed: int | None = None
    use_confidence: bool = False
    quality_metric: str = "credibility"
    positive_label: str | None = None

    def validate(self) -> "SearchSpec":
        if self.objective not in METRIC_NAMES:
            raise ConfigurationError(f"unknown objective metric {self.objective!r}")
        if self.constraint not in METRIC_NAMES:
            raise ConfigurationError(f"unknown constraint metric {self.constraint!r}")
        if self.quality_metric not in QUALITY_METRICS:
            raise ConfigurationError(f"unknown quality metric {self.quality_metric!r}")
        check_int_at_least("max_iterations", self.max_iterations, 1)
        check_int_at_least("no_update_stop", self.no_update_stop, 1)
        needs_positive = {self.objective, self.constraint} & {
            "f1-kept", "precision-kept", "recall-kept"
        }
        if needs_positive and self.positive_label is None:
            raise ConfigurationError(
                f"metrics {sorted(needs_positive)} need positive_label set"
            )
        if self.use_confidence and self.quality_metric == "credibility":
            # confidence thresholds imply the combined quality metric
            object.__setattr__(self, "quality_metric", "cred+conf")
        return self

    @classmethod
    def default(cls, positive_label: str) -> "SearchSpec":
        return cls(positive_label=positive_label)

    @classmethod
    def min_rejection(cls, positive_label: str, f1_floor: float = 0.8) -> "SearchSpec":
        """Alternative preset: minimize rejections with an f1-kept floor."""
        return cls(
            objective="neg-rejection-rate",
            constraint="f1-kept",
            bound=f1_floor,
            positive_label=positive_label,
        )


@dataclass(frozen=True)
class SearchResult:
    """Threshold search outcome plus the accounting the CLI reports."""

    thresholds: ThresholdSet
    objective_value: float
    constraint_value: float
    trials: int
    stop_reason: str
    constraint_satisfied: bool

    def to_dict(self) -> dict:
        return {
            "thresholds": self.thresholds.to_dict(),
            "objective_value": self.objective_value,
            "constraint_value": self.constraint_value,
            "trials": self.trials,
            "stop_reason": self.stop_reason,
            "constraint_satisfied": self.constraint_satisfied,
        }


class _SearchArrays:
    """Vectorized view of calibration records for fast metric evaluation."""

    def __init__(self, records, positive_label):
        records = list(records)
        if not records:
            raise DomainError("no calibration records to search over")
        labels = sorted({lab for r in records for lab in r.pvals})
        index = {lab: i for i, lab in enumerate(labels)}
        self.labels = labels
        self.n = len(records)
        self.cred = np.array([r.credibility for r in records])
        self.conf = np.array([r.confidence for r in records])
        for r in records:
            if r.ground_truth is None:
                raise DomainError(f"record {r.example_id!r} lacks ground truth")
        self.pred_idx = np.array([index[r.predicted] for r in records])
        self.is_positive_truth = (
            np.array([r.ground_truth == positive_label for r in records])
            if positive_label is not None
            else None
        )
        self.is_positive_pred = (
            np.array([r.predicted == positive_label for r in records])
            if positive_label is not None
            else None
        )

    def kept_mask(self, cred_vec: np.ndarray, conf_vec: np.ndarray | None) -> np.ndarray:
        kept = self.cred >= cred_vec[self.pred_idx]
        if conf_vec is not None:
            kept &= self.conf >= conf_vec[self.pred_idx]
        return kept

    def metric(self, name: str, kept: np.ndarray) -> float:
        if name == "kept-rate":
            return float(kept.sum()) / self.n
        if name == "neg-rejection-rate":
            return float(kept.sum()) / self.n - 1.0
        if self.is_positive_truth is None:
            raise ConfigurationError(f"metric {name!r} needs positive_label")
        tp = float(np.count_nonzero(kept & self.is_positive_pred & self.is_positive_truth))
        fp = float(np.count_nonzero(kept & self.is_positive_pred & ~self.is_positive_truth))
        fn = float(np.count_nonzero(kept & ~self.is_positive_pred & self.is_positive_truth))
        if name == "precision-kept":
            return tp / (tp + fp) if tp + fp > 0 else 0.0
        if name == "recall-kept":
            return tp / (tp + fn) if tp + fn > 0 else 0.0
        if name == "f1-kept":
            denom = 2 * tp + fp + fn
            return 2 * tp / denom if denom > 0 else 0.0
        raise ConfigurationError(f"unknown metric {name!r}")


def _threshold_set(arrays: _SearchArrays, point: np.ndarray, use_confidence: bool) -> ThresholdSet:
    k = len(arrays.labels)
    cred = {lab: float(point[i]) for i, lab in enumerate(arrays.labels)}
    conf = (
        {lab: float(point[k + i]) for i, lab in enumerate(arrays.labels)}
        if use_confidence
        else None
    )
    return ThresholdSet(cred=cred, conf=conf)


def _vectors(arrays: _SearchArrays, point: np.ndarray, use_confidence: bool):
    k = len(arrays.labels)
    cred_vec = point[:k]
    conf_vec = point[k:] if use_confidence else None
    return cred_vec, conf_vec


def evaluate_thresholds(records, thresholds: ThresholdSet, metric: str, positive_label=None) -> float:
    """Apply the keep rule and compute the named metric on the partition.

    The keep rule is ``credibility >= cred[predicted]`` and, when confidence
    thresholds are present, additionally ``confidence >= conf[predicted]``.
    Metrics over an empty kept partition come back as 0 rather than erroring,
    so searches can treat empty-keep regions as worthless.
    """
    if metric not in METRIC_NAMES:
        raise ConfigurationError(f"unknown metric {metric!r}")
    arrays = _SearchArrays(records, positive_label)
    cred_vec = np.array([thresholds.cred[lab] for lab in arrays.labels])
    conf_vec = (
        np.array([thresholds.conf[lab] for lab in arrays.labels])
        if thresholds.conf is not None
        else None
    )
    kept = arrays.kept_mask(cred_vec, conf_vec)
    return arrays.metric(metric, kept)


def _run_search(arrays: _SearchArrays, spec: SearchSpec, candidates, finished_reason: str):
    """Shared acceptance loop over an iterable of candidate points."""
    use_conf = spec.use_confidence
    dims = len(arrays.labels) * (2 if use_conf else 1)
    best = np.zeros(dims)
    cred_vec, conf_vec = _vectors(arrays, best, use_conf)
    kept = arrays.kept_mask(cred_vec, conf_vec)
    best_f = arrays.metric(spec.objective, kept)
    best_g = arrays.metric(spec.constraint, kept)
    best_sat = best_g >= spec.bound
    trials = 0
    since_update = 0
    stop_reason = finished_reason
    for point in candidates:
        trials += 1
        cred_vec, conf_vec = _vectors(arrays, point, use_conf)
        kept = arrays.kept_mask(cred_vec, conf_vec)
        f = arrays.metric(spec.objective, kept)
        g = arrays.metric(spec.constraint, kept)
        sat = g >= spec.bound
        accept = (
            (sat and not best_sat)
            or (f > best_f and sat)
            or (f == best_f and g > best_g)
        )
        if accept:
            best = point.copy()
            best_f, best_g, best_sat = f, g, sat
            since_update = 0
        else:
            since_update += 1
            if since_update >= spec.no_update_stop:
                stop_reason = "no-update"
                break
    return SearchResult(
        thresholds=_threshold_set(arrays, best, use_conf),
        objective_value=best_f,
        constraint_value=best_g,
        trials=trials,
        stop_reason=stop_reason,
        constraint_satisfied=best_sat,
    )


def random_search(records, spec: SearchSpec) -> SearchResult:
    """Random threshold search with constraint-aware acceptance.

    Starts from all-zeros (keep everything) and draws uniform points from
    the unit hypercube with the seeded generator, stopping at the iteration
    budget or after ``no_update_stop`` consecutive non-updates. When no drawn
    point satisfies the constraint the all-zeros start is returned with
    ``constraint_satisfied`` reflecting its own status.
    """
    spec = spec.validate()
    arrays = _SearchArrays(records, spec.positive_label)
    dims = len(arrays.labels) * (2 if spec.use_confidence else 1)
    seed = spec.seed if spec.seed is not None else 0
    rng = np.random.default_rng([int(seed), _SEARCH_DOMAIN])

    def draws():
        for _ in range(spec.max_iterations):
            yield rng.random(dims)

    return _run_search(arrays, spec, draws(), "max-iterations")


def grid_values(granularity: float) -> tuple[float, ...]:
    """Grid levels {0, step, 2*step, ...} plus the endpoint 1."""
    if not 0.0 < granularity <= 1.0:
        raise ConfigurationError(f"granularity must lie in (0, 1], got {granularity!r}")
    values = []
    i = 0
    while i * granularity < 1.0 - 1e-12:
        values.append(i * granularity)
        i += 1
    values.append(1.0)
    return tuple(values)


def grid_search(records, spec: SearchSpec, granularity: float, max_trials: int = 2_000_000) -> SearchResult:
    """Exhaustive lexicographic sweep of the threshold grid.

    Enumerates the full Cartesian product of grid levels (so the reported
    trial count is exactly ``|V|**D``), applying the same acceptance rule as
    the random search; lexicographic order makes ties resolve toward smaller
    thresholds. Refuses to start when the projected trial count exceeds
    ``max_trials``.
    """
    spec = spec.validate()
    arrays = _SearchArrays(records, spec.positive_label)
    dims = len(arrays.labels) * (2 if spec.use_confidence else 1)
    values = grid_values(granularity)
    projected = len(values) ** dims
    if projected > max_trials:
        raise ConfigurationError(
            f"grid search would need {projected} trials (cap {max_trials}); "
            "increase the step or use random_search"
        )
    # disable the early stop: the baseline is defined as the full sweep
    sweep = replace(spec, no_update_stop=projected + 1)
    candidates = (np.array(point) for point in itertools.product(values, repeat=dims))
    return _run_search(arrays, sweep, candidates, "exhausted")


def rank_normalize(records) -> list:
    """Map raw per-class scores onto [0,1] via the calibration rank ECDF.

    For each class the reference population is the raw score of that class
    over the calibration records whose ground truth is that class; a score
    maps to the fraction of reference scores less than or equal to it. The
    mapping is monotone, so induced keep sets keep their order structure.
    Returns records whose p-value slots hold the normalized scores.
    """
    from .conformal import PValueRecord  # local import to avoid a cycle

    records = list(records)
    if not records:
        raise DomainError("no records to normalize")
    labels = sorted({lab for r in records for lab in r.pvals})
    refs = {}
    for lab in labels:
        member_scores = sorted(
            r.raw_scores[lab] for r in records if r.ground_truth == lab
        )
        if not member_scores:
            raise CalibrationError(f"no calibration members of class {lab!r} to rank against")
        refs[lab] = np.asarray(member_scores)
    out = []
    for r in records:
        if r.raw_scores is None:
            raise DomainError(f"record {r.example_id!r} carries no raw scores")
        norm = {
            lab: float(np.searchsorted(refs[lab], r.raw_scores[lab], side="right"))
            / len(refs[lab])
            for lab in labels
        }
        others = [norm[lab] for lab in labels if lab != r.predicted]
        out.append(
            PValueRecord(
                example_id=r.example_id,
                predicted=r.predicted,
                ground_truth=r.ground_truth,
                pvals=norm,
                credibility=norm[r.predicted],
                confidence=1.0 - max(others) if others else 1.0,
                raw_scores=dict(r.raw_scores),
            )
        )
    return out


def threshold_on_probabilities(records, spec: SearchSpec) -> SearchResult:
    """Run the identical search machinery on rank-normalized raw scores."""
    return random_search(rank_normalize(records), spec)
