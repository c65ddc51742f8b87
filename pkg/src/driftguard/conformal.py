"""P-value engine, credibility/confidence, and the conformal evaluators.

Evaluators follow the estimator convention: construct with hyperparameters,
``fit(train)`` calibrates (per-class nonconformity pools plus rejection
thresholds), ``decide(example)`` is pure afterwards. Calibrated state is
immutable, so any number of threads may decide concurrently after the single
construction phase.

P-values are label conditional throughout: an example is compared against
the pooled nonconformity scores of the calibration points whose ground truth
matches the class in question. Calibration points that are themselves pool
members are scored leave-one-out and compared against the pool without their
own entry; test points always use the full pool.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .calibration import SearchSpec, ThresholdSet, random_search
from .classifiers import ScoringModel, model_from_state
from .data import Dataset, Example
from .errors import (
    CalibrationError,
    ConfigurationError,
    DomainError,
    StateError,
)
from .ncm import Ncm, PreparedNcm, make_ncm, prepared_from_state
from .validation import check_feature_indices, check_fraction, check_int_at_least

STATE_VERSION = "driftguard-state/1"

_PARTITION_DOMAIN = 0  # sub-seed tag for fold partitioning


def pvalue(pool, alpha_star: float) -> float:
    """Fraction of pooled scores at least as large as ``alpha_star``.

    Ties count (>=, not >): a score equal to ``alpha_star`` is at least as
    nonconforming. Raises DomainError on an empty pool.
    """
    arr = np.asarray(pool, dtype=np.float64)
    if arr.size == 0:
        raise DomainError("p-value undefined for an empty score pool")
    return int(np.count_nonzero(arr >= alpha_star)) / int(arr.size)


@dataclass(frozen=True)
class PValueRecord:
    """Per-example prediction with label-conditional p-values.

    ``credibility`` is the p-value of the predicted class; ``confidence`` is
    one minus the largest p-value among the other classes.
    """

    example_id: str
    predicted: str
    ground_truth: str | None
    pvals: dict[str, float]
    credibility: float
    confidence: float
    raw_scores: dict[str, float] | None = None


@dataclass(frozen=True)
class Decision:
    """Outcome of the accept/reject rule for one test example.

    ``fold_accepts`` is the per-fold accept count (CCE only, else None).
    For evaluators thresholding on raw probabilities, ``credibility`` and
    ``confidence`` hold the rank-normalized quality values that drove the
    decision.
    """

    example_id: str
    predicted: str
    credibility: float
    confidence: float
    kept: bool
    fold_accepts: int | None = None


class _ClassPool:
    """Frozen per-class score pool with exact >= counting."""

    def __init__(self, ids, values):
        self.ids = tuple(ids)
        self.values = np.asarray(values, dtype=np.float64)
        self.sorted = np.sort(self.values)
        self._index = {ex_id: i for i, ex_id in enumerate(self.ids)}

    def __len__(self):
        return len(self.values)

    def count_ge(self, alpha: float) -> int:
        return int(len(self.sorted) - np.searchsorted(self.sorted, alpha, side="left"))

    def pvalue_full(self, alpha: float) -> float:
        if len(self.sorted) == 0:
            raise DomainError("p-value undefined for an empty score pool")
        return self.count_ge(alpha) / len(self.sorted)

    def pvalue_excluding(self, member_id: str) -> float:
        """P-value of a pool member against the pool without its own entry."""
        own = self.values[self._index[member_id]]
        rest = len(self.sorted) - 1
        if rest == 0:
            raise DomainError("p-value undefined: pool holds only the member itself")
        return (self.count_ge(own) - 1) / rest

    def is_member(self, ex_id: str) -> bool:
        return ex_id in self._index


class _RawRefs:
    """Sorted per-class raw-score references for rank normalization."""

    def __init__(self, refs: dict[str, np.ndarray]):
        self.refs = {lab: np.sort(np.asarray(vals, dtype=np.float64)) for lab, vals in refs.items()}

    def ecdf(self, label: str, score: float) -> float:
        ref = self.refs[label]
        if ref.size == 0:
            raise DomainError(f"no raw-score references for class {label!r}")
        return float(np.searchsorted(ref, score, side="right")) / ref.size

    @classmethod
    def from_records(cls, records) -> "_RawRefs":
        labels = sorted({lab for r in records for lab in r.pvals})
        refs = {}
        for lab in labels:
            vals = [r.raw_scores[lab] for r in records if r.ground_truth == lab]
            if not vals:
                raise CalibrationError(f"no calibration members of class {lab!r}")
            refs[lab] = np.asarray(vals)
        return cls(refs)


@dataclass(frozen=True)
class _Fold:
    """One scoring context: fitted model, NCM context, pools, thresholds."""

    model: ScoringModel
    prepared: PreparedNcm
    pools: dict[str, _ClassPool]
    raw_refs: _RawRefs | None
    thresholds: ThresholdSet | None


def _record_for(example: Example, truth, model, prepared, pools, label_space) -> PValueRecord:
    predicted = model.predict(example)
    pvals = {}
    for label in label_space:
        pool = pools[label]
        if truth == label and pool.is_member(example.id):
            pvals[label] = pool.pvalue_excluding(example.id)
        else:
            pvals[label] = pool.pvalue_full(prepared.score(label, example))
    others = [pvals[lab] for lab in label_space if lab != predicted]
    return PValueRecord(
        example_id=example.id,
        predicted=predicted,
        ground_truth=truth,
        pvals=pvals,
        credibility=pvals[predicted],
        confidence=1.0 - max(others) if others else 1.0,
        raw_scores={lab: float(s) for lab, s in model.scores(example).items()},
    )


def _build_pools(prepared: PreparedNcm, label_space) -> dict[str, _ClassPool]:
    return {
        label: _ClassPool(prepared.member_ids(label), prepared.pool_scores(label))
        for label in label_space
    }


def _check_class_counts(dataset: Dataset, minimum: int, where: str) -> None:
    counts = {label: 0 for label in dataset.label_space}
    for ex in dataset.examples:
        if ex.label is not None:
            counts[ex.label] += 1
    for label, count in counts.items():
        if count < minimum:
            raise CalibrationError(
                f"{where}: class {label!r} has {count} examples; need >= {minimum}"
            )


def _partition(n: int, k: int, seed: int) -> list[list[int]]:
    """Seeded partition of range(n) into k near-equal folds."""
    rng = np.random.default_rng([int(seed), _PARTITION_DOMAIN])
    perm = rng.permutation(n)
    base, extra = divmod(n, k)
    folds = []
    start = 0
    for j in range(k):
        size = base + (1 if j < extra else 0)
        folds.append(sorted(int(i) for i in perm[start : start + size]))
        start += size
    return folds


class ConformalEvaluator:
    """Shared calibration/test machinery for the evaluator kinds."""

    kind: str = ""
    _params: tuple[str, ...] = ()

    def __init__(self, classifier: ScoringModel, ncm, search: SearchSpec | None = None, seed: int = 0):
        self.classifier = classifier
        self.ncm = make_ncm(ncm) if isinstance(ncm, str) else ncm
        if not isinstance(self.ncm, Ncm):
            raise ConfigurationError(f"ncm must be a name or Ncm instance, got {ncm!r}")
        self.search = search
        self.seed = int(seed)
        self.ncm_name_ = self.ncm.name
        self.label_space_ = None
        self.dimensionality_ = None
        self.calibration_records_ = None
        self.quality_metric_ = search.quality_metric if search is not None else "credibility"
        self.positive_label_ = search.positive_label if search is not None else None

    def get_params(self) -> dict:
        return {name: getattr(self, name) for name in self._params}

    # -- calibration helpers -------------------------------------------------

    def _search_spec(self, fold_index: int | None = None) -> SearchSpec | None:
        if self.search is None:
            return None
        spec = self.search
        if spec.seed is None:
            derived = self.seed if fold_index is None else self.seed * (2**32) + fold_index
            spec = replace(spec, seed=derived)
        return spec

    def _run_search(self, records, fold_index: int | None = None):
        spec = self._search_spec(fold_index)
        if spec is None:
            labels = sorted({lab for r in records for lab in r.pvals})
            thresholds = ThresholdSet(cred={lab: 0.0 for lab in labels})
            return None, thresholds
        if spec.quality_metric == "raw-probability":
            from .calibration import rank_normalize

            result = random_search(rank_normalize(records), spec)
        else:
            result = random_search(records, spec)
        return result, result.thresholds

    # -- shared decision machinery -------------------------------------------

    def _check_ready(self):
        if self.label_space_ is None:
            raise StateError(f"{type(self).__name__} is not calibrated; call fit() first")

    def _quality(self, fold: _Fold, example: Example):
        """(predicted, quality credibility, quality confidence) for one fold."""
        predicted = fold.model.predict(example)
        if self.quality_metric_ == "raw-probability":
            raw = fold.model.scores(example)
            vals = {lab: fold.raw_refs.ecdf(lab, raw[lab]) for lab in self.label_space_}
        else:
            vals = {
                lab: fold.pools[lab].pvalue_full(fold.prepared.score(lab, example))
                for lab in self.label_space_
            }
        others = [vals[lab] for lab in self.label_space_ if lab != predicted]
        cred = vals[predicted]
        conf = 1.0 - max(others) if others else 1.0
        return predicted, cred, conf

    @staticmethod
    def _accept(thresholds: ThresholdSet, predicted: str, cred: float, conf: float) -> bool:
        if cred < thresholds.cred[predicted]:
            return False
        if thresholds.conf is not None and conf < thresholds.conf[predicted]:
            return False
        return True

    # -- persistence ----------------------------------------------------------

    def _fold_state(self, fold: _Fold) -> dict:
        return {
            "model": fold.model.to_state(),
            "ncm_context": fold.prepared.to_state(),
            "pools": {
                lab: [float(v) for v in pool.sorted] for lab, pool in fold.pools.items()
            },
            "raw_refs": (
                {lab: [float(v) for v in ref] for lab, ref in fold.raw_refs.refs.items()}
                if fold.raw_refs is not None
                else None
            ),
            "thresholds": fold.thresholds.to_dict() if fold.thresholds is not None else None,
        }

    @staticmethod
    def _fold_from_state(raw: dict) -> _Fold:
        model = model_from_state(raw["model"])
        prepared = prepared_from_state(raw["ncm_context"], model)
        pools = {
            lab: _ClassPool((), np.asarray(vals)) for lab, vals in raw["pools"].items()
        }
        raw_refs = (
            _RawRefs({lab: np.asarray(vals) for lab, vals in raw["raw_refs"].items()})
            if raw.get("raw_refs")
            else None
        )
        thresholds = (
            ThresholdSet.from_dict(raw["thresholds"]) if raw.get("thresholds") else None
        )
        return _Fold(model, prepared, pools, raw_refs, thresholds)

    def to_state(self) -> dict:
        raise NotImplementedError

    def save_state(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_state(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def _base_state(self) -> dict:
        self._check_ready()
        return {
            "version": STATE_VERSION,
            "kind": self.kind,
            "seed": self.seed,
            "ncm": self.ncm_name_,
            "label_space": list(self.label_space_),
            "dimensionality": self.dimensionality_,
            "quality_metric": self.quality_metric_,
            "positive_label": self.positive_label_,
        }

    def _restore_base(self, state: dict) -> None:
        self.label_space_ = tuple(state["label_space"])
        self.dimensionality_ = int(state["dimensionality"])
        self.quality_metric_ = state["quality_metric"]
        self.positive_label_ = state.get("positive_label")
        self.ncm_name_ = state["ncm"]
        self.seed = int(state["seed"])


class _SingleContextEvaluator(ConformalEvaluator):
    """Common decide/state logic for the evaluators with one scoring context."""

    def __init__(self, classifier, ncm, search=None, seed=0):
        super().__init__(classifier, ncm, search=search, seed=seed)
        self.fold_ = None
        self.thresholds_ = None
        self.search_result_ = None

    def decide(self, example: Example) -> Decision:
        self._check_ready()
        check_feature_indices(example.features, self.dimensionality_)
        predicted, cred, conf = self._quality(self.fold_, example)
        kept = self._accept(self.thresholds_, predicted, cred, conf)
        return Decision(example.id, predicted, cred, conf, kept)

    def record_for(self, example: Example) -> PValueRecord:
        """Label-conditional p-values of a (test) example against the pools."""
        self._check_ready()
        check_feature_indices(example.features, self.dimensionality_)
        return _record_for(
            example, example.label, self.fold_.model, self.fold_.prepared,
            self.fold_.pools, self.label_space_,
        )

    def to_state(self) -> dict:
        state = self._base_state()
        state["folds"] = [self._fold_state(self.fold_)]
        state["thresholds"] = self.thresholds_.to_dict() if self.thresholds_ else None
        state["quorum"] = None
        return state

    def _restore(self, state: dict) -> None:
        self._restore_base(state)
        self.fold_ = self._fold_from_state(state["folds"][0])
        if state.get("thresholds") is None:
            raise StateError("single-context state lacks global thresholds")
        self.thresholds_ = ThresholdSet.from_dict(state["thresholds"])
        self.search_result_ = None


class TransductiveEvaluator(_SingleContextEvaluator):
    """Leave-fold-out calibration over the whole training set.

    With ``k`` equal to the training size every fold holds a single point,
    which is the vanilla (leave-one-out) variant; smaller ``k`` is the
    approximate variant. Each held-out point is predicted by a model fitted
    on the remaining folds and compared against the pooled leave-one-out
    scores of the remainder points whose ground truth matches the predicted
    class. The final model is refitted on the full training set for test
    time, with pools rebuilt over the full training bag.
    """

    def __init__(self, classifier, ncm, k: int | None = None, search=None, seed=0):
        super().__init__(classifier, ncm, search=search, seed=seed)
        self.k = k

    _params = ("classifier", "ncm", "k", "search", "seed")

    def fit(self, train: Dataset) -> "TransductiveEvaluator":
        n = len(train)
        k = n if self.k is None else self.k
        check_int_at_least("k", k, 2)
        if k > n:
            raise ConfigurationError(f"k={k} exceeds training size {n}")
        self.kind = "tce" if k == n else "approx-tce"
        records = []
        for j, fold_idx in enumerate(_partition(n, k, self.seed)):
            in_fold = set(fold_idx)
            remainder = train.subset([i for i in range(n) if i not in in_fold])
            _check_class_counts(remainder, 2, f"fold {j}: training remainder")
            model = self.classifier.clone().fit(remainder)
            prepared = self.ncm.prepare(model, remainder)
            pools = _build_pools(prepared, train.label_space)
            for i in fold_idx:
                z = train.examples[i]
                records.append(
                    _record_for(z, z.label, model, prepared, pools, train.label_space)
                )
        final_model = self.classifier.clone().fit(train)
        final_prepared = self.ncm.prepare(final_model, train)
        final_pools = _build_pools(final_prepared, train.label_space)
        self.calibration_records_ = tuple(records)
        self.search_result_, self.thresholds_ = self._run_search(records)
        raw_refs = _RawRefs.from_records(records)
        self.fold_ = _Fold(final_model, final_prepared, final_pools, raw_refs, None)
        self.label_space_ = train.label_space
        self.dimensionality_ = train.dimensionality
        return self


class InductiveEvaluator(_SingleContextEvaluator):
    """Single proper-training/calibration split; one model fit.

    The split preserves temporal order by default (the oldest examples form
    the proper training set); set ``shuffle=True`` for a seeded random split.
    Calibration points are scored against the fitted model and pooled per
    ground-truth class, each entry leave-one-out per the pool's bag.
    """

    kind = "ice"

    def __init__(self, classifier, ncm, calibration_fraction: float = 0.33,
                 search=None, seed=0, shuffle: bool = False):
        super().__init__(classifier, ncm, search=search, seed=seed)
        self.calibration_fraction = calibration_fraction
        self.shuffle = shuffle

    _params = ("classifier", "ncm", "calibration_fraction", "search", "seed", "shuffle")

    def fit(self, train: Dataset) -> "InductiveEvaluator":
        check_fraction("calibration_fraction", self.calibration_fraction)
        n = len(train)
        if n < 2:
            raise ConfigurationError("need at least 2 training examples to split")
        if self.shuffle:
            rng = np.random.default_rng([self.seed, _PARTITION_DOMAIN])
            order = [int(i) for i in rng.permutation(n)]
        else:
            order = sorted(range(n), key=lambda i: (train.examples[i].timestamp, i))
        n_cal = min(max(int(round(self.calibration_fraction * n)), 1), n - 1)
        proper = train.subset(sorted(order[: n - n_cal]))
        calibration = train.subset(sorted(order[n - n_cal :]))
        _check_class_counts(calibration, 2, "calibration set")
        model = self.classifier.clone().fit(proper)
        prepared = self.ncm.prepare(model, calibration)
        pools = _build_pools(prepared, train.label_space)
        records = [
            _record_for(z, z.label, model, prepared, pools, train.label_space)
            for z in calibration.examples
        ]
        self.calibration_records_ = tuple(records)
        self.search_result_, self.thresholds_ = self._run_search(records)
        self.fold_ = _Fold(model, prepared, pools, _RawRefs.from_records(records), None)
        self.label_space_ = train.label_space
        self.dimensionality_ = train.dimensionality
        return self


class CrossConformalEvaluator(ConformalEvaluator):
    """k-fold cross-conformal evaluation with a quorum vote at test time.

    Each fold is the calibration set of an inductive calibration whose
    proper training set is the union of the other folds; per-fold thresholds
    are searched independently. A test example is accepted by fold ``j`` when
    its fold-``j`` quality value clears the fold-``j`` threshold for the
    fold-``j`` prediction; it is kept when at least ``quorum`` folds accept.
    The reported class is the majority fold prediction (ties resolve by
    label-space order) and the reported quality values are fold averages.
    """

    kind = "cce"

    def __init__(self, classifier, ncm, k: int = 10, quorum: int | None = None,
                 search=None, seed=0):
        super().__init__(classifier, ncm, search=search, seed=seed)
        self.k = k
        self.quorum = quorum
        self.folds_ = None
        self.search_results_ = None

    _params = ("classifier", "ncm", "k", "quorum", "search", "seed")

    def fit(self, train: Dataset) -> "CrossConformalEvaluator":
        check_int_at_least("k", self.k, 2)
        n = len(train)
        if self.k > n:
            raise ConfigurationError(f"k={self.k} exceeds training size {n}")
        quorum = self.quorum if self.quorum is not None else self.k // 2 + 1
        check_int_at_least("quorum", quorum, 1)
        if quorum > self.k:
            raise ConfigurationError(f"quorum={quorum} exceeds k={self.k}")
        folds = []
        results = []
        records_all = []
        for j, fold_idx in enumerate(_partition(n, self.k, self.seed)):
            in_fold = set(fold_idx)
            fold_ds = train.subset(fold_idx)
            others = train.subset([i for i in range(n) if i not in in_fold])
            _check_class_counts(fold_ds, 2, f"fold {j}: calibration fold")
            model = self.classifier.clone().fit(others)
            prepared = self.ncm.prepare(model, fold_ds)
            pools = _build_pools(prepared, train.label_space)
            records = [
                _record_for(z, z.label, model, prepared, pools, train.label_space)
                for z in fold_ds.examples
            ]
            result, thresholds = self._run_search(records, fold_index=j)
            folds.append(
                _Fold(model, prepared, pools, _RawRefs.from_records(records), thresholds)
            )
            results.append(result)
            records_all.extend(records)
        self.folds_ = tuple(folds)
        self.search_results_ = tuple(results)
        self.calibration_records_ = tuple(records_all)
        self.quorum_ = quorum
        self.label_space_ = train.label_space
        self.dimensionality_ = train.dimensionality
        return self

    def _check_ready(self):
        if self.label_space_ is None or self.folds_ is None:
            raise StateError("CrossConformalEvaluator is not calibrated; call fit() first")

    def decide(self, example: Example) -> Decision:
        self._check_ready()
        check_feature_indices(example.features, self.dimensionality_)
        accepts = 0
        votes = {}
        creds = []
        confs = []
        for fold in self.folds_:
            predicted, cred, conf = self._quality(fold, example)
            if self._accept(fold.thresholds, predicted, cred, conf):
                accepts += 1
            votes[predicted] = votes.get(predicted, 0) + 1
            creds.append(cred)
            confs.append(conf)
        top = max(votes.values())
        majority = next(lab for lab in self.label_space_ if votes.get(lab, 0) == top)
        return Decision(
            example_id=example.id,
            predicted=majority,
            credibility=float(np.mean(creds)),
            confidence=float(np.mean(confs)),
            kept=accepts >= self.quorum_,
            fold_accepts=accepts,
        )

    def with_quorum(self, quorum: int) -> "CrossConformalEvaluator":
        """Copy of this calibrated evaluator with a different quorum.

        The quorum can be retuned during a deployment without recalibrating;
        all calibrated state is shared with the original.
        """
        self._check_ready()
        check_int_at_least("quorum", quorum, 1)
        if quorum > len(self.folds_):
            raise ConfigurationError(f"quorum={quorum} exceeds k={len(self.folds_)}")
        clone = CrossConformalEvaluator.__new__(CrossConformalEvaluator)
        clone.__dict__.update(self.__dict__)
        clone.quorum = quorum
        clone.quorum_ = quorum
        return clone

    def to_state(self) -> dict:
        state = self._base_state()
        state["folds"] = [self._fold_state(fold) for fold in self.folds_]
        state["thresholds"] = None
        state["quorum"] = self.quorum_
        return state

    def _restore(self, state: dict) -> None:
        self._restore_base(state)
        self.folds_ = tuple(self._fold_from_state(raw) for raw in state["folds"])
        self.quorum_ = int(state["quorum"])
        self.quorum = self.quorum_
        self.k = len(self.folds_)
        self.search_results_ = None


def load_evaluator_state(path) -> ConformalEvaluator:
    """Rebuild a calibrated evaluator from its versioned JSON state."""
    try:
        with open(path) as fh:
            state = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise StateError(f"cannot read evaluator state {path}: {exc}") from exc
    return evaluator_from_state(state)


def evaluator_from_state(state: dict) -> ConformalEvaluator:
    version = state.get("version")
    if version != STATE_VERSION:
        raise StateError(
            f"state version mismatch: got {version!r}, expected {STATE_VERSION!r}"
        )
    kind = state.get("kind")
    try:
        if kind in ("tce", "approx-tce"):
            ev = TransductiveEvaluator.__new__(TransductiveEvaluator)
        elif kind == "ice":
            ev = InductiveEvaluator.__new__(InductiveEvaluator)
        elif kind == "cce":
            ev = CrossConformalEvaluator.__new__(CrossConformalEvaluator)
        else:
            raise StateError(f"unknown evaluator kind in state: {kind!r}")
        ev.kind = kind
        ev.classifier = None
        ev.ncm = None
        ev.search = None
        ev.calibration_records_ = None
        ev._restore(state)
    except (KeyError, TypeError, ValueError) as exc:
        raise StateError(f"corrupt evaluator state: {exc!r}") from exc
    return ev


# ---------------------------------------------------------------------------
# Alpha assessment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AssessmentRow:
    label: str
    group: str  # "correct" | "incorrect"
    values: tuple[float, ...]
    q1: float | None
    median: float | None
    q3: float | None


@dataclass(frozen=True)
class AlphaAssessment:
    label_conditional: bool
    rows: tuple[AssessmentRow, ...]


def _quartiles(values):
    if not values:
        return None, None, None
    q1, med, q3 = np.percentile(np.asarray(values, dtype=np.float64), [25, 50, 75])
    return float(q1), float(med), float(q3)


def alpha_assessment(records, label_conditional: bool = True) -> AlphaAssessment:
    """Per-class p-value distributions split by prediction correctness.

    In label-conditional mode each class row collects the credibility
    p-values of the records predicted as that class. In the
    non-label-conditional mode every record contributes its p-value with
    respect to every class, grouped by whether its prediction was correct.
    """
    records = list(records)
    if not records:
        raise DomainError("no records to assess")
    for r in records:
        if r.ground_truth is None:
            raise DomainError(f"record {r.example_id!r} lacks ground truth")
    labels = sorted({lab for r in records for lab in r.pvals})
    rows = []
    for label in labels:
        if label_conditional:
            correct = [r.pvals[label] for r in records
                       if r.predicted == label and r.ground_truth == label]
            incorrect = [r.pvals[label] for r in records
                         if r.predicted == label and r.ground_truth != label]
        else:
            correct = [r.pvals[label] for r in records if r.predicted == r.ground_truth]
            incorrect = [r.pvals[label] for r in records if r.predicted != r.ground_truth]
        for group, values in (("correct", correct), ("incorrect", incorrect)):
            q1, med, q3 = _quartiles(values)
            rows.append(AssessmentRow(label, group, tuple(values), q1, med, q3))
    return AlphaAssessment(label_conditional, tuple(rows))
