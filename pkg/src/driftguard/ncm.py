"""Nonconformity measures: higher output means less similar to the class.

An :class:`Ncm` is an unfitted descriptor; ``prepare(model, bag)`` snapshots
whatever context the measure needs (a fitted model, a bag of labeled
examples, or both) and returns a :class:`PreparedNcm`. Prepared measures are
immutable and their scoring is pure, so test-time scoring never mutates
calibration state.

``pool_scores(label)`` returns the leave-one-out score of every bag member
of that class (each member scored against the bag without itself), which is
exactly the score collection the p-value engine pools per class.
"""

from __future__ import annotations

import numpy as np

from .classifiers import LinearSvm, ScoringModel
from .data import Dataset, Example, dense_vector
from .errors import ConfigurationError, DomainError, UnknownIdError
from .validation import check_int_at_least


class Ncm:
    name: str = ""

    def prepare(self, model: ScoringModel | None, bag: Dataset) -> "PreparedNcm":
        raise NotImplementedError


class PreparedNcm:
    label_space: tuple[str, ...] = ()

    def score(self, label: str, example: Example) -> float:
        """NCM of ``example`` against the full bag / model for ``label``."""
        raise NotImplementedError

    def member_ids(self, label: str) -> tuple[str, ...]:
        raise NotImplementedError

    def pool_scores(self, label: str) -> np.ndarray:
        raise NotImplementedError

    def to_state(self) -> dict:
        raise NotImplementedError


def _sorted_members(bag: Dataset) -> dict[str, tuple[Example, ...]]:
    """Per-class members sorted by example id for reproducible float sums."""
    return {
        label: tuple(sorted(members, key=lambda e: e.id))
        for label, members in bag.by_label().items()
    }


def _euclidean(x: np.ndarray, y: np.ndarray) -> float:
    diff = x - y
    return float(np.sqrt(np.dot(diff, diff)))


class CentroidDistanceNcm(Ncm):
    """Distance from the class centroid (bag mean)."""

    name = "centroid"

    def prepare(self, model, bag: Dataset) -> "PreparedCentroid":
        return PreparedCentroid(bag)


class PreparedCentroid(PreparedNcm):
    def __init__(self, bag: Dataset):
        self.label_space = bag.label_space
        self.dimensionality = bag.dimensionality
        self._ids = {}
        self._rows = {}
        self._means = {}
        for label, members in _sorted_members(bag).items():
            self._ids[label] = tuple(ex.id for ex in members)
            rows = (
                np.stack([dense_vector(ex, bag.dimensionality) for ex in members])
                if members
                else np.zeros((0, bag.dimensionality))
            )
            self._rows[label] = rows
            self._means[label] = np.mean(rows, axis=0) if len(rows) else None

    def score(self, label, example):
        self._require(label)
        if self._means[label] is None:
            raise DomainError(f"empty bag for class {label!r}")
        x = dense_vector(example, self.dimensionality)
        return _euclidean(x, self._means[label])

    def member_ids(self, label):
        self._require(label)
        return self._ids[label]

    def pool_scores(self, label):
        rows = self._require(label)
        if len(rows) < 2:
            raise DomainError(
                f"class {label!r} needs >= 2 bag members for leave-one-out scores"
            )
        out = np.empty(len(rows))
        for i in range(len(rows)):
            rest = np.delete(rows, i, axis=0)
            out[i] = _euclidean(rows[i], np.mean(rest, axis=0))
        return out

    def _require(self, label):
        if label not in self._rows:
            raise DomainError(f"unknown class {label!r}")
        return self._rows[label]

    def to_state(self):
        return {
            "kind": "centroid",
            "dimensionality": self.dimensionality,
            "label_space": list(self.label_space),
            "means": {
                lab: (list(map(float, mean)) if mean is not None else [])
                for lab, mean in self._means.items()
            },
        }


class _CentroidFromMeans(PreparedNcm):
    """Test-time centroid context rebuilt from stored class means."""

    def __init__(self, state: dict):
        self.label_space = tuple(state["label_space"])
        self.dimensionality = int(state["dimensionality"])
        self._means = {
            lab: np.asarray(vec, dtype=np.float64) for lab, vec in state["means"].items()
        }

    def score(self, label, example):
        if label not in self._means or self._means[label].size == 0:
            raise DomainError(f"empty bag for class {label!r}")
        x = dense_vector(example, self.dimensionality)
        return _euclidean(x, self._means[label])

    def to_state(self):
        return {
            "kind": "centroid",
            "dimensionality": self.dimensionality,
            "label_space": list(self.label_space),
            "means": {lab: list(map(float, vec)) for lab, vec in self._means.items()},
        }


class NegatedScoreNcm(Ncm):
    """Negated per-class decision score of the underlying model.

    Works for any ScoringModel; with a binary linear model this is the signed
    hyperplane distance, so it stays label conditional.
    """

    name = "signed-score"

    def prepare(self, model, bag: Dataset) -> "PreparedNegatedScore":
        if model is None:
            raise ConfigurationError("signed-score NCM requires a fitted model")
        return PreparedNegatedScore(model, bag)


class PreparedNegatedScore(PreparedNcm):
    def __init__(self, model: ScoringModel, bag: Dataset):
        self.model = model
        self.label_space = bag.label_space
        self._members = _sorted_members(bag)

    def score(self, label, example):
        scored = self.model.scores(example)
        if label not in scored:
            raise DomainError(f"model defines no score for class {label!r}")
        return -float(scored[label])

    def member_ids(self, label):
        return tuple(ex.id for ex in self._members.get(label, ()))

    def pool_scores(self, label):
        return np.array(
            [self.score(label, ex) for ex in self._members.get(label, ())],
            dtype=np.float64,
        )

    def to_state(self):
        return {"kind": "signed-score", "label_space": list(self.label_space)}

    @classmethod
    def from_state(cls, state: dict, model: ScoringModel) -> "PreparedNegatedScore":
        prepared = cls.__new__(cls)
        prepared.model = model
        prepared.label_space = tuple(state["label_space"])
        prepared._members = {}
        return prepared


class AbsMarginNcm(Ncm):
    """Negated absolute distance from a binary linear hyperplane.

    Class-free by construction: both class arguments give the same value.
    """

    name = "abs-margin"

    def prepare(self, model, bag: Dataset) -> "PreparedAbsMargin":
        if not isinstance(model, LinearSvm):
            raise ConfigurationError("abs-margin NCM requires a binary linear model")
        return PreparedAbsMargin(model, bag)


class PreparedAbsMargin(PreparedNcm):
    def __init__(self, model: LinearSvm, bag: Dataset):
        self.model = model
        self._norm = self._weight_norm(model)
        self.label_space = bag.label_space
        self._members = _sorted_members(bag)

    @staticmethod
    def _weight_norm(model: LinearSvm) -> float:
        norm = float(np.sqrt(np.dot(model.weights_, model.weights_)))
        if norm == 0.0:
            raise DomainError("zero weight vector: hyperplane distance undefined")
        return norm

    def score(self, label, example):
        if label not in self.label_space:
            raise DomainError(f"unknown class {label!r}")
        return -abs(self.model.decision_value(example)) / self._norm

    def member_ids(self, label):
        return tuple(ex.id for ex in self._members.get(label, ()))

    def pool_scores(self, label):
        return np.array(
            [self.score(label, ex) for ex in self._members.get(label, ())],
            dtype=np.float64,
        )

    def to_state(self):
        return {"kind": "abs-margin", "label_space": list(self.label_space)}

    @classmethod
    def from_state(cls, state: dict, model: LinearSvm) -> "PreparedAbsMargin":
        prepared = cls.__new__(cls)
        prepared.model = model
        prepared._norm = cls._weight_norm(model)
        prepared.label_space = tuple(state["label_space"])
        prepared._members = {}
        return prepared


class KnnDisagreementNcm(Ncm):
    """Fraction of the k nearest bag neighbors whose label differs."""

    name = "knn-disagreement"

    def __init__(self, k: int):
        self.k = check_int_at_least("k", k, 1)

    def prepare(self, model, bag: Dataset) -> "PreparedKnnDisagreement":
        return PreparedKnnDisagreement(bag, self.k)


class PreparedKnnDisagreement(PreparedNcm):
    def __init__(self, bag: Dataset, k: int):
        labeled = [ex for ex in bag.examples if ex.label is not None]
        if k > len(labeled):
            raise ConfigurationError(
                f"k={k} exceeds the {len(labeled)} labeled examples in the context"
            )
        self.k = k
        self.label_space = bag.label_space
        self.dimensionality = bag.dimensionality
        self._matrix = (
            np.stack([dense_vector(ex, bag.dimensionality) for ex in labeled])
            if labeled
            else np.zeros((0, bag.dimensionality))
        )
        self._labels = tuple(ex.label for ex in labeled)
        self._ids = tuple(ex.id for ex in labeled)

    def _disagreement(self, x: np.ndarray, label: str, skip: int | None) -> float:
        diff = self._matrix - x
        dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        order = np.argsort(dists, kind="stable")  # ties: distance then insertion order
        picked = 0
        disagree = 0
        for i in order:
            if skip is not None and i == skip:
                continue
            if self._labels[i] != label:
                disagree += 1
            picked += 1
            if picked == self.k:
                break
        if picked < self.k:
            raise ConfigurationError(f"k={self.k} exceeds available neighbors ({picked})")
        return disagree / self.k

    def score(self, label, example):
        if label not in self.label_space:
            raise DomainError(f"unknown class {label!r}")
        return self._disagreement(dense_vector(example, self.dimensionality), label, None)

    def member_ids(self, label):
        return tuple(i for i, lab in zip(self._ids, self._labels) if lab == label)

    def pool_scores(self, label):
        out = [
            self._disagreement(self._matrix[pos], label, skip=pos)
            for pos, lab in enumerate(self._labels)
            if lab == label
        ]
        return np.array(out, dtype=np.float64)

    def to_state(self):
        return {
            "kind": "knn-disagreement",
            "k": self.k,
            "label_space": list(self.label_space),
            "dimensionality": self.dimensionality,
            "rows": [list(map(float, row)) for row in self._matrix],
            "labels": list(self._labels),
            "ids": list(self._ids),
        }

    @classmethod
    def from_state(cls, state: dict) -> "PreparedKnnDisagreement":
        prepared = cls.__new__(cls)
        prepared.k = int(state["k"])
        prepared.label_space = tuple(state["label_space"])
        prepared.dimensionality = int(state["dimensionality"])
        prepared._matrix = np.asarray(state["rows"], dtype=np.float64).reshape(
            len(state["rows"]), prepared.dimensionality
        )
        prepared._labels = tuple(state["labels"])
        prepared._ids = tuple(state["ids"])
        return prepared


class EnsembleDisagreementNcm(Ncm):
    """Fraction of ensemble member votes that disagree with the class."""

    name = "ensemble-disagreement"

    def __init__(self, votes: dict[str, tuple[str, ...]]):
        self.votes = {k: tuple(v) for k, v in votes.items()}

    def prepare(self, model, bag: Dataset) -> "PreparedEnsembleDisagreement":
        return PreparedEnsembleDisagreement(self.votes, bag)


class PreparedEnsembleDisagreement(PreparedNcm):
    def __init__(self, votes: dict[str, tuple[str, ...]], bag: Dataset):
        self.votes = {k: tuple(v) for k, v in votes.items()}
        self.label_space = bag.label_space
        self._groups = {
            lab: tuple(ex.id for ex in members)
            for lab, members in _sorted_members(bag).items()
        }

    def vote_fraction(self, example_id: str, label: str) -> float:
        try:
            votes = self.votes[example_id]
        except KeyError:
            raise UnknownIdError(f"no ensemble votes for example id {example_id!r}") from None
        return ensemble_disagreement(votes, label)

    def score(self, label, example):
        if label not in self.label_space:
            raise DomainError(f"unknown class {label!r}")
        return self.vote_fraction(example.id, label)

    def member_ids(self, label):
        return self._groups.get(label, ())

    def pool_scores(self, label):
        return np.array(
            [self.vote_fraction(ex_id, label) for ex_id in self.member_ids(label)],
            dtype=np.float64,
        )

    def to_state(self):
        return {
            "kind": "ensemble-disagreement",
            "label_space": list(self.label_space),
            "votes": {k: list(v) for k, v in self.votes.items()},
            "member_ids": {lab: list(ids) for lab, ids in self._groups.items()},
        }

    @classmethod
    def from_state(cls, state: dict) -> "PreparedEnsembleDisagreement":
        prepared = cls.__new__(cls)
        prepared.votes = {k: tuple(v) for k, v in state["votes"].items()}
        prepared.label_space = tuple(state["label_space"])
        prepared._groups = {lab: tuple(ids) for lab, ids in state["member_ids"].items()}
        return prepared


def ensemble_disagreement(votes, label: str) -> float:
    """Fraction of votes not equal to ``label``; DomainError on empty votes."""
    votes = tuple(votes)
    if not votes:
        raise DomainError("empty vote list")
    return sum(1 for v in votes if v != label) / len(votes)


NCM_REGISTRY = {
    "centroid": CentroidDistanceNcm,
    "signed-score": NegatedScoreNcm,
    "abs-margin": AbsMarginNcm,
    "knn-disagreement": KnnDisagreementNcm,
    "ensemble-disagreement": EnsembleDisagreementNcm,
}


def make_ncm(name: str, **params) -> Ncm:
    try:
        factory = NCM_REGISTRY[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown ncm {name!r}; expected one of {sorted(NCM_REGISTRY)}"
        ) from None
    return factory(**params)


def prepared_from_state(state: dict, model: ScoringModel | None) -> PreparedNcm:
    kind = state.get("kind")
    if kind == "centroid":
        return _CentroidFromMeans(state)
    if kind == "signed-score":
        return PreparedNegatedScore.from_state(state, model)
    if kind == "abs-margin":
        return PreparedAbsMargin.from_state(state, model)
    if kind == "knn-disagreement":
        return PreparedKnnDisagreement.from_state(state)
    if kind == "ensemble-disagreement":
        return PreparedEnsembleDisagreement.from_state(state)
    raise ConfigurationError(f"unknown ncm kind in state: {kind!r}")
