"""Underlying classifiers exposing per-class decision scores.

All models follow the estimator convention: hyperparameters in the
constructor, ``fit(dataset)`` returning self, fitted attributes with a
trailing underscore, ``get_params``/``clone`` for reuse across folds.
Fitted models are immutable in practice and safe to share; ``scores`` and
``predict`` are pure.
"""

from __future__ import annotations

import csv

import numpy as np

from .data import Dataset, Example, dense_vector
from .errors import (
    ConfigurationError,
    IntegrityError,
    ParseError,
    TrainingError,
    UnknownIdError,
)
from .validation import check_fitted, check_int_at_least, check_positive

_SVM_DOMAIN = 1  # sub-seed tag for SVM epoch shuffling


class ScoringModel:
    """Base estimator: per-class decision scores plus an argmax prediction."""

    _params: tuple[str, ...] = ()

    label_space_: tuple[str, ...] | None = None

    def get_params(self) -> dict:
        return {name: getattr(self, name) for name in self._params}

    def clone(self) -> "ScoringModel":
        return type(self)(**self.get_params())

    def fit(self, train: Dataset) -> "ScoringModel":
        raise NotImplementedError

    def scores(self, example: Example) -> dict[str, float]:
        raise NotImplementedError

    def predict(self, example: Example) -> str:
        """Highest-scoring class; ties broken by label-space order."""
        check_fitted(self, "label_space_")
        scored = self.scores(example)
        best, best_score = None, None
        for label in self.label_space_:
            s = scored[label]
            if best_score is None or s > best_score:
                best, best_score = label, s
        return best

    def to_state(self) -> dict:
        raise NotImplementedError


class NearestCentroid(ScoringModel):
    """Per-class mean-vector classifier; score is the negated distance.

    Class sums run over members sorted by example id so that fitting is
    bitwise invariant under permutations of the training order.
    """

    def __init__(self):
        self.label_space_ = None
        self.centroids_ = None
        self.dimensionality_ = None

    def fit(self, train: Dataset) -> "NearestCentroid":
        centroids = {}
        for label, members in train.by_label().items():
            if not members:
                raise TrainingError(f"class {label!r} has no training examples")
            rows = np.stack(
                [dense_vector(ex, train.dimensionality) for ex in sorted(members, key=lambda e: e.id)]
            )
            centroids[label] = np.mean(rows, axis=0)
        self.label_space_ = train.label_space
        self.centroids_ = centroids
        self.dimensionality_ = train.dimensionality
        return self

    def scores(self, example: Example) -> dict[str, float]:
        check_fitted(self, "centroids_")
        x = dense_vector(example, self.dimensionality_)
        out = {}
        for label in self.label_space_:
            diff = x - self.centroids_[label]
            out[label] = -float(np.sqrt(np.dot(diff, diff)))
        return out

    def to_state(self) -> dict:
        return {
            "type": "nearest-centroid",
            "label_space": list(self.label_space_),
            "dimensionality": self.dimensionality_,
            "centroids": {lab: list(map(float, c)) for lab, c in self.centroids_.items()},
        }

    @classmethod
    def from_state(cls, state: dict) -> "NearestCentroid":
        model = cls()
        model.label_space_ = tuple(state["label_space"])
        model.dimensionality_ = int(state["dimensionality"])
        model.centroids_ = {
            lab: np.asarray(vec, dtype=np.float64) for lab, vec in state["centroids"].items()
        }
        return model


class KNearestNeighbors(ScoringModel):
    """k-NN with label-fraction scores.

    Neighbor ties are broken by (distance, insertion order) via a stable sort,
    so results are reproducible for any input permutation of equal points.
    """

    _params = ("k",)

    def __init__(self, k: int):
        self.k = k
        self.label_space_ = None
        self.matrix_ = None
        self.labels_ = None
        self.dimensionality_ = None

    def fit(self, train: Dataset) -> "KNearestNeighbors":
        check_int_at_least("k", self.k, 1)
        if self.k > len(train):
            raise ConfigurationError(f"k={self.k} exceeds training size {len(train)}")
        rows = [dense_vector(ex, train.dimensionality) for ex in train.examples]
        self.matrix_ = np.stack(rows) if rows else np.zeros((0, train.dimensionality))
        self.labels_ = train.labels()
        self.label_space_ = train.label_space
        self.dimensionality_ = train.dimensionality
        return self

    def scores(self, example: Example) -> dict[str, float]:
        check_fitted(self, "matrix_")
        x = dense_vector(example, self.dimensionality_)
        diff = self.matrix_ - x
        dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        order = np.argsort(dists, kind="stable")[: self.k]
        counts = {label: 0 for label in self.label_space_}
        for i in order:
            counts[self.labels_[i]] += 1
        return {label: counts[label] / self.k for label in self.label_space_}

    def to_state(self) -> dict:
        return {
            "type": "knn",
            "k": self.k,
            "label_space": list(self.label_space_),
            "dimensionality": self.dimensionality_,
            "rows": [list(map(float, row)) for row in self.matrix_],
            "labels": list(self.labels_),
        }

    @classmethod
    def from_state(cls, state: dict) -> "KNearestNeighbors":
        model = cls(int(state["k"]))
        model.label_space_ = tuple(state["label_space"])
        model.dimensionality_ = int(state["dimensionality"])
        model.matrix_ = np.asarray(state["rows"], dtype=np.float64).reshape(
            len(state["rows"]), model.dimensionality_
        )
        model.labels_ = tuple(state["labels"])
        return model


class LinearSvm(ScoringModel):
    """Binary linear SVM trained by stochastic subgradient descent.

    Minimizes the L2-regularized hinge loss with the 1/(lam*t) step schedule;
    deterministic for a fixed seed. Scores are the signed margin for the
    positive label and its negation for the other.
    """

    _params = ("lam", "epochs", "seed", "positive_label")

    def __init__(self, lam: float = 1e-4, epochs: int = 10, seed: int = 0, positive_label=None):
        self.lam = lam
        self.epochs = epochs
        self.seed = seed
        self.positive_label = positive_label
        self.label_space_ = None
        self.weights_ = None
        self.bias_ = None
        self.positive_label_ = None
        self.dimensionality_ = None

    def fit(self, train: Dataset) -> "LinearSvm":
        check_positive("lam", self.lam)
        check_int_at_least("epochs", self.epochs, 1)
        if len(train.label_space) != 2:
            raise ConfigurationError(
                f"linear SVM supports exactly 2 classes, got {len(train.label_space)}"
            )
        present = {ex.label for ex in train.examples if ex.label is not None}
        if len(present) < 2:
            raise TrainingError("all training labels identical; cannot fit a separator")
        positive = self.positive_label if self.positive_label is not None else train.label_space[1]
        if positive not in train.label_space:
            raise ConfigurationError(f"positive label {positive!r} not in label space")
        X = np.stack([dense_vector(ex, train.dimensionality) for ex in train.examples])
        y = np.array([1.0 if ex.label == positive else -1.0 for ex in train.examples])
        rng = np.random.default_rng([int(self.seed), _SVM_DOMAIN])
        w = np.zeros(train.dimensionality)
        b = 0.0
        t = 0
        # bias is regularized like a weight on a constant feature, which keeps
        # the 1/(lam*t) schedule stable instead of letting b random-walk
        for _ in range(self.epochs):
            for i in rng.permutation(len(X)):
                t += 1
                eta = 1.0 / (self.lam * t)
                margin = y[i] * (float(X[i] @ w) + b)
                w *= 1.0 - eta * self.lam
                b *= 1.0 - eta * self.lam
                if margin < 1.0:
                    w += eta * y[i] * X[i]
                    b += eta * y[i]
        self.weights_ = w
        self.bias_ = float(b)
        self.positive_label_ = positive
        self.label_space_ = train.label_space
        self.dimensionality_ = train.dimensionality
        return self

    def decision_value(self, example: Example) -> float:
        check_fitted(self, "weights_")
        total = self.bias_
        for idx, val in example.features.items():
            total += self.weights_[idx] * val
        return float(total)

    def scores(self, example: Example) -> dict[str, float]:
        value = self.decision_value(example)
        return {
            label: value if label == self.positive_label_ else -value
            for label in self.label_space_
        }

    def to_state(self) -> dict:
        return {
            "type": "linear-svm",
            "label_space": list(self.label_space_),
            "dimensionality": self.dimensionality_,
            "weights": list(map(float, self.weights_)),
            "bias": self.bias_,
            "positive_label": self.positive_label_,
        }

    @classmethod
    def from_state(cls, state: dict) -> "LinearSvm":
        model = cls(positive_label=state["positive_label"])
        model.label_space_ = tuple(state["label_space"])
        model.dimensionality_ = int(state["dimensionality"])
        model.weights_ = np.asarray(state["weights"], dtype=np.float64)
        model.bias_ = float(state["bias"])
        model.positive_label_ = state["positive_label"]
        return model


class ExternalScoresModel(ScoringModel):
    """Adapter for externally computed per-class scores keyed by example id."""

    _params = ("table", "label_space")

    def __init__(self, table: dict[str, dict[str, float]], label_space):
        self.table = table
        self.label_space = tuple(label_space)
        self.label_space_ = tuple(label_space)

    def fit(self, train: Dataset) -> "ExternalScoresModel":
        return self

    def scores(self, example: Example) -> dict[str, float]:
        try:
            row = self.table[example.id]
        except KeyError:
            raise UnknownIdError(f"no external scores for example id {example.id!r}") from None
        return {label: float(row[label]) for label in self.label_space_}

    def to_state(self) -> dict:
        return {
            "type": "external-scores",
            "label_space": list(self.label_space_),
            "table": {k: {c: float(v) for c, v in row.items()} for k, row in self.table.items()},
        }

    @classmethod
    def from_state(cls, state: dict) -> "ExternalScoresModel":
        return cls(state["table"], tuple(state["label_space"]))


def load_external_scores(path) -> ExternalScoresModel:
    """Read the ``id,<class1>,<class2>,...`` CSV into an adapter model."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if len(header) < 2 or header[0] != "id":
            raise ParseError(f"{path}: line 1: header must be id,<class>,...")
        labels = tuple(header[1:])
        table: dict[str, dict[str, float]] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}: line {lineno}: wrong column count")
            if row[0] in table:
                raise IntegrityError(f"{path}: duplicate id {row[0]!r} on line {lineno}")
            try:
                table[row[0]] = {lab: float(cell) for lab, cell in zip(labels, row[1:])}
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: non-numeric score") from None
    return ExternalScoresModel(table, labels)


def model_from_state(state: dict) -> ScoringModel:
    kind = state.get("type")
    if kind == "nearest-centroid":
        return NearestCentroid.from_state(state)
    if kind == "knn":
        return KNearestNeighbors.from_state(state)
    if kind == "linear-svm":
        return LinearSvm.from_state(state)
    if kind == "external-scores":
        return ExternalScoresModel.from_state(state)
    raise ConfigurationError(f"unknown model type in state: {kind!r}")
