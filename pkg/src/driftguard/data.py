"""Data model, file formats, temporal splitting, and synthetic drift streams."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    IntegrityError,
    ParseError,
)

_GENERATOR_DOMAIN = 3  # sub-seed tag for the drift stream generator


@dataclass(frozen=True)
class Example:
    """One observation: sparse features, optional label, epoch-second timestamp."""

    id: str
    features: dict[int, float]
    label: str | None
    timestamp: int


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of examples over a fixed label space.

    ``label_space`` is the ordered set of class identifiers; it must cover
    every label present. ``dimensionality`` is a strict upper bound on
    feature indices. Instances are immutable and safe to share.
    """

    examples: tuple[Example, ...]
    label_space: tuple[str, ...]
    dimensionality: int

    def __post_init__(self):
        known = set(self.label_space)
        for ex in self.examples:
            if ex.label is not None and ex.label not in known:
                raise IntegrityError(
                    f"example {ex.id!r} has label {ex.label!r} outside label space"
                )
            for idx in ex.features:
                if not 0 <= idx < self.dimensionality:
                    raise DimensionError(
                        f"example {ex.id!r} has feature index {idx} outside "
                        f"dimensionality {self.dimensionality}"
                    )

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def ids(self) -> tuple[str, ...]:
        return tuple(ex.id for ex in self.examples)

    def labels(self) -> tuple[str | None, ...]:
        return tuple(ex.label for ex in self.examples)

    def subset(self, indices) -> "Dataset":
        picked = tuple(self.examples[i] for i in indices)
        return Dataset(picked, self.label_space, self.dimensionality)

    def by_label(self) -> dict[str, tuple[Example, ...]]:
        groups: dict[str, list[Example]] = {lab: [] for lab in self.label_space}
        for ex in self.examples:
            if ex.label is not None:
                groups[ex.label].append(ex)
        return {lab: tuple(members) for lab, members in groups.items()}


def build_dataset(examples, label_space=None, dimensionality=None) -> Dataset:
    """Assemble a Dataset, inferring label space and dimensionality if absent.

    The inferred label space is the lexicographically sorted set of labels
    present; the inferred dimensionality is one past the largest feature
    index (at least 1).
    """
    examples = tuple(examples)
    if label_space is None:
        label_space = tuple(sorted({ex.label for ex in examples if ex.label is not None}))
    if dimensionality is None:
        top = -1
        for ex in examples:
            if ex.features:
                top = max(top, max(ex.features))
        dimensionality = top + 1 if top >= 0 else 1
    return Dataset(examples, tuple(label_space), int(dimensionality))


def dense_vector(example: Example, dimensionality: int) -> np.ndarray:
    vec = np.zeros(dimensionality, dtype=np.float64)
    for idx, val in example.features.items():
        vec[idx] = val
    return vec


def dataset_matrix(dataset: Dataset) -> np.ndarray:
    """Dense (n, d) float64 matrix in example order."""
    mat = np.zeros((len(dataset), dataset.dimensionality), dtype=np.float64)
    for row, ex in enumerate(dataset.examples):
        for idx, val in ex.features.items():
            mat[row, idx] = val
    return mat


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def load_dense_csv(path) -> Dataset:
    """Load a dense CSV with header ``id,timestamp,label,f0,...,f{d-1}``.

    Zero-valued cells are omitted from the sparse maps; an empty label cell
    marks an unlabeled row. Raises ParseError (naming the line) for malformed
    rows and IntegrityError for duplicate ids.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header[:3] != ["id", "timestamp", "label"]:
            raise ParseError(f"{path}: line 1: header must start with id,timestamp,label")
        dim = len(header) - 3
        examples = []
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: line {lineno}: expected {len(header)} columns, got {len(row)}"
                )
            ex_id = row[0]
            if ex_id in seen:
                raise IntegrityError(f"{path}: duplicate id {ex_id!r} on line {lineno}")
            seen.add(ex_id)
            try:
                timestamp = int(row[1])
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: bad timestamp {row[1]!r}") from None
            label = row[2] if row[2] != "" else None
            features: dict[int, float] = {}
            for col, cell in enumerate(row[3:]):
                try:
                    val = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: line {lineno}: non-numeric feature {cell!r}"
                    ) from None
                if val != 0.0:
                    features[col] = val
            examples.append(Example(ex_id, features, label, timestamp))
    return build_dataset(examples, dimensionality=dim)


def save_dense_csv(dataset: Dataset, path) -> None:
    """Write the dense CSV format; inverse of :func:`load_dense_csv`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["id", "timestamp", "label"] + [f"f{i}" for i in range(dataset.dimensionality)]
        )
        for ex in dataset.examples:
            cells = ["0"] * dataset.dimensionality
            for idx, val in ex.features.items():
                cells[idx] = repr(val)
            writer.writerow([ex.id, str(ex.timestamp), ex.label or ""] + cells)


def load_sparse(path) -> Dataset:
    """Load the sparse text format: ``label timestamp idx:val idx:val ...``.

    ``?`` marks a missing label; indices must be non-negative and strictly
    increasing within a line. Ids are assigned as ``line-<n>`` (1-based).
    """
    examples = []
    top = -1
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ParseError(f"{path}: line {lineno}: expected label and timestamp")
            label = None if parts[0] == "?" else parts[0]
            try:
                timestamp = int(parts[1])
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: bad timestamp {parts[1]!r}") from None
            features: dict[int, float] = {}
            prev = -1
            for token in parts[2:]:
                idx_str, _, val_str = token.partition(":")
                try:
                    idx = int(idx_str)
                    val = float(val_str)
                except ValueError:
                    raise ParseError(f"{path}: line {lineno}: bad pair {token!r}") from None
                if idx < 0:
                    raise ParseError(f"{path}: line {lineno}: negative index {idx}")
                if idx <= prev:
                    raise ParseError(
                        f"{path}: line {lineno}: indices not strictly increasing at {idx}"
                    )
                prev = idx
                features[idx] = val
                top = max(top, idx)
            examples.append(Example(f"line-{lineno}", features, label, timestamp))
    return build_dataset(examples, dimensionality=max(top + 1, 1))


def save_sparse(dataset: Dataset, path) -> None:
    """Write the sparse text format (ids are positional and not persisted)."""
    with open(path, "w") as fh:
        for ex in dataset.examples:
            label = ex.label if ex.label is not None else "?"
            pairs = " ".join(f"{i}:{ex.features[i]!r}" for i in sorted(ex.features))
            fh.write(f"{label} {ex.timestamp} {pairs}".rstrip() + "\n")


# ---------------------------------------------------------------------------
# Temporal split
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TemporalSplit:
    """Train window plus chronologically ordered, non-overlapping test periods."""

    train: Dataset
    train_end: int
    period_length: int
    test_periods: tuple[Dataset, ...]


def temporal_split(dataset: Dataset, train_end: int, period_length: int) -> TemporalSplit:
    """Split a dataset at ``train_end`` into train and fixed-length test periods.

    Training examples are those with ``timestamp <= train_end``. The remainder
    is bucketed into consecutive half-open windows of ``period_length``
    seconds anchored at ``train_end + 1``; empty trailing periods are dropped.

    Raises ConfigurationError if no example falls in the training window.
    """
    if not dataset.examples:
        raise ConfigurationError("cannot split an empty dataset")
    period_length = int(period_length)
    if period_length <= 0:
        raise ConfigurationError(f"period_length must be positive, got {period_length}")
    train_idx = [i for i, ex in enumerate(dataset.examples) if ex.timestamp <= train_end]
    if not train_idx:
        raise ConfigurationError("train_end precedes every timestamp: training set is empty")
    rest = [ex for ex in dataset.examples if ex.timestamp > train_end]
    buckets: dict[int, list[Example]] = {}
    for ex in rest:
        buckets.setdefault((ex.timestamp - train_end - 1) // period_length, []).append(ex)
    periods: tuple[Dataset, ...] = ()
    if buckets:
        last = max(buckets)
        periods = tuple(
            Dataset(tuple(buckets.get(p, ())), dataset.label_space, dataset.dimensionality)
            for p in range(last + 1)
        )
    return TemporalSplit(dataset.subset(train_idx), int(train_end), period_length, periods)


# ---------------------------------------------------------------------------
# Synthetic drift streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureComponent:
    mean: tuple[float, ...]
    variances: tuple[float, ...]
    weight: float


@dataclass(frozen=True)
class ClassSpec:
    """Gaussian mixture for one class plus its per-period mean translation."""

    label: str
    components: tuple[MixtureComponent, ...]
    shift_per_period: tuple[float, ...] | None = None
    shifts: tuple[tuple[float, ...], ...] | None = None

    def offset(self, period: int, dim: int) -> np.ndarray:
        if self.shifts is not None:
            out = np.zeros(dim)
            for p in range(min(period, len(self.shifts) - 1) + 1):
                out += np.asarray(self.shifts[p], dtype=np.float64)
            return out
        if self.shift_per_period is not None:
            return period * np.asarray(self.shift_per_period, dtype=np.float64)
        return np.zeros(dim)


@dataclass(frozen=True)
class DriftConfig:
    """Configuration of the synthetic stream generator.

    ``priors`` is one probability per class (aligned with ``classes``) or one
    such vector per period. Timestamps encode the period index:
    ``start_timestamp + period * period_seconds``.
    """

    dimensionality: int
    periods: int
    examples_per_period: int
    classes: tuple[ClassSpec, ...]
    priors: tuple[tuple[float, ...], ...]
    period_seconds: int = 100
    start_timestamp: int = 0

    def validate(self) -> None:
        if self.dimensionality < 1:
            raise ConfigurationError("dimensionality must be >= 1")
        if self.periods < 1 or self.examples_per_period < 1:
            raise ConfigurationError("periods and examples_per_period must be >= 1")
        if len(self.priors) != self.periods:
            raise ConfigurationError("priors must provide one vector per period")
        for vec in self.priors:
            if len(vec) != len(self.classes):
                raise ConfigurationError("each prior vector needs one entry per class")
            if any(p < 0 for p in vec) or not math.isclose(sum(vec), 1.0, abs_tol=1e-9):
                raise ConfigurationError(f"class priors must be non-negative and sum to 1: {vec}")
        for spec in self.classes:
            if not spec.components:
                raise ConfigurationError(f"class {spec.label!r} has no mixture components")
            wsum = sum(c.weight for c in spec.components)
            if not math.isclose(wsum, 1.0, abs_tol=1e-9):
                raise ConfigurationError(f"class {spec.label!r} component weights must sum to 1")
            for comp in spec.components:
                if len(comp.mean) != self.dimensionality or len(comp.variances) != self.dimensionality:
                    raise ConfigurationError(
                        f"class {spec.label!r}: mean/variance length != dimensionality"
                    )
                if any(v <= 0 for v in comp.variances):
                    raise ConfigurationError(
                        f"class {spec.label!r} has a non-positive variance"
                    )


def drift_config_from_dict(raw: dict) -> DriftConfig:
    """Parse the generator JSON document into a validated DriftConfig."""
    try:
        classes = []
        for cls in raw["classes"]:
            comps = tuple(
                MixtureComponent(
                    mean=tuple(float(v) for v in comp["mean"]),
                    variances=tuple(float(v) for v in comp["variances"]),
                    weight=float(comp.get("weight", 1.0)),
                )
                for comp in cls["components"]
            )
            classes.append(
                ClassSpec(
                    label=str(cls["label"]),
                    components=comps,
                    shift_per_period=(
                        tuple(float(v) for v in cls["shift_per_period"])
                        if "shift_per_period" in cls
                        else None
                    ),
                    shifts=(
                        tuple(tuple(float(v) for v in s) for s in cls["shifts"])
                        if "shifts" in cls
                        else None
                    ),
                )
            )
        periods = int(raw["periods"])
        priors_raw = raw["priors"]
        if priors_raw and isinstance(priors_raw[0], (list, tuple)):
            priors = tuple(tuple(float(p) for p in vec) for vec in priors_raw)
        else:
            priors = tuple(tuple(float(p) for p in priors_raw) for _ in range(periods))
        cfg = DriftConfig(
            dimensionality=int(raw["dimensionality"]),
            periods=periods,
            examples_per_period=int(raw["examples_per_period"]),
            classes=tuple(classes),
            priors=priors,
            period_seconds=int(raw.get("period_seconds", 100)),
            start_timestamp=int(raw.get("start_timestamp", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad drift config: {exc!r}") from exc
    cfg.validate()
    return cfg


def load_drift_config(path) -> DriftConfig:
    with open(path) as fh:
        return drift_config_from_dict(json.load(fh))


def generate_drift_stream(cfg: DriftConfig, seed: int) -> Dataset:
    """Sample the configured per-period Gaussian mixtures into a Dataset.

    Deterministic for a fixed (cfg, seed): the per-example draw order is
    class, component, then feature noise. Labels are attached and timestamps
    encode the period index.
    """
    cfg.validate()
    rng = np.random.default_rng([int(seed), _GENERATOR_DOMAIN])
    dim = cfg.dimensionality
    sigmas = [
        [np.sqrt(np.asarray(c.variances, dtype=np.float64)) for c in spec.components]
        for spec in cfg.classes
    ]
    means = [
        [np.asarray(c.mean, dtype=np.float64) for c in spec.components]
        for spec in cfg.classes
    ]
    comp_cums = [
        np.cumsum([c.weight for c in spec.components]) for spec in cfg.classes
    ]
    examples = []
    for period in range(cfg.periods):
        prior_cum = np.cumsum(cfg.priors[period])
        offsets = [spec.offset(period, dim) for spec in cfg.classes]
        timestamp = cfg.start_timestamp + period * cfg.period_seconds
        for i in range(cfg.examples_per_period):
            ci = int(np.searchsorted(prior_cum, rng.random(), side="right"))
            ci = min(ci, len(cfg.classes) - 1)
            wi = int(np.searchsorted(comp_cums[ci], rng.random(), side="right"))
            wi = min(wi, len(comp_cums[ci]) - 1)
            x = means[ci][wi] + offsets[ci] + rng.standard_normal(dim) * sigmas[ci][wi]
            features = {j: float(x[j]) for j in range(dim) if x[j] != 0.0}
            examples.append(
                Example(
                    id=f"p{period:03d}-{i:05d}",
                    features=features,
                    label=cfg.classes[ci].label,
                    timestamp=timestamp,
                )
            )
    return Dataset(tuple(examples), tuple(s.label for s in cfg.classes), dim)


# ---------------------------------------------------------------------------
# Distribution-shift measurement
# ---------------------------------------------------------------------------

def kl_divergence(p_counts, q_counts, smoothing: float) -> float:
    """KL(P || Q) in nats after additive smoothing and normalization.

    Both count vectors must have equal length; ``smoothing`` must be positive
    so the result stays finite on disjoint supports.
    """
    p = np.asarray(p_counts, dtype=np.float64)
    q = np.asarray(q_counts, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionError(f"count vectors differ in length: {p.shape} vs {q.shape}")
    if smoothing <= 0:
        raise ConfigurationError(f"smoothing must be positive, got {smoothing!r}")
    if np.any(p < 0) or np.any(q < 0):
        raise DomainError("counts must be non-negative")
    p = p + smoothing
    q = q + smoothing
    p = p / p.sum()
    q = q / q.sum()
    return float(np.sum(p * np.log(p / q)))
