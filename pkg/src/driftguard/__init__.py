"""Conformal evaluation with rejection for drifting classifiers."""

from .calibration import (
    SearchResult,
    SearchSpec,
    ThresholdSet,
    evaluate_thresholds,
    grid_search,
    random_search,
    rank_normalize,
    threshold_on_probabilities,
)
from .classifiers import (
    ExternalScoresModel,
    KNearestNeighbors,
    LinearSvm,
    NearestCentroid,
    ScoringModel,
    load_external_scores,
)
from .conformal import (
    AlphaAssessment,
    CrossConformalEvaluator,
    Decision,
    InductiveEvaluator,
    PValueRecord,
    TransductiveEvaluator,
    alpha_assessment,
    evaluator_from_state,
    load_evaluator_state,
    pvalue,
)
from .data import (
    Dataset,
    DriftConfig,
    Example,
    TemporalSplit,
    build_dataset,
    drift_config_from_dict,
    generate_drift_stream,
    kl_divergence,
    load_dense_csv,
    load_sparse,
    save_dense_csv,
    save_sparse,
    temporal_split,
)
from .errors import (
    CalibrationError,
    ConfigurationError,
    DimensionError,
    DomainError,
    DriftguardError,
    IntegrityError,
    ParseError,
    StateError,
    TrainingError,
    UnknownIdError,
)
from .metrics import (
    Confusion,
    PeriodReport,
    TimeSeriesReport,
    aut,
    evaluate_stream,
    period_metrics,
)
from .ncm import (
    AbsMarginNcm,
    CentroidDistanceNcm,
    EnsembleDisagreementNcm,
    KnnDisagreementNcm,
    NegatedScoreNcm,
    ensemble_disagreement,
    make_ncm,
)

__version__ = "0.1.0"

__all__ = [
    "AbsMarginNcm",
    "AlphaAssessment",
    "CalibrationError",
    "CentroidDistanceNcm",
    "ConfigurationError",
    "Confusion",
    "CrossConformalEvaluator",
    "Dataset",
    "Decision",
    "DimensionError",
    "DomainError",
    "DriftConfig",
    "DriftguardError",
    "EnsembleDisagreementNcm",
    "Example",
    "ExternalScoresModel",
    "InductiveEvaluator",
    "IntegrityError",
    "KNearestNeighbors",
    "KnnDisagreementNcm",
    "LinearSvm",
    "NearestCentroid",
    "NegatedScoreNcm",
    "ParseError",
    "PeriodReport",
    "PValueRecord",
    "ScoringModel",
    "SearchResult",
    "SearchSpec",
    "StateError",
    "TemporalSplit",
    "ThresholdSet",
    "TimeSeriesReport",
    "TrainingError",
    "TransductiveEvaluator",
    "UnknownIdError",
    "alpha_assessment",
    "aut",
    "build_dataset",
    "drift_config_from_dict",
    "ensemble_disagreement",
    "evaluate_stream",
    "evaluate_thresholds",
    "evaluator_from_state",
    "generate_drift_stream",
    "grid_search",
    "kl_divergence",
    "load_dense_csv",
    "load_evaluator_state",
    "load_external_scores",
    "load_sparse",
    "make_ncm",
    "period_metrics",
    "pvalue",
    "random_search",
    "rank_normalize",
    "save_dense_csv",
    "save_sparse",
    "temporal_split",
    "threshold_on_probabilities",
]
