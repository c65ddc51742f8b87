"""Exception hierarchy shared across the library and the CLI."""


class DriftguardError(Exception):
    """Base class for all library errors."""


class ConfigurationError(DriftguardError):
    """Invalid parameter, unknown component name, or malformed config."""


class ParseError(DriftguardError):
    """Malformed input file; message names the offending line."""


class IntegrityError(DriftguardError):
    """Inconsistent data: duplicate ids, missing ground truth, and the like."""


class UnknownIdError(DriftguardError):
    """Lookup of an example id that is not present in a score table."""


class TrainingError(DriftguardError):
    """Degenerate training input (empty class, single-class labels)."""


class CalibrationError(DriftguardError):
    """Calibration split leaves a class pool empty or too small."""


class DomainError(DriftguardError):
    """Mathematical precondition violated (empty pool, too few periods)."""


class DimensionError(DriftguardError):
    """Mismatched vector lengths or feature index out of range."""


class StateError(DriftguardError):
    """Evaluator used before calibration, or a corrupt/incompatible state file."""


def exit_code_for(exc: DriftguardError) -> int:
    """Map an error to the CLI exit code: 1 for config, 2 for runtime/data."""
    return 1 if isinstance(exc, ConfigurationError) else 2
