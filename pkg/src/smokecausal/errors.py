"""Exception hierarchy. Each class carries the process exit code the CLI maps it to."""


class SmokeCausalError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(SmokeCausalError):
    """Malformed or inconsistent inputs (bad flags, schema violations, shape mismatches)."""

    exit_code = 2


class ParameterError(ValidationError):
    """Parameter outside its admissible domain (range <= 0, |correlation| > 1, ...)."""


class DegenerateDesignError(ValidationError):
    """Per-site regression design is rank deficient; coefficients are not identified."""


class InsufficientDataError(ValidationError):
    """Too few sites, days, bins or draws for the requested operation."""


class LoadError(ValidationError):
    """File content failed schema or consistency checks during ingestion."""


class IoError(SmokeCausalError):
    """OS-level read/write failure (missing directory, permissions, disk)."""

    exit_code = 4


class NumericalError(SmokeCausalError):
    """Numerical linear-algebra failure (non positive definite covariance, Cholesky breakdown)."""

    exit_code = 3
