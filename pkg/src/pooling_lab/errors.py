"""Error types shared across the package; the CLI maps them to exit codes."""
from __future__ import annotations


class PoolingLabError(Exception):
    exit_code = 1


class DataError(PoolingLabError):
    exit_code = 3


class IngestError(DataError):
    def __init__(self, message: str, rejected: int = 0):
        super().__init__(message)
        self.rejected = rejected


class NumericFailure(PoolingLabError):
    """A solver gave up; ``bounds`` carries the best (primal, dual) pair it had."""

    exit_code = 4

    def __init__(self, message: str, bounds=(None, None)):
        super().__init__(message)
        self.bounds = bounds


class ContractViolation(PoolingLabError):
    """A policy referenced a job that is not currently available."""
