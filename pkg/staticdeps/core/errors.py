"""
Exception hierarchy for staticdeps.
Every error carries the process exit code the CLI reports for it.
"""
from typing import Optional


class StaticDepsError(Exception):
    """Base class for all analysis errors."""
    exit_code: int = 1


class AsmSyntaxError(StaticDepsError):
    """Malformed assembly input."""
    exit_code = 2

    def __init__(self, line: Optional[int], reason: str):
        self.line = line
        self.reason = reason
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{reason}")


class UnsupportedSyntaxError(AsmSyntaxError):
    """Input is syntactically fine but is not a basic block body (control flow)."""


class EmptyKernelError(StaticDepsError):
    """The kernel has no instructions."""
    exit_code = 3

    def __init__(self, message: str = "kernel contains no instructions"):
        super().__init__(message)


class UndefinedCoverageError(StaticDepsError):
    """Coverage requested against an empty dynamic dependency set."""
    exit_code = 4

    def __init__(self, message: str = "oracle found no dependencies; coverage is undefined"):
        super().__init__(message)


class MalformedInputError(StaticDepsError):
    """A CSV or JSON input does not follow the documented interface."""
    exit_code = 2


class MissingBaselineError(StaticDepsError):
    """A benchmark has predictions but no baseline measurement."""
    exit_code = 5

    def __init__(self, benchmark: str):
        self.benchmark = benchmark
        super().__init__(f"no baseline for benchmark '{benchmark}'")


class UndefinedStatisticError(StaticDepsError):
    """A statistic cannot be computed on the given sample."""
    exit_code = 2


class TimestampOverflowError(StaticDepsError):
    """The requested oracle run would overflow the timestamp counter."""
    exit_code = 2


class ConfigError(StaticDepsError, ValueError):
    """Invalid configuration value."""
    exit_code = 2
