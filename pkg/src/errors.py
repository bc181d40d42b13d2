"""
Exception hierarchy for the radial k-Hessian toolkit.

Every error raised on purpose by the library derives from KHessianError so the
command-line front end can map it to exit status 2 with a machine-readable
error record.
"""

from typing import Any, Optional


class KHessianError(Exception):
    """Base class of all toolkit errors"""

    def to_record(self) -> dict:
        """Return the {type, message} record written into JSON reports"""
        return {"type": type(self).__name__, "message": str(self)}


class DomainError(KHessianError, ValueError):
    """Mathematically invalid input (r <= 0, k out of range, negative h, ...)"""


class ScaleError(KHessianError, ValueError):
    """Brute-force oracle asked to work beyond its size limit"""


class BracketError(KHessianError, ValueError):
    """No sign change on the requested search interval"""


class StiffnessError(KHessianError, RuntimeError):
    """ODE step-size control failed"""


class ConvergenceError(KHessianError, RuntimeError):
    """Iteration cap reached; the best iterate is kept on the exception"""

    def __init__(self, message: str, best: Optional[Any] = None):
        super().__init__(message)
        self.best = best


class ConsistencyError(KHessianError, RuntimeError):
    """Two closed forms of the same quantity disagree"""


class ProfileFormatError(KHessianError, ValueError):
    """Malformed CSV input; line is the 1-based line number in the file"""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line

    def to_record(self) -> dict:
        record = super().to_record()
        record["line"] = self.line
        return record


class ConfigError(KHessianError, ValueError):
    """Inconsistent run configuration"""
