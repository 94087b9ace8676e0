"""
Exception hierarchy for the tfch toolkit.

Every error carries an exit code and a human readable detail, the same way an
HTTP exception carries a status code. main.py turns them into process exit codes.
"""
from typing import Any, Dict, Optional


class TfchError(Exception):
    """Base error with an exit code and a detail message"""

    exit_code: int = 1

    def __init__(
        self,
        detail: str,
        exit_code: Optional[int] = None,
        diagnostics: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        return self.detail


class DomainError(TfchError):
    """Argument outside the domain of a mathematical function"""


class IndexRangeError(TfchError):
    """Kernel or level index outside its admissible range"""


class HistoryMismatchError(TfchError):
    """Increment history shorter than the requested level"""


class MeanNotZeroError(TfchError):
    """H^{-1} operation applied to a field with nonzero mean"""


class ConfigError(TfchError):
    """Invalid run configuration or unusable output location"""


class VerificationFailure(TfchError):
    """A numerical certification suite reported a violation"""

    exit_code = 2


class SolverFailure(TfchError):
    """Time stepping could not complete a level"""

    exit_code = 3
