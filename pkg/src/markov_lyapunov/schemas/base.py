"""Structured error payloads shared by the report and the CLI."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional

from markov_lyapunov.errors import EXIT_INTERNAL, LyapunovError


@dataclass
class ErrorReport:
    """Machine-readable error with troubleshooting guidance."""

    error_type: str
    message: str
    details: Optional[Dict[str, Any]] = None
    troubleshooting: Optional[str] = None
    exit_code: int = EXIT_INTERNAL

    @classmethod
    def from_exception(cls, exc: BaseException) -> "ErrorReport":
        if isinstance(exc, LyapunovError):
            return cls(
                error_type=exc.error_type,
                message=exc.message,
                details=exc.details or None,
                troubleshooting=exc.troubleshooting,
                exit_code=exc.exit_code,
            )
        return cls(
            error_type="internal-error",
            message=f"{exc.__class__.__name__}: {exc}",
            troubleshooting="Re-run with --log-level DEBUG and report the traceback.",
        )

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            "error_type": self.error_type,
            "message": self.message,
        }
        if self.details:
            result["details"] = self.details
        if self.troubleshooting:
            result["troubleshooting"] = self.troubleshooting
        return result
