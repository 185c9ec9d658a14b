"""Exception hierarchy shared by every computation and the CLI."""

from __future__ import annotations

from typing import Any, Dict, Optional, Sequence

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3


class LyapunovError(RuntimeError):
    """Base error with a machine-readable category and optional guidance."""

    exit_code = EXIT_INTERNAL

    def __init__(
        self,
        message: str,
        error_type: str = "internal-error",
        troubleshooting: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.message = message
        self.error_type = error_type
        self.troubleshooting = troubleshooting
        self.details = details or {}


class ValidationError(LyapunovError):
    """Raised when user input violates a construction-time invariant."""

    exit_code = EXIT_VALIDATION

    @classmethod
    def not_invertible(cls, determinant: float, threshold: float) -> "ValidationError":
        return cls(
            message=(
                f"matrix is numerically singular: |det|={abs(determinant):.3e} "
                f"<= {threshold:.3e}"
            ),
            error_type="matrix-not-invertible",
            troubleshooting="Every matrix in the family must be invertible.",
            details={"determinant": float(determinant), "threshold": float(threshold)},
        )

    @classmethod
    def non_stochastic(cls, row: int, total: float) -> "ValidationError":
        return cls(
            message=f"transition row {row} sums to {total!r}, expected 1",
            error_type="non-stochastic-transition",
            troubleshooting="Rows of the forward transition matrix must sum to 1.",
            details={"row": row, "sum": float(total)},
        )

    @classmethod
    def full_shift_violation(cls, row: int, column: int) -> "ValidationError":
        return cls(
            message=f"transition entry T[{row}][{column}] is not strictly positive",
            error_type="full-shift-violation",
            troubleshooting=(
                "Strict mode requires every transition to have positive probability. "
                "Set strict_full_shift to false to accept irreducible aperiodic chains."
            ),
            details={"row": row, "column": column},
        )

    @classmethod
    def dimension_mismatch(cls, what: str, expected: Any, actual: Any) -> "ValidationError":
        return cls(
            message=f"{what}: expected {expected}, got {actual}",
            error_type="dimension-mismatch",
            details={"what": what, "expected": expected, "actual": actual},
        )

    @classmethod
    def unsupported_dimension(cls, operation: str, dim: int) -> "ValidationError":
        return cls(
            message=f"{operation} is only available for d=2 (got d={dim})",
            error_type="unsupported-dimension",
            troubleshooting="Use the Monte-Carlo estimators for d >= 3.",
            details={"operation": operation, "dim": dim},
        )

    @classmethod
    def invalid_parameter(cls, field: str, message: str) -> "ValidationError":
        return cls(
            message=f"Invalid {field}: {message}",
            error_type="invalid-parameter",
            details={"field": field},
        )

    @classmethod
    def invalid_config(cls, field: str, message: str) -> "ValidationError":
        return cls(
            message=f"Invalid config field '{field}': {message}",
            error_type="invalid-config",
            troubleshooting="Compare the config with assets/conformal_benchmark.json.",
            details={"field": field},
        )

    @classmethod
    def budget_exceeded(cls, words: int, budget: int) -> "ValidationError":
        return cls(
            message=f"enumeration over {words} words exceeds the budget of {budget}",
            error_type="enumeration-budget-exceeded",
            troubleshooting="Lower n or the number of symbols.",
            details={"words": words, "budget": budget},
        )


class SymbolIndexError(ValidationError, IndexError):
    """Raised for a symbol outside ``0..k-1``."""

    @classmethod
    def out_of_range(cls, symbol: int, k: int) -> "SymbolIndexError":
        return cls(
            message=f"symbol {symbol} outside range 0..{k - 1}",
            error_type="symbol-out-of-range",
            details={"symbol": symbol, "k": k},
        )


class ConvergenceError(LyapunovError):
    """Raised when an iterative solver exhausts its iteration budget."""

    exit_code = EXIT_CONVERGENCE

    @classmethod
    def no_convergence(
        cls, solver: str, iterations: int, trace: Sequence[float]
    ) -> "ConvergenceError":
        tail = [float(value) for value in list(trace)[-10:]]
        return cls(
            message=f"{solver} did not converge after {iterations} iterations",
            error_type="convergence-failure",
            troubleshooting=(
                "The family may not be contracting, or the grid is too coarse. "
                "Run the diagnose mode to check the hypotheses."
            ),
            details={"solver": solver, "iterations": iterations, "trace": tail},
        )
