"""Schema definitions for run configuration and reports."""

from .base import ErrorReport
from .config import (
    DiagnosticSettings,
    MonteCarloSettings,
    OracleSettings,
    OutputSettings,
    RunConfig,
    SpectrumSettings,
)
from .report import EstimateReport, GammaEstimate, StageRecord, TraceRow

__all__ = [
    # Base schemas
    "ErrorReport",
    # Configuration
    "RunConfig",
    "MonteCarloSettings",
    "SpectrumSettings",
    "DiagnosticSettings",
    "OracleSettings",
    "OutputSettings",
    # Reports
    "EstimateReport",
    "GammaEstimate",
    "StageRecord",
    "TraceRow",
]
