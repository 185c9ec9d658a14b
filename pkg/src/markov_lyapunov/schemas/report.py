"""Report dataclasses and their JSON/CSV serialisation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from markov_lyapunov.errors import EXIT_INTERNAL, EXIT_OK
from markov_lyapunov.schemas.base import ErrorReport
from markov_lyapunov.schemas.config import SCHEMA_VERSION
from markov_lyapunov.utils import write_json

TRACE_COLUMNS = ("method", "n", "value", "stderr")


@dataclass
class GammaEstimate:
    method: str
    value: float
    std_error: Optional[float] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "value": self.value,
            "std_error": self.std_error,
            "details": self.details,
        }


@dataclass
class TraceRow:
    method: str
    n: int
    value: float
    stderr: Optional[float] = None


@dataclass
class StageRecord:
    name: str
    seconds: float
    status: str = "ok"
    error: Optional[ErrorReport] = None

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            "name": self.name,
            "seconds": self.seconds,
            "status": self.status,
        }
        if self.error is not None:
            result["error"] = self.error.to_dict()
        return result


@dataclass
class EstimateReport:
    """Everything a run produced, in the order stages filled it in."""

    config: Dict[str, Any]
    gammas: List[GammaEstimate] = field(default_factory=list)
    pressure: List[Dict[str, float]] = field(default_factory=list)
    spectral_gap: Dict[str, Any] = field(default_factory=dict)
    lasota_yorke: Dict[str, Any] = field(default_factory=dict)
    grid_convergence: List[Dict[str, Any]] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    oracle: Dict[str, Any] = field(default_factory=dict)
    stages: List[StageRecord] = field(default_factory=list)
    traces: List[TraceRow] = field(default_factory=list)
    schema_version: str = SCHEMA_VERSION

    def gamma(self, method: str) -> Optional[GammaEstimate]:
        for estimate in self.gammas:
            if estimate.method == method:
                return estimate
        return None

    @property
    def errors(self) -> List[ErrorReport]:
        return [stage.error for stage in self.stages if stage.error is not None]

    @property
    def exit_code(self) -> int:
        """Worst exit code among failed stages; internal errors win over everything."""

        codes = [error.exit_code for error in self.errors]
        if not codes:
            return EXIT_OK
        if EXIT_INTERNAL in codes:
            return EXIT_INTERNAL
        return max(codes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "config": self.config,
            "gammas": [estimate.to_dict() for estimate in self.gammas],
            "pressure": self.pressure,
            "spectral_gap": self.spectral_gap,
            "lasota_yorke": self.lasota_yorke,
            "grid_convergence": self.grid_convergence,
            "diagnostics": self.diagnostics,
            "oracle": self.oracle,
            "stages": [stage.to_dict() for stage in self.stages],
            "exit_code": self.exit_code,
        }


def write_report(report: EstimateReport, path: Path) -> None:
    write_json(Path(path), report.to_dict())


def write_traces(rows: List[TraceRow], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for row in rows:
            writer.writerow(
                [row.method, row.n, repr(float(row.value)), "" if row.stderr is None else repr(float(row.stderr))]
            )
