"""Run configuration: the JSON document the CLI ingests and the report embeds."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Tuple

from markov_lyapunov.diagnostics import DEFAULT_EPS_GRID
from markov_lyapunov.errors import ValidationError
from markov_lyapunov.funcspace import DEFAULT_ALPHA, DEFAULT_THETA
from markov_lyapunov.linalg import MatrixFamily
from markov_lyapunov.markov import MarkovChainSpec, build_chain
from markov_lyapunov.transfer import (
    CONVERGENCE_SIZES,
    DEFAULT_GRID_SIZE,
    DEFAULT_T_MAX,
    GAP_WINDOW,
)

SCHEMA_VERSION = "1"
DEFAULT_SEED = 20240101

MODE_ESTIMATE = "estimate"
MODE_SPECTRUM = "spectrum"
MODE_DIAGNOSE = "diagnose"
MODE_ORACLE = "oracle"
MODE_ALL = "all"
MODES = (MODE_ESTIMATE, MODE_SPECTRUM, MODE_DIAGNOSE, MODE_ORACLE, MODE_ALL)


def _check_positive(section: str, name: str, value: float) -> None:
    if value <= 0:
        raise ValidationError.invalid_config(f"{section}.{name}", "must be positive")


def _section(cls, payload: Any, name: str):
    """Build a settings dataclass from a mapping, rejecting unknown keys."""

    if payload is None:
        return cls()
    if not isinstance(payload, Mapping):
        raise ValidationError.invalid_config(name, "must be a JSON object")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(payload) - allowed)
    if unknown:
        raise ValidationError.invalid_config(name, f"unknown keys {unknown}")
    try:
        return cls(**payload)
    except TypeError as exc:
        raise ValidationError.invalid_config(name, str(exc)) from exc


@dataclass
class MonteCarloSettings:
    n: int = 100_000
    replicas: int = 64
    burn_in: int = 1000
    furstenberg_replicas: int = 1

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError.invalid_config("mc.n", "must be at least 1")
        if self.replicas < 2:
            raise ValidationError.invalid_config("mc.replicas", "must be at least 2")
        if not 0 <= self.burn_in < self.n:
            raise ValidationError.invalid_config("mc.burn_in", "need 0 <= burn_in < n")
        if self.furstenberg_replicas < 1:
            raise ValidationError.invalid_config("mc.furstenberg_replicas", "must be at least 1")


@dataclass
class SpectrumSettings:
    """Knobs of the transfer-operator pipeline beyond the grid and the norm."""

    t_grid_points: int = 11
    gap_window: Tuple[int, int] = GAP_WINDOW
    gap_probes: int = 10
    lasota_yorke_steps: int = 30
    imaginary_t: List[float] = field(default_factory=lambda: [0.1, 0.3])
    imaginary_steps: int = 50
    grid_convergence: List[int] = field(default_factory=lambda: list(CONVERGENCE_SIZES))

    def __post_init__(self) -> None:
        self.gap_window = tuple(int(v) for v in self.gap_window)
        if len(self.gap_window) != 2 or not 1 <= self.gap_window[0] < self.gap_window[1]:
            raise ValidationError.invalid_config(
                "spectrum.gap_window", "must be [first, last] with 1 <= first < last"
            )
        if self.t_grid_points < 2:
            raise ValidationError.invalid_config("spectrum.t_grid_points", "must be at least 2")
        for name in ("gap_probes", "lasota_yorke_steps", "imaginary_steps"):
            _check_positive("spectrum", name, getattr(self, name))
        if any(int(size) < 2 for size in self.grid_convergence):
            raise ValidationError.invalid_config("spectrum.grid_convergence", "sizes must be >= 2")
        self.grid_convergence = [int(size) for size in self.grid_convergence]
        self.imaginary_t = [float(value) for value in self.imaginary_t]


@dataclass
class DiagnosticSettings:
    contraction_n: int = 20
    contraction_pairs: int = 200
    index_n: int = 50
    samples: int = 1000
    ell_n: int = 20
    directions: int = 32
    eps_grid: List[float] = field(default_factory=lambda: list(DEFAULT_EPS_GRID))
    irreducibility_length: int = 4

    def __post_init__(self) -> None:
        if self.contraction_pairs < 100:
            raise ValidationError.invalid_config("diagnostics.contraction_pairs", "must be at least 100")
        for name in ("contraction_n", "index_n", "samples", "ell_n", "directions", "irreducibility_length"):
            _check_positive("diagnostics", name, getattr(self, name))
        if not self.eps_grid or any(eps <= 0 for eps in self.eps_grid):
            raise ValidationError.invalid_config("diagnostics.eps_grid", "radii must be positive")
        self.eps_grid = [float(eps) for eps in self.eps_grid]


@dataclass
class OracleSettings:
    n_max: int = 6
    t_values: List[float] = field(default_factory=lambda: [0.0, 0.1, -0.1])
    terminal: int = 0

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValidationError.invalid_config("oracle.n_max", "must be at least 1")
        if self.terminal < 0:
            raise ValidationError.invalid_config("oracle.terminal", "must be a 0-based symbol")
        self.t_values = [float(value) for value in self.t_values]


@dataclass
class OutputSettings:
    directory: str = "out"
    report: str = "report.json"
    traces: str = "traces.csv"


@dataclass
class RunConfig:
    """Fully resolved configuration of one run."""

    matrices: List[List[List[float]]]
    transition: List[List[float]]
    mode: str = MODE_ALL
    grid_size: int = DEFAULT_GRID_SIZE
    alpha: float = DEFAULT_ALPHA
    theta: float = DEFAULT_THETA
    t_step: float = 1e-3
    t_max: float = DEFAULT_T_MAX
    seed: int = DEFAULT_SEED
    strict_full_shift: bool = True
    mc: MonteCarloSettings = field(default_factory=MonteCarloSettings)
    spectrum: SpectrumSettings = field(default_factory=SpectrumSettings)
    diagnostics: DiagnosticSettings = field(default_factory=DiagnosticSettings)
    oracle: OracleSettings = field(default_factory=OracleSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self) -> None:
        if str(self.schema_version) != SCHEMA_VERSION:
            raise ValidationError.invalid_config(
                "schema_version", f"unsupported version {self.schema_version!r}"
            )
        if self.mode not in MODES:
            raise ValidationError.invalid_config("mode", f"must be one of {list(MODES)}")
        if not isinstance(self.matrices, Sequence) or not self.matrices:
            raise ValidationError.invalid_config("matrices", "need at least one matrix")
        if len(self.matrices) != len(self.transition):
            raise ValidationError.dimension_mismatch(
                "number of symbols", len(self.transition), len(self.matrices)
            )
        if self.grid_size < 2:
            raise ValidationError.invalid_config("grid_size", "must be at least 2")
        if not 0.0 < self.alpha <= 1.0:
            raise ValidationError.invalid_config("alpha", "must lie in (0, 1]")
        if not 0.0 < self.theta < 1.0:
            raise ValidationError.invalid_config("theta", "must lie in (0, 1)")
        if not 1e-5 <= self.t_step <= 1e-1:
            raise ValidationError.invalid_config("t_step", "must lie in [1e-5, 1e-1]")
        _check_positive("config", "t_max", self.t_max)
        if self.oracle.terminal >= len(self.matrices):
            raise ValidationError.invalid_config("oracle.terminal", "symbol out of range")

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "RunConfig":
        if not isinstance(payload, Mapping):
            raise ValidationError.invalid_config("<root>", "config must be a JSON object")
        allowed = {f.name for f in fields(cls)}
        unknown = sorted(set(payload) - allowed)
        if unknown:
            raise ValidationError.invalid_config("<root>", f"unknown keys {unknown}")
        for required in ("matrices", "transition"):
            if required not in payload:
                raise ValidationError.invalid_config(required, "is required")
        data = dict(payload)
        data["mc"] = _section(MonteCarloSettings, payload.get("mc"), "mc")
        data["spectrum"] = _section(SpectrumSettings, payload.get("spectrum"), "spectrum")
        data["diagnostics"] = _section(DiagnosticSettings, payload.get("diagnostics"), "diagnostics")
        data["oracle"] = _section(OracleSettings, payload.get("oracle"), "oracle")
        data["output"] = _section(OutputSettings, payload.get("output"), "output")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ValidationError.invalid_config("<root>", str(exc)) from exc

    @classmethod
    def load(cls, path: Path) -> "RunConfig":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ValidationError.invalid_config("--config", f"file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError.invalid_config("--config", f"invalid JSON: {exc}") from exc
        return cls.from_dict(payload)

    def to_dict(self) -> Dict[str, Any]:
        result = asdict(self)
        result["spectrum"]["gap_window"] = list(self.spectrum.gap_window)
        return result

    def family(self) -> MatrixFamily:
        return MatrixFamily.from_arrays(self.matrices)

    def chain(self) -> MarkovChainSpec:
        return build_chain(self.transition, strict=self.strict_full_shift)

    @property
    def dim(self) -> int:
        return len(self.matrices[0])
