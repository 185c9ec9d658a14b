"""Stage registry and dispatcher for one configured run."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from markov_lyapunov.errors import ValidationError
from markov_lyapunov.linalg import MatrixFamily
from markov_lyapunov.markov import MarkovChainSpec
from markov_lyapunov.schemas.base import ErrorReport
from markov_lyapunov.schemas.config import MODE_ALL, MODES, RunConfig
from markov_lyapunov.schemas.report import EstimateReport, StageRecord
from markov_lyapunov.utils import derive_seed

logger = logging.getLogger(__name__)


StageHandler = Callable[..., Any]


@dataclass
class StageDefinition:
    handler: StageHandler
    description: str
    mode: str
    requires_2d: bool = False


@dataclass
class RunContext:
    """Validated inputs plus whatever earlier stages left for later ones."""

    config: RunConfig
    family: MatrixFamily
    chain: MarkovChainSpec
    workers: int = 1
    report: EstimateReport = field(init=False)
    cache: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.report = EstimateReport(config=self.config.to_dict())

    @classmethod
    def from_config(cls, config: RunConfig, *, workers: int = 1) -> "RunContext":
        return cls(config=config, family=config.family(), chain=config.chain(), workers=workers)

    def seed_for(self, label: str) -> int:
        return derive_seed(self.config.seed, label)

    def cached(self, key: str, factory: Callable[[], Any]) -> Any:
        if key not in self.cache:
            self.cache[key] = factory()
        return self.cache[key]


class PipelineRunner:
    """Runs registered stages in registration order, one record per stage."""

    def __init__(self, context: RunContext) -> None:
        self._context = context
        self._stages: Dict[str, StageDefinition] = {}

    @property
    def context(self) -> RunContext:
        return self._context

    def register_stage(
        self,
        name: str,
        *,
        handler: StageHandler,
        mode: str,
        description: str = "",
        requires_2d: bool = False,
    ) -> None:
        if name in self._stages:
            raise ValueError(f"Stage '{name}' is already registered")
        if mode not in MODES or mode == MODE_ALL:
            raise ValueError(f"Stage '{name}' has unknown mode {mode!r}")
        self._stages[name] = StageDefinition(
            handler=handler, description=description, mode=mode, requires_2d=requires_2d
        )

    def stages_for(self, mode: str) -> List[str]:
        dim = self._context.family.dim
        return [
            name
            for name, stage in self._stages.items()
            if (mode == MODE_ALL or stage.mode == mode) and (dim == 2 or not stage.requires_2d)
        ]

    def handle_call(self, name: str, params: Mapping[str, Any] | None = None) -> Any:
        if name not in self._stages:
            raise KeyError(f"Unknown stage: {name}")
        stage = self._stages[name]
        params = dict(params or {})
        return stage.handler(**params)

    def run_stage(self, name: str) -> Tuple[StageRecord, Optional[Any]]:
        logger.info("Stage %s started", name)
        start = time.perf_counter()
        try:
            result = self.handle_call(name)
        except Exception as exc:
            elapsed = time.perf_counter() - start
            logger.exception("Stage %s failed after %.2fs", name, elapsed)
            record = StageRecord(
                name=name,
                seconds=elapsed,
                status="error",
                error=ErrorReport.from_exception(exc),
            )
            self._context.report.stages.append(record)
            return record, None
        elapsed = time.perf_counter() - start
        logger.info("Stage %s finished in %.2fs", name, elapsed)
        record = StageRecord(name=name, seconds=elapsed)
        self._context.report.stages.append(record)
        return record, result

    def run(self, mode: Optional[str] = None) -> EstimateReport:
        mode = mode or self._context.config.mode
        if mode not in MODES:
            raise KeyError(f"Unknown mode: {mode}")
        names = self.stages_for(mode)
        skipped = [
            name
            for name, stage in self._stages.items()
            if (mode == MODE_ALL or stage.mode == mode) and name not in names
        ]
        if skipped and not names:
            raise ValidationError.unsupported_dimension(f"mode {mode}", self._context.family.dim)
        if skipped:
            logger.info(
                "Skipping %d stage(s) that need d = 2 (d = %d): %s",
                len(skipped),
                self._context.family.dim,
                ", ".join(skipped),
            )
        for name in names:
            self.run_stage(name)
        return self._context.report
