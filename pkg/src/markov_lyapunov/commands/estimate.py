"""Monte-Carlo stages: valid for any dimension d."""

from __future__ import annotations

from functools import partial
from typing import TYPE_CHECKING, Any, Dict

from markov_lyapunov.montecarlo import (
    METHOD_FURSTENBERG,
    METHOD_SUBADDITIVE,
    EstimateResult,
    estimate_furstenberg,
    estimate_subadditive,
)
from markov_lyapunov.schemas.config import MODE_ESTIMATE
from markov_lyapunov.schemas.report import GammaEstimate, TraceRow

if TYPE_CHECKING:
    from markov_lyapunov.runner import PipelineRunner, RunContext

STAGE_SUBADDITIVE = "estimate-subadditive"
STAGE_FURSTENBERG = "estimate-furstenberg"


def register(runner: "PipelineRunner", context: "RunContext") -> None:
    runner.register_stage(
        STAGE_SUBADDITIVE,
        handler=partial(run_subadditive, context=context),
        mode=MODE_ESTIMATE,
        description="Mean of (1/n) log||psi(n)|| over independent replicas.",
    )
    runner.register_stage(
        STAGE_FURSTENBERG,
        handler=partial(run_furstenberg, context=context),
        mode=MODE_ESTIMATE,
        description="Ergodic average of log-gains along the projective chain.",
    )


def _record(context: "RunContext", result: EstimateResult) -> Dict[str, Any]:
    context.report.gammas.append(
        GammaEstimate(
            method=result.method,
            value=result.gamma_hat,
            std_error=result.std_error,
            details=result.to_dict(),
        )
    )
    context.report.traces.extend(
        TraceRow(method=result.method, n=step, value=value)
        for step, value in zip(result.trace_steps, result.trace)
    )
    context.cache[f"gamma:{result.method}"] = result
    return result.to_dict()


def run_subadditive(*, context: "RunContext") -> Dict[str, Any]:
    settings = context.config.mc
    result = estimate_subadditive(
        context.family,
        context.chain,
        settings.n,
        settings.replicas,
        context.seed_for(METHOD_SUBADDITIVE),
        workers=context.workers,
    )
    return _record(context, result)


def run_furstenberg(*, context: "RunContext") -> Dict[str, Any]:
    settings = context.config.mc
    result = estimate_furstenberg(
        context.family,
        context.chain,
        settings.n,
        settings.burn_in,
        context.seed_for(METHOD_FURSTENBERG),
        replicas=settings.furstenberg_replicas,
        workers=context.workers,
    )
    return _record(context, result)
