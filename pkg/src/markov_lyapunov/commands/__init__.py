"""Aggregate stage registration helpers."""

from __future__ import annotations

from typing import TYPE_CHECKING

from . import diagnose, estimate, oracle, spectrum

if TYPE_CHECKING:
    from markov_lyapunov.runner import PipelineRunner, RunContext

__all__ = ["register_all"]


def register_all(runner: "PipelineRunner", context: "RunContext") -> None:
    """Register every stage collection; order fixes the execution order."""

    estimate.register(runner, context)
    spectrum.register(runner, context)
    diagnose.register(runner, context)
    oracle.register(runner, context)
