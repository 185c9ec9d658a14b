"""Brute-force enumeration checks against the discretized operator."""

from __future__ import annotations

from functools import partial
from typing import TYPE_CHECKING, Any, Dict, List

import numpy as np

from markov_lyapunov.commands.spectrum import shared_operator
from markov_lyapunov.funcspace import grid_angles
from markov_lyapunov.montecarlo import (
    default_start_point,
    enumerate_exact_batch,
    enumeration_derivative,
)
from markov_lyapunov.projective import angles_to_vectors
from markov_lyapunov.schemas.config import MODE_ORACLE
from markov_lyapunov.schemas.report import TraceRow

if TYPE_CHECKING:
    from markov_lyapunov.runner import PipelineRunner, RunContext

STAGE_ENUMERATION = "oracle-enumeration"
STAGE_DERIVATIVE = "oracle-enumeration-derivative"

METHOD_ENUMERATION_DERIVATIVE = "enumeration-derivative"


def register(runner: "PipelineRunner", context: "RunContext") -> None:
    runner.register_stage(
        STAGE_ENUMERATION,
        handler=partial(run_enumeration, context=context),
        mode=MODE_ORACLE,
        description="max |L_t^n 1 - exact enumeration| over grid nodes.",
        requires_2d=True,
    )
    runner.register_stage(
        STAGE_DERIVATIVE,
        handler=partial(run_enumeration_derivative, context=context),
        mode=MODE_ORACLE,
        description="(E(n, h) - E(n, -h)) / (2hn) from exact enumeration.",
    )


def run_enumeration(*, context: "RunContext") -> List[Dict[str, Any]]:
    settings = context.config.oracle
    op = shared_operator(context)
    nodes = angles_to_vectors(grid_angles(op.N))
    rows: List[Dict[str, Any]] = []
    for t in settings.t_values:
        op_t = op.at(t)
        values = np.ones((op.k, op.N))
        for n in range(1, settings.n_max + 1):
            values = op_t.apply_values(values)
            exact = enumerate_exact_batch(
                context.family,
                context.chain,
                n,
                t,
                settings.terminal,
                nodes,
                workers=context.workers,
            )
            error = float(np.max(np.abs(values[settings.terminal] - exact)))
            rows.append({"t": t, "n": n, "max_error": error})
    context.report.oracle["enumeration"] = rows
    return rows


def run_enumeration_derivative(*, context: "RunContext") -> List[Dict[str, Any]]:
    config = context.config
    x = default_start_point(context.family.dim, context.seed_for(STAGE_DERIVATIVE))
    sequence = enumeration_derivative(
        context.family,
        context.chain,
        range(1, config.oracle.n_max + 1),
        config.t_step,
        config.oracle.terminal,
        x,
    )
    rows = [{"n": n, "value": value} for n, value in sequence]
    context.report.oracle["enumeration_derivative"] = {"x": list(x.vec), "rows": rows}
    context.report.traces.extend(
        TraceRow(method=METHOD_ENUMERATION_DERIVATIVE, n=n, value=value) for n, value in sequence
    )
    return rows
