"""Hypothesis diagnostics: empirical verdicts, never certificates."""

from __future__ import annotations

import logging
from functools import partial
from typing import TYPE_CHECKING, Any, Dict

from markov_lyapunov.commands.spectrum import shared_eigenmeasure
from markov_lyapunov.diagnostics import (
    VERDICT_FAIL,
    VERDICT_PASS,
    contraction_average,
    det_closure_check,
    ell_product_bound_check,
    exp_gain_holder_check,
    exponent_gap,
    gap_consistency,
    index_probe,
    irreducibility_heuristic,
    log_gain_holder_check,
    properness_probe,
)
from markov_lyapunov.montecarlo import estimate_exponents
from markov_lyapunov.schemas.config import MODE_DIAGNOSE
from markov_lyapunov.schemas.report import TraceRow

if TYPE_CHECKING:
    from markov_lyapunov.runner import PipelineRunner, RunContext

logger = logging.getLogger(__name__)

STAGE_CONTRACTION = "diagnose-contraction"
STAGE_INDEX = "diagnose-index"
STAGE_ELL_BOUND = "diagnose-ell-bound"
STAGE_HOLDER = "diagnose-holder"
STAGE_IRREDUCIBILITY = "diagnose-irreducibility"
STAGE_PROPERNESS = "diagnose-properness"
STAGE_EXPONENT_GAP = "diagnose-exponent-gap"

CLOSURE_SIGMAS = 3.0


def register(runner: "PipelineRunner", context: "RunContext") -> None:
    stages = (
        (STAGE_CONTRACTION, run_contraction, False, "Averaged d^alpha contraction along sampled products."),
        (STAGE_INDEX, run_index, False, "sigma_2/sigma_1 distribution of sampled products."),
        (STAGE_ELL_BOUND, run_ell_bound, False, "ell(psi(n)) <= nK on sampled products."),
        (STAGE_HOLDER, run_holder, False, "Calibrated Hölder bounds for the log-gain and its exponential."),
        (STAGE_IRREDUCIBILITY, run_irreducibility, True, "Search for a finite invariant set of lines."),
        (STAGE_PROPERNESS, run_properness, True, "Ball masses of the eigenmeasure."),
        (STAGE_EXPONENT_GAP, run_exponent_gap, True, "Determinant closure and gamma_2 < gamma_1."),
    )
    for name, handler, requires_2d, description in stages:
        runner.register_stage(
            name,
            handler=partial(handler, context=context),
            mode=MODE_DIAGNOSE,
            description=description,
            requires_2d=requires_2d,
        )


def _store(context: "RunContext", key: str, payload: Dict[str, Any]) -> Dict[str, Any]:
    context.report.diagnostics[key] = payload
    return payload


def run_contraction(*, context: "RunContext") -> Dict[str, Any]:
    settings = context.config.diagnostics
    rows = contraction_average(
        context.family,
        context.chain,
        settings.contraction_n,
        settings.contraction_pairs,
        context.seed_for(STAGE_CONTRACTION),
        alpha=context.config.alpha,
    )
    context.report.traces.extend(
        TraceRow(method="contraction", n=row.n, value=row.ratio) for row in rows
    )
    final = rows[-1]
    verdict = VERDICT_PASS if final.ratio < 1.0 else VERDICT_FAIL
    if verdict == VERDICT_FAIL:
        logger.warning("No averaged contraction after %d steps: ratio %.4f", final.n, final.ratio)
    return _store(
        context,
        "contraction",
        {"verdict": verdict, "n": final.n, "ratio": final.ratio, "rate": final.rate, "heuristic": True},
    )


def run_index(*, context: "RunContext") -> Dict[str, Any]:
    settings = context.config.diagnostics
    stats = index_probe(
        context.family,
        context.chain,
        settings.index_n,
        settings.samples,
        context.seed_for(STAGE_INDEX),
    )
    context.cache["index"] = stats
    return _store(context, "index", {**stats.to_dict(), "heuristic": True})


def run_ell_bound(*, context: "RunContext") -> Dict[str, Any]:
    settings = context.config.diagnostics
    check = ell_product_bound_check(
        context.family,
        context.chain,
        settings.ell_n,
        settings.samples,
        context.seed_for(STAGE_ELL_BOUND),
    )
    return _store(context, "ell_bound", {**check.to_dict(), "n": settings.ell_n, "K": context.family.K})


def run_holder(*, context: "RunContext") -> Dict[str, Any]:
    config = context.config
    seed = context.seed_for(STAGE_HOLDER)
    log_check = log_gain_holder_check(seed, samples=config.diagnostics.samples, alpha=config.alpha)
    exp_check = exp_gain_holder_check(
        seed, t=config.t_max, samples=config.diagnostics.samples, alpha=config.alpha
    )
    payload = {
        "log_gain": {"passed": log_check.passed, "constant": log_check.constant, "max_ratio": log_check.max_ratio},
        "exp_gain": {
            "t": config.t_max,
            "passed": exp_check.passed,
            "constant": exp_check.constant,
            "max_ratio": exp_check.max_ratio,
        },
        "heuristic": True,
    }
    return _store(context, "holder", payload)


def run_irreducibility(*, context: "RunContext") -> Dict[str, Any]:
    verdict = irreducibility_heuristic(
        context.family, max_length=context.config.diagnostics.irreducibility_length
    )
    return _store(context, "irreducibility", verdict.to_dict())


def run_properness(*, context: "RunContext") -> Dict[str, Any]:
    settings = context.config.diagnostics
    report = properness_probe(
        shared_eigenmeasure(context), settings.directions, settings.eps_grid
    )
    return _store(context, "properness", {**report.to_dict(), "proper": report.proper, "heuristic": True})


def run_exponent_gap(*, context: "RunContext") -> Dict[str, Any]:
    settings = context.config.mc
    spectrum = estimate_exponents(
        context.family,
        context.chain,
        settings.n,
        settings.replicas,
        context.seed_for(STAGE_EXPONENT_GAP),
        workers=context.workers,
    )
    gamma1, gamma2 = (float(v) for v in spectrum.exponents[:2])
    std_error = spectrum.sum_std_error(2)
    exact_sum = det_closure_check(context.family, context.chain)
    closure_error = abs(gamma1 + gamma2 - exact_sum)
    closed = closure_error <= CLOSURE_SIGMAS * std_error + 1e-12
    gap = exponent_gap(context.family, context.chain, gamma1)
    payload: Dict[str, Any] = {
        **spectrum.to_dict(),
        "exact_sum": exact_sum,
        "closure_error": closure_error,
        "closure_std_error": std_error,
        "closure_verdict": VERDICT_PASS if closed else VERDICT_FAIL,
        "gamma2_from_closure": gap.gamma2,
        "strict_gap": gamma2 < gamma1,
    }
    stats = context.cache.get("index")
    if stats is not None:
        consistency = gap_consistency(stats, gamma1, gap.gamma2)
        payload["gap_consistency"] = consistency.to_dict()
        if not consistency.consistent:
            logger.warning(
                "Index decay %.3e over %d steps disagrees with exp((gamma_2 - gamma_1) n) = %.3e",
                consistency.observed_decay,
                stats.n,
                consistency.predicted,
            )
    if not closed:
        logger.warning("Determinant closure off by %.3e (std error %.3e)", closure_error, std_error)
    return _store(context, "exponent_gap", payload)
