"""Transfer-operator stages (d = 2 only)."""

from __future__ import annotations

from functools import partial
from typing import TYPE_CHECKING, Any, Dict, List

import numpy as np

from markov_lyapunov.funcspace import GridFunction, band_limited_probes
from markov_lyapunov.schemas.config import MODE_SPECTRUM
from markov_lyapunov.schemas.report import GammaEstimate, TraceRow
from markov_lyapunov.transfer import (
    EigenMeasure,
    TransferOperator,
    eigenmeasure,
    grid_convergence,
    is_normalized,
    lasota_yorke_probe,
    lyapunov_via_beta_derivative,
    lyapunov_via_perturbation,
    pressure_curve,
    q_projection,
    spectral_gap,
)

if TYPE_CHECKING:
    from markov_lyapunov.runner import PipelineRunner, RunContext

STAGE_PERTURBATION = "spectrum-perturbation"
STAGE_DERIVATIVE = "spectrum-derivative"
STAGE_PRESSURE = "spectrum-pressure"
STAGE_GAP = "spectrum-gap"
STAGE_LASOTA_YORKE = "spectrum-lasota-yorke"
STAGE_GRID_CONVERGENCE = "spectrum-grid-convergence"

METHOD_PERTURBATION = "perturbation"
METHOD_DERIVATIVE = "beta-derivative"
METHOD_GAP_TRACE = "spectral-gap"


def register(runner: "PipelineRunner", context: "RunContext") -> None:
    stages = (
        (STAGE_PERTURBATION, run_perturbation, "gamma as the nu-integral of the expected log-gain."),
        (STAGE_DERIVATIVE, run_derivative, "gamma as the Richardson-extrapolated slope of log beta at 0."),
        (STAGE_PRESSURE, run_pressure, "beta(t) and log beta(t) on the configured t-grid."),
        (STAGE_GAP, run_gap, "Decay rate of L_0^n w - Qw for band-limited probes."),
        (STAGE_LASOTA_YORKE, run_lasota_yorke, "Seminorm trajectories and the fitted (C, delta)."),
        (STAGE_GRID_CONVERGENCE, run_grid_convergence, "Perturbation gamma across grid sizes."),
    )
    for name, handler, description in stages:
        runner.register_stage(
            name,
            handler=partial(handler, context=context),
            mode=MODE_SPECTRUM,
            description=description,
            requires_2d=True,
        )


def shared_operator(context: "RunContext") -> TransferOperator:
    config = context.config

    def build() -> TransferOperator:
        return TransferOperator(
            context.family,
            context.chain,
            config.grid_size,
            alpha=config.alpha,
            theta=config.theta,
        )

    return context.cached("operator", build)


def shared_eigenmeasure(context: "RunContext") -> EigenMeasure:
    return context.cached("eigenmeasure", lambda: eigenmeasure(shared_operator(context)))


def shared_probes(context: "RunContext") -> List[GridFunction]:
    config = context.config

    def build() -> List[GridFunction]:
        rng = np.random.default_rng(context.seed_for("probes"))
        return band_limited_probes(
            rng,
            context.family.k,
            config.grid_size,
            config.spectrum.gap_probes,
            alpha=config.alpha,
            theta=config.theta,
        )

    return context.cached("probes", build)


def run_perturbation(*, context: "RunContext") -> Dict[str, Any]:
    op = shared_operator(context)
    nu = shared_eigenmeasure(context)
    gamma = lyapunov_via_perturbation(op, nu)
    details = {
        "grid_size": op.N,
        "normalized": is_normalized(op),
        "eigenmeasure_iterations": nu.iterations,
        "flags": list(nu.flags),
        "symbol_masses": nu.masses,
    }
    context.report.gammas.append(
        GammaEstimate(method=METHOD_PERTURBATION, value=gamma, details=details)
    )
    context.cache[f"gamma:{METHOD_PERTURBATION}"] = gamma
    return {"gamma": gamma, **details}


def run_derivative(*, context: "RunContext") -> Dict[str, Any]:
    config = context.config
    op = shared_operator(context)
    estimate = lyapunov_via_beta_derivative(op, h=config.t_step)
    details = {
        "raw": estimate.raw,
        "raw_half_step": estimate.raw_half,
        "step": estimate.step,
        "betas": estimate.betas,
    }
    context.report.gammas.append(
        GammaEstimate(
            method=METHOD_DERIVATIVE,
            value=estimate.value,
            # the Richardson correction is the usual truncation-error proxy
            std_error=abs(estimate.extrapolated - estimate.raw_half),
            details=details,
        )
    )
    return {"gamma": estimate.value, **details}


def run_pressure(*, context: "RunContext") -> List[Dict[str, float]]:
    config = context.config
    t_values = np.linspace(-config.t_max, config.t_max, config.spectrum.t_grid_points)
    points = pressure_curve(shared_operator(context), t_values, t_max=config.t_max)
    rows = [{"t": p.t, "beta": p.beta, "log_beta": p.log_beta} for p in points]
    context.report.pressure = rows
    return rows


def run_gap(*, context: "RunContext") -> Dict[str, Any]:
    settings = context.config.spectrum
    op = shared_operator(context)
    nu = shared_eigenmeasure(context)
    probes = shared_probes(context)
    result = spectral_gap(
        op, probes, n_max=settings.gap_window[1], window=settings.gap_window, nu=nu
    )
    duality = max(
        abs(q_projection(nu, op.apply(probe)) - q_projection(nu, probe)) for probe in probes
    )
    summary = {
        "rate": result.rate,
        "has_gap": result.has_gap,
        "flags": result.flags,
        "window": list(settings.gap_window),
        "probe_rates": [probe.rate for probe in result.probes],
        "duality_residual": float(duality),
    }
    context.report.spectral_gap = summary
    worst = np.max([probe.residuals for probe in result.probes], axis=0)
    context.report.traces.extend(
        TraceRow(method=METHOD_GAP_TRACE, n=n, value=float(value))
        for n, value in enumerate(worst, start=1)
    )
    return summary


def run_lasota_yorke(*, context: "RunContext") -> Dict[str, Any]:
    settings = context.config.spectrum
    op = shared_operator(context)
    probes = shared_probes(context)
    fits = [lasota_yorke_probe(op, probe, n_max=settings.lasota_yorke_steps) for probe in probes]
    flags = sorted({flag for fit in fits for flag in fit.flags})
    imaginary = []
    for t in settings.imaginary_t:
        fit = lasota_yorke_probe(op.at(1j * t), probes[0], n_max=settings.imaginary_steps)
        imaginary.append(
            {"t_imag": t, "sup_norm_contracts": fit.sup_norm_contracts, "delta": fit.delta}
        )
    summary = {
        "normalized": is_normalized(op),
        "delta": max(fit.delta for fit in fits),
        "constant": max(fit.constant for fit in fits),
        "envelope_constant": max(fit.envelope_constant for fit in fits),
        "probes": len(fits),
        "flags": flags,
        "imaginary": imaginary,
    }
    context.report.lasota_yorke = summary
    return summary


def run_grid_convergence(*, context: "RunContext") -> List[Dict[str, Any]]:
    rows = grid_convergence(
        context.family, context.chain, context.config.spectrum.grid_convergence
    )
    table = [
        {"N": row.N, "gamma": row.gamma, "difference": row.difference, "ratio": row.ratio}
        for row in rows
    ]
    context.report.grid_convergence = table
    return table
