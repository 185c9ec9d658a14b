"""Markovian transfer operators on the grid discretization and their spectral data.

The discretized operator acts on functions of (omega_0, x) only:

    (L_t w)(j, x) = sum_i P[i, j] * exp(t * log||M_i x||) * w(i, M_i . x)

with ``w(i, M_i . x)`` read off the grid by linear interpolation. The result
is a sparse (kN x kN) matrix with 2k nonzeros per row.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, sparse
from scipy.sparse import linalg as sparse_linalg

from markov_lyapunov.errors import ConvergenceError, ValidationError
from markov_lyapunov.funcspace import (
    DEFAULT_ALPHA,
    DEFAULT_THETA,
    GridFunction,
    grid_angles,
    holder_seminorm,
    interpolation_weights,
    sup_norm,
)
from markov_lyapunov.linalg import MatrixFamily
from markov_lyapunov.markov import MarkovChainSpec
from markov_lyapunov.projective import act_on_angles

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 1024
DEFAULT_T_MAX = 0.5
POWER_TOLERANCE = 1e-12
POWER_MAX_ITER = 100_000
MEASURE_TOLERANCE = 1e-14
MEASURE_MAX_ITER = 20_000
PERIOD_TWO_TOLERANCE = 1e-9
GAP_WINDOW = (10, 40)
GAP_FLOOR = 1e-13
NO_GAP_RATE = 0.99
NO_CONTRACTION_DELTA = 0.99
CONVERGENCE_SIZES = (256, 512, 1024, 2048)

FLAG_NON_SIMPLE = "possible-non-simple-leading-eigenvalue"
FLAG_NO_GAP = "no-gap"
FLAG_UPPER_BOUND = "rate-is-upper-bound"
FLAG_NO_CONTRACTION = "no-contraction"
FLAG_DIRECT_SOLVE = "direct-solve-fallback"


@dataclass(frozen=True, eq=False)
class GridGeometry:
    """Where each symbol's matrix sends every grid node, and the log-gain there."""

    N: int
    left: np.ndarray
    right: np.ndarray
    fraction: np.ndarray
    gains: np.ndarray
    image_angles: np.ndarray

    @classmethod
    def build(cls, family: MatrixFamily, N: int) -> "GridGeometry":
        angles = grid_angles(N)
        images, gains = zip(*(act_on_angles(m.entries, angles) for m in family.matrices))
        image_angles = np.stack(images)
        left, right, fraction = interpolation_weights(image_angles, N)
        return cls(
            N=N,
            left=left,
            right=right,
            fraction=fraction,
            gains=np.stack(gains),
            image_angles=image_angles,
        )


class TransferOperator:
    """Discretized L_t (parametric weight) or L_g (general grid weight)."""

    def __init__(
        self,
        family: MatrixFamily,
        chain: MarkovChainSpec,
        grid_size: int = DEFAULT_GRID_SIZE,
        *,
        t: complex = 0.0,
        g: Optional[GridFunction] = None,
        alpha: float = DEFAULT_ALPHA,
        theta: float = DEFAULT_THETA,
        geometry: Optional[GridGeometry] = None,
    ) -> None:
        if family.dim != 2:
            raise ValidationError.unsupported_dimension("transfer operator", family.dim)
        if family.k != chain.k:
            raise ValidationError.dimension_mismatch("number of symbols", chain.k, family.k)
        if grid_size < 2:
            raise ValidationError.invalid_parameter("grid_size", "must be at least 2")
        if g is not None and (g.k, g.N) != (family.k, grid_size):
            raise ValidationError.dimension_mismatch(
                "weight function shape", (family.k, grid_size), (g.k, g.N)
            )
        self.family = family
        self.chain = chain
        self.N = int(grid_size)
        self.t = t
        self.g = g
        self.alpha = alpha
        self.theta = theta
        self.geometry = geometry or GridGeometry.build(family, self.N)
        self.matrix = self._assemble()

    @property
    def k(self) -> int:
        return self.family.k

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.source_weights())

    def at(self, t: complex) -> "TransferOperator":
        """The parametric operator at another t, sharing the grid geometry."""

        return TransferOperator(
            self.family,
            self.chain,
            self.N,
            t=t,
            alpha=self.alpha,
            theta=self.theta,
            geometry=self.geometry,
        )

    def source_weights(self) -> np.ndarray:
        """exp(weight) attached to each preimage (i, M_i . x_m), shape (k, N)."""

        if self.g is not None:
            symbols = np.repeat(np.arange(self.k)[:, None], self.N, axis=1)
            return np.exp(self.g.sample(symbols, self.geometry.image_angles))
        t = complex(self.t)
        if t.imag == 0.0:
            return np.exp(t.real * self.geometry.gains)
        return np.exp(t * self.geometry.gains)

    def _assemble(self) -> sparse.csr_matrix:
        k, N = self.k, self.N
        geo = self.geometry
        weights = self.source_weights()
        # coefficient[j, i, m] = P[i, j] * weight[i, m]
        coefficient = self.chain.P.T[:, :, None] * weights[None, :, :]
        rows = np.broadcast_to(
            (np.arange(k)[:, None, None] * N + np.arange(N)[None, None, :]), (k, k, N)
        )
        column_base = (np.arange(k) * N)[None, :, None]
        left_cols = np.broadcast_to(column_base + geo.left[None, :, :], (k, k, N))
        right_cols = np.broadcast_to(column_base + geo.right[None, :, :], (k, k, N))
        data = np.concatenate(
            [
                (coefficient * (1.0 - geo.fraction)[None, :, :]).ravel(),
                (coefficient * geo.fraction[None, :, :]).ravel(),
            ]
        )
        row_index = np.concatenate([rows.ravel(), rows.ravel()])
        col_index = np.concatenate([left_cols.ravel(), right_cols.ravel()])
        matrix = sparse.coo_matrix((data, (row_index, col_index)), shape=(k * N, k * N))
        return matrix.tocsr()

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        return (self.matrix @ values.reshape(-1)).reshape(self.k, self.N)

    def apply(self, w: GridFunction) -> GridFunction:
        if (w.k, w.N) != (self.k, self.N):
            raise ValidationError.dimension_mismatch(
                "grid function shape", (self.k, self.N), (w.k, w.N)
            )
        return w.with_values(self.apply_values(w.values))

    def constant(self, value: float = 1.0) -> GridFunction:
        return GridFunction.constant(self.k, self.N, value, alpha=self.alpha, theta=self.theta)

    def function(self, values: np.ndarray) -> GridFunction:
        return GridFunction(values, alpha=self.alpha, theta=self.theta)


def apply(op: TransferOperator, w: GridFunction) -> GridFunction:
    return op.apply(w)


def is_normalized(op: TransferOperator, tolerance: float = 1e-12) -> bool:
    """Whether the operator with the real part of its weight fixes the constant 1."""

    real_weights = np.abs(op.source_weights())
    row_sums = op.chain.P.T @ real_weights
    return bool(np.max(np.abs(row_sums - 1.0)) <= tolerance)


@dataclass
class EigenResult:
    beta: float
    eigfun: GridFunction
    iterations: int
    trace: List[float] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)


def leading_eigenvalue(
    op: TransferOperator,
    t: Optional[float] = None,
    *,
    tolerance: float = POWER_TOLERANCE,
    max_iter: int = POWER_MAX_ITER,
    t_max: float = DEFAULT_T_MAX,
) -> EigenResult:
    """Perron root beta(t) and positive eigenfunction by sup-normalized power iteration."""

    if t is not None:
        if isinstance(t, complex) and t.imag != 0.0:
            raise ValidationError.invalid_parameter("t", "must be real")
        op = op.at(float(np.real(t)))
    if op.is_complex:
        raise ValidationError.invalid_parameter("t", "power iteration needs a real weight")
    if t_max is not None and op.g is None and abs(complex(op.t)) > t_max:
        raise ValidationError.invalid_parameter("t", f"|t| must not exceed t_max={t_max}")

    v = np.ones(op.k * op.N)
    trace: List[float] = []
    flags: List[str] = []
    for iteration in range(1, max_iter + 1):
        u = op.matrix @ v
        ratio = float(np.max(np.abs(u)))
        if not np.isfinite(ratio) or ratio == 0.0:
            raise ConvergenceError.no_convergence("leading_eigenvalue", iteration, trace)
        v = u / ratio
        trace.append(ratio)
        if iteration % 1000 == 0:
            logger.debug("power iteration %d: ratio %.15g", iteration, ratio)
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) < tolerance * max(1.0, ratio):
            break
        if (
            len(trace) >= 100
            and abs(trace[-1] - trace[-3]) < PERIOD_TWO_TOLERANCE
            and abs(trace[-2] - trace[-4]) < PERIOD_TWO_TOLERANCE
            and abs(trace[-1] - trace[-2]) > 1e3 * PERIOD_TWO_TOLERANCE
        ):
            ratio = 0.5 * (trace[-1] + trace[-2])
            flags.append(FLAG_NON_SIMPLE)
            logger.warning("Power iteration oscillates with period 2; averaging")
            break
    else:
        raise ConvergenceError.no_convergence("leading_eigenvalue", max_iter, trace)

    eigfun = np.abs(v.reshape(op.k, op.N))
    eigfun /= eigfun.max()
    return EigenResult(
        beta=ratio,
        eigfun=op.function(eigfun),
        iterations=len(trace),
        trace=trace,
        flags=flags,
    )


@dataclass(frozen=True, eq=False)
class EigenMeasure:
    """Fixed measure of the adjoint of L_0, as node masses summing to one."""

    weights: np.ndarray
    iterations: int = 0
    flags: Tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return int(self.weights.shape[0])

    @property
    def N(self) -> int:
        return int(self.weights.shape[1])

    @property
    def masses(self) -> np.ndarray:
        """Per-symbol masses q_i."""
        return self.weights.sum(axis=1)

    @property
    def angle_marginal(self) -> np.ndarray:
        return self.weights.sum(axis=0)


def _direct_fixed_point(adjoint: sparse.csr_matrix) -> np.ndarray:
    size = adjoint.shape[0]
    system = (adjoint - sparse.identity(size, format="csr")).tolil()
    system[size - 1, :] = np.ones(size)
    rhs = np.zeros(size)
    rhs[-1] = 1.0
    return sparse_linalg.spsolve(system.tocsc(), rhs)


def eigenmeasure(
    op: TransferOperator,
    *,
    tolerance: float = MEASURE_TOLERANCE,
    max_iter: int = MEASURE_MAX_ITER,
) -> EigenMeasure:
    """Power iteration on the transposed L_0; falls back to a direct sparse solve."""

    if op.g is not None or complex(op.t) != 0.0:
        op = op.at(0.0)
    adjoint = op.matrix.T.tocsr()
    size = op.k * op.N
    nu = np.full(size, 1.0 / size)
    for iteration in range(1, max_iter + 1):
        updated = adjoint @ nu
        updated /= updated.sum()
        change = float(np.abs(updated - nu).sum())
        nu = updated
        if change < tolerance:
            logger.info("Eigenmeasure converged after %d iterations", iteration)
            return EigenMeasure(weights=nu.reshape(op.k, op.N), iterations=iteration)

    logger.warning(
        "Eigenmeasure power iteration stalled after %d iterations; solving directly",
        max_iter,
    )
    try:
        direct = _direct_fixed_point(adjoint)
    except RuntimeError:
        direct = None
    if direct is None or not np.all(np.isfinite(direct)) or direct.min() < -1e-10:
        raise ConvergenceError.no_convergence("eigenmeasure", max_iter, [change])
    direct = np.clip(direct, 0.0, None)
    direct /= direct.sum()
    return EigenMeasure(
        weights=direct.reshape(op.k, op.N),
        iterations=max_iter,
        flags=(FLAG_DIRECT_SOLVE,),
    )


def q_projection(nu: EigenMeasure, w: GridFunction) -> complex:
    """Quadrature of w against nu."""

    if (nu.k, nu.N) != (w.k, w.N):
        raise ValidationError.dimension_mismatch("grid shapes", (nu.k, nu.N), (w.k, w.N))
    value = np.sum(nu.weights * w.values)
    return value.item()


@dataclass
class ProbeDecay:
    rate: float
    residuals: List[float]
    upper_bound: bool = False


@dataclass
class SpectralGapResult:
    rate: float
    probes: List[ProbeDecay]
    flags: List[str] = field(default_factory=list)

    @property
    def has_gap(self) -> bool:
        return FLAG_NO_GAP not in self.flags


def _fit_rate(residuals: Sequence[float], window: Tuple[int, int]) -> Tuple[float, bool]:
    first, last = window
    ns = np.arange(1, len(residuals) + 1)
    r = np.asarray(residuals)
    mask = (ns >= first) & (ns <= last) & (r > GAP_FLOOR)
    if mask.sum() >= 2:
        slope = np.polyfit(ns[mask], np.log(r[mask]), 1)[0]
        return float(min(np.exp(slope), 1.0)), False
    # residuals fell below the floor: report the decay observed so far as a bound
    above = (r > GAP_FLOOR) & (ns <= last)
    if not above.any():
        return 0.0, True
    n_last = int(ns[above][-1])
    return float((GAP_FLOOR / r[0]) ** (1.0 / n_last)) if r[0] > 0 else 0.0, True


def spectral_gap(
    op: TransferOperator,
    probes: Sequence[GridFunction],
    n_max: int = GAP_WINDOW[1],
    *,
    window: Tuple[int, int] = GAP_WINDOW,
    nu: Optional[EigenMeasure] = None,
) -> SpectralGapResult:
    """Fit the decay rate of sup|L_0^n w - Q w| over the window of n."""

    if not probes:
        raise ValidationError.invalid_parameter("probes", "need at least one probe")
    op0 = op if (op.g is None and complex(op.t) == 0.0) else op.at(0.0)
    nu = nu or eigenmeasure(op0)
    window = (window[0], min(window[1], n_max))
    results: List[ProbeDecay] = []
    for probe in probes:
        projected = q_projection(nu, probe)
        values = probe.values
        residuals: List[float] = []
        for _ in range(n_max):
            values = op0.apply_values(values)
            residuals.append(float(np.max(np.abs(values - projected))))
        rate, bound = _fit_rate(residuals, window)
        results.append(ProbeDecay(rate=rate, residuals=residuals, upper_bound=bound))

    rate = max(result.rate for result in results)
    flags: List[str] = []
    if all(result.upper_bound for result in results):
        flags.append(FLAG_UPPER_BOUND)
    if rate >= NO_GAP_RATE:
        flags.append(FLAG_NO_GAP)
        logger.warning("No spectral gap detected: fitted rate %.6f", rate)
    return SpectralGapResult(rate=rate, probes=results, flags=flags)


def lyapunov_via_perturbation(op: TransferOperator, nu: EigenMeasure) -> float:
    """gamma = integral of sum_i P[i, j] log||M_i x|| against nu."""

    expected_gain = op.chain.P.T @ op.geometry.gains
    return float(np.sum(nu.weights * expected_gain))


@dataclass
class DerivativeEstimate:
    raw: float
    raw_half: float
    extrapolated: float
    step: float
    betas: Dict[str, float] = field(default_factory=dict)

    @property
    def value(self) -> float:
        return self.extrapolated


def lyapunov_via_beta_derivative(op: TransferOperator, h: float = 1e-3) -> DerivativeEstimate:
    """Central difference of log beta at 0 with one Richardson level."""

    if not 1e-5 <= h <= 1e-1:
        raise ValidationError.invalid_parameter("h", "must lie in [1e-5, 1e-1]")

    def log_beta(t: float) -> float:
        return float(np.log(leading_eigenvalue(op, t).beta))

    values = {step: log_beta(step) for step in (h, -h, h / 2, -h / 2)}
    raw = (values[h] - values[-h]) / (2 * h)
    raw_half = (values[h / 2] - values[-h / 2]) / h
    extrapolated = (4.0 * raw_half - raw) / 3.0
    return DerivativeEstimate(
        raw=raw,
        raw_half=raw_half,
        extrapolated=extrapolated,
        step=h,
        betas={repr(step): float(np.exp(value)) for step, value in values.items()},
    )


@dataclass
class PressurePoint:
    t: float
    beta: float
    log_beta: float


def pressure_curve(
    op: TransferOperator, t_values: Sequence[float], *, t_max: float = DEFAULT_T_MAX
) -> List[PressurePoint]:
    points = []
    for t in t_values:
        beta = leading_eigenvalue(op, float(t), t_max=t_max).beta
        points.append(PressurePoint(t=float(t), beta=beta, log_beta=float(np.log(beta))))
    return points


@dataclass
class LasotaYorkeResult:
    trajectory: List[Tuple[int, float, float]]
    constant: float
    delta: float
    envelope_constant: float
    sup_norm_contracts: Optional[bool] = None
    flags: List[str] = field(default_factory=list)


def _fit_lasota_yorke(
    ns: np.ndarray, seminorms: np.ndarray, sup0: float, semi0: float
) -> Tuple[float, float]:
    scale = max(float(seminorms.max()), semi0, 1e-300)

    def residuals(params: np.ndarray) -> np.ndarray:
        constant, delta = params
        model = constant * sup0 + delta**ns * semi0
        # small ridge on C so a flat trajectory is read as delta ~ 1, not as C
        return np.append((model - seminorms) / scale, 1e-3 * constant * sup0 / scale)

    best = None
    for delta0 in (0.1, 0.5, 0.9, 0.99):
        fit = optimize.least_squares(
            residuals, x0=[0.0, delta0], bounds=([0.0, 0.0], [np.inf, 2.0])
        )
        if best is None or fit.cost < best.cost:
            best = fit
    return float(best.x[0]), float(best.x[1])


def lasota_yorke_probe(op: TransferOperator, w: GridFunction, n_max: int = 30) -> LasotaYorkeResult:
    """Trajectory of (n, |L^n w|_inf, |L^n w|_{theta,alpha}) and the fitted (C, delta)."""

    t = complex(op.t)
    if op.g is None and t.real != 0.0 and t.imag != 0.0:
        raise ValidationError.invalid_parameter("t", "must be real or purely imaginary")
    sup0 = sup_norm(w)
    semi0 = holder_seminorm(w)
    trajectory: List[Tuple[int, float, float]] = []
    current = w
    for n in range(1, n_max + 1):
        current = op.apply(current)
        trajectory.append((n, sup_norm(current), holder_seminorm(current)))

    flags: List[str] = []
    ns = np.array([row[0] for row in trajectory], dtype=float)
    seminorms = np.array([row[2] for row in trajectory])
    if semi0 == 0.0 and seminorms.max() == 0.0:
        constant, delta, envelope = 0.0, 0.0, 0.0
    else:
        constant, delta = _fit_lasota_yorke(ns, seminorms, sup0, semi0)
        excess = np.clip(seminorms - delta**ns * semi0, 0.0, None)
        envelope = float(excess.max() / sup0) if sup0 > 0 else 0.0
        if delta >= NO_CONTRACTION_DELTA:
            flags.append(FLAG_NO_CONTRACTION)
            logger.warning("Lasota-Yorke fit shows no contraction: delta=%.4f", delta)

    sup_norm_contracts = None
    if op.g is None and t.real == 0.0 and t.imag != 0.0:
        sup_norm_contracts = all(row[1] <= sup0 + 1e-12 for row in trajectory)
    return LasotaYorkeResult(
        trajectory=trajectory,
        constant=constant,
        delta=delta,
        envelope_constant=max(envelope, constant),
        sup_norm_contracts=sup_norm_contracts,
        flags=flags,
    )


@dataclass
class GridConvergenceRow:
    N: int
    gamma: float
    difference: Optional[float] = None
    ratio: Optional[float] = None


def grid_convergence(
    family: MatrixFamily,
    chain: MarkovChainSpec,
    sizes: Sequence[int] = CONVERGENCE_SIZES,
) -> List[GridConvergenceRow]:
    """gamma by the perturbation route at each grid size, with successive differences."""

    rows: List[GridConvergenceRow] = []
    for N in sizes:
        op = TransferOperator(family, chain, N)
        gamma = lyapunov_via_perturbation(op, eigenmeasure(op))
        difference = abs(gamma - rows[-1].gamma) if rows else None
        previous = rows[-1].difference if rows else None
        ratio = difference / previous if difference is not None and previous else None
        rows.append(
            GridConvergenceRow(N=int(N), gamma=gamma, difference=difference, ratio=ratio)
        )
        logger.info("Grid N=%d: gamma=%.10f", N, gamma)
    return rows
