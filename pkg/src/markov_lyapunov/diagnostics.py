"""Heuristic probes of the hypotheses behind the spectral and ergodic routes.

Every verdict here is empirical: a probe can falsify a hypothesis on the
sampled data but never certifies it.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from markov_lyapunov.errors import ValidationError
from markov_lyapunov.funcspace import GridFunction, holder_seminorm, sup_norm
from markov_lyapunov.linalg import MatrixFamily
from markov_lyapunov.markov import MarkovChainSpec, sample_paths
from markov_lyapunov.montecarlo import simulate_products, spawn_generators
from markov_lyapunov.projective import (
    act_on_angles,
    angle_distance,
    canonicalize,
    random_points,
)
from markov_lyapunov.transfer import EigenMeasure, TransferOperator

logger = logging.getLogger(__name__)

VERDICT_PASS = "pass"
VERDICT_FAIL = "fail"
VERDICT_INCONCLUSIVE = "inconclusive"

CLOSURE_TOLERANCE = 1e-8
CLOSURE_CAP = 64
ATOM_THRESHOLD = 0.05
DEFAULT_EPS_GRID = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
BOUND_SLACK = 1e-9


def _require_2d(operation: str, family: MatrixFamily) -> None:
    if family.dim != 2:
        raise ValidationError.unsupported_dimension(operation, family.dim)


def _pair_metric(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    inner = np.sum(x * y, axis=-1) / (np.linalg.norm(x, axis=-1) * np.linalg.norm(y, axis=-1))
    return np.sqrt(np.clip(1.0 - inner * inner, 0.0, None))


@dataclass
class ContractionRow:
    n: int
    ratio: float
    rate: float


def _stratified_pairs(rng: np.random.Generator, pairs: int, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    x = random_points(rng, pairs, dim)
    direction = random_points(rng, pairs, dim)
    direction -= np.sum(direction * x, axis=1, keepdims=True) * x
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    # separations spread log-uniformly between 1e-4 and pi/2
    separation = np.exp(rng.uniform(np.log(1e-4), np.log(np.pi / 2), size=pairs))
    y = np.cos(separation)[:, None] * x + np.sin(separation)[:, None] * direction
    return x, y


def contraction_average(
    family: MatrixFamily,
    chain: MarkovChainSpec,
    n: int,
    pairs: int,
    seed: int,
    *,
    alpha: float = 0.5,
    paths: int = 64,
) -> List[ContractionRow]:
    """Max over pairs of E[d^alpha(psi(m) x, psi(m) y)] / d^alpha(x, y) for m = 1..n."""

    if pairs < 100:
        raise ValidationError.invalid_parameter("pairs", "must be at least 100")
    rngs = spawn_generators(seed, paths + 1)
    x, y = _stratified_pairs(rngs[0], pairs, family.dim)
    base = _pair_metric(x, y) ** alpha
    stack = family.stack()
    symbols = sample_paths(chain, n, rngs[1:])
    products = np.broadcast_to(np.eye(family.dim), (paths,) + stack.shape[1:]).copy()
    rows: List[ContractionRow] = []
    for step in range(n):
        products = products @ stack[symbols[:, step]]
        products /= np.linalg.norm(products, ord=2, axis=(1, 2))[:, None, None]
        moved_x = np.einsum("pij,qj->pqi", products, x)
        moved_y = np.einsum("pij,qj->pqi", products, y)
        ratios = (_pair_metric(moved_x, moved_y) ** alpha).mean(axis=0) / base
        worst = float(ratios.max())
        rows.append(ContractionRow(n=step + 1, ratio=worst, rate=worst ** (1.0 / (step + 1))))
    return rows


@dataclass
class IndexStatistics:
    """sigma_2 / sigma_1 of psi(n), plus the median at 2n for the decay fit."""

    n: int
    ratios: np.ndarray
    median: float
    minimum: float
    maximum: float
    contracting: Optional[bool]
    median_doubled: float = float("nan")

    @property
    def decay_rate(self) -> float:
        """Per-step log decay of the median between n and 2n."""
        return float(np.log(self.median_doubled / self.median) / self.n)

    def to_dict(self) -> Dict[str, object]:
        return {
            "n": self.n,
            "median": self.median,
            "median_2n": self.median_doubled,
            "decay_rate": self.decay_rate,
            "min": self.minimum,
            "max": self.maximum,
            "contracting": self.contracting,
        }


def _index_ratios(
    family: MatrixFamily, chain: MarkovChainSpec, n: int, samples: int, seed: int
) -> np.ndarray:
    products, _, _ = simulate_products(family, chain, n, spawn_generators(seed, samples))
    singular = np.linalg.svd(products, compute_uv=False)
    return np.maximum(singular[:, 1] / singular[:, 0], np.finfo(float).tiny)


def index_probe(
    family: MatrixFamily,
    chain: MarkovChainSpec,
    n: int,
    samples: int,
    seed: int,
    *,
    contracting_threshold: float = 1e-4,
) -> IndexStatistics:
    """Distribution of sigma_2 / sigma_1 over sampled products psi(n).

    The same streams are run again to 2n; each path keeps its first n symbols,
    so the two medians give a decay rate free of the O(1) prefactor. For d = 2
    the verdict is contracting when the median shrinks and ends below
    ``contracting_threshold`` at 2n; larger d is reported without a verdict.
    """

    ratios = _index_ratios(family, chain, n, samples, seed)
    doubled = _index_ratios(family, chain, 2 * n, samples, seed)
    median = float(np.median(ratios))
    median_doubled = float(np.median(doubled))
    contracting = None
    if family.dim == 2:
        contracting = bool(median_doubled < min(median, contracting_threshold))
    return IndexStatistics(
        n=n,
        ratios=ratios,
        median=median,
        minimum=float(ratios.min()),
        maximum=float(ratios.max()),
        contracting=contracting,
        median_doubled=median_doubled,
    )


@dataclass
class PropernessReport:
    eps_grid: List[float]
    centers: List[float]
    masses: np.ndarray
    atom_detected: bool
    max_mass_at_smallest_eps: float

    @property
    def proper(self) -> bool:
        return not self.atom_detected

    def to_dict(self) -> Dict[str, object]:
        return {
            "eps_grid": self.eps_grid,
            "max_mass": [float(v) for v in self.masses.max(axis=0)],
            "atom_detected": self.atom_detected,
            "max_mass_at_smallest_eps": self.max_mass_at_smallest_eps,
        }


def properness_probe(
    nu: EigenMeasure,
    directions: int,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    *,
    heaviest: int = 8,
    atom_threshold: float = ATOM_THRESHOLD,
) -> PropernessReport:
    """nu-mass of d_X-balls around sampled lines for every radius in ``eps_grid``.

    Centres are ``directions`` evenly spaced lines plus the ``heaviest`` nodes
    of nu, so atoms are always probed.
    """

    eps_grid = sorted((float(e) for e in eps_grid), reverse=True)
    N = nu.N
    node_angles = np.arange(N) * (np.pi / N)
    marginal = nu.angle_marginal
    spaced = np.arange(directions) * (np.pi / max(directions, 1))
    heavy = node_angles[np.argsort(marginal)[::-1][:heaviest]]
    centers = np.concatenate([spaced, heavy])
    distance = angle_distance(centers[:, None], node_angles[None, :])
    masses = np.stack(
        [(marginal[None, :] * (distance < eps)).sum(axis=1) for eps in eps_grid], axis=1
    )
    smallest = float(masses[:, -1].max())
    atom = smallest > atom_threshold
    if atom:
        logger.warning("Properness probe found an atom of mass %.4f", smallest)
    return PropernessReport(
        eps_grid=list(eps_grid),
        centers=[float(c) for c in centers],
        masses=masses,
        atom_detected=atom,
        max_mass_at_smallest_eps=smallest,
    )


@dataclass
class IrreducibilityVerdict:
    verdict: str
    witness: List[Tuple[float, ...]] = field(default_factory=list)
    orbit_size: int = 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "verdict": self.verdict,
            "witness": [list(line) for line in self.witness],
            "orbit_size": self.orbit_size,
            "heuristic": True,
        }


def _real_eigenlines(matrix: np.ndarray) -> List[np.ndarray]:
    values, vectors = np.linalg.eig(matrix)
    lines = []
    for index in range(values.size):
        if abs(values[index].imag) <= 1e-12 * max(1.0, abs(values[index])):
            vector = vectors[:, index].real
            if np.linalg.norm(vector) > 1e-8:
                lines.append(vector)
    return lines


def _contains(lines: Sequence[np.ndarray], line: np.ndarray, tolerance: float) -> bool:
    if len(lines) == 0:
        return False
    return bool(np.any(_pair_metric(np.asarray(lines), line) < tolerance))


def _orbit(
    stack: np.ndarray, start: np.ndarray, cap: int, tolerance: float
) -> Tuple[bool, List[np.ndarray]]:
    """Breadth-first orbit of one line under every M_i; closed if it stays within ``cap``."""

    found = [start]
    frontier = [start]
    while frontier:
        line = frontier.pop(0)
        for matrix in stack:
            image = canonicalize(matrix @ line)[0]
            if not _contains(found, image, tolerance):
                found.append(image)
                frontier.append(image)
                if len(found) > cap:
                    return False, found
    return True, found


def irreducibility_heuristic(
    family: MatrixFamily,
    *,
    max_length: int = 4,
    cap: int = CLOSURE_CAP,
    tolerance: float = CLOSURE_TOLERANCE,
) -> IrreducibilityVerdict:
    """Search for a finite set of lines closed under every M_i.

    Seeds are the real eigenlines of all products up to ``max_length``; when no
    product has a real eigenline the orbit of e_1 is used, and an unbounded
    orbit is then inconclusive. Each seed's orbit is closed on its own, and the
    witness is the union of every orbit that closes within ``cap`` lines.
    """

    _require_2d("irreducibility_heuristic", family)
    stack = family.stack()
    seeds: List[np.ndarray] = []
    for length in range(1, max_length + 1):
        for word in itertools.product(range(family.k), repeat=length):
            product = np.eye(2)
            for symbol in word:
                product = product @ stack[symbol]
            seeds.extend(_real_eigenlines(product))
    from_eigenlines = bool(seeds)
    if not seeds:
        seeds = [np.array([1.0, 0.0])]
    witness: List[np.ndarray] = []
    explored: List[np.ndarray] = []
    largest = 0
    for seed_line in seeds:
        start = canonicalize(seed_line)[0]
        if _contains(explored, start, tolerance):
            continue
        explored.append(start)
        closed, orbit = _orbit(stack, start, cap, tolerance)
        largest = max(largest, len(orbit))
        if closed:
            witness.extend(line for line in orbit if not _contains(witness, line, tolerance))
    if witness:
        logger.warning("Found %d lines invariant under the family", len(witness))
        return IrreducibilityVerdict(
            verdict=VERDICT_FAIL,
            witness=[tuple(float(v) for v in line) for line in witness],
            orbit_size=len(witness),
        )
    verdict = VERDICT_PASS if from_eigenlines else VERDICT_INCONCLUSIVE
    return IrreducibilityVerdict(verdict=verdict, orbit_size=largest)


@dataclass
class BoundCheck:
    passed: bool
    max_excess: float
    samples: int

    def to_dict(self) -> Dict[str, object]:
        return {"passed": self.passed, "max_excess": self.max_excess, "samples": self.samples}


def ell_product_bound_check(
    family: MatrixFamily,
    chain: MarkovChainSpec,
    n: int,
    samples: int,
    seed: int,
) -> BoundCheck:
    """ell(psi(n)) <= n K on sampled products."""

    products, log_scale, _ = simulate_products(family, chain, n, spawn_generators(seed, samples))
    singular = np.linalg.svd(products, compute_uv=False)
    log_top = np.log(singular[:, 0]) + log_scale
    log_bottom = np.log(singular[:, -1]) + log_scale
    ells = np.maximum(0.0, np.maximum(log_top, -log_bottom))
    excess = ells - n * family.K
    max_excess = float(excess.max())
    return BoundCheck(passed=bool(max_excess <= BOUND_SLACK), max_excess=max_excess, samples=samples)


def det_closure_check(family: MatrixFamily, chain: MarkovChainSpec) -> float:
    """gamma_1 + gamma_2 = sum_i pi_i log|det M_i| for d = 2."""

    _require_2d("det_closure_check", family)
    log_dets = np.log(np.abs(np.linalg.det(family.stack())))
    return float(np.dot(chain.pi, log_dets))


@dataclass
class ExponentGap:
    gamma1: float
    gamma2: float
    sum_exact: float

    @property
    def strict(self) -> bool:
        return self.gamma2 < self.gamma1


def exponent_gap(family: MatrixFamily, chain: MarkovChainSpec, gamma1: float) -> ExponentGap:
    total = det_closure_check(family, chain)
    return ExponentGap(gamma1=gamma1, gamma2=total - gamma1, sum_exact=total)


@dataclass
class GapConsistency:
    observed_median: float
    observed_decay: float
    predicted: float
    consistent: bool

    def to_dict(self) -> Dict[str, object]:
        return {
            "observed_median": self.observed_median,
            "observed_decay": self.observed_decay,
            "predicted": self.predicted,
            "consistent": self.consistent,
        }


def gap_consistency(
    stats: IndexStatistics, gamma1: float, gamma2: float, band: float = 3.0
) -> GapConsistency:
    """Compare the decay of the index median over n steps with exp((gamma_2 - gamma_1) n).

    The observed decay is median(2n) / median(n), so the constant in front of
    sigma_2 / sigma_1 cancels.
    """

    predicted = float(np.exp((gamma2 - gamma1) * stats.n))
    observed = stats.median_doubled / stats.median
    ratio = observed / predicted if predicted > 0 else np.inf
    return GapConsistency(
        observed_median=stats.median,
        observed_decay=float(observed),
        predicted=predicted,
        consistent=bool(1.0 / band <= ratio <= band),
    )


@dataclass
class HolderCheck:
    constant: float
    max_ratio: float
    passed: bool


def _random_family_samples(
    rng: np.random.Generator, count: int, dim: int, spread: float
) -> np.ndarray:
    while True:
        matrices = rng.uniform(-spread, spread, size=(count, dim, dim))
        if np.all(np.abs(np.linalg.det(matrices)) > 1e-3):
            return matrices


def _matrix_ells(matrices: np.ndarray) -> np.ndarray:
    singular = np.linalg.svd(matrices, compute_uv=False)
    return np.maximum(0.0, np.maximum(np.log(singular[:, 0]), -np.log(singular[:, -1])))


def _holder_ratios(
    matrices: np.ndarray, rng: np.random.Generator, alpha: float, t: Optional[complex]
) -> np.ndarray:
    count, dim = matrices.shape[0], matrices.shape[1]
    x, y = _stratified_pairs(rng, count, dim)
    gx = np.log(np.linalg.norm(np.einsum("cij,cj->ci", matrices, x), axis=1))
    gy = np.log(np.linalg.norm(np.einsum("cij,cj->ci", matrices, y), axis=1))
    if t is None:
        numerator = np.abs(gx - gy)
    else:
        numerator = np.abs(np.exp(t * gx) - np.exp(t * gy))
    return numerator / _pair_metric(x, y) ** alpha


def _calibrated_check(
    seed: int, samples: int, alpha: float, t: Optional[complex], spread: float
) -> HolderCheck:
    calibration_rng, test_rng = spawn_generators(seed, 2)
    dim = 2

    def scale(matrices: np.ndarray) -> np.ndarray:
        ells = _matrix_ells(matrices)
        if t is None:
            return ells * np.exp(2 * alpha * ells)
        exponent = (1 + alpha) * abs(complex(t).real) + 2 * alpha
        return np.exp(exponent * ells)

    def normalized(rng: np.random.Generator) -> np.ndarray:
        matrices = _random_family_samples(rng, samples, dim, spread)
        weights = scale(matrices)
        ratios = _holder_ratios(matrices, rng, alpha, t)
        return np.where(weights > 0, ratios / np.where(weights > 0, weights, 1.0), 0.0)

    constant = float(normalized(calibration_rng).max())
    later = normalized(test_rng)
    max_ratio = float(later.max())
    return HolderCheck(
        constant=constant,
        max_ratio=max_ratio,
        passed=bool(max_ratio <= 10.0 * constant),
    )


def log_gain_holder_check(
    seed: int, samples: int = 1000, alpha: float = 0.5, spread: float = 5.0
) -> HolderCheck:
    """|log||Mx|| - log||My||| / d^alpha(x, y) <= c ell(M) e^{2 alpha ell(M)}.

    c is the maximum over a calibration set and then frozen; later samples
    must stay below 10c.
    """

    return _calibrated_check(seed, samples, alpha, None, spread)


def exp_gain_holder_check(
    seed: int, t: complex, samples: int = 1000, alpha: float = 0.5, spread: float = 5.0
) -> HolderCheck:
    """The same calibrate-then-freeze check for the weight e^{t log||Mx||}."""

    return _calibrated_check(seed, samples, alpha, t, spread)


@dataclass
class WeightedBoundCheck:
    sup_norm_ok: bool
    seminorm_ok: bool
    sup_ratio: float
    seminorm_ratio: float


def weighted_operator_bound_check(
    op: TransferOperator, w: GridFunction, *, slack: float = 1.5
) -> WeightedBoundCheck:
    """Check the sup-norm and seminorm bounds for one application of L_g.

    With ``E = e^g`` the bounds are |L_g w|_inf <= |E|_inf |w|_inf and
    |L_g w|_{theta,alpha} <= [2|E|_inf + (theta + e^{4 alpha K})|E|_{theta,alpha}] |w|_inf
    + (theta + e^{4 alpha K}) |E|_inf |w|_{theta,alpha}; ``slack`` absorbs the
    interpolation error of the grid.
    """

    image = op.apply(w)
    if op.g is not None:
        exp_g = op.g.with_values(np.exp(op.g.values))
    else:
        # the parametric weight is g(i, y) = -t log||M_i^{-1} y||
        angles = np.arange(op.N) * (np.pi / op.N)
        inverse_gains = np.stack(
            [act_on_angles(m.inverse(), angles)[1] for m in op.family.matrices]
        )
        exp_g = GridFunction(
            np.exp(-complex(op.t) * inverse_gains), alpha=op.alpha, theta=op.theta
        )
    exp_sup = sup_norm(exp_g)
    exp_semi = holder_seminorm(exp_g)
    distortion = op.theta + np.exp(4 * op.alpha * op.family.K)
    sup_bound = exp_sup * sup_norm(w) * (1 + 1e-12)
    semi_bound = (2 * exp_sup + distortion * exp_semi) * sup_norm(w) + distortion * exp_sup * holder_seminorm(w)
    image_sup = sup_norm(image)
    image_semi = holder_seminorm(image)
    return WeightedBoundCheck(
        sup_norm_ok=bool(image_sup <= sup_bound),
        seminorm_ok=bool(image_semi <= slack * semi_bound),
        sup_ratio=image_sup / sup_bound if sup_bound > 0 else 0.0,
        seminorm_ratio=image_semi / semi_bound if semi_bound > 0 else 0.0,
    )

