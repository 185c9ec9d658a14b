"""Simulation-based estimators of the top exponent and the exact enumeration oracle."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from markov_lyapunov.errors import ValidationError
from markov_lyapunov.linalg import MatrixFamily
from markov_lyapunov.markov import MarkovChainSpec, sample_paths
from markov_lyapunov.projective import ProjPoint, random_points

logger = logging.getLogger(__name__)

RENORMALIZE_EVERY = 32
ENUMERATION_BUDGET = 10_000_000
DEFAULT_BLOCKS = 20

METHOD_SUBADDITIVE = "subadditive"
METHOD_FURSTENBERG = "furstenberg"


@dataclass
class EstimateResult:
    """A Monte-Carlo estimate of gamma with its error bar and convergence trace."""

    gamma_hat: float
    std_error: float
    n_steps: int
    n_replicas: int
    method: str
    trace: List[float] = field(default_factory=list)
    trace_steps: List[int] = field(default_factory=list)
    heuristic_error: bool = False

    def __post_init__(self) -> None:
        if self.std_error < 0:
            raise ValidationError.invalid_parameter("std_error", "must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "gamma_hat": self.gamma_hat,
            "std_error": self.std_error,
            "n_steps": self.n_steps,
            "n_replicas": self.n_replicas,
            "heuristic_error": self.heuristic_error,
        }


def spawn_generators(seed: int, count: int) -> List[np.random.Generator]:
    """One independent stream per replica, derived from (seed, replica index)."""

    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(count)]


def _map_chunks(
    func: Callable[[Sequence[np.random.Generator]], Tuple[np.ndarray, ...]],
    rngs: Sequence[np.random.Generator],
    workers: int,
) -> Tuple[np.ndarray, ...]:
    """Run ``func`` on contiguous replica chunks and concatenate in replica order."""

    workers = max(1, min(int(workers), len(rngs)))
    bounds = np.linspace(0, len(rngs), workers + 1).astype(int)
    chunks = [rngs[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    if workers == 1:
        parts = [func(chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(func, chunks))
    return tuple(np.concatenate(columns) for columns in zip(*parts))


def _spectral_norms(products: np.ndarray) -> np.ndarray:
    return np.linalg.norm(products, ord=2, axis=(1, 2))


def simulate_products(
    family: MatrixFamily,
    chain: MarkovChainSpec,
    n: int,
    rngs: Sequence[np.random.Generator],
    *,
    checkpoints: Sequence[int] = (),
) -> Tuple[np.ndarray, np.ndarray, List[np.ndarray]]:
    """Products M_{xi_1} ... M_{xi_n} along stationary paths.

    Returns the renormalized products, the accumulated log-scales and
    ``log||psi(m)||`` at every checkpoint m.
    """

    stack = family.stack()
    paths = sample_paths(chain, n, rngs)
    count, dim = paths.shape[0], family.dim
    products = np.broadcast_to(np.eye(dim), (count, dim, dim)).copy()
    log_scale = np.zeros(count)
    wanted = set(int(m) for m in checkpoints)
    recorded: List[np.ndarray] = []
    for step in range(n):
        products = products @ stack[paths[:, step]]
        done = step + 1
        if done % RENORMALIZE_EVERY == 0 or done == n or done in wanted:
            norms = _spectral_norms(products)
            products /= norms[:, None, None]
            log_scale += np.log(norms)
            if done in wanted:
                recorded.append(log_scale.copy())
    return products, log_scale, recorded


def estimate_subadditive(
    family: MatrixFamily,
    chain: MarkovChainSpec,
    n: int,
    replicas: int,
    seed: int,
    *,
    workers: int = 1,
    blocks: int = DEFAULT_BLOCKS,
) -> EstimateResult:
    """Mean over replicas of (1/n) log||psi(n)||."""

    if n < 1:
        raise ValidationError.invalid_parameter("n", "must be at least 1")
    if replicas < 2:
        raise ValidationError.invalid_parameter("replicas", "must be at least 2")
    checkpoints = sorted({max(1, (n * b) // blocks) for b in range(1, blocks + 1)})

    def run(chunk: Sequence[np.random.Generator]) -> Tuple[np.ndarray, ...]:
        _, log_scale, recorded = simulate_products(
            family, chain, n, chunk, checkpoints=checkpoints
        )
        return (log_scale / n, np.stack(recorded, axis=1))

    per_replica, partial_logs = _map_chunks(run, spawn_generators(seed, replicas), workers)
    trace = [float(np.mean(partial_logs[:, b]) / m) for b, m in enumerate(checkpoints)]
    gamma_hat = float(np.mean(per_replica))
    std_error = float(np.std(per_replica, ddof=1) / np.sqrt(replicas))
    logger.info("Subadditive estimate: %.8f +/- %.2e", gamma_hat, std_error)
    return EstimateResult(
        gamma_hat=gamma_hat,
        std_error=std_error,
        n_steps=n,
        n_replicas=replicas,
        method=METHOD_SUBADDITIVE,
        trace=trace,
        trace_steps=list(checkpoints),
    )


def estimate_furstenberg(
    family: MatrixFamily,
    chain: MarkovChainSpec,
    n: int,
    burn_in: int,
    seed: int,
    *,
    replicas: int = 1,
    workers: int = 1,
) -> EstimateResult:
    """Ergodic average of log-gains of the transposed family along the projective chain.

    The error bar is batch means with sqrt(n - burn_in) batches per replica; it
    is a heuristic proxy, flagged as such on the result.
    """

    if not n > burn_in >= 0:
        raise ValidationError.invalid_parameter("burn_in", "need n > burn_in >= 0")
    if replicas < 1:
        raise ValidationError.invalid_parameter("replicas", "must be at least 1")
    effective = n - burn_in
    batch_size = max(1, int(np.floor(np.sqrt(effective))))
    batches = effective // batch_size
    transposed = family.stack().transpose(0, 2, 1)

    def run(chunk: Sequence[np.random.Generator]) -> Tuple[np.ndarray, ...]:
        paths = sample_paths(chain, n, chunk)
        # x_0 comes from a fresh draw after the path so streams stay replica-local
        x = np.stack([random_points(rng, 1, family.dim)[0] for rng in chunk])
        batch_sums = np.zeros((len(chunk), batches))
        totals = np.zeros(len(chunk))
        for step in range(n):
            images = np.einsum("rij,rj->ri", transposed[paths[:, step]], x)
            norms = np.linalg.norm(images, axis=1)
            x = images / norms[:, None]
            if step >= burn_in:
                gains = np.log(norms)
                totals += gains
                index = (step - burn_in) // batch_size
                if index < batches:
                    batch_sums[:, index] += gains
        return (totals, batch_sums)

    totals, batch_sums = _map_chunks(run, spawn_generators(seed, replicas), workers)
    gamma_hat = float(totals.sum() / (replicas * effective))
    batch_means = (batch_sums / batch_size).ravel()
    if batch_means.size >= 2:
        std_error = float(np.std(batch_means, ddof=1) / np.sqrt(batch_means.size))
    else:
        std_error = 0.0
    running = np.cumsum(batch_sums.sum(axis=0)) / (
        replicas * batch_size * np.arange(1, batches + 1)
    )
    logger.info("Furstenberg estimate: %.8f +/- %.2e (batch means)", gamma_hat, std_error)
    return EstimateResult(
        gamma_hat=gamma_hat,
        std_error=std_error,
        n_steps=n,
        n_replicas=replicas,
        method=METHOD_FURSTENBERG,
        trace=[float(value) for value in running],
        trace_steps=[burn_in + batch_size * (b + 1) for b in range(batches)],
        heuristic_error=True,
    )


@dataclass
class SpectrumEstimate:
    """All d exponents gamma_1 >= ... >= gamma_d from QR renormalization."""

    exponents: np.ndarray
    std_errors: np.ndarray
    n_steps: int
    n_replicas: int
    per_replica: np.ndarray = field(default_factory=lambda: np.empty((0, 0)), repr=False)

    def sum_std_error(self, count: int) -> float:
        """Standard error of gamma_1 + ... + gamma_count, from per-replica sums."""

        sums = self.per_replica[:, :count].sum(axis=1)
        return float(np.std(sums, ddof=1) / np.sqrt(sums.size))

    def to_dict(self) -> dict:
        return {
            "exponents": [float(v) for v in self.exponents],
            "std_errors": [float(v) for v in self.std_errors],
            "n_steps": self.n_steps,
            "n_replicas": self.n_replicas,
        }


def estimate_exponents(
    family: MatrixFamily,
    chain: MarkovChainSpec,
    n: int,
    replicas: int,
    seed: int,
    *,
    workers: int = 1,
) -> SpectrumEstimate:
    """Full exponent spectrum of psi(n) via the transposed cocycle M^T_{xi_n} ... M^T_{xi_1}."""

    if n < 1:
        raise ValidationError.invalid_parameter("n", "must be at least 1")
    if replicas < 2:
        raise ValidationError.invalid_parameter("replicas", "must be at least 2")
    transposed = family.stack().transpose(0, 2, 1)
    dim = family.dim

    def run(chunk: Sequence[np.random.Generator]) -> Tuple[np.ndarray, ...]:
        paths = sample_paths(chain, n, chunk)
        q = np.broadcast_to(np.eye(dim), (len(chunk), dim, dim)).copy()
        logs = np.zeros((len(chunk), dim))
        for step in range(n):
            q, r = np.linalg.qr(transposed[paths[:, step]] @ q)
            logs += np.log(np.abs(np.diagonal(r, axis1=1, axis2=2)))
        return (logs / n,)

    (per_replica,) = _map_chunks(run, spawn_generators(seed, replicas), workers)
    # QR does not order the diagonal, so sort each replica's rates
    per_replica = -np.sort(-per_replica, axis=1)
    exponents = per_replica.mean(axis=0)
    std_errors = per_replica.std(axis=0, ddof=1) / np.sqrt(replicas)
    logger.info("Exponent spectrum: %s", np.array2string(exponents, precision=6))
    return SpectrumEstimate(
        exponents=exponents,
        std_errors=std_errors,
        n_steps=n,
        n_replicas=replicas,
        per_replica=per_replica,
    )


def _enumerate_subtree(
    stack: np.ndarray,
    chain: MarkovChainSpec,
    depth: int,
    t: complex,
    vectors: np.ndarray,
    log_norms: np.ndarray,
    probabilities: np.ndarray,
    last: np.ndarray,
) -> np.ndarray:
    """Extend every word by ``depth`` more symbols; ``vectors`` has shape (words, points, d)."""

    k, dim = stack.shape[0], stack.shape[1]
    points = vectors.shape[1]
    for _ in range(depth):
        images = np.einsum("kij,cpj->kcpi", stack, vectors)
        norms = np.linalg.norm(images, axis=3)
        vectors = (images / norms[..., None]).reshape(-1, points, dim)
        log_norms = (log_norms[None, :, :] + np.log(norms)).reshape(-1, points)
        probabilities = (chain.P[:, last] * probabilities[None, :]).ravel()
        last = np.repeat(np.arange(k), last.size)
    return np.sum(probabilities[:, None] * np.exp(t * log_norms), axis=0)


def enumerate_exact_batch(
    family: MatrixFamily,
    chain: MarkovChainSpec,
    n: int,
    t: complex,
    terminal: int,
    points: np.ndarray,
    *,
    workers: int = 1,
    budget: int = ENUMERATION_BUDGET,
) -> np.ndarray:
    """(L_t^n 1)(terminal, x) for every row x of ``points`` as a sum over all k^n words.

    For the word (i_0, ..., i_{n-1}) preceding ``terminal`` the weight is
    P[i_{n-1}, terminal] ... P[i_0, i_1] and the product acting on x is
    M_{i_0} M_{i_1} ... M_{i_{n-1}}, with M_{i_{n-1}} applied first.
    """

    if n < 1:
        raise ValidationError.invalid_parameter("n", "must be at least 1")
    words = family.k**n
    if words > budget:
        raise ValidationError.budget_exceeded(words, budget)
    terminal = chain.check_symbol(terminal)
    if family.k != chain.k:
        raise ValidationError.dimension_mismatch("number of symbols", chain.k, family.k)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != family.dim:
        raise ValidationError.dimension_mismatch("point dimension", family.dim, points.shape[1])
    stack = family.stack()

    def subtree(first: int) -> np.ndarray:
        images = points @ stack[first].T
        norms = np.linalg.norm(images, axis=1)
        return _enumerate_subtree(
            stack,
            chain,
            n - 1,
            t,
            (images / norms[:, None])[None, :, :],
            np.log(norms)[None, :],
            np.array([chain.P[first, terminal]]),
            np.array([first]),
        )

    symbols = range(family.k)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(subtree, symbols))
    else:
        parts = [subtree(symbol) for symbol in symbols]
    total = np.sum(parts, axis=0)
    if np.iscomplexobj(total) and complex(t).imag == 0.0:
        total = np.real(total)
    return total


def enumerate_exact(
    family: MatrixFamily,
    chain: MarkovChainSpec,
    n: int,
    t: complex,
    terminal: int,
    x: ProjPoint,
    *,
    workers: int = 1,
    budget: int = ENUMERATION_BUDGET,
) -> complex:
    """(L_t^n 1)(terminal, x) at a single line x."""

    value = enumerate_exact_batch(
        family, chain, n, t, terminal, x.array[None, :], workers=workers, budget=budget
    )[0]
    return value.item()


def enumeration_derivative(
    family: MatrixFamily,
    chain: MarkovChainSpec,
    n_values: Sequence[int],
    h: float,
    terminal: int,
    x: ProjPoint,
) -> List[Tuple[int, float]]:
    """(E(n, h) - E(n, -h)) / (2 h n), an approximation of (1/n) E log||psi(n) x||."""

    rows = []
    for n in n_values:
        plus = enumerate_exact(family, chain, n, h, terminal, x)
        minus = enumerate_exact(family, chain, n, -h, terminal, x)
        rows.append((int(n), float((plus - minus) / (2.0 * h * n))))
    return rows


def transposed_word_norms(
    family: MatrixFamily, words: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Spectral norms of M_{w_1}...M_{w_n} and of M_{w_n}^T ... M_{w_1}^T per word."""

    stack = family.stack()
    words = np.atleast_2d(np.asarray(words))
    dim = family.dim
    forward = np.broadcast_to(np.eye(dim), (words.shape[0], dim, dim)).copy()
    backward = forward.copy()
    for column in range(words.shape[1]):
        forward = forward @ stack[words[:, column]]
        backward = stack[words[:, column]].transpose(0, 2, 1) @ backward
    return _spectral_norms(forward), _spectral_norms(backward)


def default_start_point(dim: int, seed: Optional[int] = None) -> ProjPoint:
    rng = np.random.default_rng(seed)
    return ProjPoint.from_vector(random_points(rng, 1, dim)[0])
