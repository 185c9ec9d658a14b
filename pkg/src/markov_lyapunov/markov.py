"""The symbol process: forward chain, stationary law, backward kernel, paths."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from markov_lyapunov.errors import SymbolIndexError, ValidationError

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-12
STATIONARY_TOLERANCE = 1e-12
STATIONARY_MAX_ITER = 100_000


@dataclass(frozen=True, eq=False)
class MarkovChainSpec:
    """Forward transition matrix T, stationary vector pi and backward kernel P.

    ``P[i, j]`` is the probability that the dropped symbol was ``i`` given the
    shifted sequence starts with ``j``; its columns sum to one.
    """

    T: np.ndarray
    pi: np.ndarray
    P: np.ndarray
    strict: bool = True
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name in ("T", "pi", "P"):
            array = np.array(getattr(self, name), dtype=float, copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        cumulative = np.cumsum(self.T, axis=1)
        cumulative[:, -1] = 1.0
        cumulative.setflags(write=False)
        object.__setattr__(self, "cumulative", cumulative)

    @property
    def k(self) -> int:
        return int(self.T.shape[0])

    def check_symbol(self, symbol: int) -> int:
        if not 0 <= int(symbol) < self.k:
            raise SymbolIndexError.out_of_range(int(symbol), self.k)
        return int(symbol)


def stationary_vector(T: np.ndarray) -> np.ndarray:
    """Left Perron vector of a row-stochastic matrix by power iteration on T^T."""

    k = T.shape[0]
    pi = np.full(k, 1.0 / k)
    for _ in range(STATIONARY_MAX_ITER):
        updated = pi @ T
        updated /= updated.sum()
        if np.max(np.abs(updated - pi)) < STATIONARY_TOLERANCE:
            return updated
        pi = updated
    # Periodic or slowly mixing chains: fall back to the dense eigenproblem.
    values, vectors = np.linalg.eig(T.T)
    leading = vectors[:, np.argmin(np.abs(values - 1.0))].real
    return leading / leading.sum()


def _is_irreducible_aperiodic(T: np.ndarray) -> bool:
    support = (T > 0).astype(float)
    k = T.shape[0]
    power = np.linalg.matrix_power(support, (k - 1) ** 2 + 1) if k > 1 else support
    return bool(np.all(power > 0))


def build_chain(T: Sequence[Sequence[float]], *, strict: bool = True) -> MarkovChainSpec:
    """Validate a forward transition matrix and derive pi and the backward kernel."""

    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] < 1:
        raise ValidationError.dimension_mismatch(
            "transition shape", "square k x k", tuple(T.shape)
        )
    if not np.all(np.isfinite(T)) or np.any(T < 0):
        raise ValidationError.invalid_parameter(
            "transition", "entries must be finite and nonnegative"
        )
    for row, total in enumerate(T.sum(axis=1)):
        if abs(total - 1.0) > ROW_SUM_TOLERANCE:
            raise ValidationError.non_stochastic(row, float(total))
    zeros = np.argwhere(T <= 0)
    if zeros.size:
        if strict:
            row, column = (int(v) for v in zeros[0])
            raise ValidationError.full_shift_violation(row, column)
        if not _is_irreducible_aperiodic(T):
            raise ValidationError.invalid_parameter(
                "transition", "chain must be irreducible and aperiodic"
            )
        logger.warning(
            "Transition matrix has %d zero entries; the chain is not a full shift",
            len(zeros),
        )
    pi = stationary_vector(T)
    P = pi[:, None] * T / pi[None, :]
    return MarkovChainSpec(T=T, pi=pi, P=P, strict=strict)


def word_probability(spec: MarkovChainSpec, word: Sequence[int], terminal: int) -> float:
    """P(omega_0 = i_0, ..., omega_{n-1} = i_{n-1} | omega_n = terminal)."""

    following = spec.check_symbol(terminal)
    probability = 1.0
    for symbol in reversed(list(word)):
        symbol = spec.check_symbol(symbol)
        probability *= spec.P[symbol, following]
        following = symbol
    return float(probability)


def sample_paths(
    spec: MarkovChainSpec, n: int, rngs: Sequence[np.random.Generator]
) -> np.ndarray:
    """Stationary forward paths, one row per generator, shape (len(rngs), n)."""

    if n < 1:
        raise ValidationError.invalid_parameter("n", "must be at least 1")
    uniforms = np.stack([rng.random(n) for rng in rngs])
    paths = np.empty(uniforms.shape, dtype=np.intp)
    stationary_cdf = np.cumsum(spec.pi)
    stationary_cdf[-1] = 1.0
    paths[:, 0] = np.searchsorted(stationary_cdf, uniforms[:, 0], side="right")
    for step in range(1, n):
        rows = spec.cumulative[paths[:, step - 1]]
        paths[:, step] = (uniforms[:, step, None] >= rows).sum(axis=1)
    return np.minimum(paths, spec.k - 1)


def sample_path(spec: MarkovChainSpec, n: int, seed: int | np.random.Generator) -> np.ndarray:
    """One stationary path of length n; deterministic given the seed."""

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return sample_paths(spec, n, [rng])[0]
