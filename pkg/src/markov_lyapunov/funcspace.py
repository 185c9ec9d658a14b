"""Grid functions on symbols x RP^1 and the norms of the Hölder space.

A ``GridFunction`` stores ``values[i, m] = w(i, x_m)`` at the angle nodes
``theta_m = m * pi / N``. Node ``N`` is identified with node ``0``; between
nodes the function is linear in the angle.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, List, Tuple

import numpy as np

from markov_lyapunov.errors import SymbolIndexError, ValidationError
from markov_lyapunov.projective import ProjPoint, angle_chart, angle_distance

DEFAULT_ALPHA = 0.5
DEFAULT_THETA = 0.25
_ROW_CHUNK = 256


def grid_angles(N: int) -> np.ndarray:
    return np.arange(N) * (np.pi / N)


def interpolation_weights(angles: np.ndarray, N: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Left node, right node and right-node weight for angles in [0, pi)."""

    position = np.asarray(angles, dtype=float) * (N / np.pi)
    left = np.floor(position).astype(np.intp)
    fraction = position - left
    left = np.mod(left, N)
    right = np.mod(left + 1, N)
    return left, right, fraction


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Discretized element of the Hölder space, dependent on (omega_0, x) only."""

    values: np.ndarray
    alpha: float = DEFAULT_ALPHA
    theta: float = DEFAULT_THETA

    def __post_init__(self) -> None:
        values = np.array(self.values, copy=True)
        if not np.iscomplexobj(values):
            values = values.astype(float)
        if values.ndim != 2 or values.shape[1] < 1:
            raise ValidationError.dimension_mismatch(
                "grid function values", "(k, N) array", tuple(values.shape)
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError.invalid_parameter("values", "must be finite")
        if not 0.0 < self.alpha <= 1.0:
            raise ValidationError.invalid_parameter("alpha", "must lie in (0, 1]")
        if not 0.0 < self.theta < 1.0:
            raise ValidationError.invalid_parameter("theta", "must lie in (0, 1)")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, k: int, N: int, value: complex = 1.0, **kwargs) -> "GridFunction":
        dtype = complex if isinstance(value, complex) else float
        return cls(np.full((k, N), value, dtype=dtype), **kwargs)

    @classmethod
    def from_callable(
        cls, k: int, N: int, func: Callable[[int, np.ndarray], np.ndarray], **kwargs
    ) -> "GridFunction":
        """Sample ``func(i, angles)`` on every symbol row."""

        angles = grid_angles(N)
        return cls(np.stack([np.asarray(func(i, angles)) for i in range(k)]), **kwargs)

    @property
    def k(self) -> int:
        return int(self.values.shape[0])

    @property
    def N(self) -> int:
        return int(self.values.shape[1])

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return replace(self, values=values)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: complex) -> "GridFunction":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def sample(self, symbols: np.ndarray, angles: np.ndarray) -> np.ndarray:
        """Vectorized interpolation at (symbol, angle) pairs."""

        left, right, fraction = interpolation_weights(angles, self.N)
        rows = self.values[np.asarray(symbols)]
        return (1.0 - fraction) * np.take_along_axis(
            rows, left[..., None], axis=-1
        )[..., 0] + fraction * np.take_along_axis(rows, right[..., None], axis=-1)[..., 0]


def evaluate(w: GridFunction, i: int, x: ProjPoint) -> complex:
    """w(i, x) by linear interpolation in the angle chart."""

    if not 0 <= i < w.k:
        raise SymbolIndexError.out_of_range(i, w.k)
    angle = angle_chart(x)
    left, right, fraction = interpolation_weights(np.array([angle]), w.N)
    value = (1.0 - fraction[0]) * w.values[i, left[0]] + fraction[0] * w.values[i, right[0]]
    return value.item()


def sup_norm(w: GridFunction) -> float:
    return float(np.max(np.abs(w.values)))


def _x_part(values: np.ndarray, alpha: float) -> float:
    """Max over all node pairs, one block of rows at a time."""

    N = values.shape[1]
    angles = grid_angles(N)
    best = 0.0
    for start in range(0, N, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, N)
        distance = angle_distance(angles[start:stop, None], angles[None, :]) ** alpha
        rows = np.arange(start, stop)
        distance[rows - start, rows] = np.inf
        ratios = np.abs(values[:, start:stop, None] - values[:, None, :]) / distance
        best = max(best, float(ratios.max()))
    return best


def holder_seminorm(w: GridFunction) -> float:
    """Discrete |w|_{theta,alpha}: max of the x-part and the symbol part.

    Distinct first symbols are at d_theta distance theta^0 = 1. Every node
    pair enters the x-part, so refining the grid never lowers the value.
    """

    values = w.values
    x_part = _x_part(values, w.alpha) if w.N > 1 else 0.0
    if w.k > 1:
        symbol_part = float(np.max(np.abs(values[:, None, :] - values[None, :, :])))
    else:
        symbol_part = 0.0
    return max(x_part, symbol_part)


def holder_norm(w: GridFunction) -> float:
    """||w||_{theta,alpha} = |w|_inf + |w|_{theta,alpha}."""

    return sup_norm(w) + holder_seminorm(w)


def band_limited_probes(
    rng: np.random.Generator,
    k: int,
    N: int,
    count: int,
    *,
    max_frequency: int = 4,
    **kwargs,
) -> List[GridFunction]:
    """Random trigonometric polynomials in the angle, of degree at most ``max_frequency``.

    Each row is ``c_i + sum_f a_{i,f} cos(2 f x + phi_{i,f})`` scaled to sup norm 1.
    """

    angles = grid_angles(N)
    frequencies = np.arange(1, max_frequency + 1)
    probes = []
    for _ in range(count):
        amplitude = rng.normal(size=(k, max_frequency)) / frequencies
        phase = rng.uniform(0.0, 2 * np.pi, size=(k, max_frequency))
        offset = rng.normal(size=(k, 1))
        waves = np.cos(2 * frequencies[None, :, None] * angles[None, None, :] + phase[..., None])
        values = offset + np.sum(amplitude[..., None] * waves, axis=1)
        probes.append(GridFunction(values / np.max(np.abs(values)), **kwargs))
    return probes
