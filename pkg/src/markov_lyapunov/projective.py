"""Points of RP^{d-1}, the metric d_X, the normalized matrix action and the d=2 chart."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from markov_lyapunov.errors import ValidationError
from markov_lyapunov.linalg import InvertibleMatrix

ZERO_TOLERANCE = 1e-14


def canonicalize(vectors: np.ndarray) -> np.ndarray:
    """Normalize rows to unit length and make the first nonzero coordinate positive."""

    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    units = vectors / norms
    nonzero = np.abs(units) > ZERO_TOLERANCE
    first = np.argmax(nonzero, axis=-1)
    signs = np.sign(units[np.arange(units.shape[0]), first])
    signs[signs == 0] = 1.0
    return units * signs[:, None]


@dataclass(frozen=True)
class ProjPoint:
    """A line in R^d stored as a sign-canonical unit vector."""

    vec: Tuple[float, ...]

    def __post_init__(self) -> None:
        raw = np.asarray(self.vec, dtype=float)
        if raw.ndim != 1 or raw.size < 2:
            raise ValidationError.invalid_parameter("vec", "need a vector with d >= 2")
        if not np.all(np.isfinite(raw)) or np.linalg.norm(raw) == 0.0:
            raise ValidationError.invalid_parameter("vec", "must be finite and nonzero")
        object.__setattr__(self, "vec", tuple(float(v) for v in canonicalize(raw)[0]))

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "ProjPoint":
        return cls(tuple(vector))

    @classmethod
    def from_angle(cls, angle: float) -> "ProjPoint":
        return cls((float(np.cos(angle)), float(np.sin(angle))))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vec)

    @property
    def dim(self) -> int:
        return len(self.vec)


def proj_metric(x: ProjPoint, y: ProjPoint) -> float:
    """d_X(x, y) = sqrt(1 - <x, y>^2) for unit representatives."""

    inner = float(np.dot(x.array, y.array))
    return float(np.sqrt(max(0.0, 1.0 - inner * inner)))


def proj_action(matrix: InvertibleMatrix, x: ProjPoint) -> ProjPoint:
    """The normalized action [Mx]."""

    return ProjPoint.from_vector(matrix.entries @ x.array)


def log_gain(matrix: InvertibleMatrix, x: ProjPoint) -> float:
    """log ||Mx|| for the unit representative of x."""

    return float(np.log(np.linalg.norm(matrix.entries @ x.array)))


def angle_chart(x: ProjPoint) -> float:
    """Angle of the line in [0, pi); only defined on RP^1."""

    if x.dim != 2:
        raise ValidationError.unsupported_dimension("angle_chart", x.dim)
    return float(fold_angles(np.arctan2(x.vec[1], x.vec[0])))


def fold_angles(angles: np.ndarray) -> np.ndarray:
    """Reduce angles modulo pi into [0, pi)."""

    folded = np.mod(angles, np.pi)
    # np.mod can return pi itself for tiny negative inputs
    return np.where(folded >= np.pi, 0.0, folded)


def angles_to_vectors(angles: np.ndarray) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    return np.stack([np.cos(angles), np.sin(angles)], axis=-1)


def angle_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """d_X between lines given by their chart angles: |sin(a - b)|."""

    return np.abs(np.sin(np.asarray(a) - np.asarray(b)))


def act_on_angles(entries: np.ndarray, angles: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Image angles and log-gains of a 2 x 2 matrix acting on lines at ``angles``."""

    images = angles_to_vectors(angles) @ np.asarray(entries).T
    gains = np.log(np.hypot(images[..., 0], images[..., 1]))
    return fold_angles(np.arctan2(images[..., 1], images[..., 0])), gains


def random_points(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Uniformly distributed lines as canonical unit vectors, shape (count, dim)."""

    return canonicalize(rng.standard_normal((count, dim)))
