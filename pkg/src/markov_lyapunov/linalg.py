"""Invertible-matrix primitives: norms, the size functional and the d=2 determinant."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from markov_lyapunov.errors import ValidationError

# |det M| must exceed this times ||M||_F^d.
DEGENERACY_TOLERANCE = 1e-12


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class InvertibleMatrix:
    """A real d x d matrix checked for numerical invertibility at construction."""

    entries: np.ndarray
    _singular_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValidationError.dimension_mismatch(
                "matrix shape", "square d x d", tuple(entries.shape)
            )
        if entries.shape[0] < 2:
            raise ValidationError.invalid_parameter("dim", "d must be at least 2")
        if not np.all(np.isfinite(entries)):
            raise ValidationError.invalid_parameter("entries", "must be finite")
        dim = entries.shape[0]
        determinant = float(np.linalg.det(entries))
        threshold = DEGENERACY_TOLERANCE * float(np.linalg.norm(entries, "fro")) ** dim
        if not abs(determinant) > threshold:
            raise ValidationError.not_invertible(determinant, threshold)
        object.__setattr__(self, "entries", _freeze(entries))
        object.__setattr__(
            self,
            "_singular_values",
            _freeze(np.linalg.svd(entries, compute_uv=False)),
        )

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "InvertibleMatrix":
        return cls(np.asarray(rows, dtype=float))

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @property
    def singular_values(self) -> np.ndarray:
        """Singular values in descending order."""
        return self._singular_values

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.entries)


def operator_norm(matrix: InvertibleMatrix) -> float:
    """Spectral norm, the largest singular value."""

    return float(matrix.singular_values[0])


def ell(matrix: InvertibleMatrix) -> float:
    """max(log+ ||M||, log+ ||M^-1||) in the spectral norm."""

    sigma = matrix.singular_values
    return max(0.0, float(np.log(sigma[0])), float(-np.log(sigma[-1])))


def wedge2_log_det(matrix: InvertibleMatrix) -> float:
    """log|det M|, the log-norm of the second exterior power when d=2."""

    if matrix.dim != 2:
        raise ValidationError.unsupported_dimension("wedge2_log_det", matrix.dim)
    return float(np.log(abs(np.linalg.det(matrix.entries))))


def rotation(angle: float) -> np.ndarray:
    """2 x 2 rotation by ``angle`` radians."""

    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class MatrixFamily:
    """The k matrices M_0..M_{k-1} of the cocycle, with cached ell values."""

    matrices: tuple
    ells: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        matrices = tuple(
            m if isinstance(m, InvertibleMatrix) else InvertibleMatrix(np.asarray(m))
            for m in self.matrices
        )
        if not matrices:
            raise ValidationError.invalid_parameter("matrices", "family is empty")
        dims = {m.dim for m in matrices}
        if len(dims) != 1:
            raise ValidationError.dimension_mismatch(
                "matrix dimensions", "all equal", sorted(dims)
            )
        object.__setattr__(self, "matrices", matrices)
        object.__setattr__(self, "ells", _freeze([ell(m) for m in matrices]))

    @classmethod
    def from_arrays(cls, arrays: Iterable[Sequence[Sequence[float]]]) -> "MatrixFamily":
        return cls(tuple(InvertibleMatrix.from_rows(rows) for rows in arrays))

    @property
    def k(self) -> int:
        return len(self.matrices)

    @property
    def dim(self) -> int:
        return self.matrices[0].dim

    @property
    def K(self) -> float:
        """max_i ell(M_i)."""
        return float(self.ells.max())

    def stack(self) -> np.ndarray:
        """All matrices as a (k, d, d) array."""
        return np.stack([m.entries for m in self.matrices])

    def __len__(self) -> int:
        return self.k

    def __getitem__(self, index: int) -> InvertibleMatrix:
        return self.matrices[index]
