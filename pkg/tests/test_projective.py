import numpy as np
import pytest

from markov_lyapunov.errors import ValidationError
from markov_lyapunov.linalg import InvertibleMatrix, ell, rotation
from markov_lyapunov.projective import (
    ProjPoint,
    act_on_angles,
    angle_chart,
    angle_distance,
    fold_angles,
    log_gain,
    proj_action,
    proj_metric,
    random_points,
)


class TestProjPoint:
    """Lines are stored sign-canonically."""

    def test_opposite_vectors_are_the_same_line(self):
        assert ProjPoint.from_vector([-3.0, 0.0]) == ProjPoint.from_vector([1.0, 0.0])
        assert ProjPoint.from_vector([0.0, -2.0]).vec == (0.0, 1.0)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValidationError):
            ProjPoint.from_vector([0.0, 0.0])

    def test_unit_norm(self):
        point = ProjPoint.from_vector([3.0, 4.0, 12.0])
        assert np.linalg.norm(point.array) == pytest.approx(1.0)
        assert point.dim == 3


class TestMetric:
    def test_orthogonal_and_equal_lines(self):
        e1 = ProjPoint.from_vector([1.0, 0.0])
        e2 = ProjPoint.from_vector([0.0, 1.0])
        assert proj_metric(e1, e2) == pytest.approx(1.0)
        assert proj_metric(e1, ProjPoint.from_vector([-1.0, 0.0])) == pytest.approx(0.0)

    def test_chart_distance_matches_metric(self):
        x, y = ProjPoint.from_angle(0.3), ProjPoint.from_angle(2.9)
        assert angle_distance(0.3, 2.9) == pytest.approx(proj_metric(x, y))

    def test_lipschitz_bound_on_random_samples(self):
        rng = np.random.default_rng(2024)
        checked = 0
        while checked < 1000:
            entries = rng.uniform(-5.0, 5.0, size=(2, 2))
            if abs(np.linalg.det(entries)) < 1e-3:
                continue
            matrix = InvertibleMatrix(entries)
            x, y = (ProjPoint.from_vector(v) for v in random_points(rng, 2, 2))
            moved = proj_metric(proj_action(matrix, x), proj_action(matrix, y))
            assert moved <= np.exp(4 * ell(matrix)) * proj_metric(x, y) + 1e-9
            checked += 1


class TestChart:
    def test_angle_chart_folds_into_half_turn(self):
        assert angle_chart(ProjPoint.from_angle(2.0)) == pytest.approx(2.0)
        assert angle_chart(ProjPoint.from_vector([-np.cos(2.0), -np.sin(2.0)])) == pytest.approx(2.0)

    def test_chart_only_on_projective_line(self):
        with pytest.raises(ValidationError) as excinfo:
            angle_chart(ProjPoint.from_vector([1.0, 0.0, 0.0]))
        assert excinfo.value.error_type == "unsupported-dimension"

    def test_fold_angles_range(self):
        folded = fold_angles(np.array([-1e-18, np.pi, 4.0, -0.5]))
        assert np.all((folded >= 0.0) & (folded < np.pi))

    def test_act_on_angles_matches_pointwise_action(self):
        matrix = InvertibleMatrix(np.array([[1.0, 0.8], [0.0, 0.8]]))
        angles = np.array([0.1, 1.0, 2.5])
        images, gains = act_on_angles(matrix.entries, angles)
        for angle, image, gain in zip(angles, images, gains):
            x = ProjPoint.from_angle(angle)
            assert image == pytest.approx(angle_chart(proj_action(matrix, x)))
            assert gain == pytest.approx(log_gain(matrix, x))


def _random_matrices(rng, count):
    matrices = []
    while len(matrices) < count:
        entries = rng.uniform(-5.0, 5.0, size=(2, 2))
        if abs(np.linalg.det(entries)) > 1e-3:
            matrices.append(InvertibleMatrix(entries))
    return matrices


class TestLogGain:
    def test_diagonal(self):
        matrix = InvertibleMatrix(np.diag([2.0, 1.0]))
        assert log_gain(matrix, ProjPoint.from_vector([1.0, 0.0])) == pytest.approx(np.log(2.0))

    def test_gains_telescope_along_a_word(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            word = _random_matrices(rng, 30)
            x = ProjPoint.from_vector(random_points(rng, 1, 2)[0])
            vector = x.array
            total = 0.0
            for matrix in word:
                total += log_gain(matrix, x)
                x = proj_action(matrix, x)
                vector = matrix.entries @ vector
            assert total == pytest.approx(np.log(np.linalg.norm(vector)), abs=1e-9 * len(word))

    def test_bounded_by_ell(self):
        rng = np.random.default_rng(32)
        for matrix in _random_matrices(rng, 1000):
            x = ProjPoint.from_vector(random_points(rng, 1, 2)[0])
            assert abs(log_gain(matrix, x)) <= ell(matrix) + 1e-9

    @pytest.mark.parametrize("scale", [0.25, 1.0, 3.0])
    def test_conformal_matrix_attains_ell(self, scale):
        matrix = InvertibleMatrix(scale * rotation(0.9))
        for angle in (0.0, 0.7, 2.2):
            gain = log_gain(matrix, ProjPoint.from_angle(angle))
            assert gain == pytest.approx(np.log(scale), abs=1e-12)
            assert abs(gain) == pytest.approx(ell(matrix), abs=1e-12)


def test_random_points_are_canonical_unit_vectors():
    points = random_points(np.random.default_rng(0), 50, 3)
    np.testing.assert_allclose(np.linalg.norm(points, axis=1), 1.0)
    assert np.all(points[:, 0] > 0)
