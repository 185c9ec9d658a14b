import itertools

import numpy as np
import pytest

from markov_lyapunov.errors import SymbolIndexError, ValidationError
from markov_lyapunov.funcspace import grid_angles
from markov_lyapunov.linalg import MatrixFamily, rotation
from markov_lyapunov.markov import build_chain, word_probability
from markov_lyapunov.montecarlo import (
    METHOD_FURSTENBERG,
    METHOD_SUBADDITIVE,
    enumerate_exact,
    enumerate_exact_batch,
    enumeration_derivative,
    estimate_exponents,
    estimate_furstenberg,
    estimate_subadditive,
    spawn_generators,
    transposed_word_norms,
)
from markov_lyapunov.projective import ProjPoint, angles_to_vectors
from markov_lyapunov.transfer import TransferOperator

CONFORMAL_SCALES = np.array([2.0, 1.0 / 3.0])


def test_spawned_streams_are_reproducible():
    first = [rng.random() for rng in spawn_generators(42, 3)]
    second = [rng.random() for rng in spawn_generators(42, 3)]
    assert first == second
    assert len(set(first)) == 3


class TestSubadditive:
    def test_diagonal_products_are_exact(self, chain):
        family = MatrixFamily.from_arrays([np.diag([2.0, 0.5]), np.diag([2.0, 0.5])])
        result = estimate_subadditive(family, chain, 300, 4, seed=1)
        assert result.gamma_hat == pytest.approx(np.log(2.0), abs=1e-12)
        assert result.std_error == pytest.approx(0.0, abs=1e-12)
        assert result.method == METHOD_SUBADDITIVE

    def test_orthogonal_single_symbol_has_zero_exponent(self):
        family = MatrixFamily.from_arrays([rotation(0.3)])
        result = estimate_subadditive(family, build_chain([[1.0]]), 500, 2, seed=3)
        assert result.gamma_hat == pytest.approx(0.0, abs=1e-12)

    def test_conformal_within_error_bar(self, conformal_family, chain, conformal_gamma):
        result = estimate_subadditive(conformal_family, chain, 2000, 16, seed=5)
        assert abs(result.gamma_hat - conformal_gamma) <= 3 * result.std_error
        assert result.trace_steps[-1] == 2000
        assert len(result.trace) == len(result.trace_steps)

    def test_worker_count_does_not_change_the_estimate(self, contracting_family, chain):
        serial = estimate_subadditive(contracting_family, chain, 200, 6, seed=9, workers=1)
        threaded = estimate_subadditive(contracting_family, chain, 200, 6, seed=9, workers=3)
        assert threaded.gamma_hat == pytest.approx(serial.gamma_hat, rel=1e-12)
        assert threaded.std_error == pytest.approx(serial.std_error, rel=1e-9)

    def test_parameter_validation(self, contracting_family, chain):
        with pytest.raises(ValidationError):
            estimate_subadditive(contracting_family, chain, 0, 4, seed=1)
        with pytest.raises(ValidationError):
            estimate_subadditive(contracting_family, chain, 10, 1, seed=1)


class TestFurstenberg:
    def test_conformal_within_error_bar(self, conformal_family, chain, conformal_gamma):
        result = estimate_furstenberg(conformal_family, chain, 20_000, 100, seed=2)
        assert abs(result.gamma_hat - conformal_gamma) <= 3 * result.std_error
        assert result.heuristic_error
        assert result.method == METHOD_FURSTENBERG

    def test_agrees_with_subadditive(self, contracting_family, chain):
        ergodic = estimate_furstenberg(contracting_family, chain, 20_000, 200, seed=4)
        direct = estimate_subadditive(contracting_family, chain, 2000, 16, seed=4)
        tolerance = 5 * np.hypot(ergodic.std_error, direct.std_error) + 0.02
        assert ergodic.gamma_hat == pytest.approx(direct.gamma_hat, abs=tolerance)

    def test_burn_in_must_leave_samples(self, contracting_family, chain):
        with pytest.raises(ValidationError):
            estimate_furstenberg(contracting_family, chain, 100, 100, seed=1)


class TestEnumeration:
    """Exact sums over preimage words."""

    def test_t_zero_gives_one(self, contracting_family, chain):
        x = ProjPoint.from_angle(0.4)
        assert enumerate_exact(contracting_family, chain, 5, 0.0, 1, x) == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [1, 3, 5])
    def test_conformal_matches_reduced_matrix(self, conformal_family, chain, n):
        t = 0.3
        reduced = chain.P.T * CONFORMAL_SCALES[None, :] ** t
        expected = np.linalg.matrix_power(reduced, n) @ np.ones(2)
        x = ProjPoint.from_angle(1.2)
        for terminal in range(2):
            value = enumerate_exact(conformal_family, chain, n, t, terminal, x)
            assert value == pytest.approx(expected[terminal], rel=1e-12)

    def test_matches_word_by_word_sum(self, contracting_family, chain):
        t, n, terminal = -0.2, 3, 1
        x = ProjPoint.from_angle(0.9)
        stack = contracting_family.stack()
        expected = 0.0
        for word in itertools.product(range(2), repeat=n):
            product = np.eye(2)
            for symbol in word:
                product = product @ stack[symbol]
            norm = np.linalg.norm(product @ x.array)
            expected += word_probability(chain, word, terminal) * norm**t
        assert enumerate_exact(contracting_family, chain, n, t, terminal, x) == pytest.approx(
            expected, rel=1e-12
        )

    def test_matches_discretized_operator(self, contracting_family, chain):
        N, t = 1024, 0.1
        op = TransferOperator(contracting_family, chain, N, t=t)
        values = np.ones((2, N))
        nodes = angles_to_vectors(grid_angles(N))
        for n in range(1, 4):
            values = op.apply_values(values)
            exact = enumerate_exact_batch(contracting_family, chain, n, t, 0, nodes)
            assert np.max(np.abs(values[0] - exact)) <= 1e-3

    def test_threads_match_serial(self, contracting_family, chain):
        nodes = angles_to_vectors(grid_angles(16))
        serial = enumerate_exact_batch(contracting_family, chain, 4, 0.2, 0, nodes)
        threaded = enumerate_exact_batch(contracting_family, chain, 4, 0.2, 0, nodes, workers=2)
        np.testing.assert_allclose(threaded, serial, rtol=1e-14)

    def test_budget(self, contracting_family, chain):
        with pytest.raises(ValidationError) as excinfo:
            enumerate_exact(contracting_family, chain, 30, 0.1, 0, ProjPoint.from_angle(0.1))
        assert excinfo.value.error_type == "enumeration-budget-exceeded"
        assert excinfo.value.details["words"] == 2**30

    def test_budget_counts_words_not_points(self, contracting_family, chain):
        nodes = angles_to_vectors(grid_angles(64))
        values = enumerate_exact_batch(contracting_family, chain, 4, 0.0, 0, nodes, budget=16)
        np.testing.assert_allclose(values, 1.0, rtol=1e-12)
        with pytest.raises(ValidationError):
            enumerate_exact_batch(contracting_family, chain, 5, 0.0, 0, nodes, budget=16)

    def test_terminal_out_of_range(self, contracting_family, chain):
        with pytest.raises(SymbolIndexError):
            enumerate_exact(contracting_family, chain, 2, 0.1, 2, ProjPoint.from_angle(0.1))

    def test_derivative_sequence_approaches_gamma(self, conformal_family, chain, conformal_gamma):
        rows = enumeration_derivative(
            conformal_family, chain, [1, 12], 1e-3, 0, ProjPoint.from_angle(0.5)
        )
        assert [n for n, _ in rows] == [1, 12]
        assert abs(rows[1][1] - conformal_gamma) < abs(rows[0][1] - conformal_gamma)


def test_transposed_words_have_equal_norms(contracting_family):
    words = np.random.default_rng(0).integers(0, 2, size=(1000, 12))
    forward, backward = transposed_word_norms(contracting_family, words)
    np.testing.assert_allclose(forward, backward, rtol=1e-10)


class TestExponentSpectrum:
    def test_diagonal_family(self, chain):
        family = MatrixFamily.from_arrays([np.diag([2.0, 0.5]), np.diag([3.0, 0.25])])
        spectrum = estimate_exponents(family, chain, 2000, 8, seed=6)
        expected = [
            (2 / 3) * np.log(2.0) + (1 / 3) * np.log(3.0),
            (2 / 3) * np.log(0.5) + (1 / 3) * np.log(0.25),
        ]
        assert spectrum.exponents[0] > spectrum.exponents[1]
        for value, error, target in zip(spectrum.exponents, spectrum.std_errors, expected):
            assert abs(value - target) <= 4 * error + 1e-12

    def test_orthogonal_family_has_zero_spectrum(self, rotation_family, chain):
        spectrum = estimate_exponents(rotation_family, chain, 300, 4, seed=1)
        np.testing.assert_allclose(spectrum.exponents, 0.0, atol=1e-12)
