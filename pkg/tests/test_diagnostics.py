import numpy as np
import pytest

from markov_lyapunov.diagnostics import (
    VERDICT_FAIL,
    VERDICT_INCONCLUSIVE,
    VERDICT_PASS,
    IndexStatistics,
    contraction_average,
    det_closure_check,
    ell_product_bound_check,
    exp_gain_holder_check,
    exponent_gap,
    gap_consistency,
    index_probe,
    irreducibility_heuristic,
    log_gain_holder_check,
    properness_probe,
    weighted_operator_bound_check,
)
from markov_lyapunov.errors import ValidationError
from markov_lyapunov.funcspace import GridFunction, band_limited_probes
from markov_lyapunov.linalg import MatrixFamily, rotation
from markov_lyapunov.transfer import TransferOperator, eigenmeasure


class TestContraction:
    def test_rotations_preserve_distances(self, rotation_family, chain):
        rows = contraction_average(rotation_family, chain, 5, 100, seed=1)
        assert [row.n for row in rows] == [1, 2, 3, 4, 5]
        for row in rows:
            assert row.ratio == pytest.approx(1.0, abs=1e-6)

    def test_contracting_family_contracts(self, contracting_family, chain):
        rows = contraction_average(contracting_family, chain, 20, 200, seed=2)
        assert rows[-1].ratio < 1.0
        assert rows[-1].rate < 1.0

    def test_needs_enough_pairs(self, contracting_family, chain):
        with pytest.raises(ValidationError):
            contraction_average(contracting_family, chain, 5, 99, seed=1)


class TestIndexProbe:
    def test_orthogonal_products_have_ratio_one(self, rotation_family, chain):
        stats = index_probe(rotation_family, chain, 10, 50, seed=3)
        assert stats.median == pytest.approx(1.0)
        assert stats.contracting is False

    def test_contracting_family_collapses(self, contracting_family, chain):
        stats = index_probe(contracting_family, chain, 100, 200, seed=4)
        assert stats.contracting is True
        assert stats.maximum <= 1.0
        assert stats.to_dict()["n"] == 100

    def test_median_decays_between_n_and_2n(self, contracting_family, chain):
        stats = index_probe(contracting_family, chain, 20, 200, seed=7)
        assert stats.median_doubled < stats.median
        assert stats.decay_rate < 0.0
        assert stats.to_dict()["median_2n"] == stats.median_doubled

    def test_no_verdict_above_two_dimensions(self, chain):
        family = MatrixFamily.from_arrays([np.diag([2.0, 1.0, 0.5]), np.diag([1.0, 3.0, 1.0])])
        assert index_probe(family, chain, 5, 10, seed=1).contracting is None


class TestProperness:
    def test_diagonal_family_has_atom(self, diagonal_family, chain):
        nu = eigenmeasure(TransferOperator(diagonal_family, chain, 64))
        report = properness_probe(nu, directions=16)
        assert report.atom_detected
        assert not report.proper

    def test_rotation_family_is_proper(self, rotation_family, chain):
        nu = eigenmeasure(TransferOperator(rotation_family, chain, 64))
        report = properness_probe(nu, directions=16)
        assert report.proper
        assert report.eps_grid == sorted(report.eps_grid, reverse=True)
        assert report.masses.shape == (16 + 8, len(report.eps_grid))


class TestIrreducibility:
    def test_diagonal_family_fixes_coordinate_axes(self, diagonal_family):
        verdict = irreducibility_heuristic(diagonal_family)
        assert verdict.verdict == VERDICT_FAIL
        witness = [tuple(np.round(line, 12)) for line in verdict.witness]
        assert (1.0, 0.0) in witness
        assert (0.0, 1.0) in witness

    def test_upper_triangular_family_fixes_one_line(self):
        family = MatrixFamily.from_arrays([np.diag([2.0, 1.0]), [[1.0, 1.0], [0.0, 1.0]]])
        verdict = irreducibility_heuristic(family)
        assert verdict.verdict == VERDICT_FAIL
        assert len(verdict.witness) == 1
        np.testing.assert_allclose(verdict.witness[0], [1.0, 0.0], atol=1e-9)

    def test_stretch_rotation_and_shear_pass(self):
        family = MatrixFamily.from_arrays(
            [rotation(1.0) @ np.diag([2.0, 1.0]), [[1.0, 1.0], [0.0, 1.0]]]
        )
        verdict = irreducibility_heuristic(family)
        assert verdict.verdict == VERDICT_PASS
        assert verdict.witness == []

    def test_quarter_turn_orbits_are_finite(self):
        verdict = irreducibility_heuristic(MatrixFamily.from_arrays([rotation(np.pi / 4)]))
        assert verdict.verdict == VERDICT_FAIL
        assert len(verdict.witness) >= 4
        assert len(verdict.witness) % 4 == 0

    def test_irrational_rotation_is_inconclusive(self, rotation_family):
        verdict = irreducibility_heuristic(rotation_family)
        assert verdict.verdict == VERDICT_INCONCLUSIVE
        assert verdict.to_dict()["heuristic"] is True

    def test_requires_two_dimensions(self):
        family = MatrixFamily.from_arrays([np.eye(3), 2 * np.eye(3)])
        with pytest.raises(ValidationError) as excinfo:
            irreducibility_heuristic(family)
        assert excinfo.value.error_type == "unsupported-dimension"


def test_ell_product_bound_holds(contracting_family, chain):
    check = ell_product_bound_check(contracting_family, chain, 20, 200, seed=5)
    assert check.passed
    assert check.to_dict()["samples"] == 200


class TestExponentGap:
    def test_conformal_closure_is_twice_gamma(self, conformal_family, chain, conformal_gamma):
        assert det_closure_check(conformal_family, chain) == pytest.approx(2 * conformal_gamma)

    def test_gap_from_closure(self, conformal_family, chain, conformal_gamma):
        gap = exponent_gap(conformal_family, chain, conformal_gamma)
        assert gap.gamma2 == pytest.approx(conformal_gamma)
        assert not gap.strict

    def test_consistency_with_index_decay(self):
        stats = IndexStatistics(
            n=10,
            ratios=np.array([]),
            median=np.exp(-2.0),
            minimum=0.0,
            maximum=1.0,
            contracting=None,
            median_doubled=np.exp(-4.0),
        )
        assert gap_consistency(stats, 0.5, 0.3).consistent
        assert not gap_consistency(stats, 1.0, 0.0).consistent

    def test_consistency_ignores_constant_prefactor(self):
        stats = IndexStatistics(
            n=50,
            ratios=np.array([]),
            median=0.2 * np.exp(-7.5),
            minimum=0.0,
            maximum=1.0,
            contracting=True,
            median_doubled=0.2 * np.exp(-15.0),
        )
        check = gap_consistency(stats, 0.1, -0.05)
        assert check.consistent
        assert check.observed_decay == pytest.approx(np.exp(-7.5))
        assert check.to_dict()["predicted"] == pytest.approx(np.exp(-7.5))


class TestHolderChecks:
    def test_log_gain(self):
        check = log_gain_holder_check(seed=11, samples=500)
        assert check.passed
        assert check.constant > 0

    def test_exp_gain(self):
        assert exp_gain_holder_check(seed=12, t=0.3, samples=500).passed


def test_weighted_operator_bounds(contracting_family, chain):
    rng = np.random.default_rng(6)
    g = GridFunction(rng.uniform(-0.5, 0.5, size=(2, 128)))
    op = TransferOperator(contracting_family, chain, 128, g=g)
    for probe in band_limited_probes(rng, 2, 128, 5):
        check = weighted_operator_bound_check(op, probe)
        assert check.sup_norm_ok
        assert check.seminorm_ok
