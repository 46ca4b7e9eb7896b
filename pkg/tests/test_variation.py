"""Tests for eigenvalue functionals and first variations."""

import math

import numpy as np
import pytest

from src.models.functional import FunctionalFamily, FunctionalSpec
from src.models.measure import MetricPerturbation
from src.services.eigensolver import solve, solve_closed
from src.services.fem import assemble
from src.services.metric import perturbed_density
from src.services.variation import (
    check_hypothesis,
    cluster_weights,
    directional_derivative,
    eval_E,
    finite_difference_derivative,
    pair_variation,
    subgradient_elements,
)
from src.utils.errors import ClusterAmbiguityError, FunctionalError, ValidationError


@pytest.fixture(scope="module")
def lumpy_torus(torus8):
    """Flat torus with a rough density, so low eigenvalues are simple."""
    beta = perturbed_density(torus8, 0.6, seed=1)
    p = assemble(torus8, beta)
    return torus8, beta, p, solve(p, 3)


@pytest.fixture(scope="module")
def probe_direction(torus8):
    rng = np.random.default_rng(7)
    h = MetricPerturbation.random(torus8.n_faces, rng, scale=0.5)
    b = 0.3 * rng.standard_normal(torus8.n_vertices) / torus8.n_vertices
    return h, b


class TestFunctionalSpec:
    """Tests for functional parsing and evaluation."""

    def test_short_forms(self):
        """Test that short names expand to unit weights."""
        spec = FunctionalSpec.parse("inv3")
        assert spec.weights == (1.0, 1.0, 1.0)
        assert spec.family is FunctionalFamily.INVERSE_POWER
        assert spec.m == 3

    def test_long_form_with_parameter(self):
        """Test that explicit weights and a parameter are read."""
        spec = FunctionalSpec.parse("exp:1,0,2@0.5")
        assert spec.weights == (1.0, 0.0, 2.0)
        assert spec.parameter == 0.5
        assert spec.mask.tolist() == [True, False, True]

    @pytest.mark.parametrize("text", ["", "inv0", "sqrt1", "inv:a,b", "exp1@-1"])
    def test_bad_functionals(self, text):
        """Test that malformed functionals raise FunctionalError."""
        with pytest.raises(FunctionalError):
            FunctionalSpec.parse(text)

    def test_values(self):
        """Test the three profile families at a known point."""
        x = np.array([2.0, 4.0])
        assert FunctionalSpec.parse("inv2").value(x) == pytest.approx(0.75)
        assert FunctionalSpec.parse("exp1").value(x) == pytest.approx(math.exp(-2.0))
        assert FunctionalSpec.parse("log2").value(x) == pytest.approx(-math.log(8.0))

    def test_infinite_at_zero(self):
        """Test that inverse and log functionals blow up at zero."""
        assert FunctionalSpec.parse("inv1").value(np.array([0.0])) == math.inf
        assert FunctionalSpec.parse("log1").value(np.array([0.0])) == math.inf
        assert FunctionalSpec.parse("exp1").value(np.array([0.0])) == pytest.approx(1.0)


class TestHypothesis:
    """Tests for the monotonicity hypothesis check."""

    @pytest.mark.parametrize("text", ["inv1", "inv3", "exp2@0.1", "log2", "inv:1,0,3"])
    def test_standard_functionals_pass(self, text):
        """Test that the built-in families satisfy the hypothesis."""
        report = check_hypothesis(FunctionalSpec.parse(text))
        assert report.passed, report.failures

    def test_increasing_coordinate_fails(self):
        """Test that a negative weight breaks monotonicity."""
        report = check_hypothesis(FunctionalSpec.parse("inv:1,-1"))
        assert not report.passed
        assert "coordinate 2" in report.failures[0]

    def test_all_zero_weights_fail(self):
        """Test that a functional ignoring every eigenvalue fails."""
        report = check_hypothesis(FunctionalSpec.parse("inv:0,0"))
        assert not report.passed
        assert any("ignores every eigenvalue" in f for f in report.failures)


class TestEnergy:
    """Tests for functional values and cluster weights at a spectrum."""

    def test_gap_holds_for_inverse(self, sphere2_problem):
        """Test that E < E0 when F is infinite at zero."""
        s = solve(sphere2_problem, 4)
        report = eval_E(FunctionalSpec.parse("inv1"), s)
        assert report.energy == pytest.approx(1.0 / s.normalized()[1])
        assert report.energy_zero == math.inf
        assert report.gap_holds

    def test_gap_holds_for_heat(self, sphere2_problem):
        """Test that E < E0 for the heat profile."""
        s = solve(sphere2_problem, 4)
        report = eval_E(FunctionalSpec.parse("exp1@0.01"), s)
        assert report.energy_zero == pytest.approx(1.0)
        assert report.gap_holds

    def test_functional_needs_enough_eigenvalues(self, sphere2_problem):
        """Test that a functional using more eigenvalues than solved is rejected."""
        s = solve(sphere2_problem, 2)
        with pytest.raises(ValidationError, match="uses 3 eigenvalues"):
            eval_E(FunctionalSpec.parse("inv3"), s)

    def test_cluster_weights_normalization(self, sphere2_problem):
        """Test that sum_i t_i lambda_bar_i = 1 and cluster masses add up."""
        s = solve(sphere2_problem, 6)
        spec = FunctionalSpec.parse("inv:1,2,3,1")
        weights = cluster_weights(spec, s)
        x = s.normalized()[1:5]
        assert float(np.dot(weights.t, x)) == pytest.approx(1.0)
        assert (weights.t > 0).all()
        assert set(weights.cluster_mass) == {1, 4}
        assert weights.cluster_mass[1] == pytest.approx(weights.t[:3].sum())


class TestDerivatives:
    """Tests for directional and finite-difference derivatives."""

    def test_simple_eigenvalue_matches_finite_difference(self, lumpy_torus, probe_direction):
        """Test that the analytic derivative of a simple eigenvalue matches central differences."""
        m, beta, p, s = lumpy_torus
        h, b = probe_direction
        assert s.cluster_of(1).size == 1
        analytic = directional_derivative(p, s, h, b, 1)
        numeric = finite_difference_derivative(m, beta, "laplace", h, b, 1)
        assert analytic.value == pytest.approx(numeric.richardson, rel=1e-5, abs=1e-6)
        assert analytic.value == pytest.approx(numeric.one_sided[0], rel=1e-2, abs=1e-3)

    def test_scalings_have_zero_derivative(self, sphere2, sphere2_problem):
        """Test that scaling the metric or the density leaves normalized eigenvalues fixed."""
        s = solve_closed(sphere2_problem, 3)
        g = MetricPerturbation.identity(sphere2.n_faces)
        zero_b = np.zeros(sphere2.n_vertices)
        metric = directional_derivative(sphere2_problem, s, g, zero_b, 1)
        np.testing.assert_allclose(metric.derivatives, 0.0, atol=1e-9)
        zero_h = MetricPerturbation.zeros(sphere2.n_faces)
        density = directional_derivative(sphere2_problem, s, zero_h, sphere2_problem.mass.copy(), 2)
        np.testing.assert_allclose(density.derivatives, 0.0, atol=1e-8)
        assert metric.cluster.size == 3

    def test_truncated_cluster_is_ambiguous(self, sphere2, sphere2_problem):
        """Test that a cluster cut off by the solve raises ClusterAmbiguityError."""
        s = solve(sphere2_problem, 2)
        h = MetricPerturbation.zeros(sphere2.n_faces)
        with pytest.raises(ClusterAmbiguityError) as excinfo:
            directional_derivative(sphere2_problem, s, h, np.zeros(sphere2.n_vertices), 1)
        assert excinfo.value.candidate == (1, 3)

    def test_perturbation_shape_checked(self, lumpy_torus):
        """Test that a perturbation for another surface is rejected."""
        m, _, p, s = lumpy_torus
        h = MetricPerturbation.zeros(m.n_faces + 1)
        with pytest.raises(ValidationError, match="faces"):
            directional_derivative(p, s, h, np.zeros(m.n_vertices), 1)

    def test_subgradient_predicts_functional_change(self, lumpy_torus, probe_direction):
        """Test that the subgradient element pairs to dE for a simple eigenvalue."""
        _, _, p, s = lumpy_torus
        h, b = probe_direction
        spec = FunctionalSpec.parse("inv1")
        elements = subgradient_elements(spec, p, s)
        assert len(elements) == 1
        derivative = directional_derivative(p, s, h, b, 1).value
        expected = spec.partials(s.normalized()[1:2])[0] * derivative
        assert pair_variation(p.surface, elements[0], h, b) == pytest.approx(expected, rel=1e-8)

    def test_subgradients_sample_rotations_in_clusters(self, sphere2_problem):
        """Test that a multiple cluster yields shifted and rotated selections."""
        s = solve_closed(sphere2_problem, 3)
        elements = subgradient_elements(FunctionalSpec.parse("inv1"), sphere2_problem, s, samples=4)
        names = [e.selection for e in elements]
        assert names[:3] == ["shift:0", "shift:1", "shift:2"]
        assert len([n for n in names if n.startswith("rotation")]) == 4


@pytest.mark.slow
class TestDerivativeFidelity:
    """Tests for analytic derivatives against finite differences over many directions."""

    def test_random_directions_match_richardson(self, sphere2):
        """Test that 50 random directions agree with Richardson differences on a lumpy sphere."""
        beta = perturbed_density(sphere2, 0.6, seed=11)
        p = assemble(sphere2, beta)
        s = solve_closed(p, 2)
        assert s.cluster_of(1).size == 1
        rng = np.random.default_rng(2024)
        for _ in range(50):
            h = MetricPerturbation.random(sphere2.n_faces, rng, scale=0.5)
            b = 0.3 * rng.standard_normal(sphere2.n_vertices) * beta.weights
            analytic = directional_derivative(p, s, h, b, 1).value
            numeric = finite_difference_derivative(sphere2, beta, "laplace", h, b, 1).richardson
            assert abs(analytic - numeric) <= 1e-4 * (1.0 + abs(numeric))

    def test_cluster_one_sided_differences(self, sphere2, sphere2_problem):
        """Test that the sorted one-sided differences of a triple cluster are the form's eigenvalues."""
        s = solve_closed(sphere2_problem, 3)
        assert s.cluster_of(1).size == 3
        rng = np.random.default_rng(5)
        h = MetricPerturbation.random(sphere2.n_faces, rng, scale=0.2)
        b = np.zeros(sphere2.n_vertices)
        analytic = directional_derivative(sphere2_problem, s, h, b, 1)
        numeric = finite_difference_derivative(sphere2, sphere2_problem.density, "laplace", h, b, 1)
        assert numeric.one_sided.size == 3
        scale = 1.0 + np.abs(analytic.derivatives).max()
        np.testing.assert_allclose(numeric.one_sided, analytic.derivatives, atol=1e-3 * scale)
