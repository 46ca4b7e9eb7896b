"""Tests for density descent and optimize run files."""

import numpy as np
import pytest

from src.models.run import MoveSet, OptimizerConfig, RunFile, TerminationReason
from src.services.builtin_surfaces import sphere
from src.services.metric import perturbed_density, uniform_probability
from src.services.optimizer import (
    density_from_source,
    floor_density,
    initial_density,
    maximize_lambda1,
    min_norm_hull,
    minimize_E,
    project_simplex,
    run_from_file,
)
from src.utils.errors import ConfigError, FunctionalError, ValidationError
from src.utils.serialization import write_json


class TestSimplexHelpers:
    """Tests for simplex projection, flooring and the min-norm hull."""

    def test_projection_lands_on_simplex(self):
        """Test that projected vectors are nonnegative with unit sum."""
        rng = np.random.default_rng(0)
        for _ in range(5):
            w = project_simplex(rng.normal(size=12))
            assert (w >= 0).all()
            assert w.sum() == pytest.approx(1.0)

    def test_projection_fixes_simplex_points(self):
        """Test that a point already on the simplex is unchanged."""
        v = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(project_simplex(v), v)
        np.testing.assert_allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])

    def test_floor_raises_zeros(self):
        """Test that zero entries are lifted to the floor and mass stays one."""
        w = floor_density(np.array([0.0, 1.0, 1.0]), floor=0.1)
        assert w.sum() == pytest.approx(1.0)
        assert w[0] > 0
        assert w[1] == pytest.approx(w[2])

    def test_opposite_vectors_give_zero(self):
        """Test that the hull of v and -v contains the origin."""
        alpha, element = min_norm_hull(np.array([[1.0, 2.0], [-1.0, -2.0]]))
        np.testing.assert_allclose(element, 0.0, atol=1e-6)
        np.testing.assert_allclose(alpha, [0.5, 0.5], atol=1e-6)

    def test_orthogonal_vectors_meet_midway(self):
        """Test that the min-norm point of two unit axes is their midpoint."""
        _, element = min_norm_hull(np.eye(2))
        np.testing.assert_allclose(element, [0.5, 0.5], atol=1e-6)

    def test_single_vector(self):
        """Test that a single vector is its own hull."""
        alpha, element = min_norm_hull(np.array([[3.0, 4.0]]))
        assert alpha.tolist() == [1.0]
        np.testing.assert_array_equal(element, [3.0, 4.0])


class TestMinimizeE:
    """Tests for the nonsmooth descent loop."""

    @pytest.fixture
    def start(self, sphere1):
        return perturbed_density(sphere1, 0.5, seed=2)

    def test_objective_never_increases(self, sphere1, start):
        """Test that accepted iterates strictly decrease the objective."""
        cfg = OptimizerConfig(objective="inv1", max_iterations=4)
        seen = []
        run = minimize_E(sphere1, cfg, start, seed=0, callback=seen.append)
        assert run.history[0].iteration == 0
        assert run.history[0].move == "init"
        assert seen == run.history
        objectives = [r.objective for r in run.accepted]
        assert all(b < a for a, b in zip(objectives, objectives[1:]))
        assert run.objective == pytest.approx(objectives[-1])
        assert run.objective <= run.history[0].objective
        assert run.final_density.total_mass == pytest.approx(1.0)
        assert "stationarity" in run.defects

    def test_iteration_cap(self, sphere1, start):
        """Test that max_iterations = 0 stops after the initial record."""
        run = minimize_E(sphere1, OptimizerConfig(max_iterations=0), start)
        assert run.termination is TerminationReason.MAX_ITERATIONS
        assert len(run.history) == 1

    def test_conformal_moves(self, sphere1, start):
        """Test that conformal steps keep a positive probability density."""
        cfg = OptimizerConfig(objective="log2", moves=MoveSet.CONFORMAL, max_iterations=3)
        run = minimize_E(sphere1, cfg, start)
        assert (run.final_density.weights > 0).all()
        assert {r.move for r in run.history[1:]} <= {"conformal"}
        assert run.objective <= run.history[0].objective

    def test_failed_hypothesis_rejected(self, sphere1, start):
        """Test that a functional with an increasing coordinate is refused."""
        with pytest.raises(FunctionalError, match="monotonicity"):
            minimize_E(sphere1, OptimizerConfig(objective="inv:1,-1"), start)

    def test_initial_density_size_checked(self, sphere1, sphere2):
        """Test that the initial density must match the surface."""
        with pytest.raises(ValidationError, match="initial density"):
            minimize_E(sphere1, OptimizerConfig(), uniform_probability(sphere2))

    def test_maximize_lambda1_uses_inverse(self, sphere1, start):
        """Test that maximize_lambda1 overrides the objective with 1 / lambda_bar_1."""
        run = maximize_lambda1(sphere1, OptimizerConfig(objective="log3", max_iterations=1), start)
        assert run.functional.name == "inv1"
        assert run.objective == pytest.approx(1.0 / run.final_spectrum.normalized()[1])

    @pytest.mark.slow
    def test_sphere_lambda1_recovers_round_value(self):
        """Test that maximizing lambda_bar_1 from a perturbed sphere climbs back within 2% of 8 pi."""
        m = sphere(3)
        start = perturbed_density(m, 0.5, seed=4)
        run = maximize_lambda1(m, OptimizerConfig(max_iterations=40), start, seed=0)
        first = run.history[0].normalized[0]
        final = run.final_spectrum.normalized()[1]
        assert first < 0.98 * 8 * np.pi
        assert final > first
        assert final == pytest.approx(8 * np.pi, rel=2e-2)


class TestRunFile:
    """Tests for optimize TOML files and initial densities."""

    def test_defaults(self):
        """Test that a minimal run file fills optimizer defaults."""
        run = RunFile.from_mapping({"run": {"mesh": "sphere:1"}})
        assert run.run.density == "uniform"
        assert run.optimizer.objective == "inv1"
        assert run.optimizer.initial_step == 0.2
        assert run.optimizer.objective_tol == 0.0

    def test_unknown_key_named(self, tmp_path):
        """Test that an unknown key is reported with its dotted path."""
        path = tmp_path / "run.toml"
        path.write_text('[run]\nmesh = "sphere:1"\nsead = 3\n', encoding="utf-8")
        with pytest.raises(ConfigError, match="unknown key 'run.sead'"):
            RunFile.from_toml(path)

    def test_invalid_value_named(self):
        """Test that an out-of-range value is reported with its key."""
        data = {"run": {"mesh": "sphere:1"}, "optimizer": {"backtrack": 2.0}}
        with pytest.raises(ConfigError, match="optimizer.backtrack"):
            RunFile.from_mapping(data)

    def test_bad_objective_rejected(self):
        """Test that an unparseable objective is a configuration error."""
        with pytest.raises(ConfigError, match="optimizer.objective"):
            RunFile.from_mapping({"run": {"mesh": "sphere:1"}, "optimizer": {"objective": "inv0"}})

    def test_missing_file(self, tmp_path):
        """Test that a missing run file raises ConfigError."""
        with pytest.raises(ConfigError, match="not found"):
            RunFile.from_toml(tmp_path / "missing.toml")

    def test_perturbed_start_is_seeded(self, sphere1):
        """Test that perturbed initial densities are probability vectors fixed by the seed."""
        data = {"run": {"mesh": "sphere:1", "init": "perturbed", "perturbation": 0.3, "seed": 4}}
        a = initial_density(sphere1, RunFile.from_mapping(data))
        b = initial_density(sphere1, RunFile.from_mapping(data))
        assert a.total_mass == pytest.approx(1.0)
        np.testing.assert_array_equal(a.weights, b.weights)
        assert not np.allclose(a.weights, uniform_probability(sphere1).weights)

    def test_density_file_source(self, tmp_path, sphere1, sphere2):
        """Test that densities load from JSON and must match the surface."""
        path = write_json(tmp_path / "density.json", perturbed_density(sphere1, 0.2).to_dict())
        assert density_from_source(sphere1, str(path)).n_vertices == sphere1.n_vertices
        with pytest.raises(ValidationError, match="entries"):
            density_from_source(sphere2, str(path))
        with pytest.raises(ValidationError, match="not found"):
            density_from_source(sphere1, str(tmp_path / "nope.json"))

    def test_run_from_file(self):
        """Test that a run file drives a short optimization end to end."""
        run = RunFile.from_mapping(
            {"run": {"mesh": "sphere:1", "init": "perturbed", "perturbation": 0.4}, "optimizer": {"max_iterations": 2}}
        )
        m, result = run_from_file(run, seed=3)
        assert m.n_vertices == 42
        assert len(result.history) <= 3
        assert result.history[0].move == "init"
