"""Tests for assembly, the eigensolver and spectrum results."""

import json

import numpy as np
import pytest

from src.models.measure import DensityMeasure
from src.models.spectrum import MassKind, ProblemKind, SpectrumResult, cluster_values
from src.services.builtin_surfaces import builtin_surface, flat_torus, sphere
from src.services.eigensolver import rayleigh_minmax_check, solve, solve_closed
from src.services.fem import assemble, cotangent_weights, dirichlet_energy, harmonic_extension
from src.services.metric import area_density, perturbed_density
from src.utils.errors import ValidationError
from src.utils.serialization import canonical_json


class TestAssembly:
    """Tests for stiffness and mass assembly."""

    def test_constants_in_kernel(self, sphere2_problem):
        """Test that the stiffness annihilates constants."""
        ones = np.ones(sphere2_problem.dimension)
        assert np.abs(sphere2_problem.stiffness @ ones).max() == pytest.approx(0.0, abs=1e-12)

    def test_stiffness_symmetric(self, sphere2_problem):
        """Test that the stiffness is symmetric."""
        k = sphere2_problem.stiffness
        assert abs(k - k.T).max() == pytest.approx(0.0, abs=1e-14)

    def test_mass_is_density(self, sphere2, sphere2_problem):
        """Test that the lumped mass is the density's vertex weights."""
        np.testing.assert_allclose(sphere2_problem.mass, area_density(sphere2).weights)
        assert sphere2_problem.total_mass == pytest.approx(sphere2.total_area)

    def test_torus_diagonals_carry_no_weight(self, torus8):
        """Test that right-angle diagonals of the square torus have zero cotangent weight."""
        weights = cotangent_weights(torus8)
        lengths = torus8.lengths
        diagonal = lengths > 1.2 / 8
        np.testing.assert_allclose(weights[diagonal], 0.0, atol=1e-12)
        np.testing.assert_allclose(weights[~diagonal], 1.0, rtol=1e-12)

    def test_steklov_on_closed_surface_rejected(self, torus8):
        """Test that a closed surface has no Steklov problem."""
        with pytest.raises(ValidationError, match="no Steklov problem"):
            assemble(torus8, area_density(torus8), "steklov")

    def test_steklov_needs_boundary_density(self, disk8):
        """Test that Steklov assembly refuses a surface density."""
        with pytest.raises(ValidationError, match="boundary density"):
            assemble(disk8, area_density(disk8), ProblemKind.STEKLOV)

    def test_density_size_mismatch(self, sphere1, sphere2):
        """Test that a density for another surface is rejected."""
        with pytest.raises(ValidationError, match="entries"):
            assemble(sphere2, area_density(sphere1))

    def test_vanishing_laplace_density_rejected(self, sphere1):
        """Test that a Laplace density must be positive at every vertex."""
        w = area_density(sphere1).weights.copy()
        w[5] = 0.0
        with pytest.raises(ValidationError, match="vanishes at vertex 5"):
            assemble(sphere1, DensityMeasure(w))

    def test_harmonic_extension_of_linear_data(self, disk8):
        """Test that boundary data x extends to the linear function x."""
        p = assemble(disk8, area_density(disk8))
        boundary = disk8.boundary_vertices
        x = disk8.positions[:, 0]
        extended = harmonic_extension(p.stiffness, boundary, x[boundary])
        np.testing.assert_allclose(extended, x, atol=1e-10)
        assert dirichlet_energy(p, extended) == pytest.approx(disk8.total_area, rel=1e-9)


class TestEigensolver:
    """Tests for the generalized eigensolver."""

    def test_flat_torus_first_cluster(self):
        """Test that the flat unit torus has lambda_1 near 4 pi^2 with multiplicity four."""
        m = flat_torus(32)
        s = solve(assemble(m, area_density(m)), 6)
        assert s.method == "sparse"
        assert s.eigenvalues[0] == 0.0
        assert s.eigenvalues[1] == pytest.approx(4 * np.pi**2, rel=1e-2)
        assert s.cluster_of(1).size == 4
        assert s.cluster_of(1).indices == range(1, 5)

    def test_hex_torus_first_cluster(self):
        """Test that the equilateral torus has lambda_bar_1 near 8 pi^2 / sqrt(3), six times."""
        m = builtin_surface("torus:32:hex")
        s = solve(assemble(m, area_density(m)), 7)
        assert s.normalized()[1] == pytest.approx(8 * np.pi**2 / np.sqrt(3.0), rel=2e-2)
        assert s.cluster_of(1).size == 6

    def test_sphere_first_cluster(self):
        """Test that the unit sphere has lambda_1 near 2 with multiplicity three."""
        m = sphere(3)
        s = solve(assemble(m, area_density(m)), 4)
        assert s.eigenvalues[1] == pytest.approx(2.0, rel=2e-2)
        assert s.cluster_of(1).size == 3
        assert s.normalized()[1] == pytest.approx(8 * np.pi, rel=2e-2)

    def test_disk_steklov(self, disk_steklov):
        """Test that the unit disk has normalized sigma_1 near 2 pi, twice."""
        s = solve(disk_steklov, 3)
        assert s.kind is ProblemKind.STEKLOV
        assert s.method == "steklov"
        assert s.normalized()[1] == pytest.approx(2 * np.pi, rel=2e-2)
        assert s.cluster_of(1).size == 2

    def test_eigenvectors_beta_orthonormal(self, sphere2_problem):
        """Test that eigenvectors are orthonormal in the density pairing."""
        s = solve(sphere2_problem, 8)
        gram = sphere2_problem.pair(s.eigenvectors, s.eigenvectors)
        np.testing.assert_allclose(gram, np.eye(9), atol=1e-8)
        assert s.orthonormality_defect < 1e-8
        assert s.residuals.max() <= s.tolerance

    def test_dense_and_sparse_agree(self, sphere2_problem):
        """Test that the dense and sparse paths return the same eigenvalues."""
        dense = solve(sphere2_problem, 8, method="dense")
        sparse = solve(sphere2_problem, 8, method="sparse")
        np.testing.assert_allclose(sparse.eigenvalues, dense.eigenvalues, rtol=1e-8, atol=1e-10)

    def test_normalized_eigenvalues_scale_invariant(self, sphere2):
        """Test that scaling the density leaves lambda * beta(1,1) unchanged."""
        beta = perturbed_density(sphere2, 0.3, seed=5)
        s1 = solve(assemble(sphere2, beta), 5)
        s2 = solve(assemble(sphere2, beta.scaled(7.0)), 5)
        np.testing.assert_allclose(s1.normalized(), s2.normalized(), rtol=1e-8)
        np.testing.assert_allclose(s2.eigenvalues * 7.0, s1.eigenvalues, rtol=1e-8)

    def test_consistent_mass_close_to_lumped(self, sphere2):
        """Test that consistent mass gives a spectrum close to the lumped one."""
        beta = area_density(sphere2)
        lumped = solve(assemble(sphere2, beta), 3)
        consistent = solve(assemble(sphere2, beta, mass=MassKind.CONSISTENT), 3)
        assert consistent.eigenvalues[1] == pytest.approx(lumped.eigenvalues[1], rel=5e-2)

    def test_k_out_of_range(self, tetrahedron):
        """Test that k must leave room in the problem dimension."""
        p = assemble(tetrahedron, area_density(tetrahedron))
        with pytest.raises(ValidationError, match="must lie in"):
            solve(p, 4)
        with pytest.raises(ValidationError):
            solve(p, 0)

    def test_unknown_method(self, sphere2_problem):
        """Test that an unknown solver method is rejected."""
        with pytest.raises(ValidationError, match="unknown solver method"):
            solve(sphere2_problem, 3, method="lanczos")

    def test_truncated_cluster_is_noted(self, sphere2_problem):
        """Test that stopping inside a cluster is flagged and solve_closed completes it."""
        s = solve(sphere2_problem, 2)
        assert s.is_truncated(s.clusters[-1])
        assert s.notes
        closed = solve_closed(sphere2_problem, 2)
        assert not closed.is_truncated(closed.cluster_of(2))
        assert closed.cluster_of(2).size == 3

    def test_minmax_check_passes(self, sphere2_problem):
        """Test that the solved spectrum satisfies the min-max characterization."""
        s = solve(sphere2_problem, 4)
        report = rayleigh_minmax_check(sphere2_problem, s, trials=20)
        assert report.passed, report.defects
        assert report.dense_relative_error < 1e-8


class TestSpectrumResult:
    """Tests for spectrum results and clusters."""

    def test_cluster_values_split_on_gaps(self):
        """Test that clusters split where gaps exceed the tolerance."""
        values = np.array([0.0, 1.0, 1.0 + 1e-9, 2.0, 3.0, 3.0])
        clusters = cluster_values(values, 1e-6)
        assert [(c.start, c.end) for c in clusters] == [(0, 0), (1, 2), (3, 3), (4, 5)]

    def test_from_dict_rebuilds_result(self, sphere2_problem):
        """Test that a result rebuilt from to_dict keeps values and clusters."""
        s = solve(sphere2_problem, 4)
        doc = json.loads(canonical_json(s.to_dict()))
        rebuilt = SpectrumResult.from_dict(doc, s.eigenvectors)
        np.testing.assert_array_equal(rebuilt.eigenvalues, s.eigenvalues)
        assert [c.size for c in rebuilt.clusters] == [c.size for c in s.clusters]
        assert rebuilt.kind is s.kind

    def test_from_dict_shape_mismatch(self, sphere2_problem):
        """Test that eigenvectors with the wrong column count are rejected."""
        s = solve(sphere2_problem, 4)
        with pytest.raises(ValueError, match="do not match"):
            SpectrumResult.from_dict(s.to_dict(), s.eigenvectors[:, :3])

    def test_summary_mentions_kind(self, disk_steklov):
        """Test that the summary line names the problem kind."""
        s = solve(disk_steklov, 2)
        assert s.summary().startswith("steklov k=2")
