"""Tests for eigenmap certificates."""

import numpy as np
import pytest

from src.models.functional import FunctionalSpec
from src.services.builtin_surfaces import sphere
from src.services.certificates import (
    build_eigenmap,
    conformality_defect,
    pair_identification_probe,
    random_mixing_map,
)
from src.services.eigensolver import solve, solve_closed
from src.services.fem import assemble
from src.services.metric import area_density
from src.services.variation import cluster_weights
from src.utils.errors import ClusterAmbiguityError, ValidationError


@pytest.fixture
def sphere_map(sphere2_problem):
    s = solve_closed(sphere2_problem, 1)
    weights = cluster_weights(FunctionalSpec.parse("inv1"), s)
    return s, build_eigenmap(sphere2_problem, s, weights, seed=0, starts=4)


class TestEigenmap:
    """Tests for eigenmaps built from cluster weights."""

    def test_sphere_first_cluster_map(self, sphere_map):
        """Test that the first sphere cluster gives a three-component map with zero mean defect."""
        _, cert = sphere_map
        assert cert.n_components == 3
        assert cert.indices == [1, 2, 3]
        assert cert.feasible
        assert cert.normalization_mean == pytest.approx(0.0, abs=1e-10)
        assert cert.normalization_sup < 0.1
        assert cert.normalization_sup <= cert.raw_normalization_sup + 1e-12
        assert cert.harmonic_residuals.max() < 1e-6

    def test_sphere_map_is_nearly_conformal(self, sphere2, sphere2_problem, sphere_map):
        """Test that the eigenmap beats a random mixing of the same modes."""
        s, cert = sphere_map
        report = conformality_defect(cert, sphere2)
        baseline = conformality_defect(random_mixing_map(sphere2_problem, s, [1, 2, 3], seed=0), sphere2)
        assert report.mean < 0.1
        assert report.mean < baseline.mean
        assert report.zero_energy_faces.size == 0

    def test_cluster_masses_follow_weights(self, sphere_map):
        """Test that the cluster receives beta-mass t * beta(1,1)."""
        s, cert = sphere_map
        mass = float(np.sum(cert.coefficients**2))
        assert mass == pytest.approx(cert.cluster_mass[1] * s.total_mass, rel=1e-10)

    def test_truncated_cluster_refused(self, sphere2_problem):
        """Test that a cut-off cluster cannot carry a certificate."""
        s = solve(sphere2_problem, 2)
        weights = cluster_weights(FunctionalSpec.parse("inv1"), s)
        with pytest.raises(ClusterAmbiguityError):
            build_eigenmap(sphere2_problem, s, weights)

    def test_steklov_mean_defect_vanishes(self, disk_steklov):
        """Test that a Steklov eigenmap has zero mean defect on the boundary."""
        s = solve_closed(disk_steklov, 1)
        cert = build_eigenmap(disk_steklov, s, cluster_weights(FunctionalSpec.parse("inv1"), s))
        assert cert.n_components == 2
        assert cert.normalization_mean == pytest.approx(0.0, abs=1e-10)
        assert cert.support.size == disk_steklov.surface.boundary_vertices.size


class TestConformality:
    """Tests for the conformality defect and vertex probes."""

    def test_single_component_defect_is_one(self, sphere2, sphere2_problem):
        """Test that a one-component map has defect one on every face with energy."""
        s = solve(sphere2_problem, 4)
        report = conformality_defect(random_mixing_map(sphere2_problem, s, [4]), sphere2)
        moving = np.setdiff1d(np.arange(sphere2.n_faces), report.zero_energy_faces)
        np.testing.assert_allclose(report.per_face[moving], 1.0, rtol=1e-9)
        assert report.sup == pytest.approx(1.0)

    def test_mixing_modes_checked(self, sphere2_problem):
        """Test that mixing modes must lie in the computed spectrum."""
        s = solve(sphere2_problem, 3)
        with pytest.raises(ValidationError, match="mixing modes"):
            random_mixing_map(sphere2_problem, s, [0, 1])
        with pytest.raises(ValidationError):
            random_mixing_map(sphere2_problem, s, [])

    def test_wrong_surface_rejected(self, sphere1, sphere_map):
        """Test that a certificate is checked against its own surface."""
        _, cert = sphere_map
        with pytest.raises(ValidationError, match="does not belong"):
            conformality_defect(cert, sphere1)

    def test_probe_distances(self, sphere2, sphere_map):
        """Test that a vertex is at distance zero from itself and antipodes are separated."""
        _, cert = sphere_map
        same = pair_identification_probe(cert, 0, 0)
        assert same.distance == 0.0
        antipode = int(np.argmin(sphere2.positions @ sphere2.positions[0]))
        probe = pair_identification_probe(cert, 0, antipode)
        assert probe.distance > 0.1
        assert probe.normalized_distance > probe.distance
        assert not probe.branch

    def test_probe_vertex_range(self, sphere_map):
        """Test that probe vertices must exist."""
        _, cert = sphere_map
        with pytest.raises(ValidationError, match="outside"):
            pair_identification_probe(cert, 0, cert.components.shape[0])


@pytest.mark.slow
class TestCertificateRefinement:
    """Tests for eigenmap certificates under mesh refinement."""

    def test_defect_shrinks_and_beats_random_mixing(self):
        """Test that the round sphere eigenmap grows more conformal with refinement."""
        means = []
        for level in (1, 2, 3):
            m = sphere(level)
            p = assemble(m, area_density(m))
            s = solve_closed(p, 4)
            cert = build_eigenmap(p, s, cluster_weights(FunctionalSpec.parse("inv1"), s), seed=0)
            means.append(conformality_defect(cert, m).mean)
        assert means[0] > means[1] > means[2]
        baseline = conformality_defect(random_mixing_map(p, s, [1, 2, 3, 4], seed=0), m)
        assert baseline.mean >= 10.0 * means[2]
