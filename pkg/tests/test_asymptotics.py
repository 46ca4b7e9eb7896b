"""Tests for the gluing sweeps, the cutoff capacity and the extension ratio."""

import math

import numpy as np
import pytest

from src.services.asymptotics import (
    cutoff_capacity,
    handle_deficit_sweep,
    harmonic_extension_ratio,
    linear_fit,
    log_cutoff,
    neumann_spectrum,
    strip_deficit_sweep,
)
from src.services.builtin_surfaces import flat_torus, polar_disk
from src.services.topology import farthest_vertex
from src.utils.errors import ValidationError


@pytest.fixture(scope="module")
def graded_disk():
    return polar_disk(1e-5, n_theta=32)


class TestFits:
    """Tests for the regression helper."""

    def test_exact_line(self):
        """Test that collinear points give their slope and intercept."""
        fit = linear_fit([0.0, 1.0, 2.0], [1.0, 3.0, 5.0])
        assert fit["slope"] == pytest.approx(2.0)
        assert fit["intercept"] == pytest.approx(1.0)
        assert fit["points"] == 3
        assert fit["slope_ci95"] == pytest.approx([2.0, 2.0])

    def test_two_points_have_no_interval(self):
        """Test that two points fit a line without a confidence interval."""
        fit = linear_fit([0.0, 1.0], [0.0, -1.0])
        assert fit["slope"] == pytest.approx(-1.0)
        assert fit["slope_ci95"] is None

    def test_non_finite_points_dropped(self):
        """Test that NaN rows are skipped and too few points give None."""
        assert linear_fit([1.0, 2.0, 3.0], [1.0, math.nan, math.nan]) is None
        assert linear_fit([1.0, 1.0], [2.0, 3.0]) is None


class TestCapacity:
    """Tests for the logarithmic cutoff."""

    def test_cutoff_profile(self):
        """Test that the cutoff is 0 inside eps, 1 outside sqrt(eps) and 1/2 at eps^(3/4)."""
        eps = 1e-4
        values = log_cutoff(np.array([1e-6, eps, eps**0.75, 0.01, 0.5]), eps)
        np.testing.assert_allclose(values, [0.0, 0.0, 0.5, 1.0, 1.0], atol=1e-12)

    def test_energy_matches_analytic(self, graded_disk):
        """Test that the cutoff energy is close to 4 pi / ln(1/eps)."""
        report = cutoff_capacity(graded_disk, 0, 1e-4)
        assert report.analytic == pytest.approx(4.0 * np.pi / np.log(1e4))
        assert report.relative_error < 0.1
        assert report.rings_in_annulus >= 20
        assert report.far_field_energy == pytest.approx(0.0, abs=1e-14)

    def test_under_resolved_annulus(self, graded_disk):
        """Test that an annulus with too few rings is refused."""
        with pytest.raises(ValidationError, match="under-resolved"):
            cutoff_capacity(graded_disk, 0, 0.6)

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.5])
    def test_eps_range(self, graded_disk, eps):
        """Test that eps must lie strictly between 0 and 1."""
        with pytest.raises(ValidationError):
            cutoff_capacity(graded_disk, 0, eps)


class TestExtensionRatio:
    """Tests for the cylinder-to-disk energy ratio."""

    @pytest.mark.slow
    @pytest.mark.parametrize("length", [1.0, 2.0, 3.0, 5.0])
    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    def test_ratio_matches_tanh(self, k, length):
        """Test that the mode-k ratio is tanh(k l / 2) and clears 1 - 4 exp(-l)."""
        report = harmonic_extension_ratio(k, length)
        assert report.analytic == pytest.approx(np.tanh(0.5 * k * length))
        assert abs(report.ratio - report.analytic) <= 1e-3
        assert report.ratio >= report.lower_bound
        assert report.lower_bound == pytest.approx(1.0 - 4.0 * np.exp(-length))
        assert not report.notes

    def test_bad_mode_rejected(self):
        """Test that the mode must be positive."""
        with pytest.raises(ValidationError, match="mode k"):
            harmonic_extension_ratio(0, 1.0)

    def test_coarse_resolution_rejected(self):
        """Test that fewer than 8k angular points are refused."""
        with pytest.raises(ValidationError, match="too coarse"):
            harmonic_extension_ratio(2, 1.0, n=12)


class TestDeficitSweeps:
    """Tests for handle and strip sweeps."""

    def test_neumann_needs_boundary(self, torus8):
        """Test that a closed surface has no Neumann problem here."""
        with pytest.raises(ValidationError, match="boundary"):
            neumann_spectrum(torus8, 2)

    def test_neumann_spectrum_of_disk(self, disk8):
        """Test that the Neumann disk spectrum starts at zero with a double mu_1 near j'_11^2."""
        mu = neumann_spectrum(disk8, 3)
        assert mu.eigenvalues[0] == 0.0
        assert mu.eigenvalues[1] == pytest.approx(1.8411837813**2, rel=2e-2)
        assert mu.cluster_of(1).size == 2

    @pytest.mark.parametrize("eps", [[], [0.1, 0.2], [0.1, 0.1], [0.1, -0.05]])
    def test_eps_must_decrease(self, torus16, eps):
        """Test that eps lists must be nonempty, positive and strictly decreasing."""
        with pytest.raises(ValidationError):
            handle_deficit_sweep(torus16, 0, 5, eps, 1.0)

    def test_handle_sweep_needs_closed_base(self, disk8):
        """Test that handle sweeps refuse a base with boundary."""
        with pytest.raises(ValidationError, match="closed base"):
            handle_deficit_sweep(disk8, 0, 5, [0.1], 1.0)

    @pytest.mark.slow
    def test_handle_sweep_rows(self, torus16):
        """Test that a short handle sweep fills one row per eps with genus two."""
        q = farthest_vertex(torus16, 0)
        record = handle_deficit_sweep(torus16, 0, q, [0.15, 0.1], 1.0, k=2, n_theta=8)
        assert record.name == "handle"
        assert not record.failures
        assert [r["point"] for r in record.rows] == [0, 1]
        assert all(r["genus"] == 2 for r in record.rows)
        assert record.fits["neumann"]["fitted_on"] == 1
        assert record.fits["lower_deficit_vs_eps"] is None or "slope" in record.fits["lower_deficit_vs_eps"]
        assert "lambda_1" in record.to_csv().splitlines()[0]

    @pytest.mark.slow
    def test_flat_torus_handle_rates(self):
        """Test that a handle on the flat torus closes the first deficit at rate eps^2."""
        m = flat_torus(32)
        q = farthest_vertex(m, 0)
        eps = [0.1, 0.05, 0.025, 0.0125, 0.00625]
        record = handle_deficit_sweep(m, 0, q, eps, 3.0)
        assert not record.failures
        assert len(record.rows) == len(eps)
        assert record.fits["deficit_decreasing"]
        fit = record.fits["lower_deficit_vs_eps"]
        assert 1.5 <= fit["slope"] <= 2.5
        assert record.fits["neumann"]["holds"]

    def test_strip_sweep_boundary_bookkeeping(self, disk8):
        """Test that strip sweeps predict the glued boundary length exactly."""
        loop = disk8.boundary_loops[0]
        record = strip_deficit_sweep(disk8, int(loop[0]), int(loop[24]), [0.25, 0.2], 2.0, k=2)
        assert record.name == "strip"
        assert not record.failures
        assert record.fits["max_boundary_error"] < 1e-9
        assert all(r["boundary_components"] == 2 for r in record.rows)

    def test_strip_sweep_needs_boundary(self, torus8):
        """Test that strip sweeps refuse a closed base."""
        with pytest.raises(ValidationError, match="with boundary"):
            strip_deficit_sweep(torus8, 0, 1, [0.1], 1.0)
