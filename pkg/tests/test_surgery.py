"""Tests for handle and strip surgery."""

import numpy as np
import pytest

from src.models.surface import SurgeryKind
from src.services.builtin_surfaces import flat_torus
from src.services.surgery import (
    attach_handle,
    attach_strip,
    excise_disks,
    neck_circumference,
)
from src.services.topology import farthest_vertex
from src.utils.errors import SurgeryError


@pytest.fixture(scope="module")
def handled(torus16):
    q = farthest_vertex(torus16, 0)
    return attach_handle(torus16, 0, q, eps=0.1, length=1.0, n_theta=8)


@pytest.fixture(scope="module")
def stripped(disk8):
    loop = disk8.boundary_loops[0]
    p, q = int(loop[0]), int(loop[len(loop) // 2])
    return attach_strip(disk8, p, q, eps=0.2, length=2.0)


class TestAttachHandle:
    """Tests for thin handle attachment."""

    def test_genus_increases_by_one(self, torus16, handled):
        """Test that a handle on a torus gives a closed genus-two surface."""
        glued, report = handled
        assert glued.is_closed
        assert glued.genus == torus16.genus + 1
        assert report.kind is SurgeryKind.HANDLE
        assert report.genus_before == 1
        assert report.genus_after == 2
        assert report.euler_after == report.euler_before - 2

    def test_seams_have_n_theta_vertices(self, handled):
        """Test that both seam rings carry n_theta vertices of the glued surface."""
        glued, report = handled
        assert len(report.seams) == 2
        for seam in report.seams:
            assert seam.shape == (8, 2)
            assert (seam[:, 0] < glued.n_vertices).all()

    def test_inserted_area_matches_cylinder(self, handled):
        """Test that the neck area is its circumference times its height."""
        _, report = handled
        expected = neck_circumference(0.1, 8) * 0.1 * 1.0
        assert report.inserted_area == pytest.approx(expected, rel=1e-9)

    def test_vertex_map_drops_removed_vertices(self, torus16, handled):
        """Test that removed vertices map to -1 and kept ones keep their order."""
        _, report = handled
        kept = report.vertex_map[report.vertex_map >= 0]
        assert (report.vertex_map[report.removed_vertices] == -1).all()
        assert np.all(np.diff(kept) > 0)
        assert kept.size == torus16.n_vertices - report.removed_vertices.size

    def test_same_endpoint_rejected(self, torus16):
        """Test that a handle needs two distinct endpoints."""
        with pytest.raises(SurgeryError, match="must differ"):
            attach_handle(torus16, 3, 3, eps=0.1, length=1.0)

    def test_needs_closed_surface(self, disk8):
        """Test that handles are refused on surfaces with boundary."""
        with pytest.raises(SurgeryError, match="closed surface"):
            attach_handle(disk8, 0, 5, eps=0.1, length=1.0)

    @pytest.mark.parametrize("eps", [0.0, -0.1, float("nan")])
    def test_bad_eps_rejected(self, torus16, eps):
        """Test that eps must be a positive finite length."""
        with pytest.raises(SurgeryError):
            attach_handle(torus16, 0, 100, eps=eps, length=1.0)

    def test_oversized_disk_rejected(self, torus16):
        """Test that a disk wider than the torus is refused."""
        with pytest.raises(SurgeryError):
            attach_handle(torus16, 0, farthest_vertex(torus16, 0), eps=0.45, length=1.0)

    @pytest.mark.parametrize("eps", [0.1, 0.05])
    def test_handle_on_fine_torus(self, eps):
        """Test that rim growth on a fine torus settles into two clean seams."""
        m = flat_torus(32)
        glued, report = attach_handle(m, 0, farthest_vertex(m, 0), eps=eps, length=3.0)
        assert glued.is_closed
        assert glued.genus == 2
        assert [seam.shape for seam in report.seams] == [(16, 2), (16, 2)]
        assert report.inserted_area == pytest.approx(neck_circumference(eps, 16) * 3.0 * eps, rel=1e-9)


class TestExciseDisks:
    """Tests for disk excision."""

    def test_one_boundary_per_center(self, torus16):
        """Test that two excised disks leave two boundary loops."""
        q = farthest_vertex(torus16, 0)
        out, report = excise_disks(torus16, [0, q], eps=0.1, n_theta=8)
        assert out.n_boundary_components == 2
        assert out.genus == 1
        assert report.kind is SurgeryKind.EXCISION
        assert out.boundary_length == pytest.approx(2 * neck_circumference(0.1, 8), rel=1e-9)


class TestAttachStrip:
    """Tests for thin strip attachment."""

    def test_strip_on_disk_gives_annulus(self, stripped):
        """Test that an orientation-preserving strip on a disk gives an annulus."""
        glued, report = stripped
        assert glued.n_boundary_components == 2
        assert glued.genus == 0
        assert report.kind is SurgeryKind.STRIP
        assert report.boundary_components_after == 2

    def test_boundary_length_change(self, disk8, stripped):
        """Test that the boundary loses the two arcs and gains the two long sides."""
        glued, _ = stripped
        expected = disk8.boundary_length - 4 * 0.2 + 2 * 2.0 * 0.2
        assert glued.boundary_length == pytest.approx(expected, rel=1e-9)

    def test_reverse_orientation_rejected(self, disk8):
        """Test that an orientation-reversing strip raises SurgeryError."""
        loop = disk8.boundary_loops[0]
        with pytest.raises(SurgeryError, match="non-orientable"):
            attach_strip(disk8, int(loop[0]), int(loop[24]), eps=0.2, length=2.0, orientation="reverse")

    def test_interior_endpoint_rejected(self, disk8):
        """Test that strip endpoints must lie on the boundary."""
        with pytest.raises(SurgeryError, match="not on the boundary"):
            attach_strip(disk8, 0, int(disk8.boundary_loops[0][0]), eps=0.2, length=2.0)

    def test_overlapping_arcs_rejected(self, disk8):
        """Test that arcs closer than 2 eps are refused."""
        loop = disk8.boundary_loops[0]
        with pytest.raises(SurgeryError, match="overlap"):
            attach_strip(disk8, int(loop[0]), int(loop[1]), eps=0.2, length=2.0)

    def test_closed_surface_rejected(self, torus8):
        """Test that strips need a surface with boundary."""
        with pytest.raises(SurgeryError, match="with boundary"):
            attach_strip(torus8, 0, 1, eps=0.1, length=1.0)
