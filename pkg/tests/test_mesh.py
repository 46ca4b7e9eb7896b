"""Tests for surfaces, mesh validation, mesh files and builtin surfaces."""

import numpy as np
import pytest

from src.services.builtin_surfaces import (
    builtin_surface,
    cylinder,
    disk,
    flat_torus,
    polar_disk,
    sphere,
    surface_from_source,
)
from src.services.mesh_io import (
    from_canonical_json,
    load_mesh,
    parse_off,
    save_mesh,
    to_canonical_json,
)
from src.services.topology import build_surface, farthest_vertex, graph_distances
from src.utils.errors import MeshError


class TestSurfaceValidation:
    """Tests for combinatorial and metric validation."""

    def test_tetrahedron_topology(self, tetrahedron):
        """Test that a tetrahedron is a closed sphere."""
        assert tetrahedron.n_vertices == 4
        assert tetrahedron.n_edges == 6
        assert tetrahedron.euler_characteristic == 2
        assert tetrahedron.is_closed
        assert tetrahedron.genus == 0
        np.testing.assert_allclose(tetrahedron.lengths, 1.0)

    def test_surface_arrays_are_read_only(self, tetrahedron):
        """Test that surface arrays cannot be modified in place."""
        with pytest.raises(ValueError):
            tetrahedron.lengths[0] = 2.0

    def test_repeated_vertex_rejected(self):
        """Test that a face repeating a vertex is rejected."""
        with pytest.raises(MeshError, match="repeats a vertex"):
            build_surface(3, np.array([[0, 1, 1]]), lengths=np.ones(2))

    def test_out_of_range_vertex_rejected(self):
        """Test that a face pointing past the vertex count is rejected."""
        with pytest.raises(MeshError, match="out of range"):
            build_surface(3, np.array([[0, 1, 3]]), lengths=np.ones(3))

    def test_unused_vertex_rejected(self):
        """Test that a vertex outside every face is rejected."""
        positions = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], dtype=float)
        with pytest.raises(MeshError, match="not referenced"):
            build_surface(4, np.array([[0, 1, 2]]), positions=positions)

    def test_non_manifold_edge_rejected(self):
        """Test that three faces on one edge are rejected."""
        positions = np.array(
            [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]], dtype=float
        )
        faces = np.array([[0, 1, 2], [1, 0, 3], [0, 1, 4]])
        with pytest.raises(MeshError, match="non-manifold edge"):
            build_surface(5, faces, positions=positions)

    def test_flipped_face_rejected(self):
        """Test that inconsistent orientation is rejected."""
        positions = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
        faces = np.array([[0, 1, 2], [1, 2, 3]])
        with pytest.raises(MeshError, match="inconsistent orientation"):
            build_surface(4, faces, positions=positions)

    def test_pinched_vertex_rejected(self):
        """Test that two fans sharing only a vertex are rejected."""
        positions = np.array(
            [[0, 0, 0], [1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]], dtype=float
        )
        faces = np.array([[0, 1, 2], [0, 3, 4]])
        with pytest.raises(MeshError):
            build_surface(5, faces, positions=positions)

    def test_triangle_inequality_enforced(self):
        """Test that lengths violating the strict triangle inequality are rejected."""
        with pytest.raises(MeshError):
            build_surface(3, np.array([[0, 1, 2]]), lengths=np.array([1.0, 1.0, 2.0]))

    def test_needs_a_metric_source(self):
        """Test that a surface without lengths or positions is rejected."""
        with pytest.raises(MeshError, match="needs edge lengths"):
            build_surface(3, np.array([[0, 1, 2]]))

    def test_edge_index_lookup(self, tetrahedron):
        """Test that edges are found in either endpoint order."""
        e = tetrahedron.edge_index(2, 0)
        assert sorted(tetrahedron.edges[e].tolist()) == [0, 2]
        with pytest.raises(KeyError):
            tetrahedron.edge_index(0, 0)


class TestBuiltinSurfaces:
    """Tests for the builtin surface generators."""

    def test_sphere_vertex_count(self):
        """Test that icosphere subdivision follows 10 * 4**r + 2."""
        for r in range(3):
            m = sphere(r)
            assert m.n_vertices == 10 * 4**r + 2
            assert m.euler_characteristic == 2

    def test_flat_torus_area_and_genus(self, torus16):
        """Test that the flat torus has unit area and genus one."""
        assert torus16.genus == 1
        assert torus16.is_closed
        assert torus16.positions is None
        assert torus16.total_area == pytest.approx(1.0, rel=1e-12)

    def test_hex_torus_is_equilateral(self):
        """Test that the hexagonal lattice torus is built from equilateral triangles."""
        m = builtin_surface("torus:8:hex")
        np.testing.assert_allclose(m.lengths, 1.0 / 8.0, rtol=1e-12)

    def test_disk_has_one_boundary(self):
        """Test that the disk has one boundary loop of 6 * resolution vertices."""
        m = disk(5)
        assert m.n_boundary_components == 1
        assert len(m.boundary_loops[0]) == 30
        assert m.genus == 0

    def test_disk_triangulation_has_sixfold_symmetry(self):
        """Test that turning every ring by a sixth of a revolution maps faces onto faces."""
        resolution = 8
        m = disk(resolution)
        turn = np.zeros(m.n_vertices, dtype=np.int64)
        for j in range(1, resolution + 1):
            start = 1 + 3 * j * (j - 1)
            i = np.arange(6 * j)
            turn[start + i] = start + (i + j) % (6 * j)
        faces = {tuple(np.roll(f, -int(np.argmin(f)))) for f in m.faces.tolist()}
        turned = {tuple(np.roll(f, -int(np.argmin(f)))) for f in turn[m.faces].tolist()}
        assert turned == faces

    def test_polar_disk_reaches_radius(self):
        """Test that the graded polar disk spans r_min to r_max."""
        m = polar_disk(1e-3, n_theta=16)
        radii = np.hypot(m.positions[:, 0], m.positions[:, 1])
        assert radii[1:].min() == pytest.approx(1e-3)
        assert radii.max() == pytest.approx(1.0)

    def test_cylinder_has_two_boundaries(self):
        """Test that the cylinder has two boundary loops."""
        m = cylinder(1.0, n_theta=12)
        assert m.n_boundary_components == 2
        assert m.genus == 0
        assert m.total_area == pytest.approx(2.0 * np.pi, rel=1e-12)

    @pytest.mark.slow
    def test_genus_two_surface(self):
        """Test that two handles on an icosphere give a closed genus-two surface."""
        m = builtin_surface("genus:2:2")
        assert m.genus == 2
        assert m.is_closed

    @pytest.mark.parametrize("spec", ["cube:3", "torus:8:triangle", "sphere:x", "genus:9:3"])
    def test_bad_builtin_spec(self, spec):
        """Test that unknown or malformed builtin specs raise MeshError."""
        with pytest.raises(MeshError):
            builtin_surface(spec)

    def test_farthest_vertex_on_torus(self, torus16):
        """Test that the farthest vertex from a torus corner is the grid center."""
        q = farthest_vertex(torus16, 0)
        d = graph_distances(torus16, [0])[0]
        assert d[q] == pytest.approx(d.max())
        assert d.max() > 0.5


class TestMeshFiles:
    """Tests for OFF, OBJ and canonical JSON input and output."""

    def test_off_round_trip(self, tmp_path, sphere1):
        """Test that an OFF file reloads with the same faces and lengths."""
        path = save_mesh(sphere1, tmp_path / "sphere.off")
        loaded = load_mesh(path)
        assert loaded.same_combinatorics(sphere1)
        np.testing.assert_allclose(loaded.lengths, sphere1.lengths, rtol=1e-12)

    def test_obj_round_trip(self, tmp_path, disk8):
        """Test that an OBJ file reloads with the same faces."""
        path = save_mesh(disk8, tmp_path / "disk.obj")
        loaded = load_mesh(path)
        assert loaded.same_combinatorics(disk8)
        assert loaded.n_boundary_components == 1

    def test_json_preserves_intrinsic_lengths(self, tmp_path, torus8):
        """Test that canonical JSON reloads an intrinsic surface bit for bit."""
        path = save_mesh(torus8, tmp_path / "torus.json")
        loaded = load_mesh(path)
        assert np.array_equal(loaded.lengths, torus8.lengths)
        assert to_canonical_json(loaded) == to_canonical_json(torus8)

    def test_off_requires_positions(self, tmp_path, torus8):
        """Test that writing OFF for a surface without positions fails."""
        with pytest.raises(MeshError, match="positions"):
            save_mesh(torus8, tmp_path / "torus.off")

    def test_off_polygons_are_fanned(self):
        """Test that an OFF quad is split into two triangles."""
        text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"
        vertices, faces = parse_off(text)
        assert vertices.shape == (4, 3)
        assert faces.tolist() == [[0, 1, 2], [0, 2, 3]]

    def test_truncated_off_rejected(self):
        """Test that a truncated OFF file raises MeshError."""
        with pytest.raises(MeshError, match="truncated"):
            parse_off("OFF\n4 2 0\n0 0 0\n1 0 0\n")

    def test_unknown_extension_rejected(self, tmp_path):
        """Test that an unknown mesh extension raises MeshError."""
        path = tmp_path / "mesh.stl"
        path.write_text("solid", encoding="utf-8")
        with pytest.raises(MeshError, match="cannot infer"):
            load_mesh(path)

    def test_foreign_json_rejected(self):
        """Test that JSON without the surface tag is rejected."""
        with pytest.raises(MeshError, match="not a serialized surface"):
            from_canonical_json('{"format": "other"}')

    def test_source_prefers_files(self, tmp_path, tetrahedron):
        """Test that a mesh path is loaded and a builtin spec is generated."""
        path = save_mesh(tetrahedron, tmp_path / "tet.off")
        assert surface_from_source(str(path)).n_vertices == 4
        assert surface_from_source("sphere:0").n_vertices == 12

    def test_missing_file_rejected(self, tmp_path):
        """Test that a missing mesh file raises MeshError."""
        with pytest.raises(MeshError, match="cannot read"):
            load_mesh(tmp_path / "missing.off")
