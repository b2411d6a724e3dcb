import numpy as np
import pytest

from shellads import torus
from shellads.errors import UnmatchedBoundaryVertexError
from shellads.mesh import (
    PeriodicMesh,
    canonicalize,
    face_circumradii,
    load_mesh,
    load_obj,
    load_off,
    mean_element_size,
    save_exploded_obj,
    save_obj,
    save_off,
)
from shellads.implicit import flat_plane, tpms_field, extract_mesh
from shellads.remesh import dynamic_remesh


def _plane_soup(n):
    coords = -1.0 + 2.0 * np.arange(n + 1) / n
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    verts = np.stack([xx.ravel(), yy.ravel(), np.zeros(xx.size)], axis=1)
    faces = []
    for i in range(n):
        for j in range(n):
            a = i * (n + 1) + j
            faces.append([a, a + 1, a + n + 2])
            faces.append([a, a + n + 2, a + n + 1])
    return verts, np.array(faces)


class TestCanonicalize:
    def test_plane_becomes_torus(self):
        verts, faces = _plane_soup(8)
        mesh = canonicalize(verts, faces, tol=1e-9)
        assert mesh.euler_characteristic() == 0
        assert mesh.is_closed_manifold()
        assert mesh.num_vertices == 64

    def test_schwarz_p_genus_three(self):
        mesh = extract_mesh(tpms_field("P"), 32, remesh=False)
        assert mesh.euler_characteristic() == -4
        assert mesh.genus() == 3

    def test_unmatched_boundary_vertex(self):
        verts, faces = _plane_soup(4)
        tol = 1e-6
        # push one boundary vertex well outside the matching tolerance
        idx = np.argmax(verts[:, 0])
        verts[idx, 1] += 10 * tol
        with pytest.raises(UnmatchedBoundaryVertexError):
            canonicalize(verts, faces, tol=tol)

    def test_merge_keeps_lexicographically_smaller_position(self):
        verts, faces = _plane_soup(4)
        mesh = canonicalize(verts, faces, tol=1e-9)
        # every wrapped coordinate stays in [-1, 1): the +1 copies are gone
        assert mesh.vertices.min() >= -1.0
        assert mesh.vertices.max() < 1.0

    def test_merge_map_present(self):
        verts, faces = _plane_soup(4)
        mesh = canonicalize(verts, faces, tol=1e-9)
        assert mesh.merge_map.shape == (len(verts),)
        assert mesh.merge_map.max() == mesh.num_vertices - 1


class TestUnfold:
    def test_shift_across_boundary(self):
        out = torus.unfold(np.array([-0.9, 0.0, 0.0]), np.array([0.9, 0.0, 0.0]))
        assert np.allclose(out, [1.1, 0.0, 0.0])

    def test_in_range_unchanged(self):
        out = torus.unfold(np.array([0.1, 0.1, 0.0]), np.zeros(3))
        assert np.allclose(out, [0.1, 0.1, 0.0])

    def test_two_axis_shift(self):
        out = torus.unfold(np.array([-0.9, -0.9, 0.0]),
                           np.array([0.9, 0.9, 0.0]))
        assert np.allclose(out, [1.1, 1.1, 0.0])

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        center = rng.uniform(-1, 1, 3)
        pts = rng.uniform(-1, 1, (20, 3))
        once = torus.unfold(pts, center)
        assert np.allclose(torus.unfold(once, center), once)

    def test_ring_components_within_one(self, schwarz_p):
        for v in range(0, schwarz_p.num_vertices, 97):
            ring = schwarz_p.unfold_ring(v)
            delta = ring.positions - schwarz_p.vertices[v]
            assert np.all(np.abs(delta) <= 1.0 + 1e-12)


class TestElementSize:
    def test_equilateral(self):
        s = 0.2
        v = np.array([[0, 0, 0], [s, 0, 0], [s / 2, s * np.sqrt(3) / 2, 0]])
        mesh = PeriodicMesh(v, np.array([[0, 1, 2]]))
        radii, degen = face_circumradii(mesh)
        assert not degen.any()
        assert np.isclose(radii[0], s / np.sqrt(3))

    def test_degenerate_fallback(self):
        v = np.array([[0, 0, 0], [0.2, 0, 0], [0.1, 0, 0]])
        mesh = PeriodicMesh(v, np.array([[0, 1, 2]]))
        radii, degen = face_circumradii(mesh)
        assert degen[0]
        assert np.isclose(radii[0], 0.1)

    def test_refinement_halves_size(self, schwarz_p_field):
        mesh = extract_mesh(schwarz_p_field, 32, remesh=False)
        coarse = dynamic_remesh(mesh, 0.16)
        fine = dynamic_remesh(coarse, 0.08)
        ratio = mean_element_size(fine) / mean_element_size(coarse)
        assert abs(ratio - 0.5) < 0.05 * 0.5 + 0.025


class TestTopologyQueries:
    def test_validate_rejects_flipped_face(self, plane16):
        faces = plane16.faces.copy()
        faces[0] = faces[0, ::-1]
        broken = PeriodicMesh(plane16.vertices, faces)
        with pytest.raises(Exception):
            broken.validate()

    def test_coordinates_stay_wrapped(self, schwarz_p):
        out = dynamic_remesh(schwarz_p, 0.12)
        assert out.vertices.min() >= -1.0
        assert out.vertices.max() < 1.0


class TestIO:
    def test_obj_roundtrip(self, tmp_path, plane16):
        path = tmp_path / "plane.obj"
        save_obj(plane16, path)
        again = load_mesh(path)
        assert again.num_vertices == plane16.num_vertices
        assert again.euler_characteristic() == 0
        meta = (tmp_path / "plane.obj.json")
        assert meta.exists()

    def test_off_roundtrip(self, tmp_path, plane16):
        path = tmp_path / "plane.off"
        save_off(plane16, path)
        v, f = load_off(path)
        assert len(v) == plane16.num_vertices
        assert len(f) == plane16.num_faces

    def test_exploded_export(self, tmp_path, schwarz_p):
        path = tmp_path / "exploded.obj"
        save_exploded_obj(schwarz_p, path)
        v, f = load_obj(path)
        assert len(f) == schwarz_p.num_faces
        assert len(v) == 3 * schwarz_p.num_faces
