import numpy as np
import pytest

from conftest import icosphere
from shellads.geometry import (
    SurfaceGeometry,
    cotan_laplacian,
    mass_matrix,
    normal_consistency_violations,
    second_forms,
    vertex_max_curvature,
    vertex_normals,
)
from shellads.mesh import PeriodicMesh

R = 0.8


def _sphere_geo(subdiv=3, exact_normals=False):
    mesh = icosphere(subdiv, radius=R)
    vn = None
    if exact_normals:
        vn = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1,
                                            keepdims=True)
    return mesh, SurfaceGeometry.from_mesh(mesh, vnormals=vn)


class TestVertexNormals:
    def test_plane_normals(self, plane16):
        geo = SurfaceGeometry.from_mesh(plane16)
        assert np.allclose(np.abs(geo.vnormals[:, 2]), 1.0)
        assert np.allclose(geo.vnormals[:, :2], 0.0, atol=1e-14)

    def test_icosphere_accuracy(self):
        mesh, geo = _sphere_geo(3)
        exact = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1,
                                               keepdims=True)
        dots = np.clip(np.einsum("vi,vi->v", exact, geo.vnormals), -1, 1)
        assert np.degrees(np.arccos(dots)).max() < 2.0

    def test_orientation_flag(self, plane16):
        faces = plane16.faces.copy()
        faces[0] = faces[0, ::-1]
        broken = PeriodicMesh(plane16.vertices, faces)
        corners = broken.face_corners()
        vn = vertex_normals(corners, broken.faces, broken.num_vertices)
        from shellads.geometry import face_frames

        fn, _, _, _ = face_frames(corners)
        bad = normal_consistency_violations(vn, fn, broken.faces)
        assert len(bad) > 0

    def test_consistent_mesh_unflagged(self, schwarz_p):
        geo = SurfaceGeometry.from_mesh(schwarz_p)
        from shellads.geometry import face_frames

        bad = normal_consistency_violations(geo.vnormals, geo.normal,
                                            geo.faces)
        assert len(bad) == 0


class TestSecondForm:
    def test_plane_zero(self, plane16):
        geo = SurfaceGeometry.from_mesh(plane16)
        assert np.abs(geo.b).max() < 1e-12

    def test_sphere_sign_and_value(self):
        _, geo = _sphere_geo(3, exact_normals=True)
        # outward normals: b = -(1/R) I exactly for the edge interpolation
        assert np.allclose(geo.b[:, 0, 0], -1.0 / R, atol=1e-10)
        assert np.allclose(geo.b[:, 1, 1], -1.0 / R, atol=1e-10)
        assert np.allclose(geo.b[:, 0, 1], 0.0, atol=1e-10)

    def test_sphere_converges_with_mesh_normals(self):
        errs = []
        for sub in (2, 3, 4):
            _, geo = _sphere_geo(sub)
            errs.append(np.abs(geo.b + np.eye(2) / R).max())
        assert errs[1] < errs[0] and errs[2] < errs[1]

    def test_cylinder_eigenvalues(self):
        # open parametric cylinder patch, analytic normals supplied
        Rc, n = 0.5, 24
        theta = np.linspace(0, np.pi, n)
        z = np.linspace(0, 0.8, n)
        tt, zz = np.meshgrid(theta, z, indexing="ij")
        verts = np.stack([Rc * np.cos(tt).ravel(), Rc * np.sin(tt).ravel(),
                          zz.ravel()], axis=1)
        faces = []
        for i in range(n - 1):
            for j in range(n - 1):
                a = i * n + j
                faces.append([a, a + n, a + n + 1])
                faces.append([a, a + n + 1, a + 1])
        faces = np.array(faces)
        normals = verts.copy() / Rc
        normals[:, 2] = 0.0
        geo = SurfaceGeometry.from_arrays(verts[faces], faces, len(verts),
                                          vnormals=normals)
        eig = np.linalg.eigvalsh(geo.b)
        assert np.allclose(eig[:, 0], -1.0 / Rc, atol=2e-3)
        assert np.allclose(eig[:, 1], 0.0, atol=2e-3)

    def test_edge_interpolation_exact(self, schwarz_p):
        geo = SurfaceGeometry.from_mesh(schwarz_p)
        for k, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
            l = geo.corners[:, j] - geo.corners[:, i]
            lu = np.einsum("fj,fj->f", l, geo.a1)
            lv = np.einsum("fj,fj->f", l, geo.a2)
            lhs = (geo.b[:, 0, 0] * lu**2 + geo.b[:, 1, 1] * lv**2
                   + 2 * geo.b[:, 0, 1] * lu * lv)
            dn = geo.corner_normals[:, j] - geo.corner_normals[:, i]
            rhs = -np.einsum("fj,fj->f", dn, l)
            assert np.allclose(lhs, rhs, atol=1e-12)

    def test_trace_matches_mean_curvature(self):
        errs = []
        for sub in (2, 3, 4):
            _, geo = _sphere_geo(sub)
            tr = geo.b[:, 0, 0] + geo.b[:, 1, 1]
            errs.append(np.abs(tr + 2.0 / R).max())
        assert errs[2] < errs[1] < errs[0]

    def test_frame_invariance_world_lift(self, schwarz_p):
        # cyclically relabeling a face changes the frame (a1 follows the
        # first edge) but must not change the world-space tensor
        geo = SurfaceGeometry.from_mesh(schwarz_p)
        rolled = np.roll(schwarz_p.faces, 1, axis=1)
        corners = np.stack([geo.corners[:, 2], geo.corners[:, 0],
                            geo.corners[:, 1]], axis=1)
        geo2 = SurfaceGeometry.from_arrays(corners, rolled,
                                           schwarz_p.num_vertices,
                                           vnormals=geo.vnormals)
        assert np.allclose(geo.world_second_forms(),
                           geo2.world_second_forms(), atol=1e-9)


class TestOperators:
    def test_constant_in_kernel(self, schwarz_p):
        L = cotan_laplacian(schwarz_p)
        ones = np.ones(schwarz_p.num_vertices)
        assert np.abs(L @ ones).max() < 1e-10

    def test_mass_sums_to_area(self, schwarz_p):
        geo = SurfaceGeometry.from_mesh(schwarz_p)
        M = mass_matrix(schwarz_p)
        assert np.isclose(M.sum(), geo.total_area)
        assert M.min() > 0

    def test_linear_function_harmonic_on_plane(self, plane16):
        L = cotan_laplacian(plane16)
        # periodic sawtooth is not linear; use a bump away from the seam
        u = np.cos(np.pi * plane16.vertices[:, 0])
        r = L @ u
        # interior consistency: residual second-order small
        assert np.abs(r).max() < 0.05
        lin = plane16.vertices[:, 0] * 0 + 3.0
        assert np.abs(L @ lin).max() < 1e-12

    @pytest.mark.parametrize("c", [0.0, 1.0, 5.0])
    def test_shifted_operator_positive_definite(self, c):
        mesh = icosphere(2)
        L = cotan_laplacian(mesh)
        M = mass_matrix(mesh)
        from scipy.sparse import diags

        A = (diags(M) - c * L).toarray()
        eig = np.linalg.eigvalsh(0.5 * (A + A.T))
        assert eig.min() > 0


class TestVertexCurvature:
    def test_sphere_value(self):
        _, geo = _sphere_geo(3)
        kappa = vertex_max_curvature(geo)
        assert np.allclose(kappa, 1.0 / R, rtol=0.05)

    def test_plane_zero(self, plane16):
        geo = SurfaceGeometry.from_mesh(plane16)
        assert vertex_max_curvature(geo).max() < 1e-10
