import numpy as np
import pytest

from conftest import icosphere
from shellads.element import (
    CENTROID,
    d_matrix,
    element_loads,
    element_stiffness,
    face_membrane_strain,
    strain_displacement,
)
from shellads.errors import DegenerateFaceError
from shellads.geometry import SurfaceGeometry
from shellads.materials import LameSet, lame_from_engineering

R = 0.8


def _flat_patch():
    verts = np.array([[0.0, 0.0, 0.0], [0.3, 0.0, 0.0], [0.0, 0.3, 0.0],
                      [0.3, 0.3, 0.0]])
    faces = np.array([[0, 1, 3], [0, 3, 2]])
    normals = np.tile([0.0, 0.0, 1.0], (4, 1))
    return verts, faces, SurfaceGeometry.from_arrays(
        verts[faces], faces, 4, vnormals=normals)


class TestLame:
    def test_reference_values(self):
        lame = lame_from_engineering(1.0, 0.3)
        assert np.isclose(lame.mu, 0.3846154, atol=5e-8)
        assert np.isclose(lame.lam, 0.5769231, atol=5e-8)
        assert np.isclose(lame.lambda0, 0.3296703, atol=5e-8)
        # hydrostatic bound cross-check
        assert np.isclose(4 / 9 * (lame.lambda0 + lame.mu), 0.31746032,
                          atol=5e-9)

    def test_zero_poisson(self):
        lame = lame_from_engineering(1.0, 0.0)
        assert lame.lam == 0.0
        assert lame.lambda0 == 0.0
        assert lame.mu == 0.5

    def test_linear_in_young(self):
        a = lame_from_engineering(1.0, 0.3)
        b = lame_from_engineering(2.0, 0.3)
        assert np.isclose(b.lam, 2 * a.lam)
        assert np.isclose(b.mu, 2 * a.mu)
        assert np.isclose(b.lambda0, 2 * a.lambda0)

    def test_range_validation(self):
        with pytest.raises(ValueError):
            lame_from_engineering(-1.0, 0.3)
        with pytest.raises(ValueError):
            lame_from_engineering(1.0, 0.5)
        with pytest.raises(ValueError):
            LameSet(1.0, 1.0, 0.123)


class TestStrainDisplacement:
    def test_flat_linear_field(self):
        verts, faces, geo = _flat_patch()
        B = strain_displacement(geo, "corrected", CENTROID)
        u = np.zeros((4, 3))
        u[:, 0] = verts[:, 0]            # u = (x, 0, 0)
        for f in range(2):
            uf = u[faces[f]].reshape(9)
            voigt = B[f] @ uf
            # frame may differ per face; compare strain invariants
            e = np.array([[voigt[0], voigt[2] / 2], [voigt[2] / 2, voigt[1]]])
            assert np.isclose(np.trace(e), 1.0, atol=1e-12)
            assert np.isclose(np.linalg.det(e), 0.0, atol=1e-12)

    def test_flat_rigid_translation(self):
        _, faces, geo = _flat_patch()
        B = strain_displacement(geo, "corrected", CENTROID)
        u = np.tile([0.4, -0.2, 0.7], (4, 1))
        for f in range(2):
            assert np.allclose(B[f] @ u[faces[f]].reshape(9), 0.0,
                               atol=1e-13)

    def test_sphere_normal_offset(self):
        mesh = icosphere(3, radius=R)
        exact = mesh.vertices / np.linalg.norm(mesh.vertices, axis=1,
                                               keepdims=True)
        geo = SurfaceGeometry.from_mesh(mesh, vnormals=exact)
        strain = face_membrane_strain(geo, exact, "corrected")
        assert np.allclose(strain[:, 0, 0], 1.0 / R, atol=1e-10)
        assert np.allclose(strain[:, 1, 1], 1.0 / R, atol=1e-10)
        assert np.allclose(strain[:, 0, 1], 0.0, atol=1e-10)

    def test_all_schemes_available(self, schwarz_p):
        geo = SurfaceGeometry.from_mesh(schwarz_p)
        shapes = set()
        for scheme in ("corrected", "uncorrected", "plane_stress"):
            B = strain_displacement(geo, scheme, CENTROID)
            shapes.add(B.shape)
        assert shapes == {(schwarz_p.num_faces, 3, 9)}
        with pytest.raises(ValueError):
            strain_displacement(geo, "bogus")


class TestElementStiffness:
    def test_near_zero_area_scales_to_zero(self):
        # stiffness scales with face area; assembly rejects exact slivers
        base = np.array([[0.0, 0.0, 0.0], [1e-3, 0.0, 0.0],
                         [0.5e-3, 1e-3, 0.0]])
        faces = np.array([[0, 1, 2]])
        normals = np.tile([0.0, 0.0, 1.0], (3, 1))
        geo = SurfaceGeometry.from_arrays(base[faces], faces, 3,
                                          vnormals=normals)
        lame = lame_from_engineering(1.0, 0.3)
        K = element_stiffness(geo, lame)
        assert np.abs(K).max() < 1e-5
        degenerate = base * np.array([1.0, 1e-4, 1.0])
        with pytest.raises(DegenerateFaceError):
            SurfaceGeometry.from_arrays(degenerate[faces] * 1e-3, faces, 3,
                                        vnormals=normals)

    def test_translations_in_kernel_on_flat(self):
        _, faces, geo = _flat_patch()
        lame = lame_from_engineering(1.0, 0.3)
        K = element_stiffness(geo, lame)
        for f in range(2):
            assert np.linalg.matrix_rank(K[f], tol=1e-10) <= 6
            for c in range(3):
                t = np.tile(np.eye(3)[c], 3)
                assert np.allclose(K[f] @ t, 0.0, atol=1e-12)

    def test_linearity_in_moduli(self, schwarz_p):
        geo = SurfaceGeometry.from_mesh(schwarz_p)
        a = element_stiffness(geo, lame_from_engineering(1.0, 0.3))
        b = element_stiffness(geo, lame_from_engineering(2.0, 0.3))
        assert np.allclose(b, 2 * a)

    def test_symmetric_psd(self, schwarz_p):
        geo = SurfaceGeometry.from_mesh(schwarz_p)
        K = element_stiffness(geo, lame_from_engineering(1.0, 0.3))
        assert np.allclose(K, np.swapaxes(K, 1, 2), atol=1e-12)
        sample = K[:: max(1, len(K) // 20)]
        for Kf in sample:
            eig = np.linalg.eigvalsh(Kf)
            assert eig.min() > -1e-10

    def test_frame_invariance(self, schwarz_p):
        geo = SurfaceGeometry.from_mesh(schwarz_p)
        lame = lame_from_engineering(1.0, 0.3)
        K1 = element_stiffness(geo, lame)
        rolled = np.roll(schwarz_p.faces, 1, axis=1)
        corners = np.stack([geo.corners[:, 2], geo.corners[:, 0],
                            geo.corners[:, 1]], axis=1)
        geo2 = SurfaceGeometry.from_arrays(corners, rolled,
                                           schwarz_p.num_vertices,
                                           vnormals=geo.vnormals)
        K2 = element_stiffness(geo2, lame)
        rng = np.random.default_rng(0)
        u = rng.normal(size=(schwarz_p.num_vertices, 3))
        e1 = np.einsum("fi,fij,fj->", u[geo.faces].reshape(-1, 9), K1,
                       u[geo.faces].reshape(-1, 9))
        e2 = np.einsum("fi,fij,fj->", u[rolled].reshape(-1, 9), K2,
                       u[rolled].reshape(-1, 9))
        assert np.isclose(e1, e2, rtol=1e-10)


class TestElementLoads:
    def test_zero_strain(self, schwarz_p):
        geo = SurfaceGeometry.from_mesh(schwarz_p)
        lame = lame_from_engineering(1.0, 0.3)
        f = element_loads(geo, lame, [np.zeros((3, 3))])
        assert np.abs(f).max() == 0.0

    def test_projection_kills_normal_strain(self):
        _, faces, geo = _flat_patch()
        lame = lame_from_engineering(1.0, 0.3)
        e33 = np.zeros((3, 3))
        e33[2, 2] = 1.0
        f = element_loads(geo, lame, [e33])
        assert np.abs(f).max() < 1e-14

    def test_minimal_patch_hydrostatic_load_vanishes(self):
        # catenoid (H = 0): assembled hydrostatic loads are tiny compared
        # with the loads of a uniaxial strain on the same patch
        a, n = 0.45, 40
        theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
        z = np.linspace(-0.35, 0.35, n)
        tt, zz = np.meshgrid(theta, z, indexing="ij")
        r = a * np.cosh(zz / a)
        verts = np.stack([(r * np.cos(tt)).ravel(), (r * np.sin(tt)).ravel(),
                          zz.ravel()], axis=1)
        faces = []
        for i in range(n):
            for j in range(n - 1):
                p = i * n + j
                q = ((i + 1) % n) * n + j
                faces.append([p, q, q + 1])
                faces.append([p, q + 1, p + 1])
        faces = np.array(faces)
        # exact outward normal of r = a cosh(z/a)
        sh = np.sinh(zz / a).ravel()
        nx = np.cos(tt).ravel()
        ny = np.sin(tt).ravel()
        normals = np.stack([nx, ny, -sh], axis=1)
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        geo = SurfaceGeometry.from_arrays(verts[faces], faces, len(verts),
                                          vnormals=normals)
        lame = lame_from_engineering(1.0, 0.3)
        hydro = np.eye(3) / 3.0
        e11 = np.zeros((3, 3))
        e11[0, 0] = 1.0
        ff = element_loads(geo, lame, [hydro, e11])
        nv = len(verts)
        F = np.zeros((nv, 3, 2))
        for s in range(2):
            for c in range(3):
                for k in range(3):
                    np.add.at(F[:, k, s], faces[:, c], ff[:, 3 * c + k, s])
        # compare on interior vertices only (two rows away from the rim)
        zidx = np.arange(nv) % n
        interior = (zidx > 1) & (zidx < n - 2)
        hydro_norm = np.linalg.norm(F[interior, :, 0], axis=1)
        ref_norm = np.linalg.norm(F[interior, :, 1], axis=1)
        assert np.median(hydro_norm) < 2e-2 * np.median(ref_norm)

    def test_load_scheme_and_material_scaling(self, schwarz_p):
        geo = SurfaceGeometry.from_mesh(schwarz_p)
        e = np.eye(3) / 3
        f1 = element_loads(geo, lame_from_engineering(1.0, 0.3), [e])
        f2 = element_loads(geo, lame_from_engineering(2.0, 0.3), [e])
        assert np.allclose(f2, 2 * f1)


def test_d_matrix_energy_identity():
    lame = lame_from_engineering(1.0, 0.3)
    D = d_matrix(lame)
    rng = np.random.default_rng(1)
    for _ in range(5):
        g = rng.normal(size=(2, 2))
        g = 0.5 * (g + g.T)
        v = np.array([g[0, 0], g[1, 1], 2 * g[0, 1]])
        energy = (lame.lambda0 * np.trace(g) ** 2
                  + 2 * lame.mu * np.trace(g @ g))
        assert np.isclose(v @ D @ v, energy)
