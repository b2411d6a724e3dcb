"""Discrete differential geometry on (periodic) triangle meshes.

Everything here is a pure read-only computation over unfolded per-face
corner positions, so the same code serves torus meshes and the open
analytic benchmark patches.  Per-face quantities live in an orthonormal
face frame (a1, a2, n) with a1 along the first edge.

Sign convention for the second fundamental form: it interpolates
b(l, l) = -(n_j - n_i) . l_ij over the face edges, so a sphere of radius
R with outward normals has b = -(1/R) I and mean curvature tr(b)/2 = -1/R.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix

from .errors import (
    DegenerateFaceError,
    SingularEdgeSystemError,
    ZeroNormalError,
)

DEGENERATE_AREA = 1e-12
ANTIPARALLEL_COS = -0.99985  # ~179 degrees


def _normalize_rows(v, what="vector"):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n < 1e-300):
        raise ZeroNormalError(f"zero {what} encountered")
    return v / n


def face_frames(corners):
    """Orthonormal frames and areas for (F, 3, 3) corner arrays.

    Returns (normal, area, a1, a2); a1 is the normalized first edge,
    a2 = n x a1, so (a1, a2, n) is right-handed.
    """
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    cr = np.cross(e1, e2)
    dbl = np.linalg.norm(cr, axis=1)
    area = 0.5 * dbl
    bad = dbl < 1e-300
    if np.any(bad):
        raise DegenerateFaceError(f"{int(bad.sum())} zero-area faces")
    normal = cr / dbl[:, None]
    a1 = _normalize_rows(e1, "edge")
    a2 = np.cross(normal, a1)
    return normal, area, a1, a2


def barycentric_gradients(corners, a1, a2, area):
    """Frame-coordinate gradients of the three hat functions, (F, 3, 2).

    The rows sum to zero; grad phi_i is normal to the opposite edge.
    """
    # 2D corner coordinates in the face frame
    rel = corners - corners[:, :1, :]
    q = np.stack([np.einsum("fij,fj->fi", rel, a1),
                  np.einsum("fij,fj->fi", rel, a2)], axis=-1)  # (F, 3, 2)
    grads = np.empty_like(q)
    two_a = (2.0 * area)[:, None]
    for i in range(3):
        opp = q[:, (i + 2) % 3] - q[:, (i + 1) % 3]
        # rotate the opposite edge by +90 degrees
        grads[:, i, 0] = -opp[:, 1]
        grads[:, i, 1] = opp[:, 0]
    grads /= two_a[:, :, None]
    return grads


def vertex_normals(corners, faces, num_vertices):
    """Angle-weighted vertex normals from unfolded corner positions."""
    normal, _, _, _ = face_frames(corners)
    acc = np.zeros((num_vertices, 3))
    for i in range(3):
        u = corners[:, (i + 1) % 3] - corners[:, i]
        v = corners[:, (i + 2) % 3] - corners[:, i]
        cosang = np.einsum("fj,fj->f", u, v) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
        )
        theta = np.arccos(np.clip(cosang, -1.0, 1.0))
        np.add.at(acc, faces[:, i], theta[:, None] * normal)
    return _normalize_rows(acc, "vertex normal")


def normal_consistency_violations(vnormals, face_normals, faces):
    """Indices of vertices with n_i . n_f <= 0 for some incident face."""
    bad = set()
    dots = np.einsum("fcj,fj->fc", vnormals[faces], face_normals)
    rows, cols = np.nonzero(dots <= 0.0)
    for r, c in zip(rows, cols):
        bad.add(int(faces[r, c]))
    return np.array(sorted(bad), dtype=np.int64)


def second_forms(corners, corner_normals, a1, a2):
    """Per-face 2x2 second fundamental forms interpolating the edge data.

    Solves the 3x3 system  l^T b l = -(n_j - n_i) . l_ij  over the three
    edges of each face; exact interpolation, see module docstring for the
    sign convention.
    """
    nf = len(corners)
    A = np.empty((nf, 3, 3))
    rhs = np.empty((nf, 3))
    for k, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
        l = corners[:, j] - corners[:, i]
        lu = np.einsum("fj,fj->f", l, a1)
        lv = np.einsum("fj,fj->f", l, a2)
        A[:, k, 0] = lu * lu
        A[:, k, 1] = lv * lv
        A[:, k, 2] = 2.0 * lu * lv
        dn = corner_normals[:, j] - corner_normals[:, i]
        rhs[:, k] = -np.einsum("fj,fj->f", dn, l)
    scale = np.mean(A[:, :, 0] + A[:, :, 1], axis=1)
    det = np.linalg.det(A)
    if np.any(np.abs(det) < 1e-12 * np.maximum(scale, 1e-300) ** 3):
        raise SingularEdgeSystemError("collinear or degenerate face edges")
    x = np.linalg.solve(A, rhs[..., None])[..., 0]
    b = np.empty((nf, 2, 2))
    b[:, 0, 0] = x[:, 0]
    b[:, 1, 1] = x[:, 1]
    b[:, 0, 1] = b[:, 1, 0] = x[:, 2]
    return b


def rotations_to_face(corner_normals, face_normals):
    """Minimal rotations taking each corner normal onto the face normal.

    Rodrigues form, (F, 3, 3, 3); identity when the normals coincide.
    Raises DegenerateFaceError for nearly antiparallel pairs.
    """
    a = corner_normals                    # (F, 3, 3)
    b = np.broadcast_to(face_normals[:, None, :], a.shape)
    if np.any(np.einsum("fij,fij->fi", a, b) < ANTIPARALLEL_COS):
        raise DegenerateFaceError(
            "vertex normal nearly antiparallel to face normal; "
            "remesh or surgery required"
        )
    return _rotations_between(a, b)


@dataclass
class SurfaceGeometry:
    """Bundle of per-face geometry shared by the element and solver layers."""

    faces: np.ndarray            # (F, 3)
    num_vertices: int
    corners: np.ndarray          # (F, 3, 3) unfolded
    normal: np.ndarray           # (F, 3)
    area: np.ndarray             # (F,)
    a1: np.ndarray               # (F, 3)
    a2: np.ndarray               # (F, 3)
    grad_phi: np.ndarray         # (F, 3, 2)
    vnormals: np.ndarray         # (V, 3)
    corner_normals: np.ndarray   # (F, 3, 3)
    b: np.ndarray                # (F, 2, 2)
    c: np.ndarray                # (F, 2, 2)
    rotations: np.ndarray        # (F, 3, 3, 3)

    @classmethod
    def from_arrays(cls, corners, faces, num_vertices, vnormals=None):
        faces = np.asarray(faces, dtype=np.int64)
        normal, area, a1, a2 = face_frames(corners)
        if np.any(area < DEGENERATE_AREA):
            raise DegenerateFaceError(
                f"{int(np.sum(area < DEGENERATE_AREA))} faces below area "
                f"threshold {DEGENERATE_AREA:g}"
            )
        grad_phi = barycentric_gradients(corners, a1, a2, area)
        if vnormals is None:
            vnormals = vertex_normals(corners, faces, num_vertices)
        corner_normals = vnormals[faces]
        b = second_forms(corners, corner_normals, a1, a2)
        c = b @ b
        rot = rotations_to_face(corner_normals, normal)
        return cls(
            faces=faces,
            num_vertices=num_vertices,
            corners=corners,
            normal=normal,
            area=area,
            a1=a1,
            a2=a2,
            grad_phi=grad_phi,
            vnormals=vnormals,
            corner_normals=corner_normals,
            b=b,
            c=c,
            rotations=rot,
        )

    @classmethod
    def from_mesh(cls, mesh, vnormals=None):
        return cls.from_arrays(
            mesh.face_corners(), mesh.faces, mesh.num_vertices, vnormals
        )

    @property
    def total_area(self):
        return float(self.area.sum())

    def frame_matrix(self):
        """(F, 2, 3) rows (a1; a2): world -> frame coordinates."""
        return np.stack([self.a1, self.a2], axis=1)

    def world_second_forms(self):
        """Second forms lifted to world coordinates, (F, 3, 3)."""
        T = np.stack([self.a1, self.a2], axis=-1)  # (F, 3, 2)
        return np.einsum("fia,fab,fjb->fij", T, self.b, T)

    def mean_curvature(self):
        """Per-face H = tr(b)/2."""
        return 0.5 * (self.b[:, 0, 0] + self.b[:, 1, 1])


# ----------------------------------------------------------------------
# operators


def cotan_laplacian(mesh):
    """Sparse cotangent Laplacian, negative semidefinite, constants in kernel.

    Sign convention: L = -stiffness, so (M - c L) is positive definite for
    every c >= 0.
    """
    corners = mesh.face_corners()
    F = mesh.faces
    nv = mesh.num_vertices
    rows, cols, vals = [], [], []
    for k in range(3):
        i = F[:, (k + 1) % 3]
        j = F[:, (k + 2) % 3]
        u = corners[:, (k + 1) % 3] - corners[:, k]
        v = corners[:, (k + 2) % 3] - corners[:, k]
        cross = np.linalg.norm(np.cross(u, v), axis=1)
        cot = np.einsum("fj,fj->f", u, v) / np.maximum(cross, 1e-300)
        w = 0.5 * cot
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [w, w, -w, -w]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return coo_matrix((vals, (rows, cols)), shape=(nv, nv)).tocsr()


def mass_matrix(mesh, area=None):
    """Lumped (barycentric) diagonal mass matrix; entries sum to the area."""
    if area is None:
        _, area, _, _ = face_frames(mesh.face_corners())
    nv = mesh.num_vertices
    m = np.zeros(nv)
    third = area / 3.0
    for k in range(3):
        np.add.at(m, mesh.faces[:, k], third)
    return m


def vertex_max_curvature(geo):
    """Per-vertex magnitude of the extremal principal curvature.

    Area-weighted average of incident face second forms rotated into the
    vertex tangent plane; returns |lambda|_max of the averaged 2x2 form.
    """
    V = geo.num_vertices
    Bw = geo.world_second_forms()
    # rotate B_w from the face plane into each corner's tangent plane
    a = np.broadcast_to(geo.normal[:, None, :], geo.corner_normals.shape)
    R = _rotations_between(a, geo.corner_normals)       # (F, 3, 3, 3)
    Bv = np.einsum("fcij,fjk,fclk->fcil", R, Bw, R)     # (F, 3, 3, 3)
    acc = np.zeros((V, 3, 3))
    wsum = np.zeros(V)
    for cidx in range(3):
        np.add.at(acc, geo.faces[:, cidx], geo.area[:, None, None] * Bv[:, cidx])
        np.add.at(wsum, geo.faces[:, cidx], geo.area)
    acc /= np.maximum(wsum, 1e-300)[:, None, None]
    # tangent basis at each vertex
    n = geo.vnormals
    t1 = np.cross(n, np.where(np.abs(n[:, :1]) < 0.9,
                              [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]]))
    t1 = _normalize_rows(t1, "tangent")
    t2 = np.cross(n, t1)
    b11 = np.einsum("vi,vij,vj->v", t1, acc, t1)
    b22 = np.einsum("vi,vij,vj->v", t2, acc, t2)
    b12 = 0.5 * (np.einsum("vi,vij,vj->v", t1, acc, t2)
                 + np.einsum("vi,vij,vj->v", t2, acc, t1))
    mean = 0.5 * (b11 + b22)
    rad = np.sqrt(np.maximum(0.25 * (b11 - b22) ** 2 + b12 ** 2, 0.0))
    return np.maximum(np.abs(mean + rad), np.abs(mean - rad))


def _rotations_between(a, b):
    """Rodrigues rotations taking unit vectors a onto b, elementwise."""
    k = np.cross(a, b)
    c = np.einsum("...j,...j->...", a, b)
    c = np.clip(c, -1.0, 1.0)
    near = c < ANTIPARALLEL_COS
    if np.any(near):
        warnings.warn("nearly antiparallel normals in curvature averaging")
        c = np.where(near, ANTIPARALLEL_COS, c)
    shape = a.shape[:-1]
    K = np.zeros(shape + (3, 3))
    K[..., 0, 1] = -k[..., 2]
    K[..., 0, 2] = k[..., 1]
    K[..., 1, 0] = k[..., 2]
    K[..., 1, 2] = -k[..., 0]
    K[..., 2, 0] = -k[..., 1]
    K[..., 2, 1] = k[..., 0]
    eye = np.broadcast_to(np.eye(3), shape + (3, 3))
    fac = 1.0 / (1.0 + c)
    return eye + K + fac[..., None, None] * np.einsum("...ij,...jk->...ik", K, K)
