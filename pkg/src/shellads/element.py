"""Per-face membrane strain discretization and element matrices.

Three selectable strain schemes share one interface:

* ``corrected`` (default): tangential part interpolates per-vertex
  projections rotated into the face plane, minus the normal-displacement
  times second-form term.
* ``uncorrected``: plain face projection for the tangential part, same
  curvature term.
* ``plane_stress``: plain face projection only, no curvature term.

Face strain Voigt order is (11, 22, 2*12); element stiffness uses the
symmetric three-point (edge midpoint) rule, loads the centroid rule.
"""

import numpy as np

from .voigt import strain_vector

SCHEMES = ("corrected", "uncorrected", "plane_stress")

# barycentric quadrature: edge midpoints, weight 1/3 each (degree-2 exact)
STIFFNESS_POINTS = np.array([
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
])
CENTROID = np.array([1.0, 1.0, 1.0]) / 3.0


def d_matrix(lame):
    """Membrane elastic matrix for the face Voigt convention."""
    l0, mu = lame.lambda0, lame.mu
    return np.array([
        [l0 + 2 * mu, l0, 0.0],
        [l0, l0 + 2 * mu, 0.0],
        [0.0, 0.0, mu],
    ])


def _corner_projectors(geo, scheme):
    """(F, 3, 2, 3) maps taking vertex displacement to frame coordinates."""
    P2 = geo.frame_matrix()                       # (F, 2, 3)
    if scheme == "corrected":
        return np.einsum("fab,fcbk->fcak", P2, geo.rotations)
    return np.broadcast_to(P2[:, None, :, :], (len(geo.faces), 3, 2, 3))


def tangential_strain_matrix(geo, scheme):
    """B_t, (F, 3, 9): stacked vertex displacements -> Voigt Sym[grad u_t].

    Constant over each face (linear interpolation), so no quadrature
    point argument.
    """
    Q = _corner_projectors(geo, scheme)           # (F, 3, 2, 3)
    g = geo.grad_phi                              # (F, 3, 2)
    B = np.zeros((len(geo.faces), 3, 9))
    for i in range(3):
        qi = Q[:, i]                              # (F, 2, 3)
        gi = g[:, i]                              # (F, 2)
        sl = slice(3 * i, 3 * i + 3)
        B[:, 0, sl] = gi[:, 0:1] * qi[:, 0, :]
        B[:, 1, sl] = gi[:, 1:2] * qi[:, 1, :]
        B[:, 2, sl] = gi[:, 1:2] * qi[:, 0, :] + gi[:, 0:1] * qi[:, 1, :]
    return B


def normal_strain_matrix(geo, bary):
    """B_n at a barycentric point, (F, 3, 9): [b_f] (phi_i n_i^T)."""
    bv = np.stack([
        geo.b[:, 0, 0], geo.b[:, 1, 1], 2.0 * geo.b[:, 0, 1]
    ], axis=1)                                    # (F, 3)
    B = np.zeros((len(geo.faces), 3, 9))
    for i in range(3):
        outer = bv[:, :, None] * geo.corner_normals[:, i][:, None, :]
        B[:, :, 3 * i:3 * i + 3] = bary[i] * outer
    return B


def strain_displacement(geo, scheme="corrected", bary=CENTROID):
    """Full strain-displacement map B(bary) = B_t - B_n, (F, 3, 9)."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    B = tangential_strain_matrix(geo, scheme)
    if scheme != "plane_stress":
        B = B - normal_strain_matrix(geo, bary)
    return B


def element_stiffness(geo, lame, scheme="corrected"):
    """Element stiffness matrices K_f, (F, 9, 9), symmetric PSD."""
    D = d_matrix(lame)
    Bt = tangential_strain_matrix(geo, scheme)
    if scheme == "plane_stress":
        # B constant over the face: quadrature collapses
        return np.einsum("f,fai,ab,fbj->fij", geo.area, Bt, D, Bt)
    K = np.zeros((len(geo.faces), 9, 9))
    w = geo.area / 3.0
    for q in range(3):
        B = Bt - normal_strain_matrix(geo, STIFFNESS_POINTS[q])
        K += np.einsum("f,fai,ab,fbj->fij", w, B, D, B)
    return K


def projected_strain_voigt(geo, eps):
    """Face Voigt vector of P_f eps P_f^T per face, (F, 3)."""
    P2 = geo.frame_matrix()
    e2 = np.einsum("fai,ij,fbj->fab", P2, np.asarray(eps, dtype=float), P2)
    return np.stack([e2[:, 0, 0], e2[:, 1, 1], 2.0 * e2[:, 0, 1]], axis=1)


def element_loads(geo, lame, strains, scheme="corrected"):
    """Element load vectors for each macro strain, (F, 9, S).

    f_f = -area * B(centroid)^T D [P_f eps P_f^T], centroid rule.
    """
    D = d_matrix(lame)
    B = strain_displacement(geo, scheme, CENTROID)
    ev = np.stack([projected_strain_voigt(geo, e) for e in strains], axis=2)
    return -np.einsum("f,fai,ab,fbs->fis", geo.area, B, D, ev)


def face_membrane_strain(geo, u, scheme="corrected", eps=None):
    """Centroid membrane strain per face as symmetric 2x2 matrices.

    ``u`` is a (V, 3) vertex displacement field; when ``eps`` is given the
    projected macro strain is added (the total strain of the cell problem).
    """
    u = np.asarray(u, dtype=float).reshape(-1, 3)
    uc = u[geo.faces]                              # (F, 3, 3)
    Q = _corner_projectors(geo, scheme)
    ut_c = np.einsum("fcak,fck->fca", Q, uc)       # frame coords per corner
    grad = np.einsum("fca,fcb->fab", ut_c, geo.grad_phi)   # (F, 2, 2)
    strain = 0.5 * (grad + np.swapaxes(grad, 1, 2))
    if scheme != "plane_stress":
        u3 = np.einsum("fck,fck->fc", uc, geo.corner_normals).mean(axis=1)
        strain = strain - u3[:, None, None] * geo.b
    if eps is not None:
        P2 = geo.frame_matrix()
        e2 = np.einsum("fai,ij,fbj->fab", P2, np.asarray(eps, dtype=float), P2)
        strain = strain + e2
    return strain


def strain_voigt_from_matrix(strain):
    """(F, 2, 2) symmetric -> (F, 3) face Voigt vectors."""
    return np.stack(
        [strain[:, 0, 0], strain[:, 1, 1], 2.0 * strain[:, 0, 1]], axis=1
    )


def macro_strain_vectors(strains):
    """World Voigt strain vectors for a list of 3x3 strains, (S, 6)."""
    return np.stack([strain_vector(e) for e in strains])
