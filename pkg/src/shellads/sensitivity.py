"""Shape derivatives of area, the asymptotic tensor, and objectives with
respect to a per-vertex normal velocity field.

The tensor rate uses the test-function substitution that removes curvature
derivatives and second derivatives of the velocity, so everything below is
assembled from per-face constants: centroid strains, frame gradients of
the linear interpolants, and the second/third fundamental forms.  All face
integrals use the single-point (centroid) rule; hat functions evaluate to
1/3 there.
"""

from dataclasses import dataclass

import numpy as np

from .element import _corner_projectors, face_membrane_strain
from .stiffness import unit_strains


@dataclass
class ShapeGradient:
    """Coefficients V such that df/dt = sum_i V_i * v_n^i."""

    values: np.ndarray

    def rate(self, v_n):
        return float(np.dot(self.values, np.asarray(v_n, dtype=float)))


def area_rate_coefficients(geo):
    """Per-vertex coefficients of the area rate: -sum_f (area/3) tr b_f."""
    tr_b = geo.b[:, 0, 0] + geo.b[:, 1, 1]
    contrib = -(geo.area / 3.0) * tr_b
    out = np.zeros(geo.num_vertices)
    for q in range(3):
        np.add.at(out, geo.faces[:, q], contrib)
    return out


def area_rate(geo, v_n):
    return float(np.dot(area_rate_coefficients(geo), v_n))


def _face_states(geo, cell, scheme):
    """Centroid kinematic quantities per face and unit strain.

    Returns (E, emac, ut, grad_ut, u3, grad_u3, w):
      E (F,6,2,2) total strains, emac (F,6,2,2) projected macro strains,
      ut (F,6,2) tangential displacement, grad_ut (F,6,2,2), u3 (F,6),
      grad_u3 (F,6,2), w = P_f eps n_f (F,6,2).
    """
    F = len(geo.faces)
    strains = unit_strains()
    Q = _corner_projectors(geo, scheme)               # (F,3,2,3)
    g = geo.grad_phi                                  # (F,3,2)
    P2 = geo.frame_matrix()                           # (F,2,3)

    E = np.empty((F, 6, 2, 2))
    emac = np.empty((F, 6, 2, 2))
    ut = np.empty((F, 6, 2))
    grad_ut = np.empty((F, 6, 2, 2))
    u3 = np.empty((F, 6))
    grad_u3 = np.empty((F, 6, 2))
    w = np.empty((F, 6, 2))
    for a, eps in enumerate(strains):
        u = cell.field(a)
        uc = u[geo.faces]                             # (F,3,3)
        ut_c = np.einsum("fcik,fck->fci", Q, uc)      # (F,3,2)
        ut[:, a] = ut_c.mean(axis=1)
        grad_ut[:, a] = np.einsum("fci,fcj->fij", ut_c, g)
        u3_c = np.einsum("fck,fck->fc", uc, geo.corner_normals)
        u3[:, a] = u3_c.mean(axis=1)
        grad_u3[:, a] = np.einsum("fc,fcj->fj", u3_c, g)
        E[:, a] = face_membrane_strain(geo, u, scheme, eps=eps)
        emac[:, a] = np.einsum("fai,ij,fbj->fab", P2, eps, P2)
        w[:, a] = np.einsum("fai,ij,fj->fa", P2, eps, geo.normal)
    return E, emac, ut, grad_ut, u3, grad_u3, w


def ca_rate_coefficients(geo, lame, cell, CA, scheme="corrected"):
    """Per-vertex rate coefficients of the asymptotic tensor, (V, 6, 6).

    d/dt C_A[a, b] = sum_i v_n^i * G[i, a, b].
    """
    l0, mu = lame.lambda0, lame.mu
    area = geo.area
    A_tot = geo.total_area
    b = geo.b
    cf = geo.c
    H = geo.mean_curvature()

    E, emac, ut, grad_ut, u3, grad_u3, w = _face_states(geo, cell, scheme)

    trE = np.einsum("faii->fa", E)
    bE = np.einsum("fij,fajk->faik", b, E)
    tr_bE = np.einsum("faii->fa", bE)

    # membrane bilinear form and its curvature-weighted companion
    Ah = (l0 * np.einsum("fa,fb->fab", trE, trE)
          + 2.0 * mu * np.einsum("faij,fbji->fab", E, E))
    Bh = (l0 * (np.einsum("fa,fb->fab", tr_bE, trE)
                + np.einsum("fb,fa->fab", tr_bE, trE))
          + 4.0 * mu * np.einsum("faij,fbji->fab", bE, E))

    # convection of the projected macro strain under the flow adds
    # -v (b e + e b) to its material rate; contracted with A this cancels
    # the metric-rate term at u = 0 (scale invariance of the tensor)
    b_emac = np.einsum("fij,fajk->faik", b, emac)
    tr_b_emac = np.einsum("faii->fa", b_emac)
    Xh = 2.0 * l0 * (np.einsum("fa,fb->fab", trE, tr_b_emac)
                     + np.einsum("fb,fa->fab", trE, tr_b_emac))
    Xh += 4.0 * mu * (np.einsum("fbij,faji->fab", b_emac, E)
                      + np.einsum("faij,fbji->fab", b_emac, E))

    # zeta contribution, per corner q of each face
    s = np.einsum("fij,faj->fai", b, ut) + grad_u3 + 2.0 * w   # (F,6,2)
    b_grad_ut = np.einsum("fij,fajk->faik", b, grad_ut)        # (F,6,2,2)
    g = geo.grad_phi
    # Z[f,q,a] = s_a (x) g_q - (1/3) b grad_ut_a + (1/3) u3_a c_f
    Z = (np.einsum("fai,fqj->fqaij", s, g)
         - (1.0 / 3.0) * b_grad_ut[:, None, :, :, :]
         + (1.0 / 3.0) * np.einsum("fa,fij->faij", u3, cf)[:, None, :, :, :])
    trZ = np.einsum("fqaii->fqa", Z)
    C = (l0 * np.einsum("fa,fqb->fqab", trE, trZ)
         + 2.0 * mu * np.einsum("faij,fqbji->fqab", E, Z))

    base = ((2.0 / 3.0) * (Bh - H[:, None, None] * Ah)
            - (1.0 / 3.0) * Xh)                                # (F,6,6)
    pair = C + np.swapaxes(C, 2, 3)                            # C_q(a,b)+C_q(b,a)
    total = area[:, None, None, None] * (base[:, None] + pair)

    G_I = np.zeros((geo.num_vertices, 6, 6))
    for q in range(3):
        np.add.at(G_I, geo.faces[:, q], total[:, q])

    G_A = area_rate_coefficients(geo)
    return G_I / A_tot - np.einsum("v,ab->vab", G_A, CA) / A_tot


def ca_rate(geo, lame, cell, CA, v_n, scheme="corrected"):
    """6x6 tensor rate for a given per-vertex normal velocity."""
    G = ca_rate_coefficients(geo, lame, cell, CA, scheme)
    return np.einsum("v,vab->ab", np.asarray(v_n, dtype=float), G)


def objective_gradient(weights, rate_coefficients):
    """Chain rule: df/dt = sum_ab dfdC[a,b] * dC[a,b]/dt.

    ``weights`` is the 6x6 matrix of partial derivatives of the objective
    with respect to the Voigt tensor entries.
    """
    vals = np.einsum("ab,vab->v", np.asarray(weights, dtype=float),
                     rate_coefficients)
    return ShapeGradient(values=vals)
