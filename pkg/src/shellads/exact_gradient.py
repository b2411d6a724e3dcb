"""Exact shape gradient of the discrete pipeline by adjoint differentiation.

The cell problem is self-adjoint, so with the solution fields and
translation-constraint multipliers frozen, the functional

    Psi_ab(x) = u_a.f_b(x) + u_b.f_a(x) - u_a.K(x).u_b
                - lam_a.S(x)^T u_b - lam_b.S(x)^T u_a

has the same value and position-gradient as the solved correction term
u_a(x).f_b(x), no extra solves needed.  Everything else in the tensor is
an explicit function of vertex positions, so one reverse-mode pass through
a JAX mirror of the element pipeline yields machine-precision derivatives
of any objective.  The continuum-formula coefficients in
:mod:`shellads.sensitivity` remain available as the cheaper, closed-form
variant derived on the smooth surface.
"""

import numpy as np

import jax

jax.config.update("jax_enable_x64", True)

import jax.numpy as jnp  # noqa: E402

from .element import CENTROID, STIFFNESS_POINTS  # noqa: E402
from .stiffness import unit_strains  # noqa: E402
from .voigt import PAIRS  # noqa: E402


def _frames(corners):
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    cr = jnp.cross(e1, e2)
    dbl = jnp.linalg.norm(cr, axis=1)
    normal = cr / dbl[:, None]
    a1 = e1 / jnp.linalg.norm(e1, axis=1)[:, None]
    a2 = jnp.cross(normal, a1)
    return normal, 0.5 * dbl, a1, a2


def _grad_phi(corners, a1, a2, area):
    rel = corners - corners[:, :1, :]
    q = jnp.stack([jnp.einsum("fij,fj->fi", rel, a1),
                   jnp.einsum("fij,fj->fi", rel, a2)], axis=-1)
    grads = []
    for i in range(3):
        opp = q[:, (i + 2) % 3] - q[:, (i + 1) % 3]
        grads.append(jnp.stack([-opp[:, 1], opp[:, 0]], axis=-1))
    return jnp.stack(grads, axis=1) / (2.0 * area)[:, None, None]


def _vertex_normals(corners, faces, nv, face_normal):
    acc = jnp.zeros((nv, 3))
    for i in range(3):
        u = corners[:, (i + 1) % 3] - corners[:, i]
        v = corners[:, (i + 2) % 3] - corners[:, i]
        cosang = jnp.einsum("fj,fj->f", u, v) / (
            jnp.linalg.norm(u, axis=1) * jnp.linalg.norm(v, axis=1)
        )
        theta = jnp.arccos(jnp.clip(cosang, -1.0, 1.0))
        acc = acc.at[faces[:, i]].add(theta[:, None] * face_normal)
    return acc / jnp.linalg.norm(acc, axis=1)[:, None]


def _second_forms(corners, corner_normals, a1, a2):
    rows, rhs = [], []
    for (i, j) in ((0, 1), (1, 2), (2, 0)):
        l = corners[:, j] - corners[:, i]
        lu = jnp.einsum("fj,fj->f", l, a1)
        lv = jnp.einsum("fj,fj->f", l, a2)
        rows.append(jnp.stack([lu * lu, lv * lv, 2.0 * lu * lv], axis=-1))
        dn = corner_normals[:, j] - corner_normals[:, i]
        rhs.append(-jnp.einsum("fj,fj->f", dn, l))
    A = jnp.stack(rows, axis=1)
    x = jnp.linalg.solve(A, jnp.stack(rhs, axis=-1)[..., None])[..., 0]
    b = jnp.stack([
        jnp.stack([x[:, 0], x[:, 2]], axis=-1),
        jnp.stack([x[:, 2], x[:, 1]], axis=-1),
    ], axis=1)
    return b


def _rotations(corner_normals, face_normal):
    a = corner_normals
    b = jnp.broadcast_to(face_normal[:, None, :], a.shape)
    k = jnp.cross(a, b)
    c = jnp.einsum("fij,fij->fi", a, b)
    zeros = jnp.zeros_like(k[..., 0])
    K = jnp.stack([
        jnp.stack([zeros, -k[..., 2], k[..., 1]], axis=-1),
        jnp.stack([k[..., 2], zeros, -k[..., 0]], axis=-1),
        jnp.stack([-k[..., 1], k[..., 0], zeros], axis=-1),
    ], axis=-2)
    eye = jnp.broadcast_to(jnp.eye(3), K.shape)
    fac = 1.0 / (1.0 + c)
    return eye + K + fac[..., None, None] * jnp.einsum(
        "fcij,fcjk->fcik", K, K
    )


def _bt_matrix(Q, g):
    cols = []
    for i in range(3):
        qi = Q[:, i]
        gi = g[:, i]
        row0 = gi[:, 0:1] * qi[:, 0, :]
        row1 = gi[:, 1:2] * qi[:, 1, :]
        row2 = gi[:, 1:2] * qi[:, 0, :] + gi[:, 0:1] * qi[:, 1, :]
        cols.append(jnp.stack([row0, row1, row2], axis=1))
    return jnp.concatenate(cols, axis=2)


def _bn_matrix(bvoigt, corner_normals, bary):
    cols = []
    for i in range(3):
        outer = bvoigt[:, :, None] * corner_normals[:, i][:, None, :]
        cols.append(bary[i] * outer)
    return jnp.concatenate(cols, axis=2)


def _membrane_energy(normal, area, lame, strain_vectors):
    P = jnp.eye(3)[None, :, :] - normal[:, :, None] * normal[:, None, :]
    t4 = (lame.lambda0 * jnp.einsum("fij,fkl->fijkl", P, P)
          + lame.mu * (jnp.einsum("fil,fjk->fijkl", P, P)
                       + jnp.einsum("fik,fjl->fijkl", P, P)))
    rows = []
    for (i, j) in PAIRS:
        rows.append(jnp.stack([t4[:, i, j, k, l] for (k, l) in PAIRS],
                              axis=-1))
    em_f = jnp.stack(rows, axis=1)                     # (F, 6, 6)
    return jnp.einsum("f,fab->ab", area, em_f)


def _tensor_value(x, faces, offsets, lame, scheme, ubar, lam, strains):
    """C_A(x) with the solution fields frozen (value and gradient exact)."""
    corners = x[faces] + offsets
    normal, area, a1, a2 = _frames(corners)
    g = _grad_phi(corners, a1, a2, area)
    nv = x.shape[0]
    vn = _vertex_normals(corners, faces, nv, normal)
    cn = vn[faces]
    P2 = jnp.stack([a1, a2], axis=1)
    if scheme == "corrected":
        R = _rotations(cn, normal)
        Q = jnp.einsum("fab,fcbk->fcak", P2, R)
    else:
        Q = jnp.broadcast_to(P2[:, None, :, :], (len(faces), 3, 2, 3))
    Bt = _bt_matrix(Q, g)
    D = jnp.array([
        [lame.lambda0 + 2 * lame.mu, lame.lambda0, 0.0],
        [lame.lambda0, lame.lambda0 + 2 * lame.mu, 0.0],
        [0.0, 0.0, lame.mu],
    ])

    if scheme == "plane_stress":
        Kf = jnp.einsum("f,fai,ab,fbj->fij", area, Bt, D, Bt)
        bv = None
    else:
        b = _second_forms(corners, cn, a1, a2)
        bv = jnp.stack([b[:, 0, 0], b[:, 1, 1], 2.0 * b[:, 0, 1]], axis=1)
        Kf = jnp.zeros((len(faces), 9, 9))
        for q in range(3):
            B = Bt - _bn_matrix(bv, cn, STIFFNESS_POINTS[q])
            Kf = Kf + jnp.einsum("f,fai,ab,fbj->fij", area / 3.0, B, D, B)

    Bc = Bt if scheme == "plane_stress" else Bt - _bn_matrix(bv, cn, CENTROID)
    ev = []
    for eps in strains:
        e2 = jnp.einsum("fai,ij,fbj->fab", P2, jnp.asarray(eps), P2)
        ev.append(jnp.stack([e2[:, 0, 0], e2[:, 1, 1], 2.0 * e2[:, 0, 1]],
                            axis=1))
    ev = jnp.stack(ev, axis=2)                          # (F, 3, 6)
    ff = -jnp.einsum("f,fai,ab,fbs->fis", area, Bc, D, ev)   # (F, 9, 6)

    # frozen local solution fields
    uloc = ubar[faces].reshape(len(faces), 9, 6)
    uf = jnp.einsum("fia,fib->ab", uloc, ff)            # u_a . f_b per pair
    uKu = jnp.einsum("fia,fij,fjb->ab", uloc, Kf, uloc)

    # translation-constraint correction: lam_a . S(x)^T u_b
    mass = jnp.zeros(nv)
    for kcorner in range(3):
        mass = mass.at[faces[:, kcorner]].add(area / 3.0)
    mnorm = jnp.sqrt(jnp.sum(mass**2))
    mu_comp = jnp.einsum("v,vkb->kb", mass, ubar) / mnorm   # S^T u, (3, 6)
    lam_term = jnp.einsum("ka,kb->ab", lam, mu_comp)

    psi = uf + uf.T - uKu - lam_term - lam_term.T
    A = jnp.sum(area)
    EM = _membrane_energy(normal, area, lame, strains) / A
    return EM - psi / A


def _prepare(mesh, geo, cell):
    x0 = jnp.asarray(mesh.vertices)
    faces = jnp.asarray(geo.faces)
    offsets = jnp.asarray(geo.corners - mesh.vertices[geo.faces])
    ubar = jnp.asarray(cell.U.reshape(-1, 3, 6))
    lam = (jnp.asarray(cell.multipliers)
           if cell.multipliers is not None else jnp.zeros((3, 6)))
    return x0, faces, offsets, ubar, lam


def objective_position_gradient(mesh, geo, lame, cell, weights,
                                scheme="corrected"):
    """d(sum W : C_A)/d(vertex positions), exact for the discrete pipeline."""
    x0, faces, offsets, ubar, lam = _prepare(mesh, geo, cell)
    W = jnp.asarray(weights)
    strains = [jnp.asarray(e) for e in unit_strains()]

    def scalar(x):
        C = _tensor_value(x, faces, offsets, lame, scheme, ubar, lam, strains)
        return jnp.sum(W * C)

    return np.asarray(jax.grad(scalar)(x0))


def objective_shape_gradient(mesh, geo, lame, cell, weights,
                             scheme="corrected"):
    """Per-vertex normal-velocity coefficients of the objective rate."""
    grad_x = objective_position_gradient(mesh, geo, lame, cell, weights,
                                         scheme)
    return np.einsum("vi,vi->v", grad_x, geo.vnormals)


def ca_rate_coefficients_exact(mesh, geo, lame, cell, scheme="corrected"):
    """(V, 6, 6) exact rate coefficients of every tensor entry."""
    x0, faces, offsets, ubar, lam = _prepare(mesh, geo, cell)
    strains = [jnp.asarray(e) for e in unit_strains()]

    def tensor(x):
        return _tensor_value(x, faces, offsets, lame, scheme, ubar, lam,
                             strains)

    jac = jax.jacrev(tensor)(x0)            # (6, 6, V, 3)
    out = np.einsum("abvi,vi->vab", np.asarray(jac), geo.vnormals)
    return out
