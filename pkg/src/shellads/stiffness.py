"""Global membrane system, asymptotic elastic tensor, and theory diagnostics.

The cell problem is solved for the six symmetric unit macro-strains; the
asymptotic tensor follows from the homogeneous membrane energy minus the
(nonnegative) relaxation correction, which keeps the discrete upper bound
exact up to solver tolerance.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, bmat, csc_matrix
from scipy.sparse.linalg import splu, LinearOperator, cg as sparse_cg

from . import element, voigt
from .errors import NoConvergenceError
from .geometry import SurfaceGeometry

DIRECT_VERTEX_LIMIT = 30_000


def unit_strains():
    return voigt.unit_strains()


@dataclass
class CellSolution:
    """Vertex displacement fields for the six unit macro-strains."""

    U: np.ndarray             # (3V, 6)
    residuals: np.ndarray     # (6,)
    method: str
    multipliers: np.ndarray = None   # (3, 6) translation-constraint forces

    def field(self, a):
        """Solution ``a`` as a (V, 3) array."""
        return self.U[:, a].reshape(-1, 3)


def assemble(mesh_or_geo, lame, scheme="corrected", geo=None):
    """Assemble the global stiffness matrix and the six load vectors.

    Returns (K, F, geo) with K a 3V x 3V CSR matrix and F of shape (3V, 6).
    """
    if isinstance(mesh_or_geo, SurfaceGeometry):
        geo = mesh_or_geo
    elif geo is None:
        geo = SurfaceGeometry.from_mesh(mesh_or_geo)
    nv = geo.num_vertices
    Kf = element.element_stiffness(geo, lame, scheme)
    ff = element.element_loads(geo, lame, unit_strains(), scheme)

    dof = (3 * geo.faces[:, :, None] + np.arange(3)).reshape(-1, 9)
    rows = np.repeat(dof, 9, axis=1).ravel()
    cols = np.tile(dof, (1, 9)).ravel()
    K = coo_matrix((Kf.ravel(), (rows, cols)), shape=(3 * nv, 3 * nv)).tocsr()

    F = np.zeros((3 * nv, 6))
    for s in range(6):
        np.add.at(F[:, s], dof.ravel(), ff[:, :, s].ravel())
    return K, F, geo


def translation_basis(num_vertices, vertex_mass):
    """Mass-weighted translation constraint vectors, orthonormal columns.

    A displacement u satisfies S^T u = 0 exactly when it is orthogonal to
    the three global translations under the lumped mass inner product.
    """
    n = num_vertices
    S = np.zeros((3 * n, 3))
    for k in range(3):
        S[k::3, k] = vertex_mass
    S /= np.linalg.norm(S, axis=0, keepdims=True)
    return S


def _project_out(S):
    def proj(v):
        return v - S @ (S.T @ v)
    return proj


def _repair_zero_diagonal(K):
    """Put 1 on all-zero diagonal entries (decoupled DOFs of a PSD matrix)."""
    d = K.diagonal()
    dead = np.abs(d) < 1e-300
    if not dead.any():
        return K, d
    fix = coo_matrix(
        (np.ones(dead.sum()), (np.flatnonzero(dead), np.flatnonzero(dead))),
        shape=K.shape,
    )
    K = (K + fix).tocsr()
    return K, K.diagonal()


def solve_cell(K, F, vertex_mass, tol_rel=1e-9, method="auto", max_iter=None):
    """Solve the six cell problems with translation deflation.

    Iterates and right-hand sides are kept orthogonal (in the lumped mass
    inner product) to the three global translations; the energy is
    unaffected by any residual inextensional kernel because the loads are
    kernel-consistent.

    method: 'cg' (deflated Jacobi-preconditioned CG), 'direct' (sparse KKT
    factorization), or 'auto' (direct below 30k vertices).

    Raises NoConvergenceError when CG exhausts its iteration budget.
    """
    n3 = K.shape[0]
    nv = n3 // 3
    S = translation_basis(nv, vertex_mass)
    proj = _project_out(S)
    if method == "auto":
        method = "direct" if nv < DIRECT_VERTEX_LIMIT else "cg"

    if method == "direct":
        U = _solve_direct(K, F, S)
        used = "direct"
    elif method == "cg":
        U = _solve_cg(K, F, S, tol_rel, max_iter)
        used = "cg"
    else:
        raise ValueError(f"unknown method {method!r}")

    residuals = np.zeros(6)
    for a in range(6):
        fb = proj(F[:, a])
        nb = np.linalg.norm(fb)
        if nb == 0.0:
            U[:, a] = 0.0
            continue
        U[:, a] = proj(U[:, a])
        residuals[a] = np.linalg.norm(proj(fb - K @ U[:, a])) / nb
    if used == "direct" and np.any(residuals > max(1e3 * tol_rel, 1e-8)):
        # factorization struggled (large kernel); fall back to CG
        U = _solve_cg(K, F, S, tol_rel, max_iter)
        used = "direct+cg"
        for a in range(6):
            fb = proj(F[:, a])
            nb = np.linalg.norm(fb)
            residuals[a] = (
                np.linalg.norm(proj(fb - K @ U[:, a])) / nb if nb else 0.0
            )
    lam = S.T @ (F - K @ U)
    return CellSolution(U=U, residuals=residuals, method=used,
                        multipliers=lam)


def _solve_direct(K, F, S):
    Kr, _ = _repair_zero_diagonal(K)
    kkt = bmat([[Kr, csc_matrix(S)], [csc_matrix(S.T), None]], format="csc")
    try:
        lu = splu(kkt)
    except RuntimeError:
        return np.full_like(F, np.nan)
    n3 = K.shape[0]
    U = np.zeros_like(F)
    rhs = np.zeros(n3 + S.shape[1])
    for a in range(F.shape[1]):
        rhs[:n3] = F[:, a]
        sol = lu.solve(rhs)
        U[:, a] = sol[:n3]
    return U


def _solve_cg(K, F, S, tol_rel, max_iter):
    n3 = K.shape[0]
    proj = _project_out(S)
    _, diag = _repair_zero_diagonal(K)
    diag = np.where(np.abs(diag) < 1e-300, 1.0, diag)
    inv_diag = 1.0 / diag
    if max_iter is None:
        max_iter = int(50 * np.sqrt(n3)) + 100

    A = LinearOperator((n3, n3), matvec=lambda v: proj(K @ proj(v)))
    M = LinearOperator((n3, n3), matvec=lambda v: proj(inv_diag * v))
    U = np.zeros_like(F)
    for a in range(F.shape[1]):
        b = proj(F[:, a])
        nb = np.linalg.norm(b)
        if nb == 0.0:
            continue
        x, info = sparse_cg(A, b, rtol=tol_rel, atol=0.0, maxiter=max_iter, M=M)
        if info > 0:
            res = np.linalg.norm(proj(b - K @ proj(x))) / nb
            if res > tol_rel * 100:
                raise NoConvergenceError(max_iter, res)
        U[:, a] = proj(x)
    return U


# ----------------------------------------------------------------------
# tensors and diagnostics


def membrane_energy_density(normal, lame):
    """Per-face fourth-order membrane energy tensor in Voigt, (F, 6, 6).

    lambda0 P x P + mu (P (x) P + P (x)' P) with P = I - n n^T.
    """
    P = np.eye(3)[None, :, :] - normal[:, :, None] * normal[:, None, :]
    t4 = (
        lame.lambda0 * np.einsum("fij,fkl->fijkl", P, P)
        + lame.mu * (np.einsum("fil,fjk->fijkl", P, P)
                     + np.einsum("fik,fjl->fijkl", P, P))
    )
    idx = voigt.PAIRS
    out = np.empty((len(normal), 6, 6))
    for a, (i, j) in enumerate(idx):
        for b_, (k, l) in enumerate(idx):
            out[:, a, b_] = t4[:, i, j, k, l]
    return out


def homogeneous_membrane_tensor(geo, lame):
    """Area-averaged homogeneous membrane energy tensor (6x6 Voigt).

    Depends only on the normal distribution; its hydrostatic value is the
    constant (4/9)(lambda0 + mu) on every surface.
    """
    per_face = membrane_energy_density(geo.normal, lame)
    return np.einsum("f,fab->ab", geo.area, per_face) / geo.total_area


def compute_CA(geo, lame, cell, loads):
    """Asymptotic elastic tensor from the solved cell problems (6x6 Voigt).

    C_A[a, b] = EM[a, b] - (u_a . f_b) / Area; the correction is a Gram
    matrix, so the homogeneous tensor bounds C_A from above as quadratic
    forms (up to solver tolerance).
    """
    EM = homogeneous_membrane_tensor(geo, lame)
    corr = cell.U.T @ loads / geo.total_area
    return EM - corr


def ads(C, eps):
    """Directional stiffness eps : C : eps."""
    return voigt.quadratic_form(C, eps)


def bulk_modulus(C):
    """Hydrostatic stiffness (1/9) sum_ij C^{iijj}."""
    return float(np.sum(C[:3, :3])) / 9.0


def tensor_rel_error(A, B):
    """Relative Frobenius distance ||A - B||_F / ||A||_F (tensor norm)."""
    na = voigt.tensor_frobenius(A)
    if na == 0.0:
        raise ValueError("reference tensor is zero")
    return voigt.tensor_frobenius(np.asarray(A) - np.asarray(B)) / na


def optimality_residual(geo, lame, eps):
    """Pointwise stiffness-bound attainment residuals (relaxation force).

    Returns (tangential (F, 3), scalar (F,), norm_t, norm_s): per-face
    evaluations of the two attainment conditions and their area-weighted
    L2 norms. Both vanish identically exactly when the bound is met for
    this strain.
    """
    eps = np.asarray(eps, dtype=float)
    l0, mu = lame.lambda0, lame.mu
    Bw = geo.world_second_forms()
    H = geo.mean_curvature()
    n = geo.normal
    P = np.eye(3)[None, :, :] - n[:, :, None] * n[:, None, :]
    Mt = 2.0 * (l0 + mu) * Bw + 4.0 * mu * H[:, None, None] * P
    r_t = np.einsum("fij,jk,fk->fi", Mt, eps, n)
    Ms = 2.0 * (l0 * H[:, None, None] * P + mu * Bw)
    r_s = np.einsum("fij,ij->f", Ms, eps)
    w = geo.area / geo.total_area
    norm_t = float(np.sqrt(np.sum(w * np.sum(r_t**2, axis=1))))
    norm_s = float(np.sqrt(np.sum(w * r_s**2)))
    return r_t, r_s, norm_t, norm_s


# ----------------------------------------------------------------------
# one-call evaluation


@dataclass
class Evaluation:
    """Everything the optimizer and CLI need from one analysis pass."""

    geo: SurfaceGeometry
    lame: object
    scheme: str
    loads: np.ndarray
    cell: CellSolution
    CA: np.ndarray
    EM: np.ndarray

    @property
    def area(self):
        return self.geo.total_area

    def bulk(self):
        return bulk_modulus(self.CA)


def evaluate(mesh, lame, scheme="corrected", tol_rel=1e-9, method="auto",
             geo=None):
    """Assemble, solve the six cell problems, and compute the tensors."""
    K, F, geo = assemble(mesh if geo is None else geo, lame, scheme, geo=geo)
    vmass = _vertex_mass_from_geo(geo)
    cell = solve_cell(K, F, vmass, tol_rel=tol_rel, method=method)
    CA = compute_CA(geo, lame, cell, F)
    EM = homogeneous_membrane_tensor(geo, lame)
    return Evaluation(geo=geo, lame=lame, scheme=scheme, loads=F, cell=cell,
                      CA=CA, EM=EM)


def _vertex_mass_from_geo(geo):
    m = np.zeros(geo.num_vertices)
    third = geo.area / 3.0
    for k in range(3):
        np.add.at(m, geo.faces[:, k], third)
    return m
