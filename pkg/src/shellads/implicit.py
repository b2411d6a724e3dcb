"""Periodic implicit surfaces: trigonometric level sets, randomized
perturbations, iso-surface extraction, level-set projection, and analytic
benchmark patches.

Level-set formulas live on the unit domain [0, 1]^3 (period 1 per axis);
meshes live on the torus cell [-1, 1)^3, and the field objects translate
between the two.

Extraction marches the Freudenthal tetrahedral decomposition of the grid
with wrap-around indexing, so the output is watertight across the periodic
boundary by construction (no seam to merge).
"""

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import torus
from .errors import EmptyLevelSetError, NonManifoldExtractionError
from .mesh import PeriodicMesh, canonicalize

TWO_PI = 2.0 * math.pi


class LevelSetField:
    """Scalar field with analytic gradient, periodic with period 1.

    ``value_unit``/``grad_unit`` evaluate on the unit domain; ``value`` and
    ``grad`` take torus coordinates in [-1, 1)^3.
    """

    def __init__(self, value_unit, grad_unit, name="custom", metadata=None):
        self._value = value_unit
        self._grad = grad_unit
        self.name = name
        self.metadata = dict(metadata or {})

    def value_unit(self, p):
        return self._value(np.asarray(p, dtype=float))

    def grad_unit(self, p):
        return self._grad(np.asarray(p, dtype=float))

    def value(self, x):
        return self.value_unit((np.asarray(x, dtype=float) + 1.0) / 2.0)

    def grad(self, x):
        return 0.5 * self.grad_unit((np.asarray(x, dtype=float) + 1.0) / 2.0)


def _split(p):
    return p[..., 0], p[..., 1], p[..., 2]


def _stack(gx, gy, gz):
    return np.stack([gx, gy, gz], axis=-1)


def _tpms_P():
    def val(p):
        x, y, z = _split(p)
        return (np.cos(TWO_PI * x) + np.cos(TWO_PI * y) + np.cos(TWO_PI * z))

    def grad(p):
        x, y, z = _split(p)
        return _stack(
            -TWO_PI * np.sin(TWO_PI * x),
            -TWO_PI * np.sin(TWO_PI * y),
            -TWO_PI * np.sin(TWO_PI * z),
        )

    return val, grad


def _tpms_G():
    def val(p):
        x, y, z = _split(p)
        sx, cx = np.sin(TWO_PI * x), np.cos(TWO_PI * x)
        sy, cy = np.sin(TWO_PI * y), np.cos(TWO_PI * y)
        sz, cz = np.sin(TWO_PI * z), np.cos(TWO_PI * z)
        return sx * cy + sz * cx + sy * cz

    def grad(p):
        x, y, z = _split(p)
        sx, cx = np.sin(TWO_PI * x), np.cos(TWO_PI * x)
        sy, cy = np.sin(TWO_PI * y), np.cos(TWO_PI * y)
        sz, cz = np.sin(TWO_PI * z), np.cos(TWO_PI * z)
        return TWO_PI * _stack(
            cx * cy - sz * sx,
            -sx * sy + cy * cz,
            cz * cx - sy * sz,
        )

    return val, grad


def _tpms_D():
    def val(p):
        x, y, z = _split(p)
        sx, cx = np.sin(TWO_PI * x), np.cos(TWO_PI * x)
        sy, cy = np.sin(TWO_PI * y), np.cos(TWO_PI * y)
        sz, cz = np.sin(TWO_PI * z), np.cos(TWO_PI * z)
        return sx * sy * sz + sx * cy * cz + cx * sy * cz + cx * cy * sz

    def grad(p):
        x, y, z = _split(p)
        sx, cx = np.sin(TWO_PI * x), np.cos(TWO_PI * x)
        sy, cy = np.sin(TWO_PI * y), np.cos(TWO_PI * y)
        sz, cz = np.sin(TWO_PI * z), np.cos(TWO_PI * z)
        return TWO_PI * _stack(
            cx * sy * sz + cx * cy * cz - sx * sy * cz - sx * cy * sz,
            sx * cy * sz - sx * sy * cz + cx * cy * cz - cx * sy * sz,
            sx * sy * cz - sx * cy * sz - cx * sy * sz + cx * cy * cz,
        )

    return val, grad


def _tpms_IWP():
    def val(p):
        x, y, z = _split(p)
        cx, cy, cz = (np.cos(TWO_PI * x), np.cos(TWO_PI * y),
                      np.cos(TWO_PI * z))
        c2x, c2y, c2z = (np.cos(2 * TWO_PI * x), np.cos(2 * TWO_PI * y),
                         np.cos(2 * TWO_PI * z))
        return 2.0 * (cx * cy + cy * cz + cz * cx) - (c2x + c2y + c2z)

    def grad(p):
        x, y, z = _split(p)
        sx, sy, sz = (np.sin(TWO_PI * x), np.sin(TWO_PI * y),
                      np.sin(TWO_PI * z))
        cx, cy, cz = (np.cos(TWO_PI * x), np.cos(TWO_PI * y),
                      np.cos(TWO_PI * z))
        return TWO_PI * _stack(
            -2.0 * sx * (cy + cz) + 2.0 * np.sin(2 * TWO_PI * x),
            -2.0 * sy * (cz + cx) + 2.0 * np.sin(2 * TWO_PI * y),
            -2.0 * sz * (cx + cy) + 2.0 * np.sin(2 * TWO_PI * z),
        )

    return val, grad


_TPMS = {"P": _tpms_P, "G": _tpms_G, "D": _tpms_D, "IWP": _tpms_IWP}


def tpms_field(kind):
    """Trigonometric level set of Schwarz P/D, Gyroid, or IWP."""
    if kind not in _TPMS:
        raise ValueError(f"unknown TPMS kind {kind!r}; choose from {sorted(_TPMS)}")
    val, grad = _TPMS[kind]()
    return LevelSetField(val, grad, name=kind, metadata={"kind": kind})


def convergence_field():
    """The anisotropic cosine level set used for refinement studies.

    In torus coordinates: 1.2 cos(pi x) + 0.9 cos(pi y) + 1.5 cos(pi z).
    """
    amp = np.array([1.2, 0.9, 1.5])

    def val(p):
        # torus coordinate X = 2p - 1, so cos(pi X) = -cos(2 pi p)
        return -(amp[0] * np.cos(TWO_PI * p[..., 0])
                 + amp[1] * np.cos(TWO_PI * p[..., 1])
                 + amp[2] * np.cos(TWO_PI * p[..., 2]))

    def grad(p):
        return _stack(
            amp[0] * TWO_PI * np.sin(TWO_PI * p[..., 0]),
            amp[1] * TWO_PI * np.sin(TWO_PI * p[..., 1]),
            amp[2] * TWO_PI * np.sin(TWO_PI * p[..., 2]),
        )

    return LevelSetField(val, grad, name="aniso-cos",
                         metadata={"amplitudes": amp.tolist()})


# ----------------------------------------------------------------------
# randomized perturbations


@dataclass
class PerturbationSpec:
    """Random trigonometric perturbation of a TPMS level set."""

    base: str = "P"
    n_max: int = 1
    strength: float = 0.3
    seed: int = 0


def _single_basis(n_max):
    """(name, value, grad) triples for sin/cos of each axis and frequency."""
    out = []
    for k in range(1, n_max + 1):
        w = k * TWO_PI
        for axis in range(3):
            for trig in ("sin", "cos"):
                fn = np.sin if trig == "sin" else np.cos
                dfn = np.cos if trig == "sin" else lambda t: -np.sin(t)

                def val(p, fn=fn, w=w, axis=axis):
                    return fn(w * p[..., axis])

                def grad(p, fn=fn, dfn=dfn, w=w, axis=axis):
                    g = np.zeros(p.shape)
                    g[..., axis] = w * dfn(w * p[..., axis])
                    return g

                out.append((f"{trig}({k}x{'xyz'[axis]})", val, grad))
    return out


def perturbation_basis(n_max=1):
    """Singles plus unordered pairwise products (duplicates collapsed)."""
    singles = _single_basis(n_max)
    out = list(singles)
    for i in range(len(singles)):
        for j in range(i, len(singles)):
            ni, vi, gi = singles[i]
            nj, vj, gj = singles[j]

            def val(p, vi=vi, vj=vj):
                return vi(p) * vj(p)

            def grad(p, vi=vi, vj=vj, gi=gi, gj=gj):
                return (gi(p) * vj(p)[..., None]
                        + vi(p)[..., None] * gj(p))

            out.append((f"{ni}*{nj}", val, grad))
    return out


def perturbed_field(spec):
    """Base TPMS field plus seeded uniform random basis coefficients."""
    base = tpms_field(spec.base)
    basis = perturbation_basis(spec.n_max)
    rng = np.random.default_rng(spec.seed)
    coeff = rng.uniform(-spec.strength, spec.strength, size=len(basis))

    def val(p):
        out = base.value_unit(p)
        for c, (_, v, _) in zip(coeff, basis):
            out = out + c * v(p)
        return out

    def grad(p):
        out = base.grad_unit(p)
        for c, (_, _, g) in zip(coeff, basis):
            out = out + c * g(p)
        return out

    meta = {
        "base": spec.base,
        "n_max": spec.n_max,
        "strength": spec.strength,
        "seed": spec.seed,
        "basis_size": len(basis),
        "basis": [name for name, _, _ in basis],
        "coefficients": coeff.tolist(),
    }
    return LevelSetField(val, grad, name=f"{spec.base}-perturbed", metadata=meta)


# ----------------------------------------------------------------------
# marching tetrahedra on the periodic grid

# Freudenthal decomposition: six tets per cube, all sharing the main
# diagonal; face diagonals agree across neighboring cubes.
_PERMS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def _tet_offsets():
    tets = np.zeros((6, 4, 3), dtype=np.int64)
    for t, perm in enumerate(_PERMS):
        cur = np.zeros(3, dtype=np.int64)
        tets[t, 0] = cur
        for step, axis in enumerate(perm):
            cur = cur.copy()
            cur[axis] = 1
            tets[t, step + 1] = cur
    return tets


TET_OFFSETS = _tet_offsets()


def _case_tables():
    """triangles[tet_type][case] = list of 3 edge pairs, wound so the
    normal points from the positive to the negative side."""
    tables = []
    for t in range(6):
        P = TET_OFFSETS[t].astype(float)
        per_case = [None] * 16
        for case in range(1, 15):
            inside = [i for i in range(4) if case >> i & 1]
            outside = [i for i in range(4) if i not in inside]
            if len(inside) == 1:
                a = inside[0]
                edges = [(a, o) for o in outside]
                tris = [tuple(edges)]
            elif len(inside) == 3:
                b = outside[0]
                edges = [(i, b) for i in inside]
                tris = [tuple(edges)]
            else:
                (a, b), (c, d) = inside, outside
                quad = [(a, c), (a, d), (b, d), (b, c)]
                tris = [(quad[0], quad[1], quad[2]),
                        (quad[0], quad[2], quad[3])]
            pos_c = P[inside].mean(axis=0)
            neg_c = P[outside].mean(axis=0)
            oriented = []
            for tri in tris:
                m = np.array([(P[i] + P[j]) / 2.0 for i, j in tri])
                nrm = np.cross(m[1] - m[0], m[2] - m[0])
                if nrm @ (neg_c - pos_c) < 0:
                    tri = (tri[0], tri[2], tri[1])
                oriented.append(tri)
            per_case[case] = oriented
        tables.append(per_case)
    return tables


_CASE_TABLES = _case_tables()


def _marching_tets(values):
    """Triangulate the zero set of periodic grid values.

    Returns (vertices in torus coordinates, faces); watertight and
    oriented with normals pointing toward negative field values.
    """
    n = values.shape[0]
    if values.shape != (n, n, n):
        raise ValueError("grid must be cubic")
    vals = values.copy()
    tiny = 1e-12 * max(float(np.abs(vals).max()), 1.0)
    vals[vals == 0.0] = tiny

    base = np.stack(np.meshgrid(np.arange(n), np.arange(n), np.arange(n),
                                indexing="ij"), axis=-1).reshape(-1, 3)
    edge_a, edge_b = [], []      # global grid ids per crossing edge
    pos_a, pos_b = [], []        # unfolded corner coordinates
    tri_edge_index = []          # triangles as indices into the edge list

    def gid(idx):
        return ((idx[:, 0] % n) * n + idx[:, 1] % n) * n + idx[:, 2] % n

    flat = vals.ravel()
    for t in range(6):
        corners = base[:, None, :] + TET_OFFSETS[t][None, :, :]   # (C,4,3)
        gids = np.stack([gid(corners[:, i]) for i in range(4)], axis=1)
        v = flat[gids]                                            # (C, 4)
        case = ((v > 0) << np.arange(4)).sum(axis=1)
        for c in range(1, 15):
            tris = _CASE_TABLES[t][c]
            sel = np.flatnonzero(case == c)
            if len(sel) == 0:
                continue
            for tri in tris:
                idxs = []
                for (la, lb) in tri:
                    edge_a.append(gids[sel, la])
                    edge_b.append(gids[sel, lb])
                    pos_a.append(corners[sel, la])
                    pos_b.append(corners[sel, lb])
                    idxs.append(len(edge_a) - 1)
                tri_edge_index.append(idxs)

    if not tri_edge_index:
        raise EmptyLevelSetError("level set does not cross the grid")

    counts = [len(a) for a in edge_a]
    ea = np.concatenate(edge_a)
    eb = np.concatenate(edge_b)
    pa = np.concatenate(pos_a).astype(float)
    pb = np.concatenate(pos_b).astype(float)
    va = flat[ea]
    vb = flat[eb]
    # clamp crossings away from grid corners so no face degenerates when a
    # grid value sits (numerically) on the level set
    tpar = np.clip(va / (va - vb), 0.01, 0.99)
    pts = pa + tpar[:, None] * (pb - pa)          # unfolded grid units

    lo = np.minimum(ea, eb)
    hi = np.maximum(ea, eb)
    keys = lo * (n**3) + hi
    uniq, first, inverse = np.unique(keys, return_index=True,
                                     return_inverse=True)
    verts_unit = pts[first] / n
    verts = torus.wrap(2.0 * verts_unit - 1.0)

    # reassemble triangles from block offsets
    offsets = np.cumsum([0] + counts)
    faces = []
    for idxs in tri_edge_index:
        cols = [inverse[offsets[i]:offsets[i + 1]] for i in idxs]
        faces.append(np.stack(cols, axis=1))
    faces = np.concatenate(faces, axis=0)

    # drop degenerate triangles from crossings collapsing to a shared point
    good = ((faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2])
            & (faces[:, 2] != faces[:, 0]))
    return verts, faces[good]


def extract_mesh(field, grid_n, target_edge=None, remesh=True):
    """Extract the periodic zero-set mesh of ``field`` on an n^3 grid.

    Marches wrap-around tetrahedra, rescales to the torus cell,
    canonicalizes, and (by default) runs one isotropic remeshing pass at
    ``target_edge`` (default 2 grid cells).
    """
    if grid_n < 16:
        raise ValueError("grid_n must be at least 16")
    axis = np.arange(grid_n) / grid_n
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
    values = field.value_unit(grid)
    if not (np.any(values > 0) and np.any(values < 0)):
        raise EmptyLevelSetError(f"field {field.name!r} has no zero crossing")
    verts, faces = _marching_tets(values)
    # already canonical: coordinates wrapped, edge-keyed vertices unique
    out = PeriodicMesh(verts, faces, _wrap=False)
    try:
        out.validate()
    except Exception as exc:
        raise NonManifoldExtractionError(str(exc)) from exc
    if remesh:
        from .remesh import dynamic_remesh

        if target_edge is None:
            target_edge = 4.0 / grid_n
        out = dynamic_remesh(out, target_edge)
    return out


# ----------------------------------------------------------------------
# level-set projection


def project_to_levelset(mesh, field, tol=1e-8, max_step=0.1):
    """Move vertices onto the zero set by bisection along +-grad.

    Vertices whose search fails to bracket a sign change are left in place
    and recorded in the ``projection_failures`` attribute of the result.
    """
    x = mesh.vertices.copy()
    f = field.value(x)
    g = field.grad(x)
    gn = np.linalg.norm(g, axis=1, keepdims=True)
    d = -np.sign(f)[:, None] * g / np.maximum(gn, 1e-30)

    active = np.abs(f) >= tol
    t_hi = np.full(len(x), np.nan)
    step = np.full(len(x), 1e-4)
    lo = np.zeros(len(x))
    for _ in range(64):
        if not active.any():
            break
        probe = np.where(active, np.minimum(step, max_step), 0.0)
        fv = field.value(x + probe[:, None] * d)
        flipped = active & (np.sign(fv) != np.sign(f)) & (probe > 0)
        t_hi[flipped] = probe[flipped]
        active &= ~flipped
        lo[active] = probe[active]
        maxed = active & (step >= max_step)
        active &= ~maxed
        step = step * 2.0

    failed = np.isnan(t_hi) & (np.abs(f) >= tol)
    bracket = ~np.isnan(t_hi)
    t_lo = lo.copy()
    for _ in range(80):
        if not bracket.any():
            break
        mid = 0.5 * (t_lo + t_hi)
        fm = field.value(x + mid[:, None] * d)
        done = np.abs(fm) < tol
        use_lo = np.sign(fm) == np.sign(f)
        t_lo = np.where(bracket & use_lo & ~done, mid, t_lo)
        t_hi = np.where(bracket & ~use_lo & ~done, mid, t_hi)
        finished = bracket & done
        x[finished] += mid[finished, None] * d[finished]
        bracket &= ~done
    if bracket.any():
        # interval collapsed without meeting tol; take the midpoint anyway
        mid = 0.5 * (t_lo + t_hi)
        x[bracket] += mid[bracket, None] * d[bracket]

    out = mesh.with_positions(x)
    out._cache = mesh._cache
    out.projection_failures = np.flatnonzero(failed)
    if failed.any():
        warnings.warn(f"{int(failed.sum())} vertices failed level-set projection")
    return out


# ----------------------------------------------------------------------
# flat plane and analytic benchmark patches


def flat_plane(n=16):
    """Uniform triangulated plane z = 0 spanning the cell (a genus-1 torus)."""
    coords = -1.0 + 2.0 * np.arange(n + 1) / n
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    verts = np.stack([xx.ravel(), yy.ravel(), np.zeros(xx.size)], axis=1)
    faces = []
    for i in range(n):
        for j in range(n):
            a = i * (n + 1) + j
            b = a + 1
            c = a + (n + 1)
            d = c + 1
            faces.append([a, b, d])
            faces.append([a, d, c])
    return canonicalize(verts, np.array(faces), tol=1e-9)


_PATCH_HESSIANS = {
    "elliptic": np.array([[0.5, 0.0], [0.0, 0.5]]),
    "parabolic": np.array([[0.5, 0.0], [0.0, 0.0]]),
    "hyperbolic": np.array([[0.5, 0.0], [0.0, -0.5]]),
}


@dataclass
class AnalyticPatch:
    """Open graph surface z = q(x, y) with closed-form normals and
    second forms, used as a discretization-error fixture."""

    kind: str
    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray
    hessian: np.ndarray = dc_field(repr=False, default=None)

    def normal_at(self, pts):
        g = self._grad_q(pts)
        n = np.concatenate([-g, np.ones(g.shape[:-1] + (1,))], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def _grad_q(self, pts):
        return pts[..., :2] @ self.hessian.T

    def world_second_form(self, pts):
        """Exact b lifted to world coordinates (classical form w.r.t. the
        upward normal), shape (..., 3, 3)."""
        g = self._grad_q(pts)
        w = np.sqrt(1.0 + np.sum(g * g, axis=-1))
        II = self.hessian / w[..., None, None]
        t1 = np.zeros(pts.shape[:-1] + (3,))
        t1[..., 0] = 1.0
        t1[..., 2] = g[..., 0]
        t2 = np.zeros_like(t1)
        t2[..., 1] = 1.0
        t2[..., 2] = g[..., 1]
        T = np.stack([t1, t2], axis=-1)                    # (..., 3, 2)
        G = np.einsum("...ia,...ib->...ab", T, T)
        W = np.einsum("...ia,...ab->...ib", T, np.linalg.inv(G))
        return np.einsum("...ia,...ab,...jb->...ij", W, II, W)

    def geometry(self):
        """SurfaceGeometry with the exact vertex normals supplied."""
        from .geometry import SurfaceGeometry

        corners = self.vertices[self.faces]
        return SurfaceGeometry.from_arrays(
            corners, self.faces, len(self.vertices), vnormals=self.normals
        )


def analytic_patch(kind, resolution=16, extent=1.0):
    """Regularly meshed elliptic/parabolic/hyperbolic graph patch."""
    if kind not in _PATCH_HESSIANS:
        raise ValueError(f"unknown patch kind {kind!r}")
    H = _PATCH_HESSIANS[kind]
    n = resolution
    coords = np.linspace(-extent, extent, n + 1)
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    pts2 = np.stack([xx.ravel(), yy.ravel()], axis=1)
    z = 0.5 * np.einsum("pi,ij,pj->p", pts2, H, pts2)
    verts = np.column_stack([pts2, z])
    faces = []
    for i in range(n):
        for j in range(n):
            a = i * (n + 1) + j
            b = a + 1
            c = a + (n + 1)
            d = c + 1
            faces.append([a, b, d])
            faces.append([a, d, c])
    faces = np.array(faces, dtype=np.int64)
    patch = AnalyticPatch(kind, verts, faces, None, H)
    patch.normals = patch.normal_at(verts)
    return patch
