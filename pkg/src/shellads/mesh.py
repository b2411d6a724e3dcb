"""Closed triangle meshes embedded in the flat 3-torus [-1, 1)^3.

Vertex coordinates are always stored wrapped into the canonical cell.
Connectivity across the periodic boundary shows up as "long" edges; all
local geometry is computed on the fly in unfolded coordinates (see
:mod:`shellads.torus`), nothing unfolded is ever written back.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import torus
from .errors import (
    MeshError,
    NonManifoldAfterMergeError,
    UnmatchedBoundaryVertexError,
)


@dataclass
class UnfoldedRing:
    """One-ring of a vertex with neighbors translated next to the center."""

    center: int
    neighbors: np.ndarray          # (k,) vertex indices
    positions: np.ndarray          # (k, 3) unfolded neighbor positions

    def __post_init__(self):
        self.neighbors = np.asarray(self.neighbors, dtype=np.int64)
        self.positions = np.asarray(self.positions, dtype=float)


class PeriodicMesh:
    """Triangle mesh on the 3-torus with merged periodic vertices.

    Parameters
    ----------
    vertices : (V, 3) float array
        Torus coordinates; wrapped into [-1, 1)^3 on construction.
    faces : (F, 3) int array
        Consistently oriented vertex index triples.

    Topology-derived quantities (edges, adjacency) are built lazily and
    cached; they are safe to read from several threads.  Mutating
    operations (remesh, surgery) build new meshes instead of editing.
    """

    def __init__(self, vertices, faces, _wrap=True):
        vertices = np.asarray(vertices, dtype=float)
        faces = np.asarray(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError("vertices must be (V, 3)")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError("faces must be (F, 3)")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise MeshError("face index out of range")
        self.vertices = torus.wrap(vertices) if _wrap else vertices
        self.faces = faces
        self._cache = {}

    # ------------------------------------------------------------------
    # basic counts
    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_faces(self):
        return len(self.faces)

    def copy(self):
        return PeriodicMesh(self.vertices.copy(), self.faces.copy(), _wrap=False)

    def with_positions(self, vertices):
        """Same topology, new (wrapped) vertex positions; caches shared."""
        m = PeriodicMesh(vertices, self.faces, _wrap=True)
        m._cache = self._cache
        return m

    # ------------------------------------------------------------------
    # derived connectivity
    def _connectivity(self):
        cached = self._cache.get("conn")
        if cached is not None:
            return cached
        F = self.faces
        nv = self.num_vertices
        # directed half edges: (a, b) per face corner
        src = np.concatenate([F[:, 0], F[:, 1], F[:, 2]])
        dst = np.concatenate([F[:, 1], F[:, 2], F[:, 0]])
        he_face = np.tile(np.arange(len(F)), 3)
        lo = np.minimum(src, dst)
        hi = np.maximum(src, dst)
        keys = lo.astype(np.int64) * nv + hi
        order = np.argsort(keys, kind="stable")
        keys_sorted = keys[order]
        uniq_keys, start, counts = np.unique(
            keys_sorted, return_index=True, return_counts=True
        )
        edges = np.stack([uniq_keys // nv, uniq_keys % nv], axis=1)
        conn = {
            "edges": edges,
            "edge_counts": counts,
            "he_src": src,
            "he_dst": dst,
            "he_face": he_face,
            "he_order": order,
            "he_start": start,
        }
        self._cache["conn"] = conn
        return conn

    @property
    def edges(self):
        """(E, 2) array of undirected edges, each row sorted."""
        return self._connectivity()["edges"]

    def edge_face_incidence(self):
        """List of face-index arrays, one per edge (same order as .edges)."""
        cached = self._cache.get("edge_faces")
        if cached is not None:
            return cached
        conn = self._connectivity()
        faces_sorted = conn["he_face"][conn["he_order"]]
        splits = np.split(faces_sorted, np.cumsum(conn["edge_counts"])[:-1])
        self._cache["edge_faces"] = splits
        return splits

    def vertex_neighbors(self):
        """List of sorted neighbor-index arrays per vertex."""
        cached = self._cache.get("vneigh")
        if cached is not None:
            return cached
        E = self.edges
        nv = self.num_vertices
        out = [[] for _ in range(nv)]
        for a, b in E:
            out[a].append(b)
            out[b].append(a)
        out = [np.array(sorted(n), dtype=np.int64) for n in out]
        self._cache["vneigh"] = out
        return out

    def vertex_faces(self):
        """List of face-index arrays per vertex."""
        cached = self._cache.get("vfaces")
        if cached is not None:
            return cached
        nv = self.num_vertices
        out = [[] for _ in range(nv)]
        for fid, (i, j, k) in enumerate(self.faces):
            out[i].append(fid)
            out[j].append(fid)
            out[k].append(fid)
        out = [np.array(f, dtype=np.int64) for f in out]
        self._cache["vfaces"] = out
        return out

    # ------------------------------------------------------------------
    # topology checks
    def is_closed_manifold(self):
        counts = self._connectivity()["edge_counts"]
        return bool(np.all(counts == 2))

    def boundary_vertices(self):
        """Vertices on edges with a single incident face."""
        conn = self._connectivity()
        single = conn["edge_counts"] != 2
        return np.unique(conn["edges"][single])

    def orientation_consistent(self):
        """True when every directed edge appears exactly once."""
        conn = self._connectivity()
        nv = self.num_vertices
        dkeys = conn["he_src"].astype(np.int64) * nv + conn["he_dst"]
        return len(np.unique(dkeys)) == len(dkeys)

    def validate(self):
        """Raise MeshError unless the mesh is a closed oriented 2-manifold."""
        counts = self._connectivity()["edge_counts"]
        if np.any(counts > 2):
            raise NonManifoldAfterMergeError(
                f"{int(np.sum(counts > 2))} edges with >2 incident faces"
            )
        if np.any(counts < 2):
            bad = self.boundary_vertices()
            raise MeshError(f"mesh not closed: {len(bad)} boundary vertices")
        if not self.orientation_consistent():
            raise MeshError("inconsistent face orientation")
        self._validate_vertex_fans()

    def _validate_vertex_fans(self):
        """Every vertex star must be a single umbrella."""
        nv = self.num_vertices
        # next vertex in face around each vertex: v -> {a: b} for face (v,a,b)
        succ = [dict() for _ in range(nv)]
        for i, j, k in self.faces:
            succ[i][j] = k
            succ[j][k] = i
            succ[k][i] = j
        for v in range(nv):
            ring = succ[v]
            if not ring:
                raise MeshError(f"isolated vertex {v}")
            start = next(iter(ring))
            cur = ring[start]
            steps = 1
            while cur != start:
                cur = ring.get(cur)
                if cur is None:
                    raise MeshError(f"vertex {v} star is not a closed fan")
                steps += 1
                if steps > len(ring):
                    raise MeshError(f"vertex {v} star walk did not close")
            if steps != len(ring):
                raise MeshError(f"vertex {v} has a multi-component star")

    def euler_characteristic(self):
        return self.num_vertices - len(self.edges) + self.num_faces

    def component_count(self):
        E = self.edges
        nv = self.num_vertices
        adj = coo_matrix(
            (np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(nv, nv)
        )
        n, _ = connected_components(adj, directed=False)
        return n

    def genus(self):
        """Total genus, g = c - chi/2 for c closed orientable components."""
        return self.component_count() - self.euler_characteristic() // 2

    # ------------------------------------------------------------------
    # unfolded geometry access
    def unfold_ring(self, v):
        """One-ring neighbors of ``v`` translated into its nearest copies."""
        neigh = self.vertex_neighbors()[v]
        pos = torus.unfold(self.vertices[neigh], self.vertices[v])
        return UnfoldedRing(v, neigh, pos)

    def face_corners(self):
        """(F, 3, 3) unfolded corner positions (corner 0 is the anchor)."""
        v = self.vertices
        F = self.faces
        p0 = v[F[:, 0]]
        p1 = torus.unfold(v[F[:, 1]], p0)
        p2 = torus.unfold(v[F[:, 2]], p0)
        return np.stack([p0, p1, p2], axis=1)

    def edge_lengths(self):
        """Unfolded length per undirected edge (same order as .edges)."""
        E = self.edges
        d = torus.minimal_delta(self.vertices[E[:, 0]], self.vertices[E[:, 1]])
        return np.linalg.norm(d, axis=1)


# ----------------------------------------------------------------------
# element size


def face_circumradii(mesh):
    """Circumradius per face; degenerate faces fall back to longest-edge/2.

    Returns (radii, degenerate_mask).
    """
    corners = mesh.face_corners()
    e0 = corners[:, 1] - corners[:, 0]
    e1 = corners[:, 2] - corners[:, 1]
    e2 = corners[:, 0] - corners[:, 2]
    l0 = np.linalg.norm(e0, axis=1)
    l1 = np.linalg.norm(e1, axis=1)
    l2 = np.linalg.norm(e2, axis=1)
    area = 0.5 * np.linalg.norm(np.cross(e0, -e2), axis=1)
    longest = np.maximum(l0, np.maximum(l1, l2))
    degenerate = area <= 1e-14 * np.maximum(longest, 1.0) ** 2
    radii = np.where(
        degenerate, 0.5 * longest, l0 * l1 * l2 / np.maximum(4.0 * area, 1e-300)
    )
    return radii, degenerate


def mean_element_size(mesh):
    """Arithmetic mean of face circumradii (the refinement metric h)."""
    radii, degenerate = face_circumradii(mesh)
    if degenerate.any():
        warnings.warn(
            f"{int(degenerate.sum())} degenerate faces in element-size estimate"
        )
    return float(radii.mean())


# ----------------------------------------------------------------------
# canonicalization


def canonicalize(raw_vertices, raw_faces, tol=1e-6):
    """Merge periodic partner vertices of a raw mesh into a closed torus mesh.

    The raw mesh may have boundary vertices on the cube faces x_i = +-1 that
    match a partner after translation by the period.  Each matched group is
    merged into one vertex that keeps the lexicographically smallest of the
    original coordinates (wrapped into the canonical cell).

    Returns a closed :class:`PeriodicMesh` whose ``merge_map`` attribute maps
    raw vertex indices to canonical ones.

    Raises
    ------
    UnmatchedBoundaryVertexError
        If a boundary vertex remains unmatched after merging.
    NonManifoldAfterMergeError
        If merging creates a non-manifold edge or collapses a face.
    """
    raw_vertices = np.asarray(raw_vertices, dtype=float)
    raw_faces = np.asarray(raw_faces, dtype=np.int64)
    n = len(raw_vertices)

    # periodic proximity via a KD-tree on the torus (box size = period)
    wrapped = np.mod(raw_vertices + 1.0, 2.0)
    # guard against coordinates landing exactly on the box edge
    wrapped[wrapped >= 2.0] = 0.0
    tree = cKDTree(wrapped, boxsize=2.0)
    pairs = tree.query_pairs(r=tol, output_type="ndarray")

    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
    roots = np.array([find(i) for i in range(n)])

    # canonical index per group; representative position: lexicographic min
    uniq_roots, new_index = np.unique(roots, return_inverse=True)
    positions = np.empty((len(uniq_roots), 3))
    order = np.lexsort((raw_vertices[:, 2], raw_vertices[:, 1], raw_vertices[:, 0]))
    filled = np.zeros(len(uniq_roots), dtype=bool)
    for i in order:
        g = new_index[i]
        if not filled[g]:
            positions[g] = raw_vertices[i]
            filled[g] = True

    faces = new_index[raw_faces]
    if np.any(
        (faces[:, 0] == faces[:, 1])
        | (faces[:, 1] == faces[:, 2])
        | (faces[:, 2] == faces[:, 0])
    ):
        raise NonManifoldAfterMergeError(
            "merge tolerance collapsed a face; tol too large for this mesh"
        )

    mesh = PeriodicMesh(positions, faces)
    counts = mesh._connectivity()["edge_counts"]
    if np.any(counts > 2):
        raise NonManifoldAfterMergeError(
            f"{int(np.sum(counts > 2))} edges with >2 faces after merge"
        )
    if np.any(counts < 2):
        bad = mesh.boundary_vertices()
        pos = mesh.vertices[bad[0]]
        raise UnmatchedBoundaryVertexError(
            f"{len(bad)} boundary vertices without periodic partner within "
            f"tol={tol:g}; first at {pos}"
        )
    mesh.validate()
    mesh.merge_map = new_index
    return mesh


# ----------------------------------------------------------------------
# file I/O


def load_obj(path):
    """Read vertices/faces from an OBJ file (raw, not canonicalized)."""
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                if len(idx) != 3:
                    raise MeshError("only triangle faces are supported")
                faces.append(idx)
    return np.array(verts, dtype=float), np.array(faces, dtype=np.int64)


def load_off(path):
    """Read vertices/faces from an OFF file (raw, not canonicalized)."""
    with open(path) as fh:
        tokens = fh.read().split()
    if tokens[0] != "OFF":
        raise MeshError("not an OFF file")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4
    verts = np.array(tokens[pos : pos + 3 * nv], dtype=float).reshape(nv, 3)
    pos += 3 * nv
    faces = []
    for _ in range(nf):
        k = int(tokens[pos])
        if k != 3:
            raise MeshError("only triangle faces are supported")
        faces.append([int(t) for t in tokens[pos + 1 : pos + 4]])
        pos += 1 + k
    return verts, np.array(faces, dtype=np.int64)


def load_mesh(path, tol=1e-6):
    """Load an OBJ/OFF file and canonicalize it into a PeriodicMesh."""
    path = str(path)
    if path.endswith(".off"):
        v, f = load_off(path)
    else:
        v, f = load_obj(path)
    return canonicalize(v, f, tol=tol)


def save_obj(mesh, path, sidecar=True):
    """Write the canonical mesh as OBJ plus a JSON sidecar with cell info."""
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces + 1:
            fh.write(f"f {f[0]} {f[1]} {f[2]}\n")
    if sidecar:
        meta = {
            "cell_min": [-1.0, -1.0, -1.0],
            "cell_max": [1.0, 1.0, 1.0],
            "periodic": True,
            "vertices": int(mesh.num_vertices),
            "faces": int(mesh.num_faces),
            "euler_characteristic": int(mesh.euler_characteristic()),
        }
        mm = getattr(mesh, "merge_map", None)
        if mm is not None:
            meta["merge_map"] = np.asarray(mm).tolist()
        with open(str(path) + ".json", "w") as fh:
            json.dump(meta, fh)


def save_off(mesh, path):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.num_vertices} {mesh.num_faces} 0\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def save_exploded_obj(mesh, path):
    """Write a visualization OBJ with per-face unfolded (duplicated) vertices.

    Faces crossing the periodic boundary come out geometrically contiguous;
    connectivity is intentionally dropped.
    """
    corners = mesh.face_corners()
    with open(path, "w") as fh:
        for tri in corners:
            for v in tri:
                fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for i in range(len(corners)):
            fh.write(f"f {3 * i + 1} {3 * i + 2} {3 * i + 3}\n")
