"""Topological surgery: remove high-curvature regions (necks, tips,
creases), fill the holes, and fair the result.

Faces whose three vertices all exceed the curvature threshold are grouped
into edge-connected components; each component is deleted, its boundary
loops filled by minimal-area disk triangulation, and the filled patch
plus a k-ring faired by solving the discrete bi-Laplacian with the outer
vertices fixed.  Components whose holes cannot be filled as disks are
left untouched and reported.
"""

import warnings
from collections import defaultdict

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import spsolve

from . import torus
from .errors import FillFailedError, MeshError
from .geometry import SurfaceGeometry, cotan_laplacian, mass_matrix, vertex_max_curvature
from .mesh import PeriodicMesh

MAX_LOOP = 200


def _face_components(face_ids, faces):
    """Edge-connected components among the selected faces."""
    edge_owner = defaultdict(list)
    for fid in face_ids:
        i, j, k = faces[fid]
        for a, b in ((i, j), (j, k), (k, i)):
            edge_owner[(min(a, b), max(a, b))].append(fid)
    parent = {fid: fid for fid in face_ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for owners in edge_owner.values():
        for other in owners[1:]:
            ra, rb = find(owners[0]), find(other)
            if ra != rb:
                parent[rb] = ra
    groups = defaultdict(list)
    for fid in face_ids:
        groups[find(fid)].append(fid)
    return [sorted(g) for g in sorted(groups.values(), key=min)]


def _boundary_loops(removed, faces, live):
    """Directed boundary loops left by removing ``removed`` faces.

    Loops follow the orientation of the surviving faces; returns None if
    a loop is non-simple or oversized.
    """
    # count surviving faces per edge touching the removed set
    edge_count = defaultdict(int)
    for fid in removed:
        i, j, k = faces[fid]
        for a, b in ((i, j), (j, k), (k, i)):
            edge_count[(min(a, b), max(a, b))] += 1
    succ = {}
    for fid in live:
        i, j, k = faces[fid]
        for a, b in ((i, j), (j, k), (k, i)):
            key = (min(a, b), max(a, b))
            if key in edge_count and edge_count[key] == 1:
                # surviving directed edge on the hole rim
                if a in succ:
                    return None  # non-manifold rim
                succ[a] = b
    loops = []
    visited = set()
    for start in sorted(succ):
        if start in visited:
            continue
        loop = [start]
        visited.add(start)
        cur = succ[start]
        while cur != start:
            if cur in visited or len(loop) > MAX_LOOP:
                return None
            loop.append(cur)
            visited.add(cur)
            cur = succ.get(cur)
            if cur is None:
                return None
        loops.append(loop)
    return loops


def _unfold_loop(vertices, loop):
    """Unfold loop positions into one periodic copy, anchored at the first."""
    pts = [vertices[loop[0]]]
    for v in loop[1:]:
        pts.append(torus.unfold(vertices[v], pts[-1]))
    pts = np.array(pts)
    if np.any(np.abs(pts - pts[0]) > 1.0):
        warnings.warn("surgery region spans more than half a period")
    return pts


def _min_area_triangulation(pts):
    """Minimal-area triangulation of a closed polygon (dynamic program).

    Returns triangles as index triples (i, k, j) with i < k < j, wound in
    polygon order.
    """
    n = len(pts)
    if n < 3:
        raise FillFailedError("degenerate hole")

    def tri_area(i, k, j):
        return 0.5 * np.linalg.norm(
            np.cross(pts[k] - pts[i], pts[j] - pts[i])
        )

    cost = np.zeros((n, n))
    choice = np.full((n, n), -1, dtype=int)
    for span in range(2, n):
        for i in range(n - span):
            j = i + span
            best, arg = np.inf, -1
            for k in range(i + 1, j):
                c = cost[i, k] + cost[k, j] + tri_area(i, k, j)
                if c < best:
                    best, arg = c, k
            cost[i, j] = best
            choice[i, j] = arg
    tris = []

    def emit(i, j):
        k = choice[i, j]
        if k < 0:
            return
        tris.append((i, k, j))
        emit(i, k)
        emit(k, j)

    emit(0, n - 1)
    return tris


def _fill_component(mesh, comp, live, faces):
    """Delete one component and triangulate its boundary loops.

    Returns the fill triangles (global indices) or raises FillFailedError.
    """
    loops = _boundary_loops(comp, faces, live)
    if loops is None:
        raise FillFailedError("hole rim is not a collection of simple loops")
    new_faces = []
    for loop in loops:
        # fill must be wound opposite to the surviving rim direction
        poly = loop[::-1]
        pts = _unfold_loop(mesh.vertices, poly)
        for (i, k, j) in _min_area_triangulation(pts):
            new_faces.append((poly[i], poly[k], poly[j]))
    return new_faces


def _fair_region(mesh, seed_vertices, ring):
    """Bi-Laplacian fairing of ``seed_vertices`` plus their ring-neighborhood."""
    neigh = mesh.vertex_neighbors()
    free = set(int(v) for v in seed_vertices)
    frontier = set(free)
    for _ in range(ring):
        nxt = set()
        for v in frontier:
            nxt.update(int(u) for u in neigh[v])
        nxt -= free
        free |= nxt
        frontier = nxt
    if not free:
        return mesh
    # halo: everything the squared-Laplacian stencil of the free set touches
    halo = set(free)
    for _ in range(2):
        add = set()
        for v in halo:
            add.update(int(u) for u in neigh[v])
        halo |= add
    halo = sorted(halo)
    free = sorted(free)
    if len(free) >= mesh.num_vertices:
        warnings.warn("fairing region covers the whole mesh; skipped")
        return mesh

    # unfold the halo region via BFS so the solve sees contiguous coords
    pos = {}
    seed = free[0]
    pos[seed] = mesh.vertices[seed].copy()
    order = [seed]
    head = 0
    halo_set = set(halo)
    while head < len(order):
        v = order[head]
        head += 1
        for u in sorted(int(x) for x in neigh[v]):
            if u in halo_set and u not in pos:
                pos[u] = torus.unfold(mesh.vertices[u], pos[v])
                order.append(u)
    if len(pos) < len(halo):  # disconnected halo: unfold each piece
        for v in halo:
            if v not in pos:
                pos[v] = mesh.vertices[v].copy()
                order.append(v)
                head = len(order) - 1
                while head < len(order):
                    w = order[head]
                    head += 1
                    for u in sorted(int(x) for x in neigh[w]):
                        if u in halo_set and u not in pos:
                            pos[u] = torus.unfold(mesh.vertices[u], pos[w])
                            order.append(u)

    L = cotan_laplacian(mesh)
    M = mass_matrix(mesh)
    Q = (L @ diags(1.0 / np.maximum(M, 1e-300)) @ L).tocsr()
    fixed = [v for v in halo if v not in set(free)]
    X = np.array([pos[v] for v in halo])
    local = {v: i for i, v in enumerate(halo)}
    Qh = Q[halo][:, halo]
    fi = [local[v] for v in free]
    bi = [local[v] for v in fixed]
    Qff = Qh[fi][:, fi]
    Qfb = Qh[fi][:, bi]
    rhs = -Qfb @ X[bi]
    sol = spsolve(Qff.tocsc(), rhs)
    new = mesh.vertices.copy()
    for v, row in zip(free, np.atleast_2d(sol)):
        new[v] = row
    return PeriodicMesh(new, mesh.faces)


def numerical_surgery(mesh, curvature_threshold=25.0, fairing_ring=4):
    """Remove high-curvature regions; returns (mesh, regions_removed).

    Unfillable regions are left in place and reported with a warning.
    """
    geo = SurfaceGeometry.from_mesh(mesh)
    kappa = vertex_max_curvature(geo)
    over = kappa > curvature_threshold
    marked = np.flatnonzero(np.all(over[mesh.faces], axis=1))
    if len(marked) == 0:
        return mesh, 0

    faces = mesh.faces
    live = set(range(len(faces)))
    components = _face_components(list(marked), faces)
    removed_regions = 0
    fill_faces = []
    fill_vertices = set()
    for comp in components:
        trial_live = live - set(comp)
        try:
            new_faces = _fill_component(mesh, comp, trial_live, faces)
        except FillFailedError as exc:
            warnings.warn(f"surgery skipped one region: {exc}")
            continue
        live = trial_live
        fill_faces.extend(new_faces)
        for tri in new_faces:
            fill_vertices.update(tri)
        removed_regions += 1

    if removed_regions == 0:
        return mesh, 0

    all_faces = [tuple(faces[f]) for f in sorted(live)] + fill_faces
    used = sorted({v for tri in all_faces for v in tri})
    remap = {v: i for i, v in enumerate(used)}
    verts = mesh.vertices[used]
    tris = np.array([[remap[v] for v in tri] for tri in all_faces],
                    dtype=np.int64)
    out = PeriodicMesh(verts, tris)
    try:
        out.validate()
    except MeshError as exc:
        raise MeshError(f"surgery produced an invalid mesh: {exc}") from exc

    seeds = [remap[v] for v in sorted(fill_vertices) if v in remap]
    out = _fair_region(out, seeds, fairing_ring)
    return out, removed_regions
