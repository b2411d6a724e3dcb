"""Incremental isotropic remeshing on the torus.

Local operations (edge split, edge collapse, valence flip, tangential
smoothing) act on unfolded coordinates around one vertex at a time and
wrap results back into the canonical cell.  Operations that would create
a non-manifold or inverted configuration are skipped, never fatal.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MeshError
from .mesh import PeriodicMesh

MAX_EDGE_LENGTH = 0.3  # periodic-unfolding safety bound on edge lengths


@dataclass
class RemeshConfig:
    split_factor: float = 4.0 / 3.0
    collapse_factor: float = 4.0 / 5.0
    iterations: int = 5
    smooth_per_iteration: int = 1
    smooth_strength: float = 1.0


def _wrap1(x):
    return (x + 1.0) % 2.0 - 1.0


def _unfold_near(p, anchor):
    return p - 2.0 * np.round((p - anchor) / 2.0)


class _EditMesh:
    """Mutable mesh with just enough adjacency for local operations."""

    def __init__(self, mesh):
        self.pos = [mesh.vertices[i].copy() for i in range(mesh.num_vertices)]
        self.faces = {}
        self.vf = [set() for _ in range(mesh.num_vertices)]
        self.next_fid = 0
        for tri in mesh.faces:
            self._add_face(tuple(int(v) for v in tri))
        self.skipped = 0

    # -- face bookkeeping ------------------------------------------------
    def _add_face(self, tri):
        fid = self.next_fid
        self.next_fid += 1
        self.faces[fid] = tri
        for v in tri:
            self.vf[v].add(fid)
        return fid

    def _remove_face(self, fid):
        for v in self.faces.pop(fid):
            self.vf[v].discard(fid)

    def _add_vertex(self, p):
        self.pos.append(np.asarray(p, dtype=float))
        self.vf.append(set())
        return len(self.pos) - 1

    def edge_faces(self, a, b):
        return [fid for fid in self.vf[a] & self.vf[b]]

    def neighbors(self, v):
        out = set()
        for fid in self.vf[v]:
            out.update(self.faces[fid])
        out.discard(v)
        return out

    def valence(self, v):
        return len(self.vf[v])

    def edge_length(self, a, b):
        d = _unfold_near(self.pos[b], self.pos[a]) - self.pos[a]
        return float(np.sqrt(d @ d))

    def all_edges(self):
        seen = set()
        for fid in sorted(self.faces):
            i, j, k = self.faces[fid]
            for a, b in ((i, j), (j, k), (k, i)):
                e = (a, b) if a < b else (b, a)
                if e not in seen:
                    seen.add(e)
        return sorted(seen)

    def _face_normal(self, tri, anchor=None):
        a, b, c = tri
        pa = self.pos[a]
        pb = _unfold_near(self.pos[b], pa)
        pc = _unfold_near(self.pos[c], pa)
        return np.cross(pb - pa, pc - pa)

    # -- local operations --------------------------------------------------
    def split_edge(self, a, b):
        fids = self.edge_faces(a, b)
        if len(fids) != 2:
            self.skipped += 1
            return None
        pa = self.pos[a]
        pb = _unfold_near(self.pos[b], pa)
        m = self._add_vertex(_wrap1(0.5 * (pa + pb)))
        for fid in fids:
            tri = self.faces[fid]
            idx = {v: i for i, v in enumerate(tri)}
            # cyclic order: the third vertex
            c = next(v for v in tri if v not in (a, b))
            self._remove_face(fid)
            if tri[(idx[a] + 1) % 3] == b:      # directed a -> b in this face
                self._add_face((a, m, c))
                self._add_face((m, b, c))
            else:                                # directed b -> a
                self._add_face((b, m, c))
                self._add_face((m, a, c))
        return m

    def collapse_edge(self, a, b, max_new_length):
        fids = self.edge_faces(a, b)
        if len(fids) != 2:
            self.skipped += 1
            return False
        opposite = set()
        for fid in fids:
            opposite.update(v for v in self.faces[fid] if v not in (a, b))
        na, nb = self.neighbors(a), self.neighbors(b)
        if na & nb != opposite:
            self.skipped += 1
            return False
        if self.valence(a) <= 3 or self.valence(b) <= 3:
            self.skipped += 1
            return False
        pa = self.pos[a]
        pb = _unfold_near(self.pos[b], pa)
        target = 0.5 * (pa + pb)
        # new edge lengths must stay below the split threshold
        for v in (na | nb) - {a, b}:
            pv = _unfold_near(self.pos[v], pa)
            if np.linalg.norm(pv - target) > max_new_length:
                self.skipped += 1
                return False
        # no normal flips among surviving faces
        survivors = (self.vf[a] | self.vf[b]) - set(fids)
        for fid in survivors:
            tri = self.faces[fid]
            old_n = self._face_normal(tri)
            anchor = self.pos[tri[0]] if tri[0] not in (a, b) else pa
            pts = []
            for v in tri:
                pv = target if v in (a, b) else self.pos[v]
                pts.append(_unfold_near(pv, anchor))
            new_n = np.cross(pts[1] - pts[0], pts[2] - pts[0])
            if old_n @ new_n <= 1e-16:
                self.skipped += 1
                return False
        # no duplicate faces after relabeling b -> a
        new_tris = set()
        for fid in survivors:
            tri = tuple(a if v == b else v for v in self.faces[fid])
            key = tuple(sorted(tri))
            if key in new_tris:
                self.skipped += 1
                return False
            new_tris.add(key)
        # commit
        for fid in fids:
            self._remove_face(fid)
        for fid in list(self.vf[b]):
            tri = tuple(a if v == b else v for v in self.faces[fid])
            self._remove_face(fid)
            self._add_face(tri)
        self.pos[a] = _wrap1(target)
        return True

    def flip_edge(self, a, b):
        fids = self.edge_faces(a, b)
        if len(fids) != 2:
            return False
        f1, f2 = fids
        t1, t2 = self.faces[f1], self.faces[f2]
        i1 = {v: i for i, v in enumerate(t1)}
        if t1[(i1[a] + 1) % 3] != b:
            f1, f2 = f2, f1
            t1, t2 = t2, t1
            i1 = {v: i for i, v in enumerate(t1)}
            if t1[(i1[a] + 1) % 3] != b:
                return False
        c = next(v for v in t1 if v not in (a, b))
        d = next(v for v in t2 if v not in (a, b))
        if c == d or d in self.neighbors(c):
            return False
        if self.valence(a) <= 3 or self.valence(b) <= 3:
            return False
        # valence improvement toward the regular valence 6
        def dev(*vals):
            return sum((v - 6) ** 2 for v in vals)

        va, vb = self.valence(a), self.valence(b)
        vc, vd = self.valence(c), self.valence(d)
        if dev(va - 1, vb - 1, vc + 1, vd + 1) >= dev(va, vb, vc, vd):
            return False
        # geometric guard: new faces keep the local orientation
        pa = self.pos[a]
        pb = _unfold_near(self.pos[b], pa)
        pc = _unfold_near(self.pos[c], pa)
        pd = _unfold_near(self.pos[d], pa)
        ref = np.cross(pb - pa, pc - pa) + np.cross(pa - pb, pd - pb)
        n1 = np.cross(pd - pa, pc - pa)
        n2 = np.cross(pb - pd, pc - pd)
        if n1 @ ref <= 1e-16 or n2 @ ref <= 1e-16:
            return False
        if np.linalg.norm(pd - pc) > MAX_EDGE_LENGTH:
            return False
        self._remove_face(f1)
        self._remove_face(f2)
        self._add_face((a, d, c))
        self._add_face((d, b, c))
        return True

    def smooth(self, strength):
        new_pos = list(self.pos)
        for v in range(len(self.pos)):
            if not self.vf[v]:
                continue
            pv = self.pos[v]
            acc = np.zeros(3)
            normal = np.zeros(3)
            neigh = self.neighbors(v)
            for u in sorted(neigh):
                acc += _unfold_near(self.pos[u], pv)
            for fid in self.vf[v]:
                normal += self._face_normal(self.faces[fid])
            nn = np.linalg.norm(normal)
            if nn < 1e-300 or not neigh:
                continue
            normal /= nn
            delta = acc / len(neigh) - pv
            delta -= (delta @ normal) * normal
            new_pos[v] = _wrap1(pv + strength * delta)
        self.pos = new_pos

    # -- passes -----------------------------------------------------------
    def split_pass(self, threshold):
        work = [e for e in self.all_edges()
                if self.edge_length(*e) > threshold]
        guard = 0
        limit = 60 * (len(self.faces) + len(work) + 1)
        while work:
            guard += 1
            if guard > limit:
                break
            a, b = work.pop()
            if not self.edge_faces(a, b):
                continue
            if self.edge_length(a, b) <= threshold:
                continue
            m = self.split_edge(a, b)
            if m is None:
                continue
            for u in self.neighbors(m):
                if self.edge_length(m, u) > threshold:
                    work.append((m, u))

    def collapse_pass(self, low, high):
        for a, b in self.all_edges():
            if not self.edge_faces(a, b):
                continue
            if self.edge_length(a, b) < low:
                self.collapse_edge(a, b, high)

    def flip_pass(self):
        for a, b in self.all_edges():
            if self.edge_faces(a, b):
                self.flip_edge(a, b)

    def to_mesh(self):
        used = sorted({v for tri in self.faces.values() for v in tri})
        remap = {v: i for i, v in enumerate(used)}
        verts = np.array([self.pos[v] for v in used])
        faces = np.array(
            [[remap[v] for v in self.faces[fid]] for fid in sorted(self.faces)],
            dtype=np.int64,
        )
        return PeriodicMesh(verts, faces)


def dynamic_remesh(mesh, target_edge_length, config=None):
    """Drive edge lengths toward the target and equalize valences.

    target_edge_length must stay below 0.3 so periodic unfolding remains
    unambiguous.  Returns a new mesh; the input is untouched.
    """
    if not 0.0 < target_edge_length < MAX_EDGE_LENGTH:
        raise ValueError(
            f"target edge length must lie in (0, {MAX_EDGE_LENGTH}); "
            f"got {target_edge_length}"
        )
    cfg = config or RemeshConfig()
    em = _EditMesh(mesh)
    high = cfg.split_factor * target_edge_length
    low = cfg.collapse_factor * target_edge_length
    for _ in range(cfg.iterations):
        em.split_pass(high)
        em.collapse_pass(low, high)
        em.flip_pass()
        for _ in range(cfg.smooth_per_iteration):
            em.smooth(cfg.smooth_strength)
    em.split_pass(high)  # smoothing may stretch edges past the bound
    out = em.to_mesh()
    if not out.is_closed_manifold():
        raise MeshError("remesh produced a non-manifold mesh")
    return out
