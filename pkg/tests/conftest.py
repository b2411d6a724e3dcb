import numpy as np
import pytest

from shellads.materials import lame_from_engineering
from shellads.mesh import PeriodicMesh
from shellads.implicit import flat_plane, tpms_field, extract_mesh, project_to_levelset


def icosphere(subdiv=3, radius=0.8, scale=None):
    """Subdivided icosahedron (closed mesh inside the cell)."""
    t = (1 + 5**0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.array(v, dtype=float) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdiv):
        new_faces = []
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                verts.append(0.5 * (verts[a] + verts[b]))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = new_faces
    V = np.array([v / np.linalg.norm(v) * radius for v in verts])
    if scale is not None:
        V = V * np.asarray(scale)
    return PeriodicMesh(V, np.array(faces, dtype=np.int64))


@pytest.fixture(scope="session")
def lame():
    return lame_from_engineering(1.0, 0.3)


@pytest.fixture(scope="session")
def plane16():
    return flat_plane(16)


@pytest.fixture(scope="session")
def sphere3():
    return icosphere(3)


@pytest.fixture(scope="session")
def schwarz_p():
    """Schwarz-P mesh at moderate resolution, projected to the level set."""
    field = tpms_field("P")
    mesh = extract_mesh(field, 48, target_edge=0.09)
    return project_to_levelset(mesh, field)


@pytest.fixture(scope="session")
def schwarz_p_field():
    return tpms_field("P")
