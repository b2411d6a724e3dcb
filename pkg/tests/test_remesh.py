import numpy as np
import pytest

from shellads.implicit import flat_plane, tpms_field, extract_mesh
from shellads.remesh import dynamic_remesh


def test_target_above_periodic_bound_rejected(plane16):
    with pytest.raises(ValueError):
        dynamic_remesh(plane16, 0.5)


def test_uniform_mesh_near_fixed_point(plane16):
    # plane16 edges: 0.125 axis-aligned plus 0.177 diagonals
    before = plane16.edge_lengths().mean()
    out = dynamic_remesh(plane16, 0.15)
    after = out.edge_lengths().mean()
    assert abs(after - before) / before < 0.2


def test_long_edges_eliminated():
    mesh = flat_plane(8)  # edges 0.25 and 0.35
    out = dynamic_remesh(mesh, 0.05)
    assert out.edge_lengths().max() <= 4.0 / 3.0 * 0.05 + 1e-12


def test_topology_preserved(schwarz_p):
    out = dynamic_remesh(schwarz_p, 0.12)
    assert out.euler_characteristic() == schwarz_p.euler_characteristic()
    assert out.is_closed_manifold()
    out2 = dynamic_remesh(out, 0.06)
    assert out2.euler_characteristic() == schwarz_p.euler_characteristic()


def test_mean_edge_tracks_target(schwarz_p):
    for target in (0.12, 0.08):
        out = dynamic_remesh(schwarz_p, target)
        mean = out.edge_lengths().mean()
        assert abs(mean - target) / target < 0.25


def test_deterministic(schwarz_p):
    a = dynamic_remesh(schwarz_p, 0.1)
    b = dynamic_remesh(schwarz_p, 0.1)
    assert np.array_equal(a.faces, b.faces)
    assert np.array_equal(a.vertices, b.vertices)
