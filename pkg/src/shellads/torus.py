"""Coordinate arithmetic on the flat 3-torus [-1, 1)^3 (period 2 per axis)."""

import numpy as np

PERIOD = 2.0
HALF = 1.0


def wrap(x):
    """Map torus coordinates into the canonical cell [-1, 1)^3."""
    return (np.asarray(x, dtype=float) + HALF) % PERIOD - HALF


def unfold(points, center):
    """Translate ``points`` by multiples of the period so every component of
    ``points - center`` lies in [-1, 1].

    Works on a single point or an (n, 3) array; nothing is written back to
    any mesh, callers use the result on the fly.
    """
    points = np.asarray(points, dtype=float)
    delta = points - np.asarray(center, dtype=float)
    return points - PERIOD * np.round(delta / PERIOD)


def minimal_delta(a, b):
    """Shortest representative of b - a on the torus (componentwise)."""
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return d - PERIOD * np.round(d / PERIOD)
