"""The single home of the Voigt / Mandel conventions used everywhere.

World-space symmetric second-order tensors use the index order
(11, 22, 33, 23, 13, 12).  Strain-like vectors carry engineering
(factor-2) shears, stress-like vectors do not.  A 6x6 stiffness matrix C
stores the raw tensor components C^{ijkl} (no factors), so the quadratic
form eps:C:eps equals strain_vector(eps)^T C strain_vector(eps).

The Mandel transform D C D with D = diag(1,1,1,sqrt2,sqrt2,sqrt2) turns
tensor inversion and tensor Frobenius norms into their matrix versions;
use it for eigenvalues, inverses, and tensor inner products.

Face-local 2x2 strains use (11, 22, 2*12).
"""

import numpy as np

# Voigt slot -> tensor index pair
PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
MANDEL = np.array([1.0, 1.0, 1.0, np.sqrt(2.0), np.sqrt(2.0), np.sqrt(2.0)])


def strain_vector(eps):
    """Symmetric 3x3 strain -> length-6 engineering-strain vector."""
    eps = np.asarray(eps, dtype=float)
    return np.array([
        eps[0, 0], eps[1, 1], eps[2, 2],
        eps[1, 2] + eps[2, 1], eps[0, 2] + eps[2, 0], eps[0, 1] + eps[1, 0],
    ])


def strain_matrix(vec):
    """Inverse of :func:`strain_vector`."""
    v = np.asarray(vec, dtype=float)
    return np.array([
        [v[0], v[5] / 2, v[4] / 2],
        [v[5] / 2, v[1], v[3] / 2],
        [v[4] / 2, v[3] / 2, v[2]],
    ])


def tensor_to_matrix(t4):
    """3x3x3x3 minor-symmetric tensor -> 6x6 Voigt component matrix."""
    out = np.empty((6, 6))
    for a, (i, j) in enumerate(PAIRS):
        for b, (k, l) in enumerate(PAIRS):
            out[a, b] = t4[i, j, k, l]
    return out


def matrix_to_tensor(c):
    """6x6 Voigt component matrix -> full 3x3x3x3 tensor."""
    t = np.empty((3, 3, 3, 3))
    lut = np.array([[0, 5, 4], [5, 1, 3], [4, 3, 2]])
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    t[i, j, k, l] = c[lut[i, j], lut[k, l]]
    return t


def unit_strains():
    """The six symmetric unit macro-strains in Voigt slot order.

    Off-diagonal slots hold Sym(e_i x e_j), i.e. entries 1/2, whose
    engineering strain vector is the corresponding unit basis vector.
    """
    out = []
    for i, j in PAIRS:
        e = np.zeros((3, 3))
        e[i, j] += 0.5
        e[j, i] += 0.5
        out.append(e)
    return out


def quadratic_form(c, eps):
    """eps : C : eps for a 6x6 component matrix and symmetric 3x3 eps."""
    v = strain_vector(eps)
    return float(v @ c @ v)


def to_mandel(c):
    return c * np.outer(MANDEL, MANDEL)


def from_mandel(m):
    return m / np.outer(MANDEL, MANDEL)


def operator_eigenvalues(c):
    """Eigenvalues of C acting on symmetric matrices (Mandel spectrum)."""
    m = to_mandel(c)
    return np.linalg.eigvalsh(0.5 * (m + m.T))


def tensor_inverse(c):
    """Inverse in the fourth-order-tensor sense, given/returned in Voigt."""
    return from_mandel(np.linalg.inv(to_mandel(c)))


def tensor_frobenius(c):
    """Frobenius norm of the underlying fourth-order tensor."""
    return float(np.linalg.norm(to_mandel(c)))


def tensor_inner(a, b):
    """Full double contraction A :: B of two minor-symmetric tensors."""
    return float(np.sum(to_mandel(a) * to_mandel(b)))
