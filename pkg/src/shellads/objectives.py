"""Optimization objectives defined on the 6x6 stiffness tensor.

Every objective provides a value and the 6x6 matrix of partial derivatives
with respect to the Voigt tensor entries, so the shape gradient is a plain
chain rule against the per-vertex tensor rate coefficients.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import voigt
from .errors import ConfigError, SingularTensorError

KINDS = (
    "bulk",
    "component",
    "directional_young",
    "strain_energy",
    "deviatoric_average",
    "custom_linear",
    "npr",
)

_DEV_DEFAULT = np.diag([1.0, -2.0, 1.0])


@dataclass
class ObjectiveSpec:
    """One objective kind plus an optional isotropy penalty.

    Stiffness objectives are maximized; the negative-Poisson objective
    ('npr') is minimized and is of documented lower quality (wrinkling
    breaks the smooth-surface assumptions), so it warns on construction.
    """

    kind: str = "bulk"
    direction: np.ndarray | None = None          # directional_young
    component: tuple | None = None               # component (i,j,k,l), 1-based
    strain: np.ndarray | None = None             # strain_energy
    deviatoric: np.ndarray = field(default_factory=lambda: _DEV_DEFAULT.copy())
    weights: np.ndarray | None = None            # custom_linear
    c_iso: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown objective kind {self.kind!r}")
        if self.c_iso < 0 or not np.isfinite(self.c_iso):
            raise ConfigError("isotropy penalty coefficient must be finite, >= 0")
        if self.kind == "directional_young":
            if self.direction is None:
                raise ConfigError("directional_young needs a direction")
            d = np.asarray(self.direction, dtype=float)
            n = np.linalg.norm(d)
            if n == 0:
                raise ConfigError("zero direction")
            self.direction = d / n
        if self.kind == "component":
            if self.component is None or len(self.component) != 4:
                raise ConfigError("component objective needs (i,j,k,l)")
            if not all(1 <= i <= 3 for i in self.component):
                raise ConfigError("component indices are 1-based in 1..3")
        if self.kind == "strain_energy":
            if self.strain is None:
                raise ConfigError("strain_energy needs a strain matrix")
            e = np.asarray(self.strain, dtype=float)
            if e.shape != (3, 3) or not np.allclose(e, e.T):
                raise ConfigError("strain must be symmetric 3x3")
            self.strain = 0.5 * (e + e.T)
        if self.kind == "deviatoric_average":
            s = np.asarray(self.deviatoric, dtype=float)
            if not np.allclose(s, _DEV_DEFAULT):
                raise ConfigError(
                    "the rotational-average closed form is implemented for "
                    "the deviatoric family diag(1, -2, 1) only"
                )
        if self.kind == "custom_linear":
            if self.weights is None:
                raise ConfigError("custom_linear needs a 6x6 weight matrix")
            self.weights = np.asarray(self.weights, dtype=float).reshape(6, 6)
        if self.kind == "npr":
            warnings.warn(
                "negative-Poisson-ratio objective is of documented "
                "lower quality (wrinkling invalidates the smooth-surface "
                "assumptions)"
            )

    @property
    def sense(self):
        """+1 when the loop maximizes the objective, -1 when it minimizes."""
        return -1.0 if self.kind == "npr" else 1.0


# ----------------------------------------------------------------------
# isotropy penalty (closed-form 2-variable least squares)

C_LAMBDA = np.zeros((6, 6))
C_LAMBDA[:3, :3] = 1.0
C_MU = np.diag([2.0, 2.0, 2.0, 1.0, 1.0, 1.0])

_GRAM = np.array([
    [voigt.tensor_inner(C_LAMBDA, C_LAMBDA), voigt.tensor_inner(C_LAMBDA, C_MU)],
    [voigt.tensor_inner(C_MU, C_LAMBDA), voigt.tensor_inner(C_MU, C_MU)],
])


def isotropic_fit(C):
    """Closest isotropic tensor: returns (lam, mu, fit)."""
    rhs = np.array([voigt.tensor_inner(C_LAMBDA, C), voigt.tensor_inner(C_MU, C)])
    lam, mu = np.linalg.solve(_GRAM, rhs)
    return lam, mu, lam * C_LAMBDA + mu * C_MU


def isotropy_penalty(C):
    """0.5 * tensor Frobenius distance^2 to the isotropic subspace."""
    _, _, fit = isotropic_fit(C)
    return 0.5 * voigt.tensor_frobenius(np.asarray(C) - fit) ** 2


def isotropy_penalty_weights(C):
    """d(penalty)/dC as Voigt-entry weights; the fit term drops out by
    least-squares orthogonality."""
    _, _, fit = isotropic_fit(C)
    residual = np.asarray(C) - fit
    scale = np.outer(voigt.MANDEL**2, voigt.MANDEL**2)
    return residual * scale


# ----------------------------------------------------------------------
# poisson contraction objective (Appendix-style potential minimization)


def poisson_contractions(C):
    """Lateral contraction ratios (eps1, eps2) under unit z-stretch."""
    A = np.array([[C[0, 0], C[0, 1]], [C[0, 1], C[1, 1]]])
    b = np.array([C[0, 2], C[1, 2]])
    try:
        eps = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularTensorError("contraction system singular") from exc
    return eps, A, b


def _npr_weights(C):
    eps, A, _ = poisson_contractions(C)
    try:
        y = np.linalg.solve(A.T, np.ones(2))
    except np.linalg.LinAlgError as exc:
        raise SingularTensorError("contraction system singular") from exc
    W = np.zeros((6, 6))
    # df/db contributions (b = (C13, C23))
    W[0, 2] = W[2, 0] = y[0] / 2.0
    W[1, 2] = W[2, 1] = y[1] / 2.0
    # df/dA contributions, dA_kl = -y_k eps_l symmetrized over C entries
    W[0, 0] += -y[0] * eps[0]
    W[1, 1] += -y[1] * eps[1]
    c12 = -(y[0] * eps[1] + y[1] * eps[0])
    W[0, 1] += c12 / 2.0
    W[1, 0] += c12 / 2.0
    return W


# ----------------------------------------------------------------------
# kind values and weight matrices


def _bulk_weights():
    W = np.zeros((6, 6))
    W[:3, :3] = 1.0 / 9.0
    return W


def _component_voigt(component):
    lut = np.array([[0, 5, 4], [5, 1, 3], [4, 3, 2]])
    i, j, k, l = component
    return lut[i - 1, j - 1], lut[k - 1, l - 1]


_DEV_W = np.zeros((6, 6))
_DEV_W[0, 0] = _DEV_W[1, 1] = _DEV_W[2, 2] = 1.0
_DEV_W[3, 3] = _DEV_W[4, 4] = _DEV_W[5, 5] = 6.0
for _i in range(3):
    for _j in range(3):
        if _i != _j:
            _DEV_W[_i, _j] = -1.0


def _young_weights(C, z):
    sig = np.outer(z, z)
    sv = voigt.strain_vector(sig)             # (s11, s22, s33, 2s23, ...)
    # Mandel vector of the stress has sqrt(2) shears
    shat = sv * np.array([1, 1, 1, 0.5, 0.5, 0.5]) * voigt.MANDEL
    Chat = voigt.to_mandel(np.asarray(C, dtype=float))
    try:
        what = np.linalg.solve(Chat, shat)
    except np.linalg.LinAlgError as exc:
        raise SingularTensorError("stiffness tensor not invertible") from exc
    compliance = float(shat @ what)
    if compliance <= 0:
        raise SingularTensorError("nonpositive directional compliance")
    Y = 1.0 / compliance
    W = Y**2 * np.outer(what * voigt.MANDEL, what * voigt.MANDEL)
    return Y, W


def evaluate_objective(spec, C):
    """Objective value at a stiffness tensor, penalty included."""
    C = np.asarray(C, dtype=float)
    if spec.kind == "bulk":
        val = float(np.sum(C[:3, :3])) / 9.0
    elif spec.kind == "component":
        a, b = _component_voigt(spec.component)
        val = float(0.5 * (C[a, b] + C[b, a]))
    elif spec.kind == "directional_young":
        val, _ = _young_weights(C, spec.direction)
    elif spec.kind == "strain_energy":
        val = voigt.quadratic_form(C, spec.strain)
    elif spec.kind == "deviatoric_average":
        val = float(np.sum(_DEV_W * C))
    elif spec.kind == "custom_linear":
        val = float(np.sum(spec.weights * C))
    elif spec.kind == "npr":
        eps, _, _ = poisson_contractions(C)
        val = float(eps.sum())
    else:  # pragma: no cover
        raise ConfigError(spec.kind)
    if spec.c_iso:
        val -= spec.c_iso * isotropy_penalty(C)
    return val


def objective_weights(spec, C):
    """6x6 matrix of df/dC at C (penalty included)."""
    C = np.asarray(C, dtype=float)
    if spec.kind == "bulk":
        W = _bulk_weights()
    elif spec.kind == "component":
        a, b = _component_voigt(spec.component)
        W = np.zeros((6, 6))
        if a == b:
            W[a, a] = 1.0
        else:
            W[a, b] = W[b, a] = 0.5
    elif spec.kind == "directional_young":
        _, W = _young_weights(C, spec.direction)
    elif spec.kind == "strain_energy":
        v = voigt.strain_vector(spec.strain)
        W = np.outer(v, v)
    elif spec.kind == "deviatoric_average":
        W = _DEV_W.copy()
    elif spec.kind == "custom_linear":
        W = spec.weights.copy()
    elif spec.kind == "npr":
        W = _npr_weights(C)
    else:  # pragma: no cover
        raise ConfigError(spec.kind)
    if spec.c_iso:
        W = W - spec.c_iso * isotropy_penalty_weights(C)
    return W
