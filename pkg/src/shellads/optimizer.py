"""Shape optimization loop: Laplacian-preconditioned normal-velocity flow
with backtracking line search, periodic remeshing and numerical surgery.

Internally the loop minimizes phi = -sense * f, so stiffness objectives
are maximized and the Poisson objective minimized with one code path.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import factorized

from . import stiffness
from .errors import MeshError, ShellAdsError
from .geometry import cotan_laplacian, mass_matrix
from .objectives import evaluate_objective, objective_weights
from .remesh import dynamic_remesh
from .sensitivity import ca_rate_coefficients, objective_gradient
from .surgery import numerical_surgery


@dataclass
class OptimizeConfig:
    target_edge: float = 0.08
    scheme: str = "corrected"
    precondition_c: float = 1.0
    armijo_alpha: float = 0.1
    armijo_tau: float = 0.7
    max_backtracks: int = 20
    dt0_default: float = 1e-2
    max_iter: int = 500
    surgery_every: int = 4          # 0 disables
    remesh_every: int = 1           # 0 disables
    curvature_threshold: float = 25.0
    fairing_ring: int = 4
    step_tol: float = 1e-4
    step_tol_consecutive: int = 5
    slope_tol: float = 1e-3
    slope_window: int = 50
    solver_tol: float = 1e-9
    solver_method: str = "auto"
    # 'continuum': closed-form coefficients of the smooth-surface rate
    # (cheap, few-percent accurate); 'exact': adjoint differentiation of
    # the discrete pipeline (machine precision, slower per remesh).
    gradient: str = "continuum"


@dataclass
class OptimizationState:
    mesh: object
    iteration: int = 0
    history: list = field(default_factory=list)
    last_steps: list = field(default_factory=list)   # last 5 accepted dt
    surgery_regions: int = 0
    converged: bool = False
    reason: str = ""

    def record(self, **row):
        self.history.append(row)

    def objective_trace(self):
        return np.array([r["objective"] for r in self.history])


@dataclass
class OptimizationResult:
    mesh: object                 # best-so-far
    final_mesh: object
    best_objective: float
    history: list
    converged: bool
    reason: str


def precondition(V, c, M, L):
    """Solve (M - c L) d = -(c + 1) V for the descent field.

    M is the lumped mass diagonal (vector), L the cotangent Laplacian
    (negative semidefinite), so the operator is positive definite for all
    c >= 0 and d is a descent direction whenever V != 0.
    """
    if c < 0:
        raise ValueError("preconditioning strength must be >= 0")
    A = diags(M) - c * L
    solve = factorized(A.tocsc())
    return solve(-(c + 1.0) * np.asarray(V, dtype=float))


def adaptive_initial_step(last_steps, default=1e-2):
    """Twice the mean of the last five accepted steps (cold start: default)."""
    if not last_steps:
        return default
    return 2.0 * float(np.mean(last_steps[-5:]))


def armijo_search(evaluate, phi0, d, g, dt0, alpha=0.1, tau=0.7,
                  max_backtracks=20):
    """Backtracking line search on a minimization objective.

    ``evaluate(dt)`` returns (phi, payload) for a trial step; failures may
    return (inf, None).  Returns (dt, phi, payload, status) where status is
    'ok', 'converged' (zero direction), or 'exhausted' (no sufficient
    decrease found; the last step is returned anyway).
    """
    slope = float(np.dot(d, g))
    if not np.any(d):
        return dt0, phi0, None, "converged"
    dt = dt0
    for _ in range(max_backtracks):
        phi, payload = evaluate(dt)
        if phi < phi0 + alpha * dt * slope:
            return dt, phi, payload, "ok"
        dt *= tau
    phi, payload = evaluate(dt)
    return dt, phi, payload, "exhausted"


def _linear_slope(y):
    x = np.arange(len(y), dtype=float)
    x -= x.mean()
    return float(np.dot(x, y - np.mean(y)) / np.dot(x, x))


class _Evaluator:
    """Caches the full analysis pipeline for one mesh / position set."""

    def __init__(self, lame, spec, config):
        self.lame = lame
        self.spec = spec
        self.config = config

    def analyze(self, mesh):
        ev = stiffness.evaluate(
            mesh, self.lame, scheme=self.config.scheme,
            tol_rel=self.config.solver_tol, method=self.config.solver_method,
        )
        f = evaluate_objective(self.spec, ev.CA)
        return ev, f

    def probe(self, mesh, positions):
        try:
            ev, f = self.analyze(mesh.with_positions(positions))
        except (MeshError, ShellAdsError, np.linalg.LinAlgError):
            return np.inf, None
        return -self.spec.sense * f, (ev, f)


def run(mesh, lame, spec, config=None):
    """Optimize the objective over surface shape; returns the best mesh.

    Follows the flow loop: surgery every ``surgery_every`` iterations,
    remesh every ``remesh_every``, then assemble/solve, gradient,
    preconditioning, Armijo step along the vertex normals.  Convergence:
    accepted steps below ``step_tol`` for ``step_tol_consecutive``
    iterations in a row, or the normalized regression slope of the last
    ``slope_window`` objective values below ``slope_tol``.
    """
    cfg = config or OptimizeConfig()
    state = OptimizationState(mesh=mesh)
    evaluator = _Evaluator(lame, spec, cfg)
    best_mesh = mesh
    best_f = -np.inf
    small_steps = 0

    while state.iteration < cfg.max_iter and not state.converged:
        i = state.iteration
        surgery_count = 0
        if cfg.surgery_every and i % cfg.surgery_every == 0:
            state.mesh, surgery_count = numerical_surgery(
                state.mesh, cfg.curvature_threshold, cfg.fairing_ring
            )
            state.surgery_regions += surgery_count
        if cfg.remesh_every and i % cfg.remesh_every == 0:
            state.mesh = dynamic_remesh(state.mesh, cfg.target_edge)

        ev, f = evaluator.analyze(state.mesh)
        if spec.sense * f > spec.sense * best_f or not np.isfinite(best_f):
            best_f, best_mesh = f, state.mesh

        W = objective_weights(spec, ev.CA)
        if cfg.gradient == "exact":
            from .exact_gradient import objective_shape_gradient

            V = objective_shape_gradient(state.mesh, ev.geo, lame, ev.cell,
                                         W, scheme=cfg.scheme)
        else:
            G = ca_rate_coefficients(ev.geo, lame, ev.cell, ev.CA,
                                     scheme=cfg.scheme)
            V = objective_gradient(W, G).values
        V_phi = -spec.sense * V
        M = mass_matrix(state.mesh, area=ev.geo.area)
        L = cotan_laplacian(state.mesh)
        d = precondition(V_phi, cfg.precondition_c, M, L)

        normals = ev.geo.vnormals
        x0 = state.mesh.vertices

        def probe(dt):
            return evaluator.probe(state.mesh, x0 + dt * d[:, None] * normals)

        dt0 = adaptive_initial_step(state.last_steps, cfg.dt0_default)
        dt, phi_new, payload, status = armijo_search(
            probe, -spec.sense * f, d, V_phi, dt0,
            alpha=cfg.armijo_alpha, tau=cfg.armijo_tau,
            max_backtracks=cfg.max_backtracks,
        )
        if status == "converged":
            state.converged = True
            state.reason = "zero descent direction"
            state.record(iteration=i, objective=f, dt=0.0,
                         vertices=state.mesh.num_vertices,
                         genus=state.mesh.genus(),
                         surgery_regions=surgery_count, status=status)
            break
        if status == "exhausted":
            warnings.warn(f"line search exhausted at iteration {i}")
        if payload is not None and np.isfinite(phi_new):
            state.mesh = state.mesh.with_positions(
                x0 + dt * d[:, None] * normals
            )
            ev_new, f_new = payload
            if spec.sense * f_new > spec.sense * best_f:
                best_f, best_mesh = f_new, state.mesh
        state.last_steps.append(dt)
        state.last_steps = state.last_steps[-5:]
        state.record(iteration=i, objective=f, dt=dt,
                     vertices=state.mesh.num_vertices,
                     genus=state.mesh.genus(),
                     surgery_regions=surgery_count, status=status)

        small_steps = small_steps + 1 if dt < cfg.step_tol else 0
        if small_steps >= cfg.step_tol_consecutive:
            state.converged = True
            state.reason = (
                f"step below {cfg.step_tol} for "
                f"{cfg.step_tol_consecutive} consecutive iterations"
            )
        trace = state.objective_trace()
        if len(trace) >= cfg.slope_window:
            window = trace[-cfg.slope_window:]
            scale = abs(window[-1]) + 1e-12
            if abs(_linear_slope(window / scale)) < cfg.slope_tol:
                state.converged = True
                state.reason = "objective slope below threshold"
        state.iteration += 1

    if not state.reason:
        state.reason = "iteration budget exhausted"
    return OptimizationResult(
        mesh=best_mesh,
        final_mesh=state.mesh,
        best_objective=best_f,
        history=state.history,
        converged=state.converged,
        reason=state.reason,
    )
