"""The Ginzburg-Landau type primal functional and a Newton solver for its critical points.

    J(u) = gamma/2 int |grad u|^2 + alpha/2 int (u^2 - beta)^2 - <u, f>

The source term is only present in the Dirichlet regime.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridMismatch, NoConvergence
from .grid import (
    LinOp,
    ScalarField,
    diag_op,
    dirichlet_energy,
    integrate,
    inner,
    laplacian,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GLParams:
    grid: object
    gamma: float
    alpha: float
    beta: float
    epsilon: float
    source: ScalarField = None

    def __post_init__(self):
        for name in ("gamma", "alpha", "beta"):
            v = float(getattr(self, name))
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
            object.__setattr__(self, name, v)
        eps = float(self.epsilon)
        if not 0 < eps < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
        object.__setattr__(self, "epsilon", eps)
        if self.grid.is_dirichlet != (self.source is not None):
            raise ValueError("a source f is required in the Dirichlet regime and forbidden in the Neumann one")
        if self.source is not None and self.source.grid != self.grid:
            raise GridMismatch("source lives on a different grid")

    @property
    def regime(self):
        return self.grid.boundary

    def with_epsilon(self, eps):
        return replace(self, epsilon=eps)

    def describe(self):
        return {
            "gamma": self.gamma,
            "alpha": self.alpha,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "regime": self.regime,
        }


@dataclass
class CriticalPoint:
    u0: ScalarField
    residual_norm: float
    newton_iters: int
    converged: bool = True
    history: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def _check(p, u):
    if u.grid != p.grid:
        raise GridMismatch("field is not on the parameter grid")
    return u.restrict()


def eval_J(p, u) -> float:
    u = _check(p, u)
    val = 0.5 * p.gamma * dirichlet_energy(u) + 0.5 * p.alpha * integrate((u * u - p.beta) ** 2)
    if p.source is not None:
        val -= inner(u, p.source)
    return val


def grad_J(p, u) -> ScalarField:
    """L2 gradient ``-gamma lap u + 2 alpha (u^2 - beta) u - f`` (zero on Dirichlet boundary)."""
    u = _check(p, u)
    g = -p.gamma * laplacian(p.grid).apply(u.values) + 2 * p.alpha * (u.values**2 - p.beta) * u.values
    if p.source is not None:
        g = g - p.source.values
    return ScalarField(p.grid, g * p.grid.active)


def hessian_J(p, u) -> LinOp:
    u = _check(p, u)
    lap = laplacian(p.grid)
    return -p.gamma * lap + diag_op(6 * p.alpha * u * u - 2 * p.alpha * p.beta)


def residual_norm(p, u) -> float:
    return grad_J(p, u).max_abs(active_only=True)


def solve_critical(p, u_init, tol=1e-10, max_iter=100) -> CriticalPoint:
    """Damped Newton iteration on ``grad_J``.

    Each step is halved (at most 30 times) until the sup-norm of the residual
    decreases. A singular Jacobian is shifted by ``1e-10 I`` and the event is
    recorded in ``notes``. Raises :class:`NoConvergence` carrying the best
    iterate when ``max_iter`` is exhausted.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    act = p.grid.active
    u = _check(p, u_init)
    res = residual_norm(p, u)
    best = (res, u, 0)
    history = [{"iter": 0, "residual": res, "energy": eval_J(p, u), "step": 0.0}]
    notes = []
    for it in range(1, max_iter + 1):
        if res <= tol:
            return CriticalPoint(u, res, it - 1, True, history, notes)
        g = grad_J(p, u).values[act]
        h = sp.csc_matrix(hessian_J(p, u).matrix[act][:, act])
        try:
            du_act = spla.splu(h).solve(-g)
        except RuntimeError:
            notes.append(f"iter {it}: singular Jacobian, shifted by 1e-10 I")
            du_act = spla.splu(sp.csc_matrix(h + 1e-10 * sp.identity(h.shape[0]))).solve(-g)
        du = np.zeros(p.grid.size)
        du[act] = du_act
        t = 1.0
        for _ in range(31):
            trial = u + t * du
            trial_res = residual_norm(p, trial)
            if trial_res < res:
                break
            t *= 0.5
        else:
            notes.append(f"iter {it}: no residual decrease after 30 halvings")
        u, res = trial, trial_res
        history.append({"iter": it, "residual": res, "energy": eval_J(p, u), "step": t})
        if res < best[0]:
            best = (res, u, it)
    if res <= tol:
        return CriticalPoint(u, res, max_iter, True, history, notes)
    result = CriticalPoint(best[1], best[0], best[2], False, history, notes)
    raise NoConvergence(f"Newton did not reach {tol:g} in {max_iter} iterations (best {best[0]:.3e})", result)


def manufactured_source(grid, gamma, alpha, beta, u_star) -> ScalarField:
    """Source ``f`` that makes ``u_star`` an exact discrete critical point."""
    u = u_star.restrict()
    f = -gamma * laplacian(grid).apply(u.values) + 2 * alpha * (u.values**2 - beta) * u.values
    return ScalarField(grid, f * grid.active)


@dataclass
class PenalizedMinResult:
    ok: bool
    worst_slack: float
    min_K: float
    samples: int
    violations: int


def penalized_min_check(p, u0, K, samples=500, seed=0, scales=(0.1, 1.0, 10.0), slack=1e-9):
    """Sample ``J(u) + 1/2 int K (u - u0)^2 >= J(u0)`` over random fields.

    ``worst_slack`` is the smallest observed ``lhs - J(u0)``; the point
    ``u = u0`` is always included, so it is never positive.
    """
    rng = np.random.default_rng(seed)
    j0 = eval_J(p, u0)
    amp = u0.max_abs() + 1.0
    worst = 0.0
    bad = 0
    for i in range(samples):
        scale = scales[i % len(scales)] * amp
        u = ScalarField(p.grid, scale * rng.uniform(-1.0, 1.0, p.grid.size)).restrict()
        gap = eval_J(p, u) + 0.5 * integrate(K * (u - u0) ** 2) - j0
        worst = min(worst, gap)
        if gap < -slack * (1 + abs(j0)):
            bad += 1
    return PenalizedMinResult(bad == 0, worst, float(np.min(K.values)), samples, bad)
