"""Primal-dual functional of the Dirichlet problem with source ``f``.

    J3(v0*, u^) = -gamma/2 int |grad u^|^2 - 1/2 int (2 v0* - eps) u^^2
                  - 1/(2 eps) int (gamma lap u^ + (-2 v0* + eps) u^ + f)^2
                  - 1/(2 alpha) int v0*^2 - beta int v0*

The certified point is ``(alpha (u0^2 - beta), u0)`` for a critical point
``u0``. The residual integral runs over interior nodes only: boundary values
of ``u^`` are fixed at zero, so the supremum that produces this term never
sees boundary nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryViolation, RegimeMismatch
from .grid import LinOp, ScalarField, diag_op, dirichlet_energy, integrate, laplacian
from .primal import PenalizedMinResult, grad_J, penalized_min_check
from .theorem1 import K_of, _rel_err, default_radius
from .verify import CheckRecord, FAIL, INFO, PASS, fd_gradient, fd_hessian, local_max_check


@dataclass(frozen=True, eq=False)
class DualPointT2:
    v0s: ScalarField
    uhat: ScalarField

    def pack(self):
        return np.concatenate([self.v0s.values, self.uhat.values])

    @classmethod
    def unpack(cls, grid, x):
        n = grid.size
        return cls(ScalarField(grid, x[:n]), ScalarField(grid, x[n:]))


def _require_dirichlet(p):
    if not p.grid.is_dirichlet:
        raise RegimeMismatch("the primal-dual functional J3 is defined for the Dirichlet problem")


def residual_field(p, d) -> ScalarField:
    """``gamma lap u^ + K u^ + f`` on interior nodes, zero on the boundary."""
    u = d.uhat.restrict()
    r = p.gamma * laplacian(p.grid)(u) + K_of(d.v0s, p.epsilon) * u + p.source
    return r.restrict()


def eval_J3(p, d) -> float:
    _require_dirichlet(p)
    u = d.uhat.restrict()
    r = residual_field(p, d)
    return (
        -0.5 * p.gamma * dirichlet_energy(u)
        - 0.5 * integrate((2.0 * d.v0s - p.epsilon) * u * u)
        - integrate(r * r) / (2 * p.epsilon)
        - integrate(d.v0s * d.v0s) / (2 * p.alpha)
        - p.beta * integrate(d.v0s)
    )


def _boundary_tol(u0):
    return 1e-12 * (1.0 + u0.max_abs())


def construct_dual_t2(p, u0) -> DualPointT2:
    """``(alpha (u0^2 - beta), u0)``; ``u0`` must vanish on the boundary (to 1e-12 relative)."""
    _require_dirichlet(p)
    bnd = np.abs(u0.values[p.grid.boundary_mask])
    if bnd.size and np.max(bnd) > _boundary_tol(u0):
        raise BoundaryViolation(f"u0 has boundary value {np.max(bnd):.3e}")
    u0 = u0.restrict()
    return DualPointT2(p.alpha * (u0 * u0 - p.beta), u0)


def u1_field(p, u0) -> ScalarField:
    _require_dirichlet(p)
    u0 = u0.restrict()
    v0 = p.alpha * (u0 * u0 - p.beta)
    return residual_field(p, DualPointT2(v0, u0)) / p.epsilon


def u1_identity_residual(p, u0) -> float:
    """``max |u0 - u1|`` over interior nodes; equals ``max |grad J(u0)| / eps``."""
    diff = (u0.restrict() - u1_field(p, u0)).values[p.grid.active]
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def u1_identity_defect(p, u0) -> float:
    """Gap between the two sides of the u1 identity, relative to the terms that cancel.

    Both sides are differences of O(1) quantities divided by ``eps``, so the
    gap is scaled by ``(1 + |gamma lap u0| + |K u0| + |f|) / eps`` (sup norms).
    Rounding alone keeps the result at a few ulps.
    """
    u0 = u0.restrict()
    lhs = u1_identity_residual(p, u0)
    rhs = grad_J(p, u0).max_abs(active_only=True) / p.epsilon
    v0 = p.alpha * (u0 * u0 - p.beta)
    terms = (
        1.0
        + (p.gamma * laplacian(p.grid)(u0)).max_abs()
        + (K_of(v0, p.epsilon) * u0).max_abs()
        + p.source.max_abs()
    )
    return abs(lhs - rhs) * p.epsilon / terms


@dataclass
class HypothesisReportT2:
    epsilon: float
    op_ok: bool
    op_margin: float
    op_gamma_margin: float
    sign_ok: bool
    sign_margin: float

    @property
    def all_ok(self):
        return self.op_ok and self.sign_ok

    def records(self):
        eps = self.epsilon
        return [
            CheckRecord("op", "(-lap + (2 v0* - eps) I)^2 > sqrt(eps) in Omega", self.op_margin, eps**0.5,
                        PASS if self.op_ok else FAIL),
            CheckRecord("op_gamma", "(-gamma lap + (2 v0* - eps) I)^2 > sqrt(eps) in Omega", self.op_gamma_margin,
                        eps**0.5, INFO),
            CheckRecord("sign", "f u0 >= 0 in Omega", self.sign_margin, 0.0, PASS if self.sign_ok else FAIL),
        ]


def hypothesis_operator(p, u0, gamma=1.0) -> LinOp:
    """``-gamma lap + (2 v0* - eps) I`` at ``v0* = alpha (u0^2 - beta)``."""
    v0 = p.alpha * (u0 * u0 - p.beta)
    return -gamma * laplacian(p.grid) + diag_op(2.0 * v0 - p.epsilon)


def _min_sq_eig(op):
    ev = np.linalg.eigvalsh(op.symmetrized())
    return float(np.min(ev**2)) if ev.size else float("nan")


def check_hypotheses_t2(p, u0) -> HypothesisReportT2:
    """Operator hypothesis as written (no ``gamma``), its ``gamma`` variant, and the sign condition.

    The operator is self-adjoint, so ``lambda_min(A^2)`` is the smallest
    squared eigenvalue of ``A``.
    """
    _require_dirichlet(p)
    u0 = u0.restrict()
    root = p.epsilon**0.5
    op = _min_sq_eig(hypothesis_operator(p, u0)) - root
    op_g = _min_sq_eig(hypothesis_operator(p, u0, p.gamma)) - root
    fu = (p.source * u0).values[p.grid.active]
    sign = float(np.min(fu)) if fu.size else 0.0
    return HypothesisReportT2(p.epsilon, op > 0, op, op_g, sign >= -1e-14, sign)


def free_mask(grid):
    """Probe mask over packed ``(v0*, u^)``: every ``v0*`` node, interior ``u^`` nodes."""
    return np.concatenate([np.ones(grid.size, dtype=bool), grid.active])


def _flat(p):
    return lambda x: eval_J3(p, DualPointT2.unpack(p.grid, x))


def dual_gradient_t2(p, d, rel_step=1e-6):
    return fd_gradient(_flat(p), d.pack(), rel_step=rel_step, free=free_mask(p.grid))


def verify_stationarity_t2(p, d, rel_step=1e-6) -> float:
    return dual_gradient_t2(p, d, rel_step).norm()


def verify_local_max_t2(p, d, r=None, samples=200, seed=0, hessian=None):
    x = d.pack()
    if hessian is None:
        hessian = p.grid.size <= 25
    r = default_radius(x) if r is None else r
    return local_max_check(_flat(p), x, r, samples=samples, seed=seed, free=free_mask(p.grid), hessian=hessian)


def verify_penalized_min_t2(p, u0, d, samples=500, seed=0) -> PenalizedMinResult:
    """Sampled penalized-minimum inequality; ``min_K`` in the result tells whether it is asserted."""
    K = K_of(d.v0s, p.epsilon)
    return penalized_min_check(p, u0.restrict(), K, samples=samples, seed=seed)


@dataclass
class T2Blocks:
    """Hessian of J3 in raw nodal coordinates over the free variables.

    Blocks are derived by differentiating the implemented functional.
    ``closed_form_*`` hold the commonly stated closed-form blocks in nodal
    form (multiplied by the quadrature weight) for comparison.
    """

    uu: np.ndarray
    vu: np.ndarray
    vv: np.ndarray
    closed_form_uu: np.ndarray
    closed_form_vu: np.ndarray
    closed_form_vv: np.ndarray
    lambda_max: float
    det: float
    det_scaled: float
    fd_errors: dict = None
    closed_form_errors: dict = None
    fd_lambda_max: float = None


def hessian_blocks_t2(p, d, fd=True) -> T2Blocks:
    _require_dirichlet(p)
    grid = p.grid
    act = grid.active
    eps = p.epsilon
    w = grid.weights
    wa = w * act
    u = d.uhat.restrict().values
    f = p.source.values
    n_op = (p.gamma * laplacian(grid) + diag_op(K_of(d.v0s, eps))).toarray()
    r = residual_field(p, d).values
    uu_full = w[:, None] * n_op - (n_op.T * wa) @ n_op / eps
    vu_full = np.diag(w * (-2 * u + 2 * r / eps) * act) + (2 / eps) * (wa * u)[:, None] * n_op
    vv_full = -np.diag(w / p.alpha + 4 * wa * u * u / eps)
    uu, vu, vv = uu_full[np.ix_(act, act)], vu_full[:, act], vv_full
    closed_form_uu = (-(w[:, None] * n_op) - w[:, None] * (n_op @ n_op) / eps)[np.ix_(act, act)]
    closed_form_vu = np.diag(w * (4 * u - 2 * f / eps))[:, act]
    closed_form_vv = -np.diag(w * (1 / p.alpha + 4 * u * u / eps))
    full = np.block([[vv, vu], [vu.T, uu]])
    lam = float(np.linalg.eigvalsh(full)[-1])
    wfree = np.concatenate([w, w[act]])
    sign, logdet = np.linalg.slogdet(full)
    det = float(sign * np.exp(logdet - np.sum(np.log(wfree)))) if sign != 0 else 0.0
    blocks = T2Blocks(uu, vu, vv, closed_form_uu, closed_form_vu, closed_form_vv, lam, det, det * eps**0.5)
    if fd:
        n = grid.size
        h = fd_hessian(_flat(p), d.pack(), free=free_mask(grid))
        hvv, hvu, huu = h[:n, :n], h[:n, n:][:, act], h[n:, n:][np.ix_(act, act)]
        blocks.fd_errors = {"uu": _rel_err(uu, huu), "vu": _rel_err(vu, hvu), "vv": _rel_err(vv, hvv)}
        blocks.closed_form_errors = {
            "uu": _rel_err(closed_form_uu, huu),
            "vu": _rel_err(closed_form_vu, hvu),
            "vv": _rel_err(closed_form_vv, hvv),
        }
        fm = free_mask(grid)
        blocks.fd_lambda_max = float(np.linalg.eigvalsh(h[np.ix_(fm, fm)])[-1])
    return blocks
