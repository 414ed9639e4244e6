"""Dual functional of the Neumann problem and the checks built on it.

Given a critical point ``u0`` of the primal functional, the dual point is

    v0* = alpha (u0^2 - beta),    z* = K u0,    K = -2 v0* + eps,

and the dual functional is

    J~(v0*, z*) = 1/2 int z*^2 / K - gamma/2 int |grad(z*/K)|^2
                  - 1/(2 eps) int (L(v0*) z* + z*)^2
                  - 1/(2 alpha) int v0*^2 - beta int v0*

with ``L(v0*) z* = gamma lap(z*/K)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DenominatorNonPositive, RegimeMismatch
from .grid import LinOp, ScalarField, diag_op, dirichlet_energy, identity, inner, integrate, laplacian
from .primal import PenalizedMinResult, penalized_min_check
from .verify import (
    CheckRecord,
    FAIL,
    PASS,
    fd_gradient,
    fd_hessian,
    local_max_check,
    min_sq_singular,
)


@dataclass(frozen=True, eq=False)
class DualPointT1:
    v0s: ScalarField
    zs: ScalarField

    def pack(self):
        return np.concatenate([self.v0s.values, self.zs.values])

    @classmethod
    def unpack(cls, grid, x):
        n = grid.size
        return cls(ScalarField(grid, x[:n]), ScalarField(grid, x[n:]))


def K_of(v0s, eps) -> ScalarField:
    return -2.0 * v0s + eps


def _require_neumann(p):
    if p.grid.is_dirichlet:
        raise RegimeMismatch("the dual functional J~ is defined for the Neumann problem")


def checked_K(p, v0s) -> ScalarField:
    """``K(v0s)``, raising :class:`DenominatorNonPositive` at the first non-positive node."""
    K = K_of(v0s, p.epsilon)
    bad = np.flatnonzero((K.values <= 0) & p.grid.active)
    if bad.size:
        raise DenominatorNonPositive(bad[0], K.values[bad[0]])
    return K


def construct_dual(p, u0) -> DualPointT1:
    _require_neumann(p)
    v0 = p.alpha * (u0 * u0 - p.beta)
    return DualPointT1(v0, K_of(v0, p.epsilon) * u0)


def L_operator(p, v0s) -> LinOp:
    K = checked_K(p, v0s)
    return p.gamma * laplacian(p.grid) @ diag_op(1.0 / K)


def L_apply(p, v0s, zs) -> ScalarField:
    K = checked_K(p, v0s)
    return p.gamma * laplacian(p.grid)(zs / K)


def dL_dv0(p, v0s, zs) -> LinOp:
    """Jacobian of ``v0* -> L(v0*) z*``: ``gamma lap diag(2 z*/K^2)``."""
    K = checked_K(p, v0s)
    return p.gamma * laplacian(p.grid) @ diag_op(2.0 * zs / K**2)


def d2L_dv0(p, v0s, zs) -> LinOp:
    """Diagonal second derivative of ``v0* -> L(v0*) z*``: ``gamma lap diag(8 z*/K^3)``."""
    K = checked_K(p, v0s)
    return p.gamma * laplacian(p.grid) @ diag_op(8.0 * zs / K**3)


def eval_Jtilde(p, d) -> float:
    _require_neumann(p)
    K = checked_K(p, d.v0s)
    y = d.zs / K
    resid = p.gamma * laplacian(p.grid)(y) + d.zs
    return (
        0.5 * inner(d.zs, y)
        - 0.5 * p.gamma * dirichlet_energy(y)
        - integrate(resid * resid) / (2 * p.epsilon)
        - integrate(d.v0s * d.v0s) / (2 * p.alpha)
        - p.beta * integrate(d.v0s)
    )


def eval_J1(p, d) -> float:
    """Penalty part ``1/(2 eps) int ((L + I) z*)^2`` of the dual functional."""
    resid = L_apply(p, d.v0s, d.zs) + d.zs
    return integrate(resid * resid) / (2 * p.epsilon)


def _flat(fun, p):
    return lambda x: fun(p, DualPointT1.unpack(p.grid, x))


@dataclass
class HypothesisReportT1:
    epsilon: float
    in_B: bool
    in_B_margin: float
    op1_ok: bool
    op1_margin: float
    op2_ok: bool
    op2_margin: float
    op2_nodewise_margin: float

    @property
    def all_ok(self):
        return self.in_B and self.op1_ok and self.op2_ok

    def records(self):
        eps = self.epsilon
        return [
            CheckRecord("in_B", "-2 v0* + eps > eps^(1/8) in Omega", self.in_B_margin, eps**0.125,
                        PASS if self.in_B else FAIL),
            CheckRecord("op1", "(L(v0*) + I)^2 > eps^(1/4), spectral", self.op1_margin, eps**0.25,
                        PASS if self.op1_ok else FAIL),
            CheckRecord("op2", "(dL/dv0* z*)^2 > eps^(1/4), spectral", self.op2_margin, eps**0.25,
                        PASS if self.op2_ok else FAIL),
            CheckRecord("op2_nodewise", "(dL/dv0* z*)^2 > eps^(1/4), diagonal entries", self.op2_nodewise_margin,
                        eps**0.25, "info"),
        ]


def check_hypotheses_t1(p, d) -> HypothesisReportT1:
    """Margins of the three hypotheses; each flag is ``margin > 0``.

    Operator inequalities are read spectrally: ``lambda_min(A* A)`` of the
    assembled operator against the threshold. The diagonal reading of the
    second operator hypothesis is reported alongside. When ``K`` vanishes
    somewhere the operator margins are undefined and reported as NaN.
    """
    eps = p.epsilon
    K = K_of(d.v0s, eps)
    act = p.grid.active
    in_B_margin = float(np.min(K.values[act])) - eps**0.125
    nan = float("nan")
    op1 = op2 = op2_diag = nan
    if np.all(K.values[act] > 0):
        op1 = min_sq_singular(L_operator(p, d.v0s) + identity(p.grid)) - eps**0.25
        m = dL_dv0(p, d.v0s, d.zs)
        op2 = min_sq_singular(m) - eps**0.25
        op2_diag = float(np.min(np.diag(m.active_block()) ** 2)) - eps**0.25
    return HypothesisReportT1(eps, in_B_margin > 0, in_B_margin, op1 > 0, op1, op2 > 0, op2, op2_diag)


def dual_gradient_t1(p, d, rel_step=1e-6):
    return fd_gradient(_flat(eval_Jtilde, p), d.pack(), rel_step=rel_step)


def verify_stationarity_t1(p, d, rel_step=1e-6) -> float:
    """Sup-norm of the finite-difference gradient of J~ over all nodal coordinates."""
    return dual_gradient_t1(p, d, rel_step).norm()


def default_radius(x):
    return 1e-3 * (1.0 + float(np.linalg.norm(x)))


def verify_local_max_t1(p, d, r=None, samples=200, seed=0, hessian=None):
    x = d.pack()
    if hessian is None:
        hessian = p.grid.size <= 25
    r = default_radius(x) if r is None else r
    return local_max_check(_flat(eval_Jtilde, p), x, r, samples=samples, seed=seed, hessian=hessian)


def verify_penalized_min(p, u0, d, samples=500, seed=0) -> PenalizedMinResult:
    K = checked_K(p, d.v0s)
    return penalized_min_check(p, u0, K, samples=samples, seed=seed)


def _rel_err(a, b):
    scale = np.linalg.norm(b)
    diff = np.linalg.norm(a - b)
    return float(diff / scale) if scale > 0 else float(diff)


@dataclass
class J1Blocks:
    """Second derivatives of the penalty part, in raw nodal coordinates.

    ``vz[i, j]`` is the mixed derivative in ``v0*_i`` and ``z*_j``.
    ``cross_partial`` is the term ``u0 dL/dv0*`` alone (with ``u0`` read as
    ``(L + I) z*/eps``); the full mixed block adds ``M* (L + I)/eps``.
    """

    zz: np.ndarray
    vz: np.ndarray
    vv: np.ndarray
    cross_partial: np.ndarray
    det: float
    det_scaled: float
    fd_errors: dict = None
    cross_partial_error: float = None


def hessian_blocks_J1(p, d, fd=True) -> J1Blocks:
    K = checked_K(p, d.v0s)
    eps, g = p.epsilon, p.gamma
    act = p.grid.active
    wa = p.grid.weights * act
    lap = laplacian(p.grid).toarray()
    a = (L_operator(p, d.v0s) + identity(p.grid)).toarray()
    m = dL_dv0(p, d.v0s, d.zs).toarray()
    z, k = d.zs.values, K.values
    resid = a @ z
    q = g * lap.T @ (wa * resid)
    zz = (a.T * wa) @ a / eps
    cross_partial = np.diag(2 * q / k**2) / eps
    vz = (m.T * wa) @ a / eps + cross_partial
    vv = ((m.T * wa) @ m + np.diag(8 * z * q / k**3)) / eps
    full = np.block([[vv, vz], [vz.T, zz]])
    free = np.concatenate([act, act])
    wfree = np.concatenate([p.grid.weights, p.grid.weights])[free]
    sign, logdet = np.linalg.slogdet(full[np.ix_(free, free)])
    det = float(sign * np.exp(logdet - np.sum(np.log(wfree)))) if sign != 0 else 0.0
    blocks = J1Blocks(zz, vz, vv, cross_partial, det, det * eps**1.5)
    if fd:
        n = p.grid.size
        h = fd_hessian(_flat(eval_J1, p), d.pack(), free=free)
        hvv, hvz, hzz = h[:n, :n], h[:n, n:], h[n:, n:]
        blocks.fd_errors = {"zz": _rel_err(zz, hzz), "vz": _rel_err(vz, hvz), "vv": _rel_err(vv, hvv)}
        blocks.cross_partial_error = _rel_err(cross_partial, hvz)
    return blocks
