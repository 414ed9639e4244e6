"""Closed-form Legendre conjugates behind both dual functionals.

All component conjugates use the positive convention ``sup {pairing - primal}``;
:func:`eval_JK_decomposition` applies the signs

    J_K(v0*, v1*, z*) = F*(z*) - G0*(z*, v1*) - G1K*(v1*, v0*).

In the Dirichlet regime ``u`` ranges over fields vanishing on the boundary,
so every term paired with ``u`` is integrated over interior nodes only. The
auxiliary variable ``v`` of ``G1K`` is unconstrained, so its terms use all
nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DenominatorNonPositive, SupNotAttained
from .grid import ScalarField, check_same_grid, dirichlet_energy, integrate, inverse_laplacian_apply, laplacian


@dataclass
class ConjugateResult:
    """Conjugate value and the argument attaining the supremum.

    ``maximizer`` is a field, or a ``(u, v)`` pair of fields for ``G1K``.
    """

    value: float
    maximizer: object


def _first_bad(values, mask):
    bad = np.flatnonzero((values <= 0) & mask)
    return int(bad[0]) if bad.size else None


def _active_integral(field):
    g = field.grid
    return float(g.weights[g.active] @ field.values[g.active])


def conj_F(zs, K) -> ConjugateResult:
    """``sup_u <z*, u> - 1/2 int K u^2 = 1/2 int z*^2 / K``, attained at ``u = z*/K``."""
    grid = check_same_grid(zs, K)
    bad = _first_bad(K.values, grid.active)
    if bad is not None:
        raise DenominatorNonPositive(bad, K.values[bad])
    u = (zs / K).restrict()
    return ConjugateResult(0.5 * _active_integral(zs * u), u)


def primal_F(u, K) -> float:
    u = u.restrict()
    return 0.5 * integrate(K * u * u)


def conj_G0(zs, v1s, gamma) -> ConjugateResult:
    """``sup_u <z* - v1*, u> - gamma/2 int |grad u|^2 = 1/(2 gamma) <r, (-lap)^{-1} r>``.

    Here ``r = z* - v1*``. The maximizer solves ``-gamma lap u = r``. In the
    Neumann regime ``r`` must have zero mean, otherwise the supremum is
    infinite and :class:`~gldual.errors.NonSolvable` is raised.
    """
    grid = check_same_grid(zs, v1s)
    r = (zs - v1s).restrict()
    w = inverse_laplacian_apply(grid, r)
    return ConjugateResult(_active_integral(r * w) / (2 * gamma), w / gamma)


def primal_G0(u, gamma) -> float:
    return 0.5 * gamma * dirichlet_energy(u.restrict())


def _g1k_denominator(v0s, K):
    den = 2.0 * v0s + K
    bad = _first_bad(den.values, den.grid.active)
    if bad is not None:
        raise SupNotAttained(bad, den.values[bad])
    return den


def conj_G1K(v1s, v0s, K, p, with_f=False) -> ConjugateResult:
    """``sup_{u,v} <v1*, u> + <v0*, v> - G1K(u, v)`` in closed form.

    ``G1K(u, v) = alpha/2 int (u^2 - beta + v)^2 + 1/2 int K u^2`` minus
    ``<u, f>`` when ``with_f``. The value is

        1/2 int (v1* + f)^2 / (2 v0* + K) + 1/(2 alpha) int v0*^2 + beta int v0*

    attained at ``u = (v1* + f)/(2 v0* + K)``, ``v = v0*/alpha - u^2 + beta``.
    """
    check_same_grid(v1s, v0s, K)
    den = _g1k_denominator(v0s, K)
    a = v1s + p.source if with_f else v1s
    a = a.restrict()
    u = (a / den).restrict()
    v = v0s / p.alpha - u * u + p.beta
    value = 0.5 * _active_integral(a * u) + integrate(v0s * v0s) / (2 * p.alpha) + p.beta * integrate(v0s)
    return ConjugateResult(value, (u, v))


def primal_G1K(u, v, K, p, with_f=False) -> float:
    u = u.restrict()
    val = 0.5 * p.alpha * integrate((u * u - p.beta + v) ** 2) + 0.5 * integrate(K * u * u)
    if with_f:
        val -= integrate(u * p.source)
    return val


def eliminated_multiplier(p, v0s, zs) -> ScalarField:
    """``gamma lap(z*/K) + z*`` with ``K = -2 v0* + eps``: the ``v1*`` making J_K stationary in ``z*``."""
    K = -2.0 * v0s + p.epsilon
    bad = _first_bad(K.values, p.grid.active)
    if bad is not None:
        raise DenominatorNonPositive(bad, K.values[bad])
    y = (zs / K).restrict()
    return (p.gamma * laplacian(p.grid)(y) + zs).restrict()


def eval_JK_decomposition(p, v0s, v1s, zs, K) -> float:
    """``F*(z*) - G0*(z*, v1*) - G1K*(v1*, v0*)``; the source enters ``G1K*`` when present."""
    with_f = p.source is not None
    return (
        conj_F(zs, K).value
        - conj_G0(zs, v1s, p.gamma).value
        - conj_G1K(v1s, v0s, K, p, with_f=with_f).value
    )
