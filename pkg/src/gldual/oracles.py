"""Brute-force suprema that validate the closed-form conjugates.

None of these use the closed forms. ``F`` and ``G1K`` decouple per node and
are maximized numerically node by node; ``G0`` is a concave quadratic whose
matrix is assembled by polarization of the energy and maximized by a linear
solve.
"""

from __future__ import annotations

import numpy as np
from scipy import optimize

from .grid import ScalarField, dirichlet_energy


def _node_sup_1d(phi, guess=0.0):
    """Maximize a scalar concave ``phi`` by golden-section search."""
    span = 1.0 + abs(guess)
    res = optimize.minimize_scalar(lambda t: -phi(t), bracket=(guess - span, guess + span), method="golden",
                                   tol=1e-12)
    return -res.fun, res.x


def sup_F(zs, K):
    """Value and maximizer of ``sup_u <z*, u> - 1/2 int K u^2`` by per-node golden-section search."""
    grid = zs.grid
    u = np.zeros(grid.size)
    total = 0.0
    for i in np.flatnonzero(grid.active):
        z, k = zs.values[i], K.values[i]
        best, u[i] = _node_sup_1d(lambda t: z * t - 0.5 * k * t * t)
        total += grid.weights[i] * best
    return total, ScalarField(grid, u)


def energy_matrix(grid):
    """Matrix ``A`` with ``u @ A @ u == dirichlet_energy(u)``, built by polarization."""
    n = grid.size
    eye = np.eye(n)
    q = np.array([dirichlet_energy(ScalarField(grid, eye[i])) for i in range(n)])
    a = np.diag(q)
    for i in range(n):
        for j in range(i + 1, n):
            a[i, j] = a[j, i] = 0.5 * (dirichlet_energy(ScalarField(grid, eye[i] + eye[j])) - q[i] - q[j])
    return a


def sup_G0(zs, v1s, gamma):
    """``sup_u <z* - v1*, u> - gamma/2 int |grad u|^2`` via its stationarity system.

    The system ``gamma A u = W r`` is solved by least squares on the free
    nodes; in the Neumann regime a zero-mean ``r`` makes it consistent.
    """
    grid = zs.grid
    act = grid.active
    b = (grid.weights * (zs.values - v1s.values))[act]
    a = gamma * energy_matrix(grid)[np.ix_(act, act)]
    sol = np.linalg.lstsq(a, b, rcond=None)[0]
    u = np.zeros(grid.size)
    u[act] = sol
    value = b @ sol - 0.5 * sol @ a @ sol
    return float(value), ScalarField(grid, u)


def _g1k_node(a, v0, k, alpha, beta):
    return lambda u, v: a * u + v0 * v - 0.5 * alpha * (u * u - beta + v) ** 2 - 0.5 * k * u * u


def _grid_argmax(phi, center, half, points):
    us = np.linspace(center[0] - half, center[0] + half, points)
    vs = np.linspace(center[1] - half, center[1] + half, points)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    vals = phi(uu, vv)
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    on_edge = i in (0, points - 1) or j in (0, points - 1)
    return (us[i], vs[j]), vals[i, j], on_edge


def node_sup_2d(phi, half=4.0, points=201, max_expand=12):
    """Maximize ``phi(u, v)`` by grid search (box doubled while the best point sits on its edge), then polish."""
    center = (0.0, 0.0)
    for _ in range(max_expand):
        center, _, on_edge = _grid_argmax(phi, center, half, points)
        if not on_edge:
            break
        half *= 2.0
    res = optimize.minimize(lambda x: -phi(x[0], x[1]), np.array(center), method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 20000})
    return -res.fun, res.x


def sup_G1K(v1s, v0s, K, p, with_f=False):
    """Per-node brute-force value of the ``G1K`` conjugate and the maximizing ``(u, v)``."""
    grid = v1s.grid
    act = grid.active
    a = v1s.values + (p.source.values if with_f else 0.0)
    u = np.zeros(grid.size)
    v = np.zeros(grid.size)
    total = 0.0
    for i in range(grid.size):
        if act[i]:
            best, (u[i], v[i]) = node_sup_2d(_g1k_node(a[i], v0s.values[i], K.values[i], p.alpha, p.beta))
        else:
            # u is pinned to zero on the Dirichlet boundary; only v is free
            phi = _g1k_node(0.0, v0s.values[i], K.values[i], p.alpha, p.beta)
            best, v[i] = _node_sup_1d(lambda t: phi(0.0, t))
        total += grid.weights[i] * best
    return total, (ScalarField(grid, u), ScalarField(grid, v))


def sup_growth(phi, halves=(1.0, 4.0, 16.0, 64.0, 256.0), points=201):
    """Best grid value of ``phi(u, v)`` on boxes of increasing half-width."""
    return [float(_grid_argmax(phi, (0.0, 0.0), h, points)[1]) for h in halves]


def grows_without_bound(values, factor=2.0):
    """True when the sequence increases strictly and its last value dwarfs its first."""
    values = np.asarray(values, dtype=float)
    increasing = bool(np.all(np.diff(values) > 0))
    return increasing and values[-1] > factor * max(abs(values[0]), 1.0)
