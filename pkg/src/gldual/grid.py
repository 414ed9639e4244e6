"""Structured grids, nodal fields, finite-difference operators and quadrature.

All discrete operators are built from two ingredients so that the discrete
Green identity holds exactly:

* ``W``: diagonal trapezoidal quadrature weights, and
* ``S``: the stiffness matrix of forward-difference gradients, so that
  ``u @ S @ u`` equals :func:`dirichlet_energy`.

The Laplacian is ``-W^{-1} S``. In the Neumann regime this is the usual
central stencil with ghost-node reflection at the boundary; in the Dirichlet
regime boundary rows and columns are dropped, which is the central stencil
with zero boundary values. ``laplacian`` is therefore self-adjoint in the
quadrature inner product, and ``inner(u, -lap u) == dirichlet_energy(u)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridMismatch, NonSolvable

NEUMANN = "neumann"
DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid on the box ``[0, extent_0] x ... `` (dim 1 or 2)."""

    dim: int
    extent: tuple
    nodes: tuple
    boundary: str = NEUMANN

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        extent = tuple(float(e) for e in np.atleast_1d(self.extent))
        nodes = tuple(int(n) for n in np.atleast_1d(self.nodes))
        if len(extent) == 1 and self.dim == 2:
            extent = extent * 2
        if len(nodes) == 1 and self.dim == 2:
            nodes = nodes * 2
        if len(extent) != self.dim or len(nodes) != self.dim:
            raise ValueError("extent and nodes need one entry per axis")
        if any(not np.isfinite(e) or e <= 0 for e in extent):
            raise ValueError(f"extents must be positive, got {extent}")
        if any(n < 3 for n in nodes):
            raise ValueError(f"need at least 3 nodes per axis, got {nodes}")
        boundary = str(self.boundary).lower()
        if boundary not in (NEUMANN, DIRICHLET):
            raise ValueError(f"unknown boundary kind {self.boundary!r}")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "boundary", boundary)

    @classmethod
    def line(cls, nodes, extent=1.0, boundary=NEUMANN):
        return cls(1, (extent,), (nodes,), boundary)

    @classmethod
    def square(cls, nodes, extent=1.0, boundary=NEUMANN):
        return cls(2, (extent, extent), (nodes, nodes), boundary)

    @property
    def spacing(self):
        return tuple(e / (n - 1) for e, n in zip(self.extent, self.nodes))

    @property
    def shape(self):
        return self.nodes

    @property
    def size(self):
        return int(np.prod(self.nodes))

    @property
    def volume(self):
        return float(np.prod(self.extent))

    @property
    def is_dirichlet(self):
        return self.boundary == DIRICHLET

    def axes(self):
        return [np.linspace(0.0, e, n) for e, n in zip(self.extent, self.nodes)]

    def coordinates(self):
        """Nodal coordinate arrays, one per axis, each flattened in C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return [m.ravel() for m in mesh]

    @property
    def weights(self):
        return _weights(self)

    @property
    def active(self):
        """Boolean mask of nodes carrying unknowns (all nodes for Neumann)."""
        return _active(self)

    @property
    def boundary_mask(self):
        return ~self.active

    def describe(self):
        return {
            "dim": self.dim,
            "extent": list(self.extent),
            "nodes": list(self.nodes),
            "boundary": self.boundary,
        }


def _axis_weights(extent, n):
    h = extent / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


@functools.lru_cache(maxsize=None)
def _weights(grid):
    w = np.ones(1)
    for e, n in zip(grid.extent, grid.nodes):
        w = np.kron(w, _axis_weights(e, n))
    w.flags.writeable = False
    return w


@functools.lru_cache(maxsize=None)
def _active(grid):
    if not grid.is_dirichlet:
        mask = np.ones(grid.size, dtype=bool)
    else:
        inner = np.ones(grid.nodes, dtype=bool)
        for axis in range(grid.dim):
            index = [slice(None)] * grid.dim
            index[axis] = 0
            inner[tuple(index)] = False
            index[axis] = -1
            inner[tuple(index)] = False
        mask = inner.ravel()
    mask.flags.writeable = False
    return mask


class ScalarField:
    """Real nodal values on a :class:`GridSpec` (immutable)."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        arr = np.array(values, dtype=float).reshape(-1)
        if arr.size != grid.size:
            raise ValueError(f"field has {arr.size} values, grid has {grid.size} nodes")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.size, float(c)))

    @classmethod
    def zeros(cls, grid):
        return cls.constant(grid, 0.0)

    @classmethod
    def from_function(cls, grid, fn: Callable):
        """Sample ``fn(x)`` (1D) or ``fn(x, y)`` (2D) at the nodes."""
        vals = fn(*grid.coordinates())
        return cls(grid, np.broadcast_to(vals, (grid.size,)))

    def with_values(self, values):
        return ScalarField(self.grid, values)

    def restrict(self):
        """Copy with Dirichlet boundary values zeroed (no-op for Neumann)."""
        if not self.grid.is_dirichlet:
            return self
        v = self.values.copy()
        v[self.grid.boundary_mask] = 0.0
        return ScalarField(self.grid, v)

    def max_abs(self, active_only=False):
        v = self.values[self.grid.active] if active_only else self.values
        return float(np.max(np.abs(v))) if v.size else 0.0

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise GridMismatch(f"{other.grid} != {self.grid}")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._other(other))

    def __rtruediv__(self, other):
        return ScalarField(self.grid, self._other(other) / self.values)

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def __pow__(self, k):
        return ScalarField(self.grid, self.values**k)

    def __repr__(self):
        return f"ScalarField(n={self.grid.size}, max|.|={self.max_abs():.4g})"


def check_same_grid(*objs):
    grids = {o.grid for o in objs}
    if len(grids) > 1:
        raise GridMismatch("operands live on different grids")
    return objs[0].grid


class LinOp:
    """Linear map on nodal vectors of one grid.

    ``matrix`` acts on full nodal vectors. In the Dirichlet regime boundary
    rows and columns are zero, so the operator only sees interior values.
    Self-adjointness is meant in the quadrature inner product; use
    :meth:`symmetrized` to get an ordinary symmetric matrix with the same
    spectrum.
    """

    def __init__(self, grid, matrix):
        if matrix.shape != (grid.size, grid.size):
            raise ValueError("operator shape does not match grid")
        self.grid = grid
        self.matrix = matrix

    def __call__(self, field):
        if field.grid != self.grid:
            raise GridMismatch("operator and field live on different grids")
        return ScalarField(self.grid, self.apply(field.values))

    def apply(self, values):
        return np.asarray(self.matrix @ values).reshape(-1)

    def toarray(self):
        m = self.matrix
        return m.toarray() if sp.issparse(m) else np.array(m, dtype=float)

    def active_block(self):
        a = self.grid.active
        return self.toarray()[np.ix_(a, a)]

    def symmetrized(self):
        """``W^{1/2} A W^{-1/2}`` on the active nodes."""
        w = np.sqrt(self.grid.weights[self.grid.active])
        return w[:, None] * self.active_block() / w[None, :]

    def _coerce(self, other):
        if isinstance(other, LinOp):
            if other.grid != self.grid:
                raise GridMismatch("operators live on different grids")
            return other.matrix
        raise TypeError(f"cannot combine LinOp with {type(other).__name__}")

    def __add__(self, other):
        return LinOp(self.grid, self.matrix + self._coerce(other))

    def __sub__(self, other):
        return LinOp(self.grid, self.matrix - self._coerce(other))

    def __matmul__(self, other):
        if isinstance(other, ScalarField):
            return self(other)
        return LinOp(self.grid, self.matrix @ self._coerce(other))

    def __mul__(self, c):
        return LinOp(self.grid, self.matrix * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return LinOp(self.grid, -self.matrix)

    def square(self):
        """The quadrature-adjoint square ``A* A``."""
        w = self.grid.weights
        a = self.toarray()
        return LinOp(self.grid, (a.T * w) @ a / w[:, None])


def _axis_stiffness(extent, n):
    h = extent / (n - 1)
    d = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n)) / h
    return (d.T @ d * h).tocsr()


@functools.lru_cache(maxsize=None)
def stiffness(grid):
    """Matrix ``S`` with ``u @ S @ u == dirichlet_energy(u)`` (Neumann form)."""
    if grid.dim == 1:
        s = _axis_stiffness(grid.extent[0], grid.nodes[0])
    else:
        (ex, ey), (nx, ny) = grid.extent, grid.nodes
        wx, wy = sp.diags(_axis_weights(ex, nx)), sp.diags(_axis_weights(ey, ny))
        s = sp.kron(_axis_stiffness(ex, nx), wy) + sp.kron(wx, _axis_stiffness(ey, ny))
    return _mask_rows_cols(grid, sp.csr_matrix(s))


def _mask_rows_cols(grid, m):
    if not grid.is_dirichlet:
        return m
    keep = sp.diags(grid.active.astype(float))
    return (keep @ m @ keep).tocsr()


@functools.lru_cache(maxsize=None)
def laplacian(grid) -> LinOp:
    """Second-order central-difference Laplacian with the grid's boundary regime."""
    winv = sp.diags(1.0 / grid.weights)
    return LinOp(grid, (-(winv @ stiffness(grid))).tocsr())


def identity(grid) -> LinOp:
    return LinOp(grid, sp.diags(grid.active.astype(float)).tocsr())


def diag_op(field) -> LinOp:
    v = field.values * field.grid.active
    return LinOp(field.grid, sp.diags(v).tocsr())


@functools.lru_cache(maxsize=None)
def _poisson_solver(grid):
    s = stiffness(grid)
    if grid.is_dirichlet:
        a = grid.active
        lu = spla.splu(sp.csc_matrix(s[a][:, a]))

        def solve(rhs):
            out = np.zeros(grid.size)
            out[a] = lu.solve(grid.weights[a] * rhs[a])
            return out

        return solve
    # bordered system [[S, w], [w^T, 0]] pins the weighted mean to zero
    w = grid.weights
    border = sp.bmat([[s, sp.csr_matrix(w[:, None])], [sp.csr_matrix(w[None, :]), None]])
    lu = spla.splu(sp.csc_matrix(border))

    def solve(rhs):
        return lu.solve(np.concatenate([w * rhs, [0.0]]))[:-1]

    return solve


def mean(field):
    return integrate(field) / field.grid.volume


def inverse_laplacian_apply(grid, rhs) -> ScalarField:
    """Solve ``-lap w = rhs``.

    Neumann: ``rhs`` must have zero mean (up to ``1e-12 * max|rhs|``); it is
    projected onto mean zero and the solution is returned with zero mean.
    Dirichlet: boundary values of ``rhs`` are ignored.
    """
    if rhs.grid != grid:
        raise GridMismatch("rhs is not on the given grid")
    r = rhs.values
    if not grid.is_dirichlet:
        scale = float(np.max(np.abs(r))) if r.size else 0.0
        m = mean(rhs)
        if abs(m) > 1e-12 * scale:
            raise NonSolvable(f"Neumann rhs has mean {m:.3e} (max|rhs| = {scale:.3e})")
        r = r - m
    return ScalarField(grid, _poisson_solver(grid)(r))


def integrate(field) -> float:
    """Trapezoidal quadrature over the whole box."""
    return float(field.grid.weights @ field.values)


def inner(a, b) -> float:
    check_same_grid(a, b)
    return float(a.grid.weights @ (a.values * b.values))


def dirichlet_energy(u) -> float:
    """Discrete ``int |grad u|^2``: forward differences times edge measure.

    Dirichlet-regime fields are read with zero boundary values.
    """
    grid = u.grid
    vals = u.restrict().values.reshape(grid.shape)
    axis_w = [_axis_weights(e, n) for e, n in zip(grid.extent, grid.nodes)]
    total = 0.0
    for k, h in enumerate(grid.spacing):
        d = np.diff(vals, axis=k) / h
        measure = np.full(grid.nodes[k] - 1, h)
        for j in range(grid.dim):
            shape = [1] * grid.dim
            shape[j] = -1
            factor = measure if j == k else axis_w[j]
            d = d * np.sqrt(factor).reshape(shape)
        total += float(np.sum(d * d))
    return total
