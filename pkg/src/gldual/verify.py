"""Finite-difference oracles, eigenvalue extraction, sampling checks and the report model."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.differentiate import derivative

from .errors import DomainError, EvaluationFailure, NonSymmetric
from .grid import LinOp

PASS, FAIL, NOT_ASSERTED, FLAGGED, INFO = "pass", "fail", "not-asserted", "flagged", "info"


def _free_indices(n, free):
    if free is None:
        return np.arange(n)
    free = np.asarray(free)
    return np.flatnonzero(free) if free.dtype == bool else free


def _probe(fun, x, i, h, retries=10):
    """Evaluate ``fun`` at ``x +- h e_i``, shrinking ``h`` on domain errors."""
    for _ in range(retries + 1):
        try:
            xp = x.copy()
            xp[i] += h
            fp = fun(xp)
            xp[i] = x[i] - h
            return fp, fun(xp), h
        except DomainError:
            h /= 10.0
    raise EvaluationFailure(f"probe at coordinate {i} left the domain after {retries} step reductions")


@dataclass
class FDGradient:
    values: np.ndarray
    flagged: np.ndarray

    def norm(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def fd_gradient(fun, x, rel_step=1e-6, free=None, rtol=1e-3, atol=1e-7) -> FDGradient:
    """Central-difference gradient of ``fun`` at ``x`` (raw nodal partials).

    Each entry is recomputed with half the step. Where the two estimates
    disagree by more than ``rtol * max(|g|) + atol`` the step is too coarse
    for the local curvature, so the entry is re-estimated by Richardson
    extrapolation over a shrinking step sequence; the extrapolated value is
    kept when its error estimate beats the coarse disagreement. Entries whose
    error estimate still exceeds the tolerance are flagged. Coordinates
    outside ``free`` get a zero entry.
    """
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    flagged = []
    for i in _free_indices(x.size, free):
        h = rel_step * (1.0 + abs(x[i]))
        fp, fm, h = _probe(fun, x, i, h)
        g[i] = (fp - fm) / (2 * h)
        fp2, fm2, h2 = _probe(fun, x, i, h / 2)
        g2 = (fp2 - fm2) / (2 * h2)
        if abs(g[i] - g2) > rtol * max(abs(g[i]), abs(g2)) + atol:
            refined, err, settled = _extrapolated_partial(fun, x, i, h2, rtol, atol)
            if np.isfinite(refined) and err < abs(g[i] - g2):
                g[i] = refined
            if not settled:
                flagged.append(int(i))
    return FDGradient(g, np.array(flagged, dtype=int))


def _extrapolated_partial(fun, x, i, h, rtol, atol, max_iter=10):
    """Richardson-extrapolated partial: ``(value, error estimate, settled within tolerance)``."""

    def along(t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape)
        xp = x.copy()
        for idx, ti in np.ndenumerate(t):
            xp[i] = ti
            try:
                out[idx] = fun(xp)
            except DomainError:
                out[idx] = np.nan
        return out

    res = derivative(along, x[i], initial_step=h, step_factor=2.0, maxiter=max_iter,
                     tolerances={"atol": atol, "rtol": rtol})
    return float(res.df), float(res.error), bool(res.success)


def fd_hessian(fun, x, rel_step=1e-4, free=None, max_vars=64) -> np.ndarray:
    """Dense symmetric central-difference Hessian over the ``free`` coordinates.

    Rows and columns of non-free coordinates are zero. Intended for small
    problems only (at most ``max_vars`` free coordinates).
    """
    x = np.asarray(x, dtype=float)
    idx = _free_indices(x.size, free)
    if idx.size > max_vars:
        raise ValueError(f"fd_hessian limited to {max_vars} free variables, got {idx.size}")
    h = rel_step * (1.0 + np.abs(x))
    f0 = fun(x)

    def at(steps):
        xp = x.copy()
        for i, s in steps:
            xp[i] += s * h[i]
        try:
            return fun(xp)
        except DomainError as exc:
            raise EvaluationFailure(str(exc)) from exc

    hess = np.zeros((x.size, x.size))
    for a, i in enumerate(idx):
        hess[i, i] = (at([(i, 1)]) - 2 * f0 + at([(i, -1)])) / h[i] ** 2
        for j in idx[a + 1 :]:
            val = (at([(i, 1), (j, 1)]) - at([(i, 1), (j, -1)]) - at([(i, -1), (j, 1)]) + at([(i, -1), (j, -1)])) / (
                4 * h[i] * h[j]
            )
            hess[i, j] = hess[j, i] = val
    return hess


def _as_symmetric(a, sym_tol):
    m = a.symmetrized() if isinstance(a, LinOp) else np.asarray(a, dtype=float)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    defect = float(np.max(np.abs(m - m.T))) / scale if m.size else 0.0
    if defect > sym_tol:
        raise NonSymmetric(f"symmetry defect {defect:.3e} exceeds {sym_tol:g}")
    return 0.5 * (m + m.T)


def power_iteration(m, which="min", tol=1e-14, max_iter=20000, seed=0):
    """Extreme eigenvalue of a symmetric matrix by shift-invert power iteration.

    The shift sits just outside the Gershgorin interval, so it does not depend
    on any eigensolver output.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    radius = np.sum(np.abs(m), axis=1) - np.abs(np.diag(m))
    lo, hi = float(np.min(np.diag(m) - radius)), float(np.max(np.diag(m) + radius))
    pad = 1e-3 * max(hi - lo, 1.0)
    shift = lo - pad if which == "min" else hi + pad
    lu = sla.lu_factor(m - shift * np.eye(n))
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = float(v @ m @ v)
    for _ in range(max_iter):
        v = sla.lu_solve(lu, v)
        v /= np.linalg.norm(v)
        new = float(v @ m @ v)
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            return new
        lam = new
    return lam


def lambda_extreme(a, which="min", crosscheck=True, sym_tol=1e-10, rtol=1e-8) -> float:
    """Smallest or largest eigenvalue of a symmetric (or quadrature-self-adjoint) operator."""
    if which not in ("min", "max"):
        raise ValueError("which must be 'min' or 'max'")
    m = _as_symmetric(a, sym_tol)
    if m.size == 0:
        return float("nan")
    ev = np.linalg.eigvalsh(m)
    lam = float(ev[0] if which == "min" else ev[-1])
    if crosscheck:
        other = power_iteration(m, which)
        if abs(other - lam) > rtol * max(1.0, abs(lam)):
            raise EvaluationFailure(f"eigensolver {lam!r} and power iteration {other!r} disagree")
    return lam


def min_sq_singular(a) -> float:
    """``lambda_min(A* A)`` computed as the squared smallest singular value.

    For a :class:`LinOp` the adjoint is taken in the quadrature inner product.
    """
    m = a.symmetrized() if isinstance(a, LinOp) else np.asarray(a, dtype=float)
    if m.size == 0:
        return float("nan")
    return float(np.min(sla.svdvals(m)) ** 2)


def random_ball(rng, dim, radius):
    d = rng.standard_normal(dim)
    return d / np.linalg.norm(d) * radius * rng.uniform() ** (1.0 / dim)


@dataclass
class LocalMaxResult:
    ok: bool
    worst_increase: float
    radius: float
    samples: int
    lambda_max: float = None
    shrinks: int = 0


def local_max_check(fun, x, radius, samples=200, seed=0, free=None, slack=1e-10, shrinks=3, hessian=True):
    """Ball sampling plus (optionally) the largest finite-difference Hessian eigenvalue.

    A sample violates the local maximum when ``fun(x + d) > fun(x) +
    slack * (1 + |fun(x)|)``. On a violation the radius is divided by 10 and
    the sampling repeated, at most ``shrinks`` times.
    """
    x = np.asarray(x, dtype=float)
    idx = _free_indices(x.size, free)
    f0 = fun(x)
    tol = slack * (1 + abs(f0))
    lam = None
    if hessian:
        h = fd_hessian(fun, x, free=idx)
        lam = float(np.linalg.eigvalsh(h[np.ix_(idx, idx)])[-1])
    r = float(radius)
    worst = -np.inf
    for attempt in range(shrinks + 1):
        rng = np.random.default_rng(seed)
        worst = -np.inf
        for _ in range(samples):
            if r == 0:
                worst = max(worst, 0.0)
                continue
            y = x.copy()
            y[idx] += random_ball(rng, idx.size, r)
            worst = max(worst, fun(y) - f0)
        if worst <= tol or attempt == shrinks:
            break
        r /= 10.0
    if samples == 0:
        worst = 0.0
    return LocalMaxResult(bool(worst <= tol), float(worst), r, samples, lam, attempt)


@dataclass
class CheckRecord:
    """One hypothesis or conclusion measurement; ``clause`` names what it instantiates."""

    name: str
    clause: str
    value: float
    threshold: float
    status: str
    detail: dict = field(default_factory=dict)


def conclusion(name, clause, value, threshold, passed, asserted=True, detail=None):
    status = (PASS if passed else FAIL) if asserted else NOT_ASSERTED
    return CheckRecord(name, clause, _num(value), _num(threshold), status, detail or {})


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if np.isfinite(v) else None


@dataclass
class VerificationReport:
    instance: dict
    hypotheses: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def conclusions_ok(self):
        return all(c.status != FAIL for c in self.checks)

    def records(self):
        yield {"kind": "instance", **self.instance}
        for h in self.hypotheses:
            yield {"kind": "hypothesis", **asdict(h)}
        for c in self.checks:
            yield {"kind": "check", **asdict(c)}

    def to_jsonl(self):
        """One JSON object per line. Timings are left out so output is reproducible."""
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records())
