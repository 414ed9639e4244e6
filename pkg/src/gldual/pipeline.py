"""End-to-end verification: solve, construct the dual point, check hypotheses, measure conclusions."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import theorem1 as t1
from . import theorem2 as t2
from .errors import NoConvergence
from .primal import eval_J, solve_critical
from .verify import FLAGGED, INFO, PASS, CheckRecord, VerificationReport, _num, conclusion

GAP_RTOL = 1e-8
STATIONARITY_TOL = 1e-5
LAMBDA_TOL = 1e-8
BLOCK_RTOL = 1e-4
U1_TOL = 1e-14
HESSIAN_MAX_NODES = 25


@dataclass
class Settings:
    seed: int = 0
    samples_min: int = 500
    samples_max: int = 200
    tol: float = 1e-10
    max_iter: int = 100


def _solve(p, u_init, s, report):
    """Newton solve; records the outcome and returns the critical point or ``None``."""
    try:
        cp = solve_critical(p, u_init, tol=s.tol, max_iter=s.max_iter)
    except NoConvergence as exc:
        cp = exc.result
    report.checks.append(
        conclusion("critical_point", "delta J(u0) = 0", cp.residual_norm, s.tol, cp.converged,
                   detail={"newton_iters": cp.newton_iters, "notes": list(cp.notes)})
    )
    return cp if cp.converged else None


def _gap(p, u0, dual_value):
    j0 = eval_J(p, u0)
    return abs(j0 - dual_value), GAP_RTOL * (1 + abs(j0)), j0


def _block_record(name, clause, errors, flag_only=False):
    worst = max(errors.values())
    detail = {k: _num(v) for k, v in sorted(errors.items())}
    if flag_only:
        status = PASS if worst < BLOCK_RTOL else FLAGGED
        return CheckRecord(name, clause, _num(worst), BLOCK_RTOL, status, detail)
    return conclusion(name, clause, worst, BLOCK_RTOL, worst < BLOCK_RTOL, detail=detail)


def _local_max_record(clause, lm, asserted):
    lam_ok = lm.lambda_max is None or lm.lambda_max <= LAMBDA_TOL
    return conclusion("local_max", clause, lm.worst_increase, 0.0, lm.ok and lam_ok, asserted=asserted,
                      detail={"lambda_max": _num(lm.lambda_max), "radius": _num(lm.radius), "samples": lm.samples,
                              "shrinks": lm.shrinks})


def _penalized_record(clause, pm, asserted):
    return conclusion("penalized_min", clause, pm.worst_slack, 0.0, pm.ok, asserted=asserted,
                      detail={"min_K": _num(pm.min_K), "samples": pm.samples, "violations": pm.violations})


def verify_theorem1(p, u_init, settings=None, instance=None) -> VerificationReport:
    s = settings or Settings()
    report = VerificationReport(instance or {})
    start = time.perf_counter()
    cp = _solve(p, u_init, s, report)
    report.timings["solve"] = time.perf_counter() - start
    if cp is None:
        return report
    d = t1.construct_dual(p, cp.u0)
    hyp = t1.check_hypotheses_t1(p, d)
    k_min = float(np.min(t1.K_of(d.v0s, p.epsilon).values))
    report.hypotheses = [CheckRecord("K_positive", "-2 v0* + eps > 0 in Omega", k_min, 0.0,
                                     PASS if k_min > 0 else "fail")] + hyp.records()
    if k_min <= 0:
        for name in ("duality_gap", "dual_stationarity", "penalized_min", "local_max"):
            report.checks.append(conclusion(name, "requires K(v0*) > 0", None, None, False, asserted=False))
        return report
    start = time.perf_counter()
    gap, bound, j0 = _gap(p, cp.u0, t1.eval_Jtilde(p, d))
    report.checks.append(conclusion("duality_gap", "J(u0) = J~*(v0*, z*)", gap, bound, gap <= bound,
                                    detail={"J": _num(j0)}))
    stat = t1.verify_stationarity_t1(p, d)
    report.checks.append(conclusion("dual_stationarity", "delta J~*(v0*, z*) = 0", stat, STATIONARITY_TOL,
                                    stat <= STATIONARITY_TOL))
    pm = t1.verify_penalized_min(p, cp.u0, d, samples=s.samples_min, seed=s.seed)
    report.checks.append(_penalized_record("J(u0) = min_u {J(u) + 1/2 int K (u - u0)^2}", pm, True))
    small = p.grid.size <= HESSIAN_MAX_NODES
    lm = t1.verify_local_max_t1(p, d, samples=s.samples_max, seed=s.seed, hessian=small)
    report.checks.append(_local_max_record("(v0*, z*) is a local maximum of J~*", lm, hyp.all_ok))
    if small:
        b = t1.hessian_blocks_J1(p, d)
        report.checks.append(_block_record("hessian_blocks_J1", "second derivatives of J1* (derived)", b.fd_errors))
        report.checks.append(_block_record("hessian_cross_J1_closed_form", "d2 J1*/dz* dv0* = u0 dL/dv0*",
                                           {"vz": b.cross_partial_error}, flag_only=True))
        report.checks.append(CheckRecord("det_J1", "det(delta^2 J1*) eps^(3/2)", _num(b.det_scaled), None, INFO,
                                         {"det": _num(b.det)}))
    report.timings["checks"] = time.perf_counter() - start
    return report


def verify_theorem2(p, u_init, settings=None, instance=None) -> VerificationReport:
    s = settings or Settings()
    report = VerificationReport(instance or {})
    start = time.perf_counter()
    cp = _solve(p, u_init, s, report)
    report.timings["solve"] = time.perf_counter() - start
    if cp is None:
        return report
    start = time.perf_counter()
    u0 = cp.u0
    d = t2.construct_dual_t2(p, u0)
    hyp = t2.check_hypotheses_t2(p, u0)
    k_min = float(np.min(t1.K_of(d.v0s, p.epsilon).values))
    report.hypotheses = hyp.records()
    defect = t2.u1_identity_defect(p, u0)
    report.checks.append(conclusion("u1_identity", "u0 - u1 = delta J(u0) / eps", defect, U1_TOL, defect <= U1_TOL,
                                    detail={"u0_minus_u1": _num(t2.u1_identity_residual(p, u0))}))
    gap, bound, j0 = _gap(p, u0, t2.eval_J3(p, d))
    report.checks.append(conclusion("duality_gap", "J(u0) = J3*(v0*, u0)", gap, bound, gap <= bound,
                                    detail={"J": _num(j0)}))
    stat = t2.verify_stationarity_t2(p, d)
    report.checks.append(conclusion("dual_stationarity", "delta J3*(v0*, u0) = 0", stat, STATIONARITY_TOL,
                                    stat <= STATIONARITY_TOL))
    pm = t2.verify_penalized_min_t2(p, u0, d, samples=s.samples_min, seed=s.seed)
    report.checks.append(_penalized_record("J(u0) = min_u {J(u) + 1/2 int K (u - u0)^2}", pm, k_min > 0))
    small = p.grid.size <= HESSIAN_MAX_NODES
    lm = t2.verify_local_max_t2(p, d, samples=s.samples_max, seed=s.seed, hessian=small)
    report.checks.append(_local_max_record("(v0*, u0) is a local maximum of J3*", lm, hyp.all_ok))
    if small:
        b = t2.hessian_blocks_t2(p, d)
        report.checks.append(_block_record("hessian_blocks_J3", "second derivatives of J3* (derived)", b.fd_errors))
        report.checks.append(_block_record("hessian_blocks_J3_closed_form",
                                           "1/alpha + 4 u0^2/eps; 4 u0 - 2 f/eps; u^ block", b.closed_form_errors,
                                           flag_only=True))
        report.checks.append(CheckRecord("det_J3", "det(delta^2 J3*) sqrt(eps)", _num(b.det_scaled), None, INFO,
                                         {"det": _num(b.det), "lambda_max": _num(b.lambda_max)}))
    report.timings["checks"] = time.perf_counter() - start
    return report


SWEEP_COLUMNS_T1 = ["epsilon", "status", "in_B_margin", "op1_margin", "op2_margin", "gap", "stationarity",
                    "det", "det_scaled", "lambda_max"]
SWEEP_COLUMNS_T2 = ["epsilon", "status", "op_margin", "op_gamma_margin", "sign_margin", "gap", "stationarity",
                    "det", "det_scaled", "lambda_max"]


def check_eps_list(eps_list):
    """Raise ``ValueError`` unless the list is strictly decreasing inside (0, 1)."""
    eps = [float(e) for e in eps_list]
    if any(not 0 < e < 1 for e in eps):
        raise ValueError("every epsilon must lie in (0, 1)")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilon list must be strictly decreasing")
    return eps


def _row_t1(p, u0):
    d = t1.construct_dual(p, u0)
    hyp = t1.check_hypotheses_t1(p, d)
    row = {"in_B_margin": hyp.in_B_margin, "op1_margin": hyp.op1_margin, "op2_margin": hyp.op2_margin}
    row["gap"] = abs(eval_J(p, u0) - t1.eval_Jtilde(p, d))
    row["stationarity"] = t1.verify_stationarity_t1(p, d)
    if p.grid.size <= HESSIAN_MAX_NODES:
        b = t1.hessian_blocks_J1(p, d, fd=False)
        row["det"], row["det_scaled"] = b.det, b.det_scaled
        row["lambda_max"] = t1.verify_local_max_t1(p, d, samples=0).lambda_max
    return row


def _row_t2(p, u0):
    d = t2.construct_dual_t2(p, u0)
    hyp = t2.check_hypotheses_t2(p, u0)
    row = {"op_margin": hyp.op_margin, "op_gamma_margin": hyp.op_gamma_margin, "sign_margin": hyp.sign_margin}
    row["gap"] = abs(eval_J(p, u0) - t2.eval_J3(p, d))
    row["stationarity"] = t2.verify_stationarity_t2(p, d)
    if p.grid.size <= HESSIAN_MAX_NODES:
        b = t2.hessian_blocks_t2(p, d, fd=False)
        row["det"], row["det_scaled"], row["lambda_max"] = b.det, b.det_scaled, b.lambda_max
    return row


def sweep(theorem, p, u0, eps_list, workers=4):
    """One row per epsilon (kept in input order). A row that raises is recorded with its error."""
    eps_list = check_eps_list(eps_list)
    row_fn = _row_t1 if theorem == 1 else _row_t2

    def run(eps):
        try:
            row = row_fn(p.with_epsilon(eps), u0)
            row["status"] = "ok"
        except Exception as exc:  # noqa: BLE001 - a failed row must not stop the sweep
            row = {"status": f"error: {type(exc).__name__}: {exc}"}
        row["epsilon"] = eps
        return row

    if not eps_list:
        return []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, eps_list))


def sweep_columns(theorem):
    return SWEEP_COLUMNS_T1 if theorem == 1 else SWEEP_COLUMNS_T2
