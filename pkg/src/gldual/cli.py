"""Command-line entry point.

Exit codes: 0 when every asserted conclusion passed, 1 on configuration or
I/O errors (nothing is written), 2 when an asserted conclusion failed or
Newton did not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import conjugates as cj
from . import oracles
from .config import load_config
from .errors import ConfigError, GLDualError, NoConvergence
from .fieldio import dumps_field
from .pipeline import check_eps_list, sweep, sweep_columns, verify_theorem1, verify_theorem2
from .primal import solve_critical
from .theorem1 import K_of, construct_dual, eval_Jtilde
from .theorem2 import construct_dual_t2, eval_J3
from .verify import CheckRecord, INFO, VerificationReport, _num, conclusion

OUT_DIR_ENV = "GLDUAL_OUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_CONCLUSION = 0, 1, 2
ORACLE_MAX_NODES = 33
CONJ_RTOL = 1e-5
FENCHEL_YOUNG_TOL = 1e-9

log = logging.getLogger("gldual")

DEFAULT_NAMES = {
    "solve": "u0.txt",
    "verify-t1": "verify-t1.jsonl",
    "verify-t2": "verify-t2.jsonl",
    "conjugates": "conjugates.jsonl",
    "sweep": "sweep.csv",
}


def _load(args, theorem=None):
    cfg = load_config(args.config)
    if theorem is not None:
        if cfg.theorem not in (None, theorem):
            raise ConfigError(f"config declares theorem {cfg.theorem} but the command needs theorem {theorem}")
        cfg.theorem = theorem
    elif cfg.theorem is None:
        raise ConfigError("config must set theorem = 1 or 2")
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _out_path(args, cfg):
    if args.out:
        return Path(args.out)
    if cfg.out:
        return cfg._path(cfg.out)
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return Path(env) / DEFAULT_NAMES[args.command]
    return None


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _problem(cfg):
    p = cfg.params()
    return p, cfg.initial_guess(p.grid)


def cmd_solve(args):
    cfg = _load(args)
    p, u_init = _problem(cfg)
    out = _out_path(args, cfg)
    try:
        cp = solve_critical(p, u_init, tol=cfg.tol, max_iter=cfg.max_iter)
    except NoConvergence as exc:
        log.error("%s", exc)
        return EXIT_CONCLUSION
    _emit(dumps_field(cp.u0), out)
    log.info("converged: residual %.3e after %d Newton steps", cp.residual_norm, cp.newton_iters)
    return EXIT_OK


def _verify(args, theorem):
    cfg = _load(args, theorem)
    p, u_init = _problem(cfg)
    out = _out_path(args, cfg)
    run = verify_theorem1 if theorem == 1 else verify_theorem2
    report = run(p, u_init, cfg.settings(), instance=cfg.describe())
    _emit(report.to_jsonl(), out)
    return EXIT_OK if report.conclusions_ok else EXIT_CONCLUSION


def cmd_verify_t1(args):
    return _verify(args, 1)


def cmd_verify_t2(args):
    return _verify(args, 2)


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def conjugate_report(cfg) -> VerificationReport:
    """Closed-form conjugates at the constructed dual point, checked against oracles and Fenchel-Young."""
    p, u_init = _problem(cfg)
    report = VerificationReport(cfg.describe())
    cp = solve_critical(p, u_init, tol=cfg.tol, max_iter=cfg.max_iter)
    u0 = cp.u0
    if cfg.theorem == 1:
        d = construct_dual(p, u0)
        v0s, zs, dual_value = d.v0s, d.zs, eval_Jtilde(p, d)
    else:
        d = construct_dual_t2(p, u0)
        v0s = d.v0s
        zs = K_of(v0s, p.epsilon) * d.uhat
        dual_value = eval_J3(p, d)
    K = K_of(v0s, p.epsilon)
    v1s = cj.eliminated_multiplier(p, v0s, zs)
    with_f = p.source is not None
    f_res = cj.conj_F(zs, K)
    g0_res = cj.conj_G0(zs, v1s, p.gamma)
    g1_res = cj.conj_G1K(v1s, v0s, K, p, with_f)
    w = p.grid.weights
    u_g1, v_g1 = g1_res.maximizer
    fy = {
        "F": f_res.value - (w @ (zs.values * f_res.maximizer.values) - cj.primal_F(f_res.maximizer, K)),
        "G0": g0_res.value - (w @ ((zs - v1s).restrict().values * g0_res.maximizer.values)
                              - cj.primal_G0(g0_res.maximizer, p.gamma)),
        "G1K": g1_res.value - (w @ (v1s.values * u_g1.values + v0s.values * v_g1.values)
                               - cj.primal_G1K(u_g1, v_g1, K, p, with_f)),
    }
    for name, res in (("F", f_res), ("G0", g0_res), ("G1K", g1_res)):
        report.checks.append(CheckRecord(f"conj_{name}", f"{name}* closed form", _num(res.value), None, INFO))
        scale = 1 + abs(res.value)
        report.checks.append(conclusion(f"fenchel_young_{name}", f"{name}* attained at its maximizer",
                                        abs(fy[name]) / scale, FENCHEL_YOUNG_TOL,
                                        abs(fy[name]) <= FENCHEL_YOUNG_TOL * scale))
    jk = f_res.value - g0_res.value - g1_res.value
    err = _rel(jk, dual_value)
    report.checks.append(conclusion("elimination", "J_K*(v0*, v1^*, z*) equals the dual functional", err, 1e-9,
                                    err <= 1e-9, detail={"J_K": _num(jk), "dual": _num(dual_value)}))
    if p.grid.size <= ORACLE_MAX_NODES:
        pairs = (
            ("F", f_res.value, oracles.sup_F(zs, K)[0]),
            ("G0", g0_res.value, oracles.sup_G0(zs, v1s, p.gamma)[0]),
            ("G1K", g1_res.value, oracles.sup_G1K(v1s, v0s, K, p, with_f)[0]),
        )
        for name, closed, brute in pairs:
            e = _rel(closed, brute)
            report.checks.append(conclusion(f"oracle_{name}", f"{name}* matches brute-force supremum", e, CONJ_RTOL,
                                            e <= CONJ_RTOL, detail={"oracle": _num(brute)}))
    return report


def cmd_conjugates(args):
    cfg = _load(args)
    out = _out_path(args, cfg)
    try:
        report = conjugate_report(cfg)
    except NoConvergence as exc:
        log.error("%s", exc)
        return EXIT_CONCLUSION
    _emit(report.to_jsonl(), out)
    return EXIT_OK if report.conclusions_ok else EXIT_CONCLUSION


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    v = float(v)
    return repr(v) if np.isfinite(v) else ""


def format_sweep(theorem, rows) -> str:
    cols = sweep_columns(theorem)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_csv_cell(row.get(c)) for c in cols])
    return buf.getvalue()


def cmd_sweep(args):
    cfg = _load(args)
    eps_list = args.eps if args.eps is not None else cfg.eps_list
    try:
        eps_list = check_eps_list(eps_list)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    p, u_init = _problem(cfg)
    out = _out_path(args, cfg)
    rows = []
    if eps_list:
        try:
            cp = solve_critical(p, u_init, tol=cfg.tol, max_iter=cfg.max_iter)
        except NoConvergence as exc:
            log.error("%s", exc)
            return EXIT_CONCLUSION
        rows = sweep(cfg.theorem, p, cp.u0, eps_list)
    _emit(format_sweep(cfg.theorem, rows), out)
    return EXIT_OK


def _eps_arg(text):
    return [float(e) for e in text.split(",") if e.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="gldual", description="Verify zero-duality-gap certificates numerically.")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "solve": (cmd_solve, "Newton solve for a critical point; writes the field"),
        "verify-t1": (cmd_verify_t1, "verify the Neumann dual certificate"),
        "verify-t2": (cmd_verify_t2, "verify the Dirichlet primal-dual certificate"),
        "conjugates": (cmd_conjugates, "check closed-form conjugates at the constructed point"),
        "sweep": (cmd_sweep, "hypothesis margins and determinants across epsilon (CSV)"),
    }
    for name, (fn, help_text) in commands.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="flat key = value config file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", default=None, help=f"output path (default: config 'out', ${OUT_DIR_ENV}, stdout)")
        if name == "sweep":
            sp.add_argument("--eps", type=_eps_arg, default=None, help="comma-separated epsilons, strictly decreasing")
        sp.set_defaults(func=fn)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_CONFIG
    except GLDualError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CONCLUSION


if __name__ == "__main__":
    sys.exit(main())
