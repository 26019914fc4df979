"""Command-line driver: run, converge, validate-history.

Exit codes: 0 success, 1 acceptance/strict/guard failure, 2 configuration
error. All file outputs are deterministic for a fixed config (wall-clock
timings are printed, never written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import config as cfg
from .epidemic import write_field_snapshot
from .errors import ConfigurationError, GuardViolationError, HarnessError
from .harness import ConvergenceStudy, convergence_study, reference_trajectory, write_order_table
from .integrator import run, validate_history_compatibility
from .scalar import method_of_steps

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def _out_path(args, name):
    if name is None:
        return None
    path = os.path.join(args.out, name) if not os.path.isabs(name) else name
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    return path


def _write_trajectory(path, problem, result, plan):
    """t plus raw components for small states, per-block aggregates for large."""
    dim = result.states[0].size
    blocks = problem.blocks or {"u": slice(0, dim)}
    with open(path, "w", encoding="utf-8") as fh:
        if dim <= 16:
            names = ",".join("u%d" % i for i in range(dim))
            fh.write("t,%s\n" % names)
            for t, s in zip(result.times, result.states):
                fh.write("%s,%s\n" % (repr(float(t)), ",".join(repr(float(v)) for v in s)))
        else:
            cols = []
            for b in blocks:
                cols += ["mass_%s" % b, "min_%s" % b, "max_%s" % b]
            fh.write("t,%s\n" % ",".join(cols))
            w = problem.mass_weights
            for t, s in zip(result.times, result.states):
                vals = []
                for b, sl in blocks.items():
                    seg = s[sl]
                    mass = float(np.dot(w[sl], seg)) if w is not None else float(seg.sum())
                    vals += [mass, float(seg.min()), float(seg.max())]
                fh.write("%s,%s\n" % (repr(float(t)), ",".join(repr(v) for v in vals)))


def _write_guard_series(path, result):
    rep = result.report
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,min_component,mass_rel_drift\n")
        for t, mn, dr in zip(rep.times, rep.min_series, rep.drift_series):
            fh.write("%s,%s,%s\n" % (repr(float(t)), repr(float(mn)), repr(float(dr))))


def _write_report(path, plan, result, extra=None):
    rep = result.report.to_dict()
    rep["model"] = plan["model"]
    rep["N"] = plan.get("N")
    rep["T"] = plan["T"]
    if not np.isfinite(rep["min_component"]):
        rep["min_component"] = None
    if extra:
        rep.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rep, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_run(args):
    plan = cfg.load_config(args.config)
    if "N" not in plan:
        raise ConfigurationError("config.N: required by the run command")
    if args.dry_run:
        print(json.dumps(plan, indent=2, sort_keys=True, default=str))
        return EXIT_OK
    problem = cfg.build_problem(plan)
    guard = cfg.build_guard(plan)
    expm = cfg.build_expm(plan)
    try:
        result = run(problem, plan["N"], guard=guard, expm_cfg=expm,
                     phi_half_mode=plan["history"]["half_mode"],
                     snapshot_stride=plan["output"]["stride"])
    except GuardViolationError as exc:
        print("guard abort: %s" % exc, file=sys.stderr)
        return EXIT_FAIL
    _write_trajectory(_out_path(args, plan["output"]["trajectory"]), problem, result, plan)
    _write_report(_out_path(args, plan["output"]["report"]), plan, result)
    if plan["output"]["guard_series"]:
        _write_guard_series(_out_path(args, plan["output"]["guard_series"]), result)
    if plan["model"] == "epidemic" and plan["output"]["fields"]:
        from .epidemic import Grid2D
        grid = Grid2D(nx=plan["grid"]["nx"], ny=plan["grid"]["ny"],
                      Lx=plan["grid"]["Lx"], Ly=plan["grid"]["Ly"])
        write_field_snapshot(_out_path(args, plan["output"]["fields"]), grid,
                             result.states[-1])
    print("run complete: %d steps, min component %.3e, mass drift %.3e, %.2fs"
          % (result.report.steps, result.report.min_component,
             result.report.max_mass_drift, result.report.wall_time_seconds))
    return EXIT_OK


def cmd_converge(args):
    plan = cfg.load_config(args.config)
    if "N_list" not in plan or "N_ref" not in plan:
        raise ConfigurationError("config.N_list and config.N_ref: required by converge")
    if args.dry_run:
        print(json.dumps(plan, indent=2, sort_keys=True, default=str))
        return EXIT_OK
    problem = cfg.build_problem(plan)
    expm = cfg.build_expm(plan)
    study = ConvergenceStudy(problem=problem, N_list=plan["N_list"],
                             N_ref=plan["N_ref"], expm_cfg=expm,
                             phi_half_mode=plan["history"]["half_mode"],
                             threads=args.threads)
    oracle = None
    if plan["model"] == "scalar" and plan["delay"]["mode"] in ("point", "trapezoid-half"):
        oracle = method_of_steps(problem.window, plan["delay"]["mode"],
                                 problem.history, problem.horizon)
    try:
        reference = reference_trajectory(problem, plan["N_ref"], expm,
                                         plan["history"]["half_mode"], oracle)
    except HarnessError as exc:
        print("reference rejected: %s" % exc, file=sys.stderr)
        return EXIT_FAIL
    table = convergence_study(study, reference=reference)
    path = _out_path(args, plan["output"]["order_table"])
    write_order_table(path, table)
    for r in table.rows:
        order = "%.3f" % r.order if not np.isnan(r.order) else (r.flag or "-")
        print("N=%5d  tau=%.6g  error=%.6e  order=%s" % (r.N, r.tau, r.error, order))
    if args.check:
        lo, hi = plan["order_window"]
        orders = table.orders()
        ok = (len(orders) >= min(3, len(plan["N_list"]) - 1)
              and all(lo <= p <= hi for p in orders[-3:])
              and not any(r.flag == "failed" for r in table.rows))
        if not ok:
            print("order check FAILED: window [%g, %g], observed %s"
                  % (lo, hi, ["%.3f" % p for p in orders]), file=sys.stderr)
            return EXIT_FAIL
        print("order check passed: window [%g, %g]" % (lo, hi))
    return EXIT_OK


def cmd_validate_history(args):
    plan = cfg.load_config(args.config)
    if args.dry_run:
        print(json.dumps(plan, indent=2, sort_keys=True, default=str))
        return EXIT_OK
    problem = cfg.build_problem(plan)
    N = plan.get("N", 64)
    report = validate_history_compatibility(
        problem, N, thresholds=(plan["validate"]["r1_threshold"],
                                plan["validate"]["r2_threshold"]))
    print("r1 = %.6e (threshold %.1e) -> %s" % (report["r1"], report["r1_threshold"],
                                                "ok" if report["r1_ok"] else "violated"))
    print("r2 = %.6e (threshold %.1e) -> %s" % (report["r2"], report["r2_threshold"],
                                                "ok" if report["r2_ok"] else "violated"))
    if args.strict and not (report["r1_ok"] and report["r2_ok"]):
        return EXIT_FAIL
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="magnusdde",
        description="Exponential Magnus-type integrator for delay evolution equations")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=".", help="directory for output files")
        p.add_argument("--dry-run", action="store_true",
                       help="validate config, print the resolved plan, write nothing")
        p.add_argument("--threads", type=int, default=1,
                       help="parallel runs inside a study")

    p_run = sub.add_parser("run", help="integrate one configuration")
    common(p_run)
    p_conv = sub.add_parser("converge", help="grid-refinement order study")
    common(p_conv)
    p_conv.add_argument("--check", action="store_true",
                        help="exit 1 unless observed orders sit in the window")
    p_val = sub.add_parser("validate-history", help="t=0 compatibility residuals")
    common(p_val)
    p_val.add_argument("--strict", action="store_true",
                       help="exit 1 when a residual exceeds its threshold")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "converge":
            return cmd_converge(args)
        return cmd_validate_history(args)
    except ConfigurationError as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
