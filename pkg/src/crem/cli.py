"""Command-line front end.

Subcommands: simulate-micro, simulate-macro, jacobian-check, calibrate,
gen-synthetic.  Every command reads the robot config named by --config
(default: the CREM_CONFIG environment variable), writes CSV artifacts
with a '# schema=1' header, and prints a one-line JSON summary to
stdout.  Exit codes: 0 success, 1 numeric or file failure, 2 usage.
Identical invocations produce byte-identical outputs.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .calibration import (
    CalibrationConfig,
    direction_reversals,
    nls_estimate,
    split_at_turning_point,
)
from .calibration import PARAM_NAMES
from .dataio import generate_synthetic, load_dataset, load_robot_config
from .differential import assemble_motion_jacobians, fd_discrepancies
from .errors import CremError
from .kinematics import crem_pose, micro_trajectory
from .model import ConfigState, UncertaintyParams

_FMT = "%.17g"
_FD_TOL = 1e-6
_FREE_TOKENS = {"k0": "k_lambda0", "ktheta": "k_lambda_theta", "kq": "k_lambda_q"}


def _fmt_row(values) -> str:
    return ",".join(_FMT % v for v in values)


def _parse_range(text: str, parser: argparse.ArgumentParser, flag: str) -> np.ndarray:
    try:
        lo_s, hi_s, n_s = text.split(":")
        lo, hi, n = float(lo_s), float(hi_s), int(n_s)
        if n < 1:
            raise ValueError("count must be >= 1")
    except ValueError as e:
        parser.error(f"{flag} expects lo:hi:count, got {text!r} ({e})")
    return np.linspace(lo, hi, n)


def _parse_k(text: str, parser: argparse.ArgumentParser) -> UncertaintyParams:
    parts = text.split(",")
    if len(parts) != 3:
        parser.error(f"--k-lambda expects three comma-separated numbers, got {text!r}")
    try:
        return UncertaintyParams(*(float(p) for p in parts))
    except (ValueError, CremError) as e:
        parser.error(f"--k-lambda: {e}")


def _load_config(args, parser: argparse.ArgumentParser):
    path = args.config or os.environ.get("CREM_CONFIG")
    if not path:
        parser.error("--config is required (or set CREM_CONFIG)")
    return load_robot_config(path)


def _emit(summary: dict) -> None:
    print(json.dumps(summary))


def cmd_simulate_micro(args, parser) -> int:
    cfg = _load_config(args, parser)
    k = _parse_k(args.k_lambda, parser)
    qs = _parse_range(args.qs_range, parser, "--qs-range")
    psi = ConfigState(math.radians(args.theta), math.radians(args.delta))
    pos, th_s, th_p = micro_trajectory(cfg.params, psi, qs, k)
    reversals = set(int(i) for i in direction_reversals(pos))
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# schema=1\n")
        fh.write("q_s,x,y,z,theta_s,theta_prime,turning_point\n")
        for i in range(len(qs)):
            fh.write(_fmt_row([
                qs[i], pos[i, 0], pos[i, 1], pos[i, 2],
                math.degrees(th_s[i]), math.degrees(th_p[i]),
            ]) + f",{1 if i in reversals else 0}\n")
    turning_qs = float(qs[min(reversals)]) if reversals else None
    _emit({
        "command": "simulate-micro",
        "rows": int(len(qs)),
        "turning_point_qs": turning_qs,
        "out": args.out,
    })
    return 0


def cmd_simulate_macro(args, parser) -> int:
    cfg = _load_config(args, parser)
    k = _parse_k(args.k_lambda, parser)
    thetas = np.radians(_parse_range(args.theta_range, parser, "--theta-range"))
    delta = math.radians(args.delta)
    rows = []
    for th in thetas:
        psi = ConfigState(float(th), delta)
        js = assemble_motion_jacobians(cfg.params, psi, args.qs, k)
        tip = crem_pose(cfg.params, psi, args.qs, k).tip
        rows.append((math.degrees(th), tip.p, js.J_M[:3, :]))
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# schema=1\n")
        cols = ["theta", "x", "y", "z"] + [
            f"jm{i + 1}{ax}" for i in range(3) for ax in "xyz"
        ]
        fh.write(",".join(cols) + "\n")
        for th_deg, p, JM in rows:
            fh.write(_fmt_row([th_deg, *p, *JM.T.ravel()]) + "\n")
    _emit({"command": "simulate-macro", "rows": len(rows), "out": args.out})
    return 0


def _parse_grid(text: str, parser) -> dict:
    axes = {}
    try:
        for part in text.split(";"):
            name, _, rng = part.partition("=")
            name = name.strip()
            if name not in ("theta", "delta", "qs"):
                raise ValueError(f"unknown grid axis {name!r}")
            lo, hi, n = rng.split(":")
            axes[name] = np.linspace(float(lo), float(hi), int(n))
    except ValueError as e:
        parser.error(f"--grid: {e}")
    return axes


def cmd_jacobian_check(args, parser) -> int:
    cfg = _load_config(args, parser)
    k = _parse_k(args.k_lambda, parser)
    axes = _parse_grid(args.grid, parser) if args.grid else {}
    thetas = axes.get("theta", np.linspace(15.0, 75.0, 5))
    deltas = axes.get("delta", np.array([0.0, 40.0, 90.0]))
    qs_fracs = axes.get("qs", np.linspace(0.1, 0.9, 5))
    keys = ["J_M", "J_mu", "J_k", "J_xi_phi", "J_xi_delta", "J_xi_qs", "d_phi"]
    worst = {key: 0.0 for key in keys}
    lines = []
    for th in thetas:
        for de in deltas:
            for fq in qs_fracs:
                psi = ConfigState(math.radians(th), math.radians(de))
                errs = fd_discrepancies(cfg.params, psi, fq * cfg.params.L, k)
                for key in keys:
                    worst[key] = max(worst[key], errs[key])
                lines.append(_fmt_row(
                    [th, de, fq * cfg.params.L] + [errs[key] for key in keys]
                ))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# schema=1\n")
            fh.write("theta,delta,q_s," + ",".join(keys) + "\n")
            fh.write("\n".join(lines) + "\n")
    ok = all(v <= _FD_TOL for v in worst.values())
    _emit({
        "command": "jacobian-check",
        "points": len(lines),
        "max_errors": {key: worst[key] for key in keys},
        "tolerance": _FD_TOL,
        "pass": ok,
    })
    return 0 if ok else 1


def cmd_calibrate(args, parser) -> int:
    cfg = _load_config(args, parser)
    k0 = _parse_k(args.init, parser)
    free = []
    for tok in args.free.split(","):
        tok = tok.strip().lower()
        if tok not in _FREE_TOKENS:
            parser.error(f"--free: unknown parameter {tok!r} (use k0,ktheta,kq)")
        free.append(_FREE_TOKENS[tok])
    measurements = load_dataset(args.data, cfg)
    split_info = None
    if args.split_turning_point:
        pre, post = split_at_turning_point(measurements)
        split_info = {"pre": len(pre), "post": len(post)}
        measurements = pre
    ccfg = CalibrationConfig(
        eta=args.eta, beta_conv=args.conv, max_iter=args.max_iter,
        free_params=tuple(free),
    )
    result = nls_estimate(measurements, cfg.params, ccfg, k0)
    if args.out_trace:
        with open(args.out_trace, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("# schema=1\n")
            fh.write("iteration,k_lambda0,k_lambda_q,k_lambda_theta,rmse_um,M_lambda\n")
            for rec in result.trace:
                fh.write(f"{rec.iteration}," + _fmt_row([
                    rec.k.k_lambda0, rec.k.k_lambda_q, rec.k.k_lambda_theta,
                    rec.rmse_um, rec.M_lambda,
                ]) + "\n")
    _emit({
        "command": "calibrate",
        "samples": len(measurements),
        "split": split_info,
        "k_star": {name: getattr(result.k_star, name) for name in PARAM_NAMES},
        "rmse_initial_um": result.trace[0].rmse_um,
        "rmse_final_um": result.trace[-1].rmse_um,
        "iterations": result.trace[-1].iteration,
        "converged": result.converged,
        "eta_flagged": result.eta_flagged,
    })
    return 0


def cmd_gen_synthetic(args, parser) -> int:
    cfg = _load_config(args, parser)
    k = _parse_k(args.k_lambda, parser)
    qs = _parse_range(args.qs_range, parser, "--qs-range")
    generate_synthetic(
        cfg.params, k, math.radians(args.theta), math.radians(args.delta),
        qs, args.noise, args.seed, path=args.out,
    )
    _emit({
        "command": "gen-synthetic",
        "rows": int(len(qs)),
        "noise": args.noise,
        "seed": args.seed,
        "out": args.out,
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crem",
        description="Equilibrium-modulation continuum robot simulation and calibration",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="robot config file (default: $CREM_CONFIG)")
        p.add_argument("--k-lambda", default="0,0,0",
                       help="uncertainty parameters k0,ktheta,kq (default 0,0,0)")

    p = sub.add_parser("simulate-micro", help="tip trajectory of an insertion sweep")
    add_common(p)
    p.add_argument("--theta", type=float, required=True, help="bend angle, deg")
    p.add_argument("--delta", type=float, default=0.0, help="bending plane, deg")
    p.add_argument("--qs-range", required=True, help="insertion sweep lo:hi:count, mm")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_simulate_micro)

    p = sub.add_parser("simulate-macro", help="tip pose and J_M along a theta sweep")
    add_common(p)
    p.add_argument("--qs", type=float, required=True, help="insertion depth, mm")
    p.add_argument("--theta-range", required=True, help="theta sweep lo:hi:count, deg")
    p.add_argument("--delta", type=float, default=0.0, help="bending plane, deg")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_simulate_macro)

    p = sub.add_parser("jacobian-check",
                       help="analytic Jacobians against finite differences on a grid")
    add_common(p)
    p.add_argument("--grid",
                   help="axes as theta=lo:hi:n;delta=lo:hi:n;qs=lo:hi:n "
                        "(theta/delta deg, qs fraction of L); default standard grid")
    p.add_argument("--out", help="per-point error CSV")
    p.set_defaults(func=cmd_jacobian_check)

    p = sub.add_parser("calibrate", help="identify uncertainty parameters from data")
    add_common(p)
    p.add_argument("--data", required=True, help="trajectory CSV")
    p.add_argument("--init", default="0,0,0", help="initial k0,ktheta,kq")
    p.add_argument("--eta", type=float, default=0.1, help="step damping")
    p.add_argument("--conv", type=float, default=1e-3,
                   help="relative M_lambda convergence threshold")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--free", default="k0,kq", help="free parameters (k0,ktheta,kq)")
    p.add_argument("--split-turning-point", action="store_true",
                   help="calibrate on the pre-turning-point subset only")
    p.add_argument("--out-trace", help="iteration trace CSV")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("gen-synthetic", help="model-generated noisy dataset")
    add_common(p)
    p.add_argument("--theta", type=float, required=True, help="bend angle, deg")
    p.add_argument("--delta", type=float, default=0.0, help="bending plane, deg")
    p.add_argument("--qs-range", required=True, help="insertion sweep lo:hi:count, mm")
    p.add_argument("--noise", type=float, default=0.0, help="position noise sigma, mm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_gen_synthetic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except CremError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
