"""Finite-difference validation of every analytic Jacobian over a grid.

Checks the actuation, uncertainty, parameter, and body-twist Jacobians
plus the equilibrium gradients against central differences at each grid
point and prints the worst mismatch per block.  Exit status 1 when any
block exceeds the tolerance.

Usage:
    python scripts/run_jacobian_grid.py --config configs/default_robot.cfg \
        --k0 5.0 --kq -0.1 --tol 1e-6
"""

import argparse
import sys

import numpy as np

sys.path.insert(0, "src")

from crem import ConfigState, UncertaintyParams, fd_discrepancies, load_robot_config

BLOCKS = ("J_M", "J_mu", "J_k", "J_xi_phi", "J_xi_delta", "J_xi_qs", "d_phi")


def parse_args(argv):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/default_robot.cfg")
    ap.add_argument("--theta-deg", type=float, nargs="+",
                    default=[15, 30, 45, 60, 75])
    ap.add_argument("--delta-deg", type=float, nargs="+", default=[0, 40, 90])
    ap.add_argument("--qs-frac", type=float, nargs="+",
                    default=[0.1, 0.3, 0.5, 0.7, 0.9])
    ap.add_argument("--k0", type=float, default=0.0)
    ap.add_argument("--ktheta", type=float, default=0.0)
    ap.add_argument("--kq", type=float, default=0.0)
    ap.add_argument("--h", type=float, default=1e-6)
    ap.add_argument("--tol", type=float, default=1e-6)
    return ap.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    params = load_robot_config(args.config).params
    k = UncertaintyParams(args.k0, args.ktheta, args.kq)

    worst = {b: (0.0, None) for b in BLOCKS}
    n = 0
    for th_deg in args.theta_deg:
        for de_deg in args.delta_deg:
            for fq in args.qs_frac:
                psi = ConfigState(np.radians(th_deg), np.radians(de_deg))
                d = fd_discrepancies(params, psi, fq * params.L, k, h=args.h)
                n += 1
                for b in BLOCKS:
                    if d[b] > worst[b][0]:
                        worst[b] = (d[b], (th_deg, de_deg, fq))

    print(f"{n} grid points, h = {args.h:g}, tol = {args.tol:g}")
    bad = 0
    for b in BLOCKS:
        err, where = worst[b]
        flag = "ok" if err <= args.tol else "FAIL"
        if err > args.tol:
            bad += 1
        print(f"  {b:<11} worst {err:.3e} at theta={where[0]:g} deg, "
              f"delta={where[1]:g} deg, q_s={where[2]:g} L  [{flag}]")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
