"""Insertion sweep at fixed bending configuration, micro-scale tip motion.

Runs the equilibrium model over a grid of insertion depths at one
(theta, delta), once with zero actuation uncertainty and once with the
supplied uncertainty parameters, and reports the turning point and the
total micro-scale excursion.  Optionally writes both sweeps to CSV.

Usage:
    python scripts/run_micro_sweep.py --config configs/default_robot.cfg \
        --theta-deg 30 --delta-deg 0 --qs-max 40 --n 200 \
        --k0 5.0 --kq -0.1 --out sweep.csv
"""

import argparse
import sys

import numpy as np

sys.path.insert(0, "src")

from crem import (
    ConfigState,
    UncertaintyParams,
    load_robot_config,
    micro_trajectory,
    turning_point_index,
    write_trajectory,
)
from crem.dataio import TrajectoryRecord


def parse_args(argv):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/default_robot.cfg")
    ap.add_argument("--theta-deg", type=float, default=30.0)
    ap.add_argument("--delta-deg", type=float, default=0.0)
    ap.add_argument("--qs-max", type=float, default=40.0)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--k0", type=float, default=5.0)
    ap.add_argument("--ktheta", type=float, default=0.0)
    ap.add_argument("--kq", type=float, default=-0.1)
    ap.add_argument("--out", default=None, help="CSV path for the k != 0 sweep")
    return ap.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    params = load_robot_config(args.config).params
    psi = ConfigState(np.radians(args.theta_deg), np.radians(args.delta_deg))
    qs = np.linspace(0.0, min(args.qs_max, params.L), args.n)

    k_zero = UncertaintyParams()
    k = UncertaintyParams(args.k0, args.ktheta, args.kq)

    for label, ku in (("k = 0", k_zero), ("k != 0", k)):
        pos, theta_s, theta_p = micro_trajectory(params, psi, qs, ku)
        steps = np.diff(pos, axis=0)
        path_um = 1000.0 * float(np.sum(np.linalg.norm(steps, axis=1)))
        idx = turning_point_index(pos)
        print(f"{label}:")
        print(f"  tip start   {pos[0]} mm")
        print(f"  tip end     {pos[-1]} mm")
        print(f"  path length {path_um:.2f} um over q_s in [0, {qs[-1]:.1f}] mm")
        if idx is None:
            print("  no turning point (monotone sweep)")
        else:
            print(f"  turning point at sample {idx}, q_s = {qs[idx]:.3f} mm")
        print(f"  theta_s range [{np.degrees(theta_s.min()):.3f}, "
              f"{np.degrees(theta_s.max()):.3f}] deg, "
              f"theta' end {np.degrees(theta_p[-1]):.3f} deg")

    if args.out is not None:
        pos, _, _ = micro_trajectory(params, psi, qs, k)
        records = [
            TrajectoryRecord(
                t=i / 30.0, q_s=float(qs[i]),
                theta=psi.theta, delta=psi.delta,
                x=float(pos[i, 0]), y=float(pos[i, 1]), z=float(pos[i, 2]),
            )
            for i in range(len(qs))
        ]
        write_trajectory(args.out, records)
        print(f"wrote {len(records)} rows to {args.out}")


if __name__ == "__main__":
    main()
