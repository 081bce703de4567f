"""Measured layer-wise errors against the theoretical bound for catalog targets.

For every target and p, builds a table-decoder net and prints one line per
level: measured ||f - Phi_l||_p, the bound, and their ratio.  Targets with a
Hoelder constant use the geometric-rate bound, the rest the modulus bound.

    python3 scripts/bound_tables.py --d 1 --N 2 --L 6
"""

import argparse

from layerwise.analysis import Holder, ModulusPlan, verify_bounds
from layerwise.geometry import PartitionConfig
from layerwise.multigrade import build
from layerwise.targets import get_target


def table(name, d, N, L, p, plan):
    spec = get_target(name, d)
    net = build(spec.target, PartitionConfig(d, N, L), p)
    mode = Holder(*spec.holder) if spec.holder else "modulus"
    return verify_bounds(spec.target, net, p, mode, plan=plan)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--targets", default="ramp,average,indicator,tent,sine,holder")
    parser.add_argument("--d", type=int, default=1)
    parser.add_argument("--N", type=int, default=2)
    parser.add_argument("--L", type=int, default=6)
    parser.add_argument("--ps", default="1,2")
    parser.add_argument("--csv", help="also write all rows to this CSV file")
    args = parser.parse_args()
    plan = ModulusPlan(points=1 << 14)
    lines = ["target,p,mode,level,measured_error,bound,ratio,passed"]
    for name in args.targets.split(","):
        for p in (float(v) for v in args.ps.split(",")):
            report = table(name, args.d, args.N, args.L, p, plan)
            print(f"\n{name}  p={p:g}  {report.mode}")
            print(f"{'level':>5} {'measured':>12} {'bound':>12} {'ratio':>8}")
            for r in report.rows:
                ratio = r.measured_error / r.bound if r.bound > 0 else float("nan")
                print(f"{r.level:>5} {r.measured_error:12.4e} {r.bound:12.4e} {ratio:8.3f}{'' if r.passed else '  FAIL'}")
                lines.append(f"{name},{p},{report.mode},{r.level},{r.measured_error!r},{r.bound!r},{ratio!r},{r.passed}")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
