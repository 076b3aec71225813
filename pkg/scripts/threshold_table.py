#!/usr/bin/env python3
"""Emit the closed-form threshold table and report the zero-temperature
breaking point.

Usage: python scripts/threshold_table.py [--kappa-max 120] [--out thresholds.csv]
"""

import argparse

from pottsglass import cli, rate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--kappa-max", type=int, default=120)
    ap.add_argument("--out", default="thresholds.csv")
    args = ap.parse_args()

    code = cli.main(["thresholds", "--kappa-max", str(args.kappa_max), "--out", args.out])
    if code:
        raise SystemExit(code)

    first = rate.min_breaking_colors()
    th = rate.high_temperature_threshold(first)
    zt = rate.zero_temperature_bounds(first)
    print(f"zero-temperature breaking first certified at kappa = {first}")
    print(f"  balanced GSE upper bound  {zt.balanced_upper:.6f}")
    print(f"  unconstrained lower bound {zt.unconstrained_lower:.6f}")
    print(f"  high-temperature threshold there: beta = {th.beta:.6f} ({th.branch})")


if __name__ == "__main__":
    main()
