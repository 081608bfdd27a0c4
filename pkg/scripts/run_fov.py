"""Field of values of A A_eps^-1 and A B_eps for the 1D impedance problem.

Writes per-case CSV polygons and one SVG per (shift, matrix) into --out.
Usage: python3 scripts/run_fov.py [--full] [--rule k32] [--out results/fov]
"""
import argparse
import sys

from helmtl.cli import main

if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--full", action="store_true", help="include k=60")
    p.add_argument("--rule", choices=("k2", "k32"), default="k2")
    p.add_argument("--out", default="results/fov")
    a = p.parse_args()
    argv = ["-v", "fov", "--eps-beta", "1,5", "--coarse-rule", a.rule, "--out", a.out]
    sys.exit(main(argv + (["--full"] if a.full else [])))
