"""CSL vs two-level (TL-1/2/3) iteration counts on the unit square.

Usage: python3 scripts/run_table_csl_tl.py [--full] [--out results/table1]
"""
import argparse
import sys

from helmtl.cli import main

if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--full", action="store_true", help="add k=80 and k=100")
    p.add_argument("--out", default="results/table1")
    a = p.parse_args()
    sys.exit(main(["-v", "table-csl-tl", "--out", a.out] + (["--full"] if a.full else [])))
