"""CSL vs multilevel Krylov MK(8,4,2) and MK(6,4,2), constant or wedge wavenumber.

Usage: python3 scripts/run_table_mk.py [--wedge] [--full] [--out results/table2]
"""
import argparse
import sys

from helmtl.cli import main

if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--wedge", action="store_true", help="three-layer wavenumber, alpha=1.1")
    p.add_argument("--full", action="store_true")
    p.add_argument("--out", default=None)
    a = p.parse_args()
    cmd = "wedge" if a.wedge else "table-mk"
    out = a.out or ("results/table3" if a.wedge else "results/table2")
    sys.exit(main(["-v", cmd, "--out", out] + (["--full"] if a.full else [])))
