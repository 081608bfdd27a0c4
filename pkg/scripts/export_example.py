"""Export one small 2D system (S, M, N, A, A_eps, P, A_H) as MatrixMarket and
check the coarse matrix from the files alone."""
import sys

import numpy as np

from helmtl.experiments import export_system, load_system

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "results/export"
    manifest = export_system(out, k=10.0, beta=1.0, dimension=2, size=9, coarsening_steps=1)
    _, mats = load_system(out)
    A, P, AH = mats["A"], mats["P"], mats["A_H"]
    err = abs(AH - P.conj().T @ A @ P).max() / abs(AH).max()
    print(f"n_fine={manifest['n_fine']} n_coarse={manifest['n_coarse']} "
          f"|A_H - P*AP|/|A_H| = {err:.1e}")
    sys.exit(0 if np.isfinite(err) and err < 1e-12 else 1)
