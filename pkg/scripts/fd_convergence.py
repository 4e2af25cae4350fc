#!/usr/bin/env python3
"""Finite-difference eigenvalue and density errors against the closed forms, by grid size."""
import argparse

import numpy as np

from reinforced_qsd.benchmarks import fd_eigensolver, get_reference
from reinforced_qsd.models import make_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", type=int, nargs="+", default=[32, 64, 128, 256, 512])
    args = ap.parse_args()
    for name in ("bm-interval", "bm-disk"):
        ref = get_reference(name)
        model, domain = make_model(name)
        print(f"{name}: lambda0 = {ref.lambda0:.12f}")
        print(f"{'grid':>6} {'lambda0 rel.err':>16} {'order':>6} {'density err':>12}")
        prev = None
        for g in args.grids:
            sol = fd_eigensolver(model, domain, g)
            rel = abs(sol.lambda0 - ref.lambda0) / ref.lambda0
            err = np.abs(sol.density - ref.density(sol.grid)).max()
            order = "" if prev is None else f"{np.log2(prev / rel):6.2f}"
            print(f"{g:6d} {rel:16.3e} {order:>6} {err:12.3e}")
            prev = rel
        print()
    print("constant drift c on (0,1): lambda0 = pi^2/2 + c^2/2")
    for c in (0.0, 0.5, 1.0, 2.0, 5.0):
        sol = fd_eigensolver(*make_model("drifted-interval", {"c": c}), 256)
        exact = np.pi ** 2 / 2 + c * c / 2
        print(f"  c={c:4.1f}  fd={sol.lambda0:.6f}  exact={exact:.6f}  upwind={sol.upwind}")


if __name__ == "__main__":
    main()
