#!/usr/bin/env python3
"""Time-step bias of the absorption-rate estimate for Brownian motion on (0, 1)."""
import argparse

import numpy as np

from reinforced_qsd.benchmarks import get_reference, ks_distance
from reinforced_qsd.models import make_model
from reinforced_qsd.reinforced import lambda0_estimate, run_reinforced


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dts", type=float, nargs="+", default=[1e-2, 3e-3, 1e-3, 3e-4])
    ap.add_argument("--cycles", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bridge", action="store_true", help="apply the Brownian-bridge exit check")
    args = ap.parse_args()
    model, domain = make_model("bm-interval")
    ref = get_reference("bm-interval")
    print(f"{'dt':>8} {'lambda0':>9} {'rel.err':>8} {'KS':>7}")
    for dt in args.dts:
        tr = run_reinforced(model, domain, [0.5], dt, args.cycles,
                            np.random.default_rng(args.seed), bridge_correction=args.bridge)
        lam = lambda0_estimate(tr)
        ks = ks_distance(tr.discrete_after(0.1), ref.cdf)
        print(f"{dt:8.0e} {lam:9.4f} {(lam - ref.lambda0) / ref.lambda0:+8.4f} {ks:7.4f}")


if __name__ == "__main__":
    main()
