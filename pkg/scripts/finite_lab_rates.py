#!/usr/bin/env python3
"""Rate fits of normalised Green powers and flows on random chains.

Reports, per chain, the fitted and predicted slopes over a short window and a
long one.  Chains with clustered subleading eigenvalues fit a flatter slope
over the short window; the long window recovers the predicted rate.
"""
import argparse
import numpy as np

from reinforced_qsd.green_lab import random_chain, verify_exp_flow_bound, verify_powers_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--chains", type=int, default=50)
    ap.add_argument("--short", type=int, nargs=2, default=(10, 30))
    ap.add_argument("--long", type=int, nargs=2, default=(100, 200))
    ap.add_argument("--verbose", action="store_true", help="one line per chain")
    args = ap.parse_args()
    short_fail, long_fail, flow_fail = [], [], []
    for i in range(args.chains):
        rng = np.random.default_rng(i)
        n = int(rng.integers(2, 21))
        chain = random_chain(n, rng)
        mu = np.eye(n)[0]
        s = verify_powers_bound(chain, mu, args.short[1], tuple(args.short))
        l = verify_powers_bound(chain, mu, args.long[1], tuple(args.long))
        f = verify_exp_flow_bound(chain, mu)
        for rep, bucket in ((s, short_fail), (l, long_fail), (f, flow_fail)):
            if not rep.passed:
                bucket.append(i)
        if args.verbose:
            print(f"chain {i:2d} n={n:2d} predicted {s.predicted_rate:8.4f}  "
                  f"short {s.fitted_rate:8.4f}  long {l.fitted_rate:8.4f}  "
                  f"envelope {s.envelope_constant:7.3f}  flow {f.fitted_rate - f.predicted_rate:+.4f}")
    total = args.chains
    print(f"powers, n in {args.short}: {total - len(short_fail)}/{total} within slack {short_fail}")
    print(f"powers, n in {args.long}: {total - len(long_fail)}/{total} within slack {long_fail}")
    print(f"flow:              {total - len(flow_fail)}/{total} within slack {flow_fail}")


if __name__ == "__main__":
    main()
