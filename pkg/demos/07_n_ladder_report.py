#!/usr/bin/env python3
"""N-ladder exponent report: the double-limit trend made visible.

Exponent extraction fits the scale-to-scale series at the largest box and
reports the trend along the box ladder so the gap between the finite-size
slope and the scale-invariant prediction is in the open.  Reads the
campaign artifacts and writes results/acceptance/n_ladder_report.json.
"""

import json
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from fklab.analysis import ScalingSeries, fit_exponent, fit_report
from fklab.observables import estimate_from_values

RESULTS = os.path.join("results", "acceptance")

BOXES = {
    128: ("c9_n128_arms", 32, [1, 2, 4, 8, 16]),
    256: ("c10_n256_arms", 64, [2, 4, 8, 16, 32]),
    512: ("c1_n512_free", 128, [4, 8, 16, 32, 64]),
}


def chains(series, name):
    lengths = series[f"_chain_lengths_{name}"]
    return np.split(series[name], np.cumsum(lengths)[:-1])


def ladder_fit(series, prefix, ladder, R, N):
    ratios, est, err, batches = [], [], [], []
    for r in sorted(ladder, reverse=True):
        res = estimate_from_values(chains(series, f"{prefix}_{r}_{R}"))
        ratios.append(r / R)
        est.append(res.estimate)
        err.append(res.stderr)
        batches.append(res.batch_means)
    s = ScalingSeries(ratios=ratios, estimates=est, stderrs=err,
                      batch_means=batches, observable=prefix, N=N)
    return fit_exponent(s, drop_largest=0, n_bootstrap=500, seed=N)


def main():
    report = {}
    for prefix, target in (("pi1", -1 / 8), ("pi2", -1 / 2)):
        fits = {}
        for N, (bundle, R, ladder) in sorted(BOXES.items()):
            path = os.path.join(RESULTS, bundle, "series.npz")
            if not os.path.exists(path):
                print(f"missing {path}; run the campaign first")
                return 1
            series = np.load(path)
            fits[N] = ladder_fit(series, prefix, ladder, R, N)
            print(f"{prefix} at N={N:4d} (R={R}): slope {fits[N].slope:+.4f} "
                  f"(CI [{-fits[N].ci_high:+.4f}, {-fits[N].ci_low:+.4f}])")
        report[prefix] = fit_report(fits)
        report[prefix]["scale_invariant_slope"] = target
        print(f"{prefix}: trend {['%.4f' % s for s in report[prefix]['slope_trend']]}"
              f" toward {target:+.4f}\n")
    out = os.path.join(RESULTS, "n_ladder_report.json")
    with open(out, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
