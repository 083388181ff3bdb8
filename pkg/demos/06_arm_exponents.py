#!/usr/bin/env python3
"""Quick-look arm exponents at a modest box size.

A five-minute version of the campaign fits: one-arm and two-arm ladders
at N=96, fitted on the log-log scale.  The full-scale numbers live in
results/acceptance (N=512) and are what the acceptance gate checks.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from fklab.analysis import ScalingSeries, fit_exponent
from fklab.experiments import run_bundle
from fklab.lattice import BoundarySpec, Domain
from fklab.observables import estimate_from_values

print(__doc__)

N, R = 96, 48
ladder = [3, 6, 12, 24]
meas = [{"type": "pi1", "r": r, "R": R} for r in ladder]
meas += [{"type": "pi2", "r": r, "R": R} for r in ladder]
print(f"sampling N={N} (free bc), ladder r in {ladder}, R={R} ...")
bundle = run_bundle(
    domain=Domain(N),
    bc=BoundarySpec("free"),
    measurement_specs=meas,
    seed=2026,
    n_chains=2,
    burn_in=300,
    n_samples=250,
    thin=4,
)

for prefix, target in (("pi1", -1 / 8), ("pi2", -1 / 2)):
    ratios, est, err, batches = [], [], [], []
    for r in sorted(ladder, reverse=True):
        res = bundle.results[f"{prefix}_{r}_{R}"]
        ratios.append(r / R)
        est.append(res.estimate)
        err.append(res.stderr)
        batches.append(res.batch_means)
        print(f"  {prefix}({r:2d},{R}) = {res.estimate:.4f} +- {res.stderr:.4f}")
    s = ScalingSeries(ratios=ratios, estimates=est, stderrs=err,
                      batch_means=batches, observable=prefix)
    fit = fit_exponent(s, drop_largest=0, n_bootstrap=400)
    print(f"{prefix}: fitted slope {fit.slope:+.3f} "
          f"(CI [{-fit.ci_high:+.3f}, {-fit.ci_low:+.3f}]; "
          f"scale-invariance predicts {target:+.3f})\n")
print("expect visible finite-size bias at this tiny scale; the N-ladder in")
print("the campaign shows the drift toward the predicted slopes.")
