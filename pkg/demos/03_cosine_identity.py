#!/usr/bin/env python3
"""The exact mechanism behind the correlation formula.

For a fixed configuration, averaging e^{i integral(F h)} over the 2^m
uniform loop orientations equals the product of cos(integral of F over
each loop interior) -- exactly, configuration by configuration.  This
script shows the two sides agreeing to machine precision and then the
sample average drifting toward the Gaussian prediction.
"""

import itertools
import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from fklab.gffpredict import gff_characteristic
from fklab.heightfield import cosine_product, face_weights, loop_integral
from fklab.lattice import BoundarySpec, Domain
from fklab.loops import extract_loops
from fklab.observables import TestFunction
from fklab.sampler import sample_chain

print(__doc__)

domain = Domain(8)
F = TestFunction.two_ball((4.0, 0.0), eps=1.6)
weights = face_weights(F, domain)

print("config   m   orientation average     cosine product        |diff|")
values = []
for i, cfg in enumerate(
    sample_chain(domain, BoundarySpec("free"), burn_in=64, n_samples=6, thin=4,
                 seed=3)
):
    loops = extract_loops(cfg)
    a = np.array([loop_integral(lo, F) for lo in loops])
    meet = np.nonzero(np.abs(a) > 1e-15)[0]
    target = cosine_product(loops, F)
    total = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=len(meet)):
        total += math.cos(float(np.dot(signs, a[meet])))
    avg = total / 2 ** len(meet)
    values.append(target)
    print(f"  {i}     {len(meet):2d}   {avg:+.12f}      {target:+.12f}   "
          f"{abs(avg - target):.1e}")

pred = gff_characteristic(TestFunction.two_ball((0.5, 0.0), eps=0.125))
print(f"\nGaussian prediction for the scaled two-ball pattern: {pred:.4f}")
print(f"crude 6-sample mean of the cosine product at this tiny box: "
      f"{np.mean(values):+.4f}")
print("(the campaign runs this at N up to 512 where the two agree within")
print(" a few percent; see results/acceptance and the acceptance tests)")
