"""
Sampling the white-noise field
==============================

The field at scale n is a sum of n independent dyadic layers.  This demo draws
one sample, checks the pointwise variance against n log 2 and shows that the
layers add up exactly.
"""
import math

import numpy as np

from gffnet import GridSpec, KernelSpec, analytic_covariance, oscillation, sample_field

##############################################################################
# A box of half-width 1/2 at scale n = 4.  ``zeta`` defaults to ceil(sqrt(n)).
grid = GridSpec.centered(4, 0.5)
phi = sample_field(grid, seed=2024)
print("grid", grid.refined_shape, "spacing", grid.spacing, "zeta", grid.zeta)
print("field range %.3f .. %.3f" % (phi.values.min(), phi.values.max()))

##############################################################################
# Variance across seeds at the center: should be close to 4 log 2 = 2.77.
center = np.array([sample_field(grid, seed=s).at([(0, 0)])[0] for s in range(2000)])
print("empirical variance %.3f   target %.3f" % (center.var(), 4 * math.log(2)))

##############################################################################
# The covariance decays like a logarithm of the distance until the
# coarsest layer forgets it.
for d in (0.01, 0.05, 0.1, 0.3, 1.0, 3.0):
    print("  |x-y| = %-5g  cov = %.4f" % (d, analytic_covariance((0, 0), (d, 0), 0, 4)))

##############################################################################
# Same seed, split ranges: (0,2) + (2,4) reproduces (0,4) to rounding.
lo = sample_field(grid, KernelSpec(2, 0), seed=7)
hi = sample_field(grid, KernelSpec(4, 2), seed=7)
full = sample_field(grid, KernelSpec(4, 0), seed=7)
print("max |lo + hi - full| =", np.abs(lo.values + hi.values - full.values).max())

##############################################################################
# Oscillation over windows of growing size.
for eps in (0.02, 0.05, 0.1, 0.2):
    print("  osc(%.2f) = %.3f" % (eps, oscillation(phi, eps)))
