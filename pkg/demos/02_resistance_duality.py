"""
Crossing resistance and planar duality
======================================

Edges carry resistance exp(gamma * phi) at their midpoints.  The left-right
resistance of a rectangle and the top-bottom resistance of its dual, which has
the reciprocal resistances, multiply to one for every sample.
"""
import numpy as np

from gffnet import GridSpec, build_network, dual_network, rectangle_network, sample_field, solve_two_terminal
from gffnet.resistance import path_decomposition

##############################################################################
# With unit resistances the W x H rectangle (terminal columns included)
# has resistance W / (H + 1).
for W, H in [(1, 1), (3, 2), (8, 5)]:
    r = solve_two_terminal(rectangle_network(W, H)).resistance
    print("W=%d H=%d  R=%.12f  W/(H+1)=%.12f" % (W, H, r, W / (H + 1)))

##############################################################################
# A random environment: 9 x 8 cells at n = 4, gamma = 0.2.
grid = GridSpec.cells(4, 9, 8, origin=(-4, -4))
net = build_network(sample_field(grid, seed=11), gamma=0.2)
sol = solve_two_terminal(net)
dual = solve_two_terminal(dual_network(net))
print("R = %.6f   R* = %.6f   R R* - 1 = %.2e" % (sol.resistance, dual.resistance,
                                                   sol.resistance * dual.resistance - 1))

##############################################################################
# The unit current splits into weighted crossing paths whose energies add
# back up to R.
paths = path_decomposition(net, sol)
print("%d paths, heaviest weight %.3f, energy %.10f" % (len(paths.paths), paths.weights.max(), paths.energy()))

##############################################################################
# Over many seeds the self-dual rectangle is below resistance 1 half the time.
R = np.array([solve_two_terminal(build_network(sample_field(grid, seed=s), 0.2)).resistance
              for s in range(400)])
print("P(R <= 1) = %.3f over %d samples" % (np.mean(R <= 1), R.size))
