"""
Around and across an annulus
============================

An annulus has two natural resistances: across (inner boundary to outer
boundary) and around (contours that wind once around the hole).  They are
reciprocal duals of each other.  The second half uses them to bound what
removing the hole costs.
"""
import numpy as np

from gffnet import GridSpec, annulus_views, around_dual, build_network, sample_field, solve_two_terminal
from gffnet.harness.experiments import resdif_instance
from gffnet.resistance import around_resistance, current_through_set

grid = GridSpec.centered(4, 0.5, zeta=2)
net = build_network(sample_field(grid, seed=5), gamma=0.3)

##############################################################################
# Annulus between sup-radii 1/8 and 3/8 around the origin.
view = annulus_views(net, (0, 0), 0.125, 0.375)
across = solve_two_terminal(view.across).resistance
around = around_resistance(view.around)
print("across %.5f   around %.5f" % (across, around))
print("around x dual-across = %.12f" % (around * solve_two_terminal(around_dual(view.around)).resistance))

##############################################################################
# The slit that cuts the annulus open is bookkeeping only.
for slit in ("+x", "-y"):
    print("slit %s: around = %.12f" % (slit, around_resistance(annulus_views(net, (0, 0), 0.125, 0.375, slit).around)))

##############################################################################
# How much of the unit current is forced through the middle of the box?
sol = solve_two_terminal(net)
mid = np.nonzero(np.max(np.abs(net.midpoints), axis=1) < 0.1)[0]
print("current that must cross the central square: %.4f" % current_through_set(net, sol, mid))

##############################################################################
# Removing the hole of an annulus raises R by at most the energy in the
# annulus plus a rerouting cost along its contours.
for seed in range(5):
    g = resdif_instance(4, 2, 0.2, seed)
    print("seed %d   R^D - R = %.5f   bound = %.5f" % (seed, g.lhs, g.rhs))
