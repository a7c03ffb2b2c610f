"""
Walks in the random environment
===============================

The walk steps to a neighbor with probability proportional to conductance.
Exit times and exit positions from a box have exact linear-algebra answers,
which the Monte Carlo agrees with.
"""
import numpy as np

from gffnet import (GridSpec, Walker, WalkStream, build_network, chi, cmp_distance, exact_exit_expectation,
                    harmonic_measure, rescaled_path, sample_field, simulate_until_exit)
from gffnet.harness.experiments import interior_mask
from gffnet.resistance import hitting_probability

grid = GridSpec.cells(4, 10, 10, origin=(-5, -5))
net = build_network(sample_field(grid, seed=3), gamma=0.2)
dom = interior_mask(net)
x0 = net.nearest_vertex((0, 0))

##############################################################################
# Mean exit time: 50k simulated walks against one sparse solve.
batch = Walker(net, dom).batch(x0, seed=1, replicas=50_000)
m, se = batch.mean_steps()
print("Monte Carlo %.2f +- %.2f   exact %.2f" % (m, se, exact_exit_expectation(net, dom, x0)))

##############################################################################
# Exit position: empirical frequencies vs the harmonic measure.
law = harmonic_measure(net, dom, x0)
verts, counts = np.unique(batch.exits, return_counts=True)
emp = dict(zip(verts.tolist(), counts / batch.exits.size))
tv = 0.5 * sum(abs(emp.get(k, 0) - law.get(k, 0)) for k in set(emp) | set(law))
print("total variation to the harmonic measure: %.4f" % tv)

##############################################################################
# Leaving through the left side, from three resistances.
li = net.lattice_index
left = np.nonzero(~dom & (li[:, 0] == li[:, 0].min()))[0]
rest = np.nonzero(~dom & (li[:, 0] != li[:, 0].min()))[0]
print("P(exit left) = %.4f   frequency %.4f" % (hitting_probability(net, x0, left, rest),
                                                np.isin(batch.exits, left).mean()))

##############################################################################
# Paths at successive scales, with time rescaled by chi_n.
paths = {}
for n in (3, 4):
    g = GridSpec.centered(n, 0.25, zeta=2)
    nt = build_network(sample_field(g, seed=9), 0.2)
    rec = simulate_until_exit(nt, nt.nearest_vertex((0, 0)), interior_mask(nt), WalkStream(9, 0), keep_trace=True)
    paths[n] = rescaled_path(rec, nt, n, 2, 0.2)
    print("n=%d  steps %d  chi %.1f  rescaled duration %.4f" % (n, rec.steps, chi(n, 2, 0.2), paths[n].duration))
print("curve distance between the two scales: %.4f" % cmp_distance(paths[3], paths[4]))
