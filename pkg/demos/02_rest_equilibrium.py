"""Solve the point-mass rest scenario and watch the homotopy tighten.

A unit mass must simply stay put on the ground for 0.6 s.  The solver
has to discover that a constant gravity-balancing normal force is
optimal while the complementarity relaxation parameter delta is driven
from 1 down to 1e-3.  We start from a slightly perturbed feasible
iterate so the run stays short; see the monoped demo for a cold start.
"""

import os

import numpy as np

from cito import ocp, scp
from cito.ocp import Transcription, load_scenario

ASSETS = os.path.join(os.path.dirname(ocp.__file__), "assets")
scenario = load_scenario(os.path.join(ASSETS, "pointmass_rest.json"))
tr = Transcription(scenario)
lay = tr.layout

# hand-built feasible rest iterate: constant normal force m g, consistent
# multiple-shooting chain, then a small random perturbation
z0 = np.zeros(lay.dim)
weight = scenario.model.links[0].mass * scenario.model.gravity
for k in range(lay.N - 1):
    u = np.zeros(2 * lay.n_u)
    u[lay.n_a + 1] = weight
    u[lay.n_u + lay.n_a + 1] = weight
    z0[lay.u(k)] = u
    z0[lay.s(k)] = scenario.s_nominal
for k in range(lay.N - 1):
    end = tr.discretizer.propagate(z0[lay.xp(k)], z0[lay.u(k)].reshape(2, -1),
                                   float(z0[lay.s(k)][0]))
    z0[lay.xm(k + 1)] = end
    z0[lay.xp(k + 1)[:]] = end
z0 += 1e-3 * np.random.default_rng(0).standard_normal(lay.dim)

z, history, status = scp.solve(scenario, scp.SCPConfig(max_iters=300), z0=z0)
print(f"status: {status} after {len(history) - 1} iterations")
print(f"{'iter':>4s} {'delta':>10s} {'J_px':>10s} {'J_ep':>10s}")
for j, rec in enumerate(history):
    if j % 5 == 0 or j == len(history) - 1:
        print(f"{j:4d} {rec.delta:10.3e} {rec.j_px:10.3e} {rec.j_ep:10.3e}")

arrs = ocp.trajectory_arrays(scenario, z)
print(f"max |velocity| over all nodes: {np.max(np.abs(arrs['v_minus'])):.2e} m/s")
