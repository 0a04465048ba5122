"""End-to-end monoped hop: solve, audit, and plot.

Solves the bundled two-link monoped scenario (15 grid nodes, 10
integration substeps per interval) from the naive straight-line
initialization, replays the result at 10x resolution to audit
penetration and integral complementarity, and writes the gait, contact,
and convergence plots as SVG files.

This is the long demo: expect a few minutes of solve time.
Equivalent CLI session:

    cito solve monoped_hop --out out/
    cito check out/monoped_hop_trajectory.json
    cito plot out/monoped_hop_trajectory.json --kind gait --out out/
"""

import os
import time

import numpy as np

from cito import cli, ocp, scp, verifier
from cito.ocp import load_scenario

ASSETS = os.path.join(os.path.dirname(ocp.__file__), "assets")
scenario = load_scenario(os.path.join(ASSETS, "monoped_hop.json"))

t0 = time.perf_counter()
z, history, status = scp.solve(scenario, scp.SCPConfig())
wall = time.perf_counter() - t0
print(f"status: {status} after {len(history) - 1} iterations ({wall:.0f} s)")

report = verifier.replay_check(z, scenario.model, scenario)
for name, value, threshold, ok in report.check_rows():
    print(f"{name:>18s}: {value:10.3e}  (tol {threshold:.1e})  {'ok' if ok else 'FAIL'}")

out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out")
os.makedirs(out, exist_ok=True)
data = cli.trajectory_to_dict(z, history, status, scenario, scp.SCPConfig())
traj = os.path.join(out, "monoped_hop_trajectory.json")
cli.write_trajectory(traj, data)
print(f"trajectory: {traj}")

for kind, fn in cli._PLOTTERS.items():
    fig = fn(data, np.asarray(z), scenario, 1e-6)
    path = os.path.join(out, f"monoped_hop_{kind}.svg")
    fig.savefig(path, format="svg")
    print(f"plot: {path}")
