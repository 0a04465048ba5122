"""Command-line front end: solve, check, simulate, and plot.

Trajectory files are JSON with a metadata block (model and scenario
hashes, solver configuration, version string) and the full set of
solution arrays.  Deterministic mode (fixed seed, fixed jobs) produces
byte-identical files across runs on the same platform, so no wall-clock
quantities are stored in the trajectory file itself; timing lives in the
iteration log written next to it.
"""

import hashlib
import json
import os
import subprocess
import sys
from dataclasses import asdict

import click
import numpy as np

from . import __version__, multibody, ocp, scp, verifier

_OUT_ENV = "CITO_OUT_DIR"


# ---------------------------------------------------------------------------
# trajectory files


def _canonical_hash(data):
    blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _describe():
    """Best-effort version string: git describe if in a checkout, else the
    package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return f"cito-{__version__}"


def trajectory_to_dict(z, history, status, scenario, config):
    """Serialize one solve result; arrays are grouped per node/interval."""
    tr = ocp.get_transcription(scenario)
    lay = tr.layout
    z = np.asarray(z, dtype=float)
    S = [float(z[lay.s(k)][0]) for k in range(lay.N - 1)]
    scenario_d = ocp.scenario_to_dict(scenario)
    return {
        "metadata": {
            "format": "cito-trajectory-v1",
            "version": _describe(),
            "model_hash": _canonical_hash(multibody.model_to_dict(scenario.model)),
            "scenario_hash": _canonical_hash(scenario_d),
            "config": asdict(config),
            "status": status,
        },
        "scenario": scenario_d,
        "node_times": np.concatenate([[0.0], np.cumsum(S)]).tolist(),
        "x_minus": [z[lay.xm(k)].tolist() for k in range(lay.N)],
        "x_plus": [z[lay.xp(k)].tolist() for k in range(lay.N)],
        "U": [z[lay.u(k)].tolist() for k in range(lay.N - 1)],
        "S": S,
        "Phi": [z[lay.phi(k)].tolist() for k in range(lay.N)],
        "Gamma": [z[lay.gam(k)].tolist() for k in range(lay.N)],
        "history": [
            {"delta": r.delta, "j_px": r.j_px, "j_ep": r.j_ep, "cost": r.cost}
            for r in history
        ],
    }


def trajectory_from_dict(data):
    """Rebuild (z, scenario, metadata) from a trajectory dict."""
    for req in ("metadata", "scenario", "x_minus", "x_plus", "U", "S", "Phi", "Gamma"):
        if req not in data:
            raise ValueError(f"trajectory file missing key {req!r}")
    scenario = ocp.scenario_from_dict(data["scenario"])
    lay = ocp.get_transcription(scenario).layout
    z = np.zeros(lay.dim)
    for k in range(lay.N):
        z[lay.xm(k)] = data["x_minus"][k]
        z[lay.xp(k)] = data["x_plus"][k]
        z[lay.phi(k)] = data["Phi"][k]
        z[lay.gam(k)] = data["Gamma"][k]
    for k in range(lay.N - 1):
        z[lay.u(k)] = data["U"][k]
        z[lay.s(k)] = data["S"][k]
    return z, scenario, data["metadata"]


def write_trajectory(path, data):
    with open(path, "w") as f:
        json.dump(data, f, indent=1, sort_keys=True)
        f.write("\n")


def load_trajectory(path):
    with open(path) as f:
        return json.load(f)


# ---------------------------------------------------------------------------
# bundled assets

_ASSET_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "assets")


def _resolve_scenario(name_or_path):
    if os.path.exists(name_or_path):
        return name_or_path
    bundled = os.path.join(_ASSET_DIR, name_or_path + ".json")
    if os.path.exists(bundled):
        return bundled
    raise click.ClickException(f"no such scenario file or bundled scenario: {name_or_path}")


def _out_dir(explicit):
    return explicit or os.environ.get(_OUT_ENV, ".")


def _load_scenario_or_exit(path):
    try:
        return ocp.load_scenario(path)
    except json.JSONDecodeError as e:
        click.echo(f"error: scenario parse failed: {e}", err=True)
        sys.exit(2)
    except (ValueError, KeyError, TypeError) as e:
        click.echo(f"error: invalid scenario: {e}", err=True)
        sys.exit(2)


# ---------------------------------------------------------------------------
# commands


@click.group()
@click.version_option(__version__)
def main():
    """Contact-implicit trajectory optimization for planar legged robots."""


@main.command()
@click.argument("scenario")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Thread fan-out for interval linearization.")
@click.option("--fixed-time/--free-time", "fixed_time", default=None,
              help="Override the horizon mode.")
@click.option("--delta0", type=float, default=1.0, show_default=True)
@click.option("--delta-min", type=float, default=1e-3, show_default=True)
@click.option("--alpha", type=float, default=0.85, show_default=True)
@click.option("--n-stall", type=int, default=10, show_default=True)
@click.option("--w-prox", type=float, default=2000.0, show_default=True)
@click.option("--w-ep", type=float, default=50000.0, show_default=True)
@click.option("--max-iters", type=int, default=2000, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help=f"Output directory (default: ${_OUT_ENV} or cwd).")
def solve(scenario, seed, jobs, fixed_time, delta0, delta_min, alpha, n_stall,
          w_prox, w_ep, max_iters, out):
    """Solve SCENARIO (a JSON file or a bundled scenario name)."""
    path = _resolve_scenario(scenario)
    spec = _load_scenario_or_exit(path)
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if fixed_time is not None:
        overrides["fixed_time"] = fixed_time
    if overrides:
        from dataclasses import replace

        spec = replace(spec, **overrides)
    config = scp.SCPConfig(
        w_prox=w_prox, w_ep=w_ep, delta0=delta0, delta_min=delta_min,
        alpha=alpha, n_stall=n_stall, max_iters=max_iters, jobs=jobs,
    )
    stem = os.path.splitext(os.path.basename(path))[0]
    out_dir = _out_dir(out)
    os.makedirs(out_dir, exist_ok=True)
    traj_path = os.path.join(out_dir, f"{stem}_trajectory.json")
    log_path = os.path.join(out_dir, f"{stem}_iterations.jsonl")

    z, history, status = scp.solve(spec, config, log_path=log_path)
    write_trajectory(traj_path, trajectory_to_dict(z, history, status, spec, config))
    click.echo(f"status: {status} after {len(history) - 1} iterations")
    click.echo(f"trajectory: {traj_path}")
    click.echo(f"iteration log: {log_path}")
    if status != "converged":
        sys.exit(1)


@main.command()
@click.argument("trajectory", type=click.Path(exists=True))
@click.option("--penetration-tol", type=float, default=1e-3, show_default=True)
@click.option("--pair-tol", type=float, default=1e-3, show_default=True)
@click.option("--ctcs-margin", type=float, default=1e-6, show_default=True)
@click.option("--drift-tol", type=float, default=1e-4, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Directory for the written report (default: none).")
def check(trajectory, penetration_tol, pair_tol, ctcs_margin, drift_tol, out):
    """Replay TRAJECTORY at finer resolution and audit feasibility."""
    try:
        data = load_trajectory(trajectory)
        z, spec, meta = trajectory_from_dict(data)
    except json.JSONDecodeError as e:
        click.echo(f"error: trajectory parse failed: {e}", err=True)
        sys.exit(2)
    except (ValueError, KeyError, TypeError) as e:
        click.echo(f"error: invalid trajectory file: {e}", err=True)
        sys.exit(2)
    model_hash = _canonical_hash(multibody.model_to_dict(spec.model))
    scenario_hash = _canonical_hash(data["scenario"])
    if meta.get("model_hash") != model_hash or meta.get("scenario_hash") != scenario_hash:
        click.echo("error: stored hashes do not match the embedded model/scenario", err=True)
        sys.exit(3)

    report = verifier.replay_check(z, spec.model, spec)
    rows = report.check_rows(penetration_tol, pair_tol, ctcs_margin, drift_tol)
    for name, value, threshold, ok in rows:
        flag = "ok" if ok else "FAIL"
        click.echo(f"{name:>18s}: {value:12.3e}  (tol {threshold:.3e})  {flag}")
    click.echo(f"{'joint_drift':>18s}: {report.max_joint_drift:12.3e}  (informational)")
    click.echo(f"{'cone_violation':>18s}: {report.cone_violation:12.3e}  (informational)")
    if out:
        os.makedirs(out, exist_ok=True)
        stem = os.path.splitext(os.path.basename(trajectory))[0]
        rpt = os.path.join(out, f"{stem}_report.json")
        with open(rpt, "w") as f:
            json.dump(report.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")
        click.echo(f"report: {rpt}")
    if not all(ok for *_, ok in rows):
        sys.exit(1)


@main.command()
@click.argument("trajectory", type=click.Path(exists=True))
@click.option("--dt", type=float, default=0.01, show_default=True)
def simulate(trajectory, dt):
    """Feed TRAJECTORY's torque schedule to the time-stepping simulator."""
    try:
        data = load_trajectory(trajectory)
        z, spec, _ = trajectory_from_dict(data)
    except json.JSONDecodeError as e:
        click.echo(f"error: trajectory parse failed: {e}", err=True)
        sys.exit(2)
    except (ValueError, KeyError, TypeError) as e:
        click.echo(f"error: invalid trajectory file: {e}", err=True)
        sys.exit(2)
    horizon = sum(data["S"])
    config = verifier.SimConfig(dt=dt, steps=max(1, int(np.ceil(horizon / dt))))
    times, div = verifier.open_loop_rollout_compare(z, spec.model, spec, config)
    click.echo("open-loop divergence vs optimized node states (scaled inf-norm):")
    for t, d in zip(times, div):
        click.echo(f"  t = {t:7.3f} s   divergence = {d:10.3e}")
    click.echo("note: open-loop drift through contact events is expected")


@main.command()
@click.argument("trajectory", type=click.Path(exists=True))
@click.option("--kind", type=click.Choice(["gait", "contact", "convergence"]),
              required=True)
@click.option("--shade-threshold", type=float, default=1e-6, show_default=True,
              help="Normal-impulse accumulation marking sustained contact.")
@click.option("--out", type=click.Path(), default=None,
              help=f"Output directory (default: ${_OUT_ENV} or cwd).")
def plot(trajectory, kind, shade_threshold, out):
    """Render TRAJECTORY as a vector image (SVG)."""
    import matplotlib

    matplotlib.use("Agg")
    try:
        data = load_trajectory(trajectory)
        z, spec, _ = trajectory_from_dict(data)
    except json.JSONDecodeError as e:
        click.echo(f"error: trajectory parse failed: {e}", err=True)
        sys.exit(2)
    except (ValueError, KeyError, TypeError) as e:
        click.echo(f"error: invalid trajectory file: {e}", err=True)
        sys.exit(2)
    out_dir = _out_dir(out)
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(trajectory))[0]
    path = os.path.join(out_dir, f"{stem}_{kind}.svg")
    fig = _PLOTTERS[kind](data, z, spec, shade_threshold)
    fig.savefig(path, format="svg")
    click.echo(f"plot: {path}")


def _plot_convergence(data, z, spec, _threshold):
    import matplotlib.pyplot as plt

    hist = data["history"]
    its = np.arange(len(hist))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(its, np.maximum([h["j_px"] for h in hist], 1e-16), label="J_px")
    ax.semilogy(its, np.maximum([h["j_ep"] for h in hist], 1e-16), label="J_ep")
    ax.semilogy(its, [h["delta"] for h in hist], label="delta")
    ax.set_xlabel("iteration")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return fig


def _plot_contact(data, z, spec, threshold):
    import matplotlib.pyplot as plt

    tr = ocp.get_transcription(spec)
    lay = tr.layout
    times = np.asarray(data["node_times"])
    n_c = lay.n_c
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    for i in range(n_c):
        fn = [z[lay.u(k)].reshape(2, -1)[0, lay.n_a + 2 * i + 1] for k in range(lay.N - 1)]
        ft = [z[lay.u(k)].reshape(2, -1)[0, lay.n_a + 2 * i] for k in range(lay.N - 1)]
        axes[0].step(times[:-1], fn, where="post", label=f"normal {i}")
        axes[0].step(times[:-1], ft, where="post", label=f"tangential {i}", ls="--")
        imp = [z[lay.phi(k)][2 * i + 1] for k in range(lay.N)]
        axes[1].stem(times, imp, basefmt=" ")
        # shade intervals with sustained contact (normal-force accumulator grows)
        for k in range(lay.N - 1):
            dy = z[lay.y_of_xm(k + 1)][5 * i] - z[lay.y_of_xp(k)][5 * i]
            if dy > threshold:
                for ax in axes:
                    ax.axvspan(times[k], times[k + 1], color="0.85", zorder=0)
    axes[0].set_ylabel("contact force [N]")
    axes[1].set_ylabel("normal impulse [N s]")
    axes[1].set_xlabel("time [s]")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    return fig


def _plot_gait(data, z, spec, _threshold):
    import matplotlib.pyplot as plt

    tr = ocp.get_transcription(spec)
    lay = tr.layout
    model = spec.model
    fig, ax = plt.subplots(figsize=(7, 4))
    com = []
    contact_traces = [[] for _ in range(model.n_c)]
    for k in range(lay.N):
        q = z[lay.xm(k)][: lay.n_q]
        shade = 0.2 + 0.6 * k / max(lay.N - 1, 1)
        for li, link in enumerate(model.links):
            p = q[3 * li : 3 * li + 2]
            th = q[3 * li + 2]
            half = 0.5 * link.geometry_length
            d = half * np.array([np.cos(th), np.sin(th)])
            ax.plot([p[0] - d[0], p[0] + d[0]], [p[1] - d[1], p[1] + d[1]],
                    color=str(1.0 - shade), lw=2)
        com.append(_weighted_com(model, q))
        for i in range(model.n_c):
            contact_traces[i].append(np.asarray(multibody.contact_position(model, q, i)))
    com = np.array(com)
    ax.plot(com[:, 0], com[:, 1], "r.-", ms=4, lw=1, label="CoM")
    for i, trace in enumerate(contact_traces):
        trace = np.array(trace)
        ax.plot(trace[:, 0], trace[:, 1], "b.-", ms=3, lw=0.8, label=f"contact {i}")
    xs = np.linspace(com[:, 0].min() - 0.5, com[:, 0].max() + 0.5, 200)
    ax.plot(xs, [_surface_height(model, x) for x in xs], "k-", lw=1)
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _weighted_com(model, q):
    total = sum(l.mass for l in model.links)
    acc = np.zeros(2)
    for li, link in enumerate(model.links):
        acc += link.mass * q[3 * li : 3 * li + 2]
    return acc / total


def _surface_height(model, x, lo=-5.0, hi=5.0):
    """Terrain height at station x by bisection on the signed distance."""
    f = lambda zz: float(model.surface.signed_distance(np.array([x, zz])))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_PLOTTERS = {
    "gait": _plot_gait,
    "contact": _plot_contact,
    "convergence": _plot_convergence,
}


if __name__ == "__main__":
    main()
