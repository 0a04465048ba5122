"""Independent physical validation of optimized trajectories.

Two separate evidence routes, neither reusing the optimizer's smoothed
contact model:

- a velocity-level time-stepping simulator (semi-implicit Euler with a
  projected Gauss-Seidel impulse solve and hard friction cones), used to
  cross-check the multibody model against textbook trajectories and to
  replay optimized torque schedules open loop;
- a replay checker that re-integrates every grid interval of a solved
  trajectory at a finer substep count and evaluates the integral
  complementarity pairs, accumulator caps, penetration, joint drift, and
  cone margins post hoc.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import jax
import jax.numpy as jnp
import numpy as np

from . import multibody
from .augmentation import Discretizer, aux_rate
from .contact_dynamics import split_control
from .ocp import get_transcription

__all__ = [
    "SimConfig",
    "SimTrace",
    "FeasibilityReport",
    "timestep_simulate",
    "replay_check",
    "open_loop_rollout_compare",
]

# auxiliary channel offsets within one contact block
_CH_PHIN, _CH_LAM, _CH_GAM, _CH_RHO, _CH_SD = range(5)
# integral complementarity pairs (a, b) per contact, matching the psi rows
_PAIRS = ((_CH_PHIN, _CH_SD), (_CH_PHIN, _CH_LAM), (_CH_GAM, _CH_RHO))


@dataclass
class SimConfig:
    """Time-stepping simulator parameters."""

    dt: float = 0.01
    steps: int = 100
    pgs_iters: int = 50
    projection_tol: float = 1e-10

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.steps < 0 or self.pgs_iters < 1:
            raise ValueError("steps must be >= 0 and pgs_iters >= 1")


@dataclass
class SimTrace:
    """States (steps+1, 2 n_q) and per-step contact impulses (steps, n_c, 2).

    Impulse columns are (tangential, normal) in the local contact frame.
    """

    states: np.ndarray
    impulses: np.ndarray
    times: np.ndarray


@lru_cache(maxsize=8)
def _sim_kinematics(model):
    """Jitted per-step kinematics: joint rows and contact rows."""

    def joint_rows(q):
        c, jac, _ = multibody.joint_constraint(model, q)
        return c, jac

    def contact_rows(q):
        sds, jns, jts = [], [], []
        for i in range(model.n_c):
            sd, grad = multibody.signed_distance(model, q, i)
            _, t, _ = multibody.contact_frame(model, q, i)
            _, jp = multibody.contact_kinematics(model, q, i)
            sds.append(sd)
            jns.append(grad)
            jts.append(t @ jp)
        if not sds:
            z = jnp.zeros((0, model.n_q))
            return jnp.zeros(0), z, z
        return jnp.stack(sds), jnp.stack(jns), jnp.stack(jts)

    return jax.jit(joint_rows), jax.jit(contact_rows)


def timestep_simulate(model, x0, torque_schedule=None, config=None):
    """Semi-implicit Euler with PGS contact impulses; returns a SimTrace.

    ``torque_schedule`` is None (passive), a callable t -> tau, or an
    array of shape (steps, n_a).  Contacts are perfectly inelastic and
    obey the friction cone |p_t| <= mu p_n.  Joint constraints are kept
    at the velocity level each step, with a positional Newton correction
    applied to q only.
    """
    config = config or SimConfig()
    model_nq = model.n_q
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (2 * model_nq,):
        raise ValueError(f"expected state of dimension {2 * model_nq}")
    joint_rows, contact_rows = _sim_kinematics(model)
    m_inv = 1.0 / np.asarray(multibody.mass_diag(model))
    mus = np.array([c.friction_mu for c in model.contacts])

    def tau_at(step, t):
        if torque_schedule is None:
            return np.zeros(model.n_a)
        if callable(torque_schedule):
            return np.asarray(torque_schedule(t), dtype=float).reshape(model.n_a)
        return np.asarray(torque_schedule[step], dtype=float).reshape(model.n_a)

    q = x0[:model_nq].copy()
    v = x0[model_nq:].copy()
    states = np.empty((config.steps + 1, 2 * model_nq))
    impulses = np.zeros((config.steps, model.n_c, 2))
    states[0] = np.concatenate([q, v])

    for step in range(config.steps):
        t = step * config.dt
        w = np.asarray(multibody.generalized_forces(model, q, v, tau_at(step, t)))
        v = v + config.dt * m_inv * w

        cj, jj = (np.asarray(a) for a in joint_rows(q))
        sds, jns, jts = (np.asarray(a) for a in contact_rows(q))
        active = np.zeros(model.n_c, dtype=bool)
        for i in range(model.n_c):
            if sds[i] + config.dt * jns[i] @ v <= 0.0:
                active[i] = True
        eff_j = np.array([row @ (m_inv * row) for row in jj])
        eff_n = np.array([row @ (m_inv * row) for row in jns]) if model.n_c else np.zeros(0)
        eff_t = np.array([row @ (m_inv * row) for row in jts]) if model.n_c else np.zeros(0)

        p_n = np.zeros(model.n_c)
        p_t = np.zeros(model.n_c)
        for _ in range(config.pgs_iters):
            for r in range(jj.shape[0]):
                if eff_j[r] > 0.0:
                    dp = -(jj[r] @ v) / eff_j[r]
                    v = v + m_inv * jj[r] * dp
            for i in range(model.n_c):
                if not active[i]:
                    continue
                # normal: enforce approach no faster than the gap closes
                target = -sds[i] / config.dt
                dp = (target - jns[i] @ v) / eff_n[i]
                new = max(0.0, p_n[i] + dp)
                v = v + m_inv * jns[i] * (new - p_n[i])
                p_n[i] = new
                # friction: drive tangential velocity to zero, cone-clamped
                dp = -(jts[i] @ v) / eff_t[i]
                new = np.clip(p_t[i] + dp, -mus[i] * p_n[i], mus[i] * p_n[i])
                v = v + m_inv * jts[i] * (new - p_t[i])
                p_t[i] = new
        impulses[step, :, 0] = p_t
        impulses[step, :, 1] = p_n

        q = q + config.dt * v
        # positional joint correction (q only)
        for _ in range(10):
            cj, jj = (np.asarray(a) for a in joint_rows(q))
            if cj.size == 0 or np.linalg.norm(cj) <= config.projection_tol:
                break
            dq, *_ = np.linalg.lstsq(jj, -cj, rcond=None)
            q = q + dq

        states[step + 1] = np.concatenate([q, v])
        if not np.all(np.isfinite(states[step + 1])):
            raise FloatingPointError(f"non-finite state at step {step + 1}")

    times = config.dt * np.arange(config.steps + 1)
    return SimTrace(states=states, impulses=impulses, times=times)


@dataclass
class FeasibilityReport:
    """Post-hoc feasibility measures for one solved trajectory.

    All entries are nonnegative; ``pair_residuals`` has one row per
    interval and one column per (contact, pair) combination; the cross
    products are maxima of a(t) b(t') over a 20 x 20 sample grid.
    """

    max_penetration: float
    max_joint_drift: float
    pair_residuals: np.ndarray
    ctcs_increments: np.ndarray
    ctcs_epsilon: float
    cone_violation: float
    refinement_drift: float
    cross_products: np.ndarray = field(repr=False)

    def passes(self, penetration=1e-3, pair=1e-3, ctcs_margin=1e-6, drift=1e-4):
        checks = self.check_rows(penetration, pair, ctcs_margin, drift)
        return all(ok for _, _, _, ok in checks)

    def check_rows(self, penetration=1e-3, pair=1e-3, ctcs_margin=1e-6, drift=1e-4):
        """(name, value, threshold, ok) rows for reporting."""
        ctcs_max = float(np.max(self.ctcs_increments)) if self.ctcs_increments.size else 0.0
        pair_max = float(np.max(self.pair_residuals)) if self.pair_residuals.size else 0.0
        return [
            ("penetration", self.max_penetration, penetration, self.max_penetration <= penetration),
            ("pair_residual", pair_max, pair, pair_max <= pair),
            (
                "ctcs_increment",
                ctcs_max,
                self.ctcs_epsilon + ctcs_margin,
                ctcs_max <= self.ctcs_epsilon + ctcs_margin,
            ),
            ("refinement_drift", self.refinement_drift, drift, self.refinement_drift <= drift),
        ]

    def to_dict(self):
        return {
            "max_penetration": float(self.max_penetration),
            "max_joint_drift": float(self.max_joint_drift),
            "pair_residuals": self.pair_residuals.tolist(),
            "ctcs_increments": self.ctcs_increments.tolist(),
            "ctcs_epsilon": float(self.ctcs_epsilon),
            "cone_violation": float(self.cone_violation),
            "refinement_drift": float(self.refinement_drift),
            "max_cross_product": float(np.max(self.cross_products))
            if self.cross_products.size
            else 0.0,
        }


def _segment_states(disc1, xt0, U, S, samples):
    """States at samples+1 points across one interval via FOH restriction."""
    taus = np.linspace(0.0, 1.0, samples + 1)
    out = np.empty((samples + 1, xt0.size))
    out[0] = xt0
    xt = xt0
    for idx, (a, b) in enumerate(zip(taus[:-1], taus[1:])):
        ua = (1.0 - a) * U[0] + a * U[1]
        ub = (1.0 - b) * U[0] + b * U[1]
        xt = disc1.propagate(xt, np.stack([ua, ub]), S * (b - a))
        out[idx + 1] = xt
    return taus, out


def replay_check(z, model, scenario, grid=20):
    """Re-integrate and audit a solved trajectory; returns a FeasibilityReport."""
    tr = get_transcription(scenario)
    lay = tr.layout
    z = np.asarray(z, dtype=float)
    if z.shape != (lay.dim,):
        raise ValueError(f"expected decision vector of dimension {lay.dim}")
    disc = tr.discretizer
    cached = getattr(tr, "_replay_cache", None)
    if cached is None:
        fine = Discretizer(
            model, mixing=disc.mixing, path_fn=disc.path_fn, substeps=10 * disc.substeps
        )
        rate_fn = jax.jit(
            jax.vmap(lambda x, u: aux_rate(model, x, u, disc.mixing, disc.path_fn))
        )

        def sample_audit(q):
            if model.n_c:
                sds = jnp.stack(
                    [
                        model.surface.signed_distance(multibody.contact_position(model, q, i))
                        for i in range(model.n_c)
                    ]
                )
            else:
                sds = jnp.zeros(0)
            return sds, multibody.joint_constraint_value(model, q)

        audit_fn = jax.jit(jax.vmap(sample_audit))
        tr._replay_cache = (fine, rate_fn, audit_fn)
    else:
        fine, rate_fn, audit_fn = cached
    seg = disc  # segment splitting reuses the nominal-resolution integrator
    n_c, n_y = lay.n_c, lay.n_y
    state_scale = tr.scaling.scale[lay.xm(0)][: 2 * lay.n_q]

    pair_res = np.zeros((lay.N - 1, 3 * n_c))
    cross = np.zeros((lay.N - 1, 3 * n_c))
    ctcs = np.zeros((lay.N - 1, lay.n_g_out))
    max_pen = 0.0
    max_drift = 0.0
    max_joint = 0.0
    for k in range(lay.N - 1):
        xt0 = z[lay.xp(k)]
        U = z[lay.u(k)].reshape(2, -1)
        S = float(z[lay.s(k)][0])
        end_fine = fine.propagate(xt0, U, S)
        diff = (end_fine[: 2 * lay.n_q] - z[lay.xm(k + 1)][: 2 * lay.n_q]) / state_scale
        max_drift = max(max_drift, float(np.max(np.abs(diff))))

        dy = z[lay.y_of_xm(k + 1)] - z[lay.y_of_xp(k)]
        for i in range(n_c):
            for p, (a, b) in enumerate(_PAIRS):
                pair_res[k, 3 * i + p] = max(0.0, min(dy[5 * i + a], dy[5 * i + b]))
        ctcs[k] = np.maximum(dy[5 * n_c : n_y], 0.0)

        taus, samples = _segment_states(seg, xt0, U, S, grid)
        us = (1.0 - taus[:, None]) * U[0] + taus[:, None] * U[1]
        sds, cjs = (np.asarray(a) for a in audit_fn(jnp.asarray(samples[:, : lay.n_q])))
        if sds.size:
            max_pen = max(max_pen, float(np.max(-sds)))
        if cjs.size:
            max_joint = max(max_joint, float(np.max(np.linalg.norm(cjs, axis=1))))
        rates = np.asarray(rate_fn(jnp.asarray(samples[:, : 2 * lay.n_q]), jnp.asarray(us)))
        # Lemma-1 style pointwise products a(t) b(t') over the sample grid
        for i in range(n_c):
            for p, (a, b) in enumerate(_PAIRS):
                ra = np.maximum(rates[:, 5 * i + a], 0.0)
                rb = np.maximum(rates[:, 5 * i + b], 0.0)
                cross[k, 3 * i + p] = float(np.max(ra) * np.max(rb))

    cone = 0.0
    for k in range(lay.N - 1):
        U = z[lay.u(k)].reshape(2, -1)
        for u in U:
            _, phi, _ = split_control(model, u)
            phi = np.asarray(phi)
            for i in range(n_c):
                mu = model.contacts[i].friction_mu
                cone = max(cone, abs(phi[i, 0]) - mu * phi[i, 1], -phi[i, 1])
    for k in range(lay.N):
        phi = z[lay.phi(k)].reshape(n_c, 2)
        for i in range(n_c):
            mu = model.contacts[i].friction_mu
            cone = max(cone, abs(phi[i, 0]) - mu * phi[i, 1], -phi[i, 1])

    return FeasibilityReport(
        max_penetration=max(0.0, max_pen),
        max_joint_drift=max_joint,
        pair_residuals=pair_res,
        ctcs_increments=ctcs,
        ctcs_epsilon=scenario.ctcs_epsilon,
        cone_violation=max(0.0, cone),
        refinement_drift=max_drift,
        cross_products=cross,
    )


def open_loop_rollout_compare(z, model, scenario, config=None):
    """Feed the optimized torque schedule to the simulator open loop.

    Returns (node_times, divergence) where divergence[k] is the scaled
    infinity-norm state gap at node k between the rollout and the
    optimized trajectory.  Reported, not asserted: open-loop replay
    through contact events is expected to drift.
    """
    tr = get_transcription(scenario)
    lay = tr.layout
    z = np.asarray(z, dtype=float)
    S = np.array([float(z[lay.s(k)][0]) for k in range(lay.N - 1)])
    node_times = np.concatenate([[0.0], np.cumsum(S)])
    taus = [z[lay.u(k)].reshape(2, -1)[:, : lay.n_a] for k in range(lay.N - 1)]

    def torque(t):
        k = min(np.searchsorted(node_times, t, side="right") - 1, lay.N - 2)
        k = max(k, 0)
        frac = (t - node_times[k]) / S[k] if S[k] > 0 else 0.0
        frac = min(max(frac, 0.0), 1.0)
        return (1.0 - frac) * taus[k][0] + frac * taus[k][1]

    config = config or SimConfig(steps=int(np.ceil(node_times[-1] / 0.01)))
    trace = timestep_simulate(model, scenario.x_init, torque, config)

    state_scale = tr.scaling.scale[lay.xm(0)][: 2 * lay.n_q]
    divergence = np.zeros(lay.N)
    for k in range(lay.N):
        idx = min(int(round(node_times[k] / config.dt)), trace.states.shape[0] - 1)
        gap = (trace.states[idx] - z[lay.xm(k)][: 2 * lay.n_q]) / state_scale
        divergence[k] = float(np.max(np.abs(gap)))
    return node_times, divergence
