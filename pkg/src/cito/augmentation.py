"""Auxiliary integrator channels and the dilated interval integration map.

The augmented state stacks (q, v, y).  Per contact, y accumulates the
integrals of the normal force, the smoothed absolute stationarity
residual, the maximum-dissipation multiplier, the friction-cone slack
and the ramped signed distance; the remaining channels accumulate mixed,
ramped path-constraint violations.  Integral cross-complementarity and
continuous-time constraint satisfaction are then expressed on per-interval
increments of y.

Each grid interval is integrated on the normalized time [0, 1] with a
fixed-step Runge-Kutta-Fehlberg scheme (the fifth-order weights, no
adaptivity) under a first-order-hold control and a dilation factor S.
Sensitivities are Jacobians of the discrete stage recursion itself, so
they are exact for the implemented map.
"""

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from . import multibody
from .contact_dynamics import (
    forward_dynamics,
    friction_cone_residual,
    friction_stationarity,
    split_control,
)
from .smoothmath import smooth_abs, smooth_relu

__all__ = [
    "AugmentedState",
    "IntervalParameterization",
    "IntervalResult",
    "aux_dim",
    "aux_rate",
    "augmented_rate",
    "foh_eval",
    "build_path_constraints",
    "Discretizer",
    "integrate_interval",
]

# Fehlberg tableau, fifth-order weights only (fixed step, no adaptivity)
_RKF_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_RKF_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_RKF_B = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])

N_CONTACT_CHANNELS = 5


@dataclass
class AugmentedState:
    """Pose, velocity, and auxiliary accumulator channels."""

    q: np.ndarray
    v: np.ndarray
    y: np.ndarray

    def flat(self):
        return np.concatenate([np.asarray(self.q), np.asarray(self.v), np.asarray(self.y)])

    @classmethod
    def from_flat(cls, model, n_y, vec):
        vec = np.asarray(vec, dtype=float)
        n_q = model.n_q
        return cls(q=vec[:n_q], v=vec[n_q : 2 * n_q], y=vec[2 * n_q : 2 * n_q + n_y])


@dataclass
class IntervalParameterization:
    """FOH endpoint coefficients (2, n_u) and the dilation factor (s/unit tau)."""

    U: np.ndarray
    S: float


@dataclass
class IntervalResult:
    end_state: AugmentedState
    jac_state: np.ndarray
    jac_U: np.ndarray
    jac_S: np.ndarray


def aux_dim(model, mixing):
    n_g_out = 0 if mixing is None else np.asarray(mixing).shape[0]
    return N_CONTACT_CHANNELS * model.n_c + n_g_out


def build_path_constraints(model, joint_angle_limits=(), body_height_bounds=()):
    """Assemble the path-constraint function g(x, u) <= 0.

    Components: per-contact penetration (-sd), relative joint angle
    ranges, and optional per-link height bounds.  Returns ``(g, n_g)``.
    ``joint_angle_limits`` holds (joint_index, lo, hi) triples;
    ``body_height_bounds`` holds (link_index, lo, hi) triples.
    """
    joint_angle_limits = tuple(joint_angle_limits)
    body_height_bounds = tuple(body_height_bounds)
    n_g = model.n_c + 2 * len(joint_angle_limits) + 2 * len(body_height_bounds)

    def g(x, u):
        q = x[: model.n_q]
        rows = []
        for i in range(model.n_c):
            pos = multibody.contact_position(model, q, i)
            rows.append(-model.surface.signed_distance(pos))
        for jidx, lo, hi in joint_angle_limits:
            joint = model.joints[jidx]
            th_c = q[3 * joint.child_link + 2]
            th_p = q[3 * joint.parent_link + 2] if joint.parent_link >= 0 else 0.0
            rel = th_c - th_p
            rows.append(rel - hi)
            rows.append(lo - rel)
        for lidx, lo, hi in body_height_bounds:
            pz = q[3 * lidx + 1]
            rows.append(lo - pz)
            rows.append(pz - hi)
        return jnp.stack(rows) if rows else jnp.zeros(0)

    return g, n_g


def aux_rate(model, x, u, mixing=None, path_fn=None):
    """Auxiliary channel rates Omega(x, u); nonnegative on the feasible set."""
    x = jnp.asarray(x, dtype=float)
    q, v = x[: model.n_q], x[model.n_q :]
    _, phi, gamma = split_control(model, u)
    rows = []
    for i, spec in enumerate(model.contacts):
        lam = friction_stationarity(model, q, v, phi[i], gamma[i], i)
        rho = friction_cone_residual(phi[i], gamma[i], spec.friction_mu)
        pos = multibody.contact_position(model, q, i)
        sd = model.surface.signed_distance(pos)
        rows.append(jnp.stack([phi[i, 1], smooth_abs(lam), gamma[i], rho, smooth_relu(sd)]))
    if mixing is not None:
        if path_fn is None:
            raise ValueError("mixing matrix given without a path-constraint function")
        mix = jnp.asarray(mixing, dtype=float)
        rows.append(mix @ smooth_relu(path_fn(x, u)))
    if not rows:
        return jnp.zeros(0)
    return jnp.concatenate(rows)


def augmented_rate(model, xt, u, s, mixing=None, path_fn=None):
    """Dilated augmented dynamics s * (f(x,u), Omega(x,u))."""
    xt = jnp.asarray(xt, dtype=float)
    n_x = 2 * model.n_q
    x = xt[:n_x]
    xdot = forward_dynamics(model, x, u)
    ydot = aux_rate(model, x, u, mixing, path_fn)
    return s * jnp.concatenate([xdot, ydot])


def foh_eval(U, tau):
    """First-order-hold control at normalized time tau in [0, 1]."""
    U = jnp.asarray(U, dtype=float)
    return (1.0 - tau) * U[0] + tau * U[1]


class Discretizer:
    """Jitted fixed-step interval integrator with exact discrete sensitivities.

    Instances cache the compiled flow map and its Jacobians for one
    (model, mixing, path constraints, substeps) combination; reuse them
    across SCP iterations to avoid recompilation.
    """

    def __init__(self, model, mixing=None, path_fn=None, substeps=10):
        if substeps < 1:
            raise ValueError("substeps must be >= 1")
        self.model = model
        self.mixing = None if mixing is None else np.asarray(mixing, dtype=float)
        self.path_fn = path_fn
        self.substeps = substeps
        self.n_y = aux_dim(model, self.mixing)
        self.n_xt = 2 * model.n_q + self.n_y

        def rate(xt, tau, U_flat, S):
            U = U_flat.reshape(2, -1)
            u = foh_eval(U, tau)
            return augmented_rate(model, xt, u, S, self.mixing, self.path_fn)

        def flow(xt0, U_flat, S):
            h = 1.0 / substeps

            # one fixed RK step; scanned over substeps so the compiled graph
            # stays small at high substep counts
            def step(xt, tau0):
                ks = []
                for stage in range(6):
                    xs = xt
                    for j, a in enumerate(_RKF_A[stage]):
                        xs = xs + h * a * ks[j]
                    ks.append(rate(xs, tau0 + _RKF_C[stage] * h, U_flat, S))
                incr = sum(float(b) * k for b, k in zip(_RKF_B, ks))
                return xt + h * incr, None

            xt, _ = jax.lax.scan(step, jnp.asarray(xt0, dtype=float), h * jnp.arange(substeps))
            return xt

        self._flow = jax.jit(flow)
        self._jacs = jax.jit(jax.jacfwd(flow, argnums=(0, 1, 2)))
        self._vflow = jax.jit(jax.vmap(flow))
        self._vjacs = jax.jit(jax.vmap(jax.jacfwd(flow, argnums=(0, 1, 2))))

    def propagate(self, xt0, U, S):
        """End state only, as a numpy array."""
        out = self._flow(jnp.asarray(xt0), jnp.asarray(U).reshape(-1), float(S))
        out = np.asarray(out)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite state during interval integration")
        return out

    def propagate_batch(self, xt0s, Us, Ss):
        """Vectorized end states for stacked intervals."""
        out = np.asarray(
            self._vflow(jnp.asarray(xt0s), jnp.asarray(Us).reshape(len(Ss), -1), jnp.asarray(Ss))
        )
        if not np.all(np.isfinite(out)):
            bad = np.where(~np.isfinite(out).all(axis=1))[0]
            raise FloatingPointError(f"non-finite state in intervals {bad.tolist()}")
        return out

    def linearize_batch(self, xt0s, Us, Ss):
        """End states and Jacobians (d/dstate, d/dU, d/dS) for stacked intervals."""
        ends = self.propagate_batch(xt0s, Us, Ss)
        jx, ju, js = self._vjacs(
            jnp.asarray(xt0s), jnp.asarray(Us).reshape(len(Ss), -1), jnp.asarray(Ss)
        )
        return ends, np.asarray(jx), np.asarray(ju), np.asarray(js)

    def integrate(self, start, param):
        """Single-interval integration returning an :class:`IntervalResult`."""
        xt0 = start.flat() if isinstance(start, AugmentedState) else np.asarray(start)
        U_flat = np.asarray(param.U, dtype=float).reshape(-1)
        end = self.propagate(xt0, U_flat, param.S)
        jx, ju, js = self._jacs(jnp.asarray(xt0), jnp.asarray(U_flat), float(param.S))
        return IntervalResult(
            end_state=AugmentedState.from_flat(self.model, self.n_y, end),
            jac_state=np.asarray(jx),
            jac_U=np.asarray(ju),
            jac_S=np.asarray(js),
        )


def integrate_interval(model, start, param, mixing=None, path_fn=None, substeps=10):
    """One-shot convenience wrapper around :class:`Discretizer`."""
    disc = Discretizer(model, mixing=mixing, path_fn=path_fn, substeps=substeps)
    return disc.integrate(start, param)
