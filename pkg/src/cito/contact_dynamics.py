"""Smooth contact dynamics and the node impact map.

Continuous-time dynamics eliminate joint reaction forces by enforcing
the joint constraint at the acceleration level; the impact map does the
same at the velocity level with impulses.  Friction enters through a
smoothed maximum-dissipation stationarity residual and a smoothed
friction cone residual, both gated by the normal force so that inactive
contacts impose nothing.

Control layout: ``u = (tau, phi, gamma)`` with one torque per actuated
joint, per-contact force pairs ``(phi_t, phi_n)`` in the contact frame,
and one maximum-dissipation multiplier per contact.  Impulses use the
same per-contact layout ``(Phi_t, Phi_n)``.
"""

from typing import NamedTuple

import jax.numpy as jnp

from . import multibody
from .smoothmath import _fb_value, smooth_abs

__all__ = [
    "split_control",
    "control_dim",
    "friction_stationarity",
    "friction_cone_residual",
    "forward_dynamics",
    "impact_map",
    "impact_residuals",
    "ImpactResiduals",
]


def control_dim(model):
    """n_u = n_a + n_c * (n_d + 1)."""
    return model.n_a + model.n_c * (model.n_d + 1)


def split_control(model, u):
    """Split a flat control vector into (tau, phi[n_c, 2], gamma[n_c])."""
    u = jnp.asarray(u, dtype=float)
    n_a, n_c = model.n_a, model.n_c
    tau = u[:n_a]
    phi = u[n_a : n_a + 2 * n_c].reshape(n_c, 2)
    gamma = u[n_a + 2 * n_c :]
    return tau, phi, gamma


def _snorm_grad_scalar(x):
    """Gradient of the pseudo-Huber norm of a 1-vector, as a scalar."""
    return x / jnp.sqrt(x * x + 1.0)


def friction_stationarity(model, q, v, phi_i, gamma_i, i):
    """Smoothed maximum-dissipation stationarity residual for contact i.

    Returns tangential velocity plus ``gamma * grad smooth_norm(phi_t)``;
    zero at a sticking solution and, once multiplied by the normal force,
    zero whenever the contact is inactive.
    """
    _, t, _ = multibody.contact_frame(model, q, i)
    _, jac = multibody.contact_kinematics(model, q, i)
    v_t = t @ (jac @ jnp.asarray(v, dtype=float))
    phi_t = jnp.asarray(phi_i, dtype=float)[0]
    return v_t + gamma_i * _snorm_grad_scalar(phi_t)


def friction_cone_residual(phi_i, gamma_i, mu_i):
    """Smoothed friction-cone slack: sabs(mu*phi_n) - snorm(phi_t)."""
    phi_i = jnp.asarray(phi_i, dtype=float)
    phi_t, phi_n = phi_i[0], phi_i[1]
    return smooth_abs(mu_i * phi_n) - smooth_abs(phi_t)


def _contact_wrench(model, q, forces):
    """Generalized force from per-contact contact-frame forces (n_c, 2)."""
    w = jnp.zeros(model.n_q)
    for i in range(model.n_c):
        _, _, rot = multibody.contact_frame(model, q, i)
        _, jac = multibody.contact_kinematics(model, q, i)
        w = w + jac.T @ (rot @ forces[i])
    return w


def _eliminate_joint_forces(model, q, v, w):
    """Acceleration with joint reactions eliminated: M vdot = w + grad(c)' phi_j."""
    minv = 1.0 / multibody.mass_diag(model)
    if model.n_j == 0:
        return minv * w
    _, jac, curv = multibody.joint_constraint(model, q, v)
    gram = jac @ (minv[:, None] * jac.T)
    rhs = jac @ (minv * w) + curv
    phi_j = -jnp.linalg.solve(gram, rhs)
    return minv * (w + jac.T @ phi_j)


def forward_dynamics(model, x, u):
    """State derivative (qdot, vdot) of the smooth contact model."""
    x = jnp.asarray(x, dtype=float)
    n_q = model.n_q
    q, v = x[:n_q], x[n_q:]
    tau, phi, _ = split_control(model, u)
    w = multibody.generalized_forces(model, q, v, tau)
    if model.n_c:
        w = w + _contact_wrench(model, q, phi)
    vdot = _eliminate_joint_forces(model, q, v, w)
    return jnp.concatenate([v, vdot])


def impact_map(model, q, v_minus, Phi):
    """Post-impact velocity from contact impulses, joint impulses eliminated."""
    q = jnp.asarray(q, dtype=float)
    v_minus = jnp.asarray(v_minus, dtype=float)
    Phi = jnp.asarray(Phi, dtype=float).reshape(model.n_c, 2)
    minv = 1.0 / multibody.mass_diag(model)
    w = _contact_wrench(model, q, Phi) if model.n_c else jnp.zeros(model.n_q)
    if model.n_j == 0:
        return v_minus + minv * w
    _, jac, _ = multibody.joint_constraint(model, q)
    gram = jac @ (minv[:, None] * jac.T)
    rhs = jac @ (v_minus + minv * w)
    Phi_j = -jnp.linalg.solve(gram, rhs)
    return v_minus + minv * (w + jac.T @ Phi_j)


class ImpactResiduals(NamedTuple):
    """Impact complementarity residuals: feasible iff eq == 0 and ineq <= 0."""

    eq: jnp.ndarray
    ineq: jnp.ndarray


def impact_residuals(model, q, v_minus, v_plus, Phi, Gamma, delta):
    """Relaxed impact complementarity residuals per contact.

    Per contact the inequality block stacks the relaxed no-penetration
    pair FB(Phi_n, sd), the relaxed impulse friction-cone pair
    FB(Gamma, cone slack), the penetration constraint -sd, and the
    restitution-consistent normal velocity constraint
    -(n'J(v+ + eps_r v-)).  The equality block carries the bilinear
    restitution and tangential stationarity products.
    """
    q = jnp.asarray(q, dtype=float)
    v_minus = jnp.asarray(v_minus, dtype=float)
    v_plus = jnp.asarray(v_plus, dtype=float)
    Phi = jnp.asarray(Phi, dtype=float).reshape(model.n_c, 2)
    Gamma = jnp.atleast_1d(jnp.asarray(Gamma, dtype=float))

    eq_rows = []
    ineq_rows = []
    for i, spec in enumerate(model.contacts):
        n, t, _ = multibody.contact_frame(model, q, i)
        _, jac = multibody.contact_kinematics(model, q, i)
        sd, _ = multibody.signed_distance(model, q, i)
        Phi_t, Phi_n = Phi[i, 0], Phi[i, 1]

        vn_rest = n @ (jac @ (v_plus + spec.restitution * v_minus))
        vt_plus = t @ (jac @ v_plus)
        cone = smooth_abs(spec.friction_mu * Phi_n) - smooth_abs(Phi_t)

        eq_rows.append(Phi_n * vn_rest)
        eq_rows.append(Phi_n * (vt_plus + Gamma[i] * _snorm_grad_scalar(Phi_t)))
        ineq_rows.append(_fb_value(Phi_n, sd, delta))
        ineq_rows.append(_fb_value(Gamma[i], cone, delta))
        ineq_rows.append(-sd)
        ineq_rows.append(-vn_rest)

    return ImpactResiduals(
        eq=jnp.stack(eq_rows) if eq_rows else jnp.zeros(0),
        ineq=jnp.stack(ineq_rows) if ineq_rows else jnp.zeros(0),
    )
