"""Nonconvex trajectory-optimization problem assembly.

Decision variables per grid node k: pre- and post-impact augmented
states (q, v, y); per interval: first-order-hold control endpoints and a
time-dilation factor; per node: contact impulses and impulse-level slip
multipliers.  This module owns the flat decision-vector layout, node
constraints (integral complementarity, impulse map, impact
complementarity), boundary conditions, the torque cost, the initial
guess, and affine variable scaling.
"""

import json
from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np

from . import multibody
from .augmentation import (
    AugmentedState,
    Discretizer,
    aux_dim,
    build_path_constraints,
)
from .contact_dynamics import control_dim, impact_map, impact_residuals
from .smoothmath import _fb_value

__all__ = [
    "ScenarioSpec",
    "Layout",
    "NodeConstraints",
    "ScalingInfo",
    "Transcription",
    "initial_guess",
    "node_constraints",
    "cost",
    "scale",
    "unscale",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "trajectory_arrays",
]

_JOINT_TOL = 1e-6


@dataclass(eq=False)
class ScenarioSpec:
    """Everything needed to pose one trajectory-optimization instance."""

    model: multibody.RobotModel
    x_init: np.ndarray
    x_final: np.ndarray
    t_f: float
    N: int = 15
    substeps: int = 10
    fixed_time: bool = True
    s_bounds: tuple = None
    mask_final: np.ndarray = None
    joint_angle_limits: tuple = ()
    body_height_bounds: tuple = ()
    mixing: str = "identity"
    ctcs_epsilon: float = 1e-4
    torque_weight: float = 1.0
    s_reg: float = 0.0
    force_max: float = None
    impulse_max: float = None
    gamma_max: float = 10.0
    guess_force_scale: float = None
    guess_impulse_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("need at least two grid nodes")
        if self.ctcs_epsilon <= 0:
            raise ValueError("ctcs_epsilon must be positive")
        if self.t_f <= 0:
            raise ValueError("horizon must be positive")
        self.x_init = np.asarray(self.x_init, dtype=float)
        self.x_final = np.asarray(self.x_final, dtype=float)
        n_x = 2 * self.model.n_q
        if self.x_init.shape != (n_x,) or self.x_final.shape != (n_x,):
            raise ValueError("boundary states must have dimension 2 n_q")
        if self.mask_final is None:
            self.mask_final = np.ones(n_x, dtype=bool)
        self.mask_final = np.asarray(self.mask_final, dtype=bool)
        if self.mask_final.shape != (n_x,):
            raise ValueError("mask_final must have dimension 2 n_q")
        s_nom = self.t_f / (self.N - 1)
        if self.s_bounds is None:
            self.s_bounds = (0.2 * s_nom, 5.0 * s_nom)
        if not (0 < self.s_bounds[0] <= s_nom <= self.s_bounds[1]):
            raise ValueError("s_bounds must bracket the nominal dilation")
        weight = sum(l.mass for l in self.model.links) * max(abs(self.model.gravity), 1.0)
        if self.force_max is None:
            self.force_max = 10.0 * weight
        if self.impulse_max is None:
            self.impulse_max = 2.0 * weight * s_nom
        if self.guess_force_scale is None:
            self.guess_force_scale = weight
        for x, what in ((self.x_init, "x_init"), (self.x_final, "x_final")):
            self._check_joint_consistency(x, what)

    def _check_joint_consistency(self, x, what):
        if not self.model.joints:
            return
        q, v = x[: self.model.n_q], x[self.model.n_q :]
        c, jac, _ = multibody.joint_constraint(self.model, q, v)
        if np.max(np.abs(np.asarray(c))) > _JOINT_TOL:
            raise ValueError(f"{what} violates joint constraints")
        if np.max(np.abs(np.asarray(jac) @ v)) > _JOINT_TOL:
            raise ValueError(f"{what} velocity violates joint constraints")

    @property
    def s_nominal(self):
        return self.t_f / (self.N - 1)

    def mixing_matrix(self, n_g):
        if self.mixing == "identity":
            return np.eye(n_g) if n_g else None
        if self.mixing == "ones":
            return np.ones((1, n_g)) if n_g else None
        raise ValueError(f"unknown mixing mode {self.mixing!r}")

    __hash__ = object.__hash__


class Layout:
    """Index map for the flat decision vector.

    Order: node states (xm_0, xp_0, ..., xm_{N-1}, xp_{N-1}), then
    interval parameters (U_0, S_0, ..., U_{N-2}, S_{N-2}), then node
    impulses (Phi_0, Gam_0, ..., Phi_{N-1}, Gam_{N-1}).
    """

    def __init__(self, scenario):
        model = scenario.model
        self.N = scenario.N
        self.n_q = model.n_q
        g, n_g = build_path_constraints(
            model, scenario.joint_angle_limits, scenario.body_height_bounds
        )
        mix = scenario.mixing_matrix(n_g)
        self.n_g_out = 0 if mix is None else mix.shape[0]
        self.n_y = aux_dim(model, mix)
        self.n_xt = 2 * model.n_q + self.n_y
        self.n_u = control_dim(model)
        self.n_c = model.n_c
        self.n_a = model.n_a

        N = self.N
        off = 0
        self._xm, self._xp = [], []
        for _ in range(N):
            self._xm.append(np.arange(off, off + self.n_xt))
            off += self.n_xt
            self._xp.append(np.arange(off, off + self.n_xt))
            off += self.n_xt
        self._u, self._s = [], []
        for _ in range(N - 1):
            self._u.append(np.arange(off, off + 2 * self.n_u))
            off += 2 * self.n_u
            self._s.append(np.arange(off, off + 1))
            off += 1
        self._phi, self._gam = [], []
        for _ in range(N):
            self._phi.append(np.arange(off, off + 2 * self.n_c))
            off += 2 * self.n_c
            self._gam.append(np.arange(off, off + self.n_c))
            off += self.n_c
        self.dim = off

    def xm(self, k):
        return self._xm[k]

    def xp(self, k):
        return self._xp[k]

    def u(self, k):
        return self._u[k]

    def s(self, k):
        return self._s[k]

    def phi(self, k):
        return self._phi[k]

    def gam(self, k):
        return self._gam[k]

    def y_of_xm(self, k):
        return self._xm[k][2 * self.n_q :]

    def y_of_xp(self, k):
        return self._xp[k][2 * self.n_q :]

    def tau_of_u(self, k):
        """Torque entries of both FOH endpoints of interval k."""
        u = self._u[k]
        return np.concatenate([u[: self.n_a], u[self.n_u : self.n_u + self.n_a]])


@dataclass
class NodeConstraints:
    """Stacked node-relation residuals at one decision vector."""

    psi: np.ndarray  # (N-1, 3 n_c + n_g_out)
    theta_eq: np.ndarray  # (N, 2 n_c)
    theta_ineq: np.ndarray  # (N, 4 n_c)
    impulse_defect: np.ndarray  # (N, n_xt)


@dataclass
class ScalingInfo:
    """Affine map z_phys = scale * z_scaled + offset (componentwise)."""

    scale: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        if np.any(self.scale <= 0):
            raise ValueError("scales must be positive")

    @classmethod
    def from_bounds(cls, lo, hi):
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        if np.any(hi <= lo):
            raise ValueError("degenerate bounds")
        return cls(scale=(hi - lo) / 2.0, offset=(hi + lo) / 2.0)

    def apply(self, z_phys):
        return (np.asarray(z_phys) - self.offset) / self.scale

    def invert(self, z_scaled):
        return np.asarray(z_scaled) * self.scale + self.offset


def scale(info, z):
    return info.apply(z)


def unscale(info, z_scaled):
    return info.invert(z_scaled)


class Transcription:
    """Cached per-scenario workspace: layout, integrator, node-constraint
    functions with exact Jacobians, scaling, bounds, and cost structure."""

    def __init__(self, scenario):
        self.scenario = scenario
        model = scenario.model
        self.model = model
        self.layout = Layout(scenario)
        g, n_g = build_path_constraints(
            model, scenario.joint_angle_limits, scenario.body_height_bounds
        )
        self.mixing = scenario.mixing_matrix(n_g)
        self.path_fn = g
        self.discretizer = Discretizer(
            model, mixing=self.mixing, path_fn=g, substeps=scenario.substeps
        )
        self.n_psi = 3 * model.n_c + self.layout.n_g_out
        self._build_node_functions()
        self.scaling = self._build_scaling()

    # node-relation functions (vectorized over nodes/intervals)

    def _build_node_functions(self):
        model = self.model
        n_q, n_c, n_y = model.n_q, model.n_c, self.layout.n_y
        n_g_out = self.layout.n_g_out

        def psi_fn(y_pair, delta, epsilon):
            dy = y_pair[n_y:] - y_pair[:n_y]
            rows = []
            for i in range(n_c):
                d_phin, d_lam, d_gam, d_rho, d_sd = dy[5 * i : 5 * i + 5]
                rows.append(_fb_value(d_phin, d_sd, delta))
                rows.append(_fb_value(d_phin, d_lam, delta))
                rows.append(_fb_value(d_gam, d_rho, delta))
            for i in range(n_g_out):
                rows.append(dy[5 * n_c + i] - epsilon)
            return jnp.stack(rows) if rows else jnp.zeros(0)

        def theta_fn(vec, delta):
            q = vec[:n_q]
            vm = vec[n_q : 2 * n_q]
            vp = vec[2 * n_q : 3 * n_q]
            Phi = vec[3 * n_q : 3 * n_q + 2 * n_c].reshape(n_c, 2)
            Gam = vec[3 * n_q + 2 * n_c :]
            res = impact_residuals(model, q, vm, vp, Phi, Gam, delta)
            return jnp.concatenate([res.eq, res.ineq])

        def impulse_fn(vec):
            q = vec[:n_q]
            vm = vec[n_q : 2 * n_q]
            vp = vec[2 * n_q : 3 * n_q]
            Phi = vec[3 * n_q :].reshape(n_c, 2)
            return vp - impact_map(model, q, vm, Phi)

        self._psi = jax.jit(jax.vmap(psi_fn, in_axes=(0, None, None)))
        self._psi_jac = jax.jit(jax.vmap(jax.jacfwd(psi_fn), in_axes=(0, None, None)))
        self._theta = jax.jit(jax.vmap(theta_fn, in_axes=(0, None)))
        self._theta_jac = jax.jit(jax.vmap(jax.jacfwd(theta_fn), in_axes=(0, None)))
        self._impulse = jax.jit(jax.vmap(impulse_fn))
        self._impulse_jac = jax.jit(jax.vmap(jax.jacfwd(impulse_fn)))

    def _node_inputs(self, z):
        lay = self.layout
        n_q = lay.n_q
        N = lay.N
        y_pairs = np.stack(
            [np.concatenate([z[lay.y_of_xp(k)], z[lay.y_of_xm(k + 1)]]) for k in range(N - 1)]
        )
        theta_vecs = np.stack(
            [
                np.concatenate(
                    [
                        z[lay.xm(k)][:n_q],
                        z[lay.xm(k)][n_q : 2 * n_q],
                        z[lay.xp(k)][n_q : 2 * n_q],
                        z[lay.phi(k)],
                        z[lay.gam(k)],
                    ]
                )
                for k in range(N)
            ]
        )
        imp_vecs = theta_vecs[:, : 3 * n_q + 2 * lay.n_c]
        return y_pairs, theta_vecs, imp_vecs

    def node_constraints(self, z, delta, epsilon=None):
        """Evaluate Psi, Theta, and the impulse defect at a flat z."""
        if epsilon is None:
            epsilon = self.scenario.ctcs_epsilon
        lay = self.layout
        n_q, n_c = lay.n_q, lay.n_c
        y_pairs, theta_vecs, imp_vecs = self._node_inputs(z)
        psi = np.asarray(self._psi(jnp.asarray(y_pairs), float(delta), float(epsilon)))
        th = np.asarray(self._theta(jnp.asarray(theta_vecs), float(delta)))
        imp_v = np.asarray(self._impulse(jnp.asarray(imp_vecs)))
        defect = np.zeros((lay.N, lay.n_xt))
        for k in range(lay.N):
            xm, xp = z[lay.xm(k)], z[lay.xp(k)]
            defect[k, :n_q] = xp[:n_q] - xm[:n_q]
            defect[k, n_q : 2 * n_q] = imp_v[k]
            defect[k, 2 * n_q :] = xp[2 * n_q :] - xm[2 * n_q :]
        return NodeConstraints(
            psi=psi, theta_eq=th[:, : 2 * n_c], theta_ineq=th[:, 2 * n_c :], impulse_defect=defect
        )

    def node_jacobians(self, z, delta, epsilon=None):
        """Jacobians of psi rows (wrt y pairs), theta rows and impulse v-rows
        (wrt their packed input vectors), vectorized over nodes."""
        if epsilon is None:
            epsilon = self.scenario.ctcs_epsilon
        y_pairs, theta_vecs, imp_vecs = self._node_inputs(z)
        psi_j = np.asarray(self._psi_jac(jnp.asarray(y_pairs), float(delta), float(epsilon)))
        th_j = np.asarray(self._theta_jac(jnp.asarray(theta_vecs), float(delta)))
        imp_j = np.asarray(self._impulse_jac(jnp.asarray(imp_vecs)))
        return psi_j, th_j, imp_j

    # cost

    def cost(self, z):
        lay = self.layout
        total = 0.0
        for k in range(lay.N - 1):
            tau = z[lay.tau_of_u(k)]
            total += 0.5 * self.scenario.torque_weight * float(tau @ tau)
            if self.scenario.s_reg:
                ds = float(z[lay.s(k)][0]) - self.scenario.s_nominal
                total += 0.5 * self.scenario.s_reg * ds * ds
        return total

    def cost_quadratic(self):
        """(P_diag, c_lin) of the physical-variable cost quadratic."""
        lay = self.layout
        P = np.zeros(lay.dim)
        c = np.zeros(lay.dim)
        for k in range(lay.N - 1):
            P[lay.tau_of_u(k)] += self.scenario.torque_weight
            if self.scenario.s_reg:
                P[lay.s(k)] += self.scenario.s_reg
                c[lay.s(k)] += -self.scenario.s_reg * self.scenario.s_nominal
        return P, c

    # scaling and bounds

    def _build_scaling(self):
        sc = self.scenario
        lay = self.layout
        model = self.model
        n_q = lay.n_q
        scale_v = np.ones(lay.dim)
        state_scale = np.ones(lay.n_xt)
        for i in range(2 * n_q):
            state_scale[i] = max(1.0, abs(sc.x_init[i]), abs(sc.x_final[i]))
        u_scale = np.ones(lay.n_u)
        tq = [max(abs(model.joints[j].torque_min), abs(model.joints[j].torque_max), 1e-9)
              for j in model.actuated_joints]
        u_scale[: lay.n_a] = tq
        u_scale[lay.n_a : lay.n_a + 2 * lay.n_c] = sc.force_max
        u_scale[lay.n_a + 2 * lay.n_c :] = sc.gamma_max
        for k in range(lay.N):
            scale_v[lay.xm(k)] = state_scale
            scale_v[lay.xp(k)] = state_scale
            scale_v[lay.phi(k)] = sc.impulse_max
            scale_v[lay.gam(k)] = sc.gamma_max
        for k in range(lay.N - 1):
            scale_v[lay.u(k)] = np.concatenate([u_scale, u_scale])
            scale_v[lay.s(k)] = sc.s_nominal
        return ScalingInfo(scale=scale_v, offset=np.zeros(lay.dim))

    def control_bounds(self):
        """Box (lo, hi) on one control endpoint, in physical units.

        Tangential forces carry a loose box implied by the friction cone;
        the cone itself is a separate SOC row in the subproblem.
        """
        sc = self.scenario
        model = self.model
        lay = self.layout
        lo = np.empty(lay.n_u)
        hi = np.empty(lay.n_u)
        for a, j in enumerate(model.actuated_joints):
            lo[a] = model.joints[j].torque_min
            hi[a] = model.joints[j].torque_max
        for i in range(lay.n_c):
            mu = model.contacts[i].friction_mu
            lo[lay.n_a + 2 * i] = -mu * sc.force_max
            hi[lay.n_a + 2 * i] = mu * sc.force_max
            lo[lay.n_a + 2 * i + 1] = 0.0
            hi[lay.n_a + 2 * i + 1] = sc.force_max
        lo[lay.n_a + 2 * lay.n_c :] = 0.0
        hi[lay.n_a + 2 * lay.n_c :] = sc.gamma_max
        return lo, hi

    def impulse_bounds(self):
        """Box (lo, hi) on one node's (Phi, Gamma) block, physical units."""
        sc = self.scenario
        lay = self.layout
        lo = np.empty(3 * lay.n_c)
        hi = np.empty(3 * lay.n_c)
        for i in range(lay.n_c):
            mu = self.model.contacts[i].friction_mu
            lo[2 * i] = -mu * sc.impulse_max
            hi[2 * i] = mu * sc.impulse_max
            lo[2 * i + 1] = 0.0
            hi[2 * i + 1] = sc.impulse_max
        lo[2 * lay.n_c :] = 0.0
        hi[2 * lay.n_c :] = sc.gamma_max
        return lo, hi

    # initial guess

    def initial_guess(self):
        sc = self.scenario
        lay = self.layout
        model = self.model
        rng = np.random.default_rng(sc.seed)
        n_q = lay.n_q
        z = np.zeros(lay.dim)
        q_i, q_f = sc.x_init[:n_q], sc.x_final[:n_q]
        for k in range(lay.N):
            frac = k / (lay.N - 1)
            pose = (1.0 - frac) * q_i + frac * q_f
            z[lay.xm(k)[:n_q]] = pose
            z[lay.xp(k)[:n_q]] = pose
        for k in range(lay.N - 1):
            u = np.zeros(2 * lay.n_u)
            for side in range(2):
                base = side * lay.n_u + lay.n_a
                for i in range(lay.n_c):
                    mu = model.contacts[i].friction_mu
                    fn = rng.uniform(0.0, sc.guess_force_scale)
                    ft = rng.uniform(-mu * fn, mu * fn) if fn > 0 else 0.0
                    u[base + 2 * i] = ft
                    u[base + 2 * i + 1] = fn
            z[lay.u(k)] = u
            z[lay.s(k)] = sc.s_nominal
        for k in range(lay.N):
            blk = np.zeros(2 * lay.n_c)
            for i in range(lay.n_c):
                mu = model.contacts[i].friction_mu
                pn = rng.uniform(0.0, sc.guess_impulse_scale) if sc.guess_impulse_scale else 0.0
                pt = rng.uniform(-mu * pn, mu * pn) if pn > 0 else 0.0
                blk[2 * i] = pt
                blk[2 * i + 1] = pn
            z[lay.phi(k)] = blk
        # auxiliary channels from a forward pass over the interpolated states
        y = np.zeros(lay.n_y)
        z[lay.y_of_xm(0)] = y
        for k in range(lay.N):
            z[lay.y_of_xp(k)] = z[lay.y_of_xm(k)]
            if k == lay.N - 1:
                break
            start = np.concatenate([z[lay.xp(k)][: 2 * n_q], z[lay.y_of_xp(k)]])
            end = self.discretizer.propagate(start, z[lay.u(k)].reshape(2, -1), float(z[lay.s(k)][0]))
            z[lay.y_of_xm(k + 1)] = end[2 * n_q :]
        return z


_transcriptions = {}


def get_transcription(scenario):
    """Per-scenario cached workspace (jitted functions are reused)."""
    key = id(scenario)
    if key not in _transcriptions:
        _transcriptions[key] = Transcription(scenario)
    return _transcriptions[key]


def initial_guess(scenario):
    return get_transcription(scenario).initial_guess()


def node_constraints(scenario, z, delta, epsilon=None):
    return get_transcription(scenario).node_constraints(z, delta, epsilon)


def cost(scenario, z):
    return get_transcription(scenario).cost(z)


def trajectory_arrays(scenario, z):
    """Unpack a flat decision vector into named per-node/interval arrays."""
    lay = get_transcription(scenario).layout
    n_q = lay.n_q
    out = {
        "q_minus": np.stack([z[lay.xm(k)][:n_q] for k in range(lay.N)]),
        "v_minus": np.stack([z[lay.xm(k)][n_q : 2 * n_q] for k in range(lay.N)]),
        "y_minus": np.stack([z[lay.y_of_xm(k)] for k in range(lay.N)]),
        "q_plus": np.stack([z[lay.xp(k)][:n_q] for k in range(lay.N)]),
        "v_plus": np.stack([z[lay.xp(k)][n_q : 2 * n_q] for k in range(lay.N)]),
        "y_plus": np.stack([z[lay.y_of_xp(k)] for k in range(lay.N)]),
        "U": np.stack([z[lay.u(k)].reshape(2, lay.n_u) for k in range(lay.N - 1)]),
        "S": np.array([float(z[lay.s(k)][0]) for k in range(lay.N - 1)]),
        "Phi": np.stack([z[lay.phi(k)].reshape(lay.n_c, 2) for k in range(lay.N)]),
        "Gamma": np.stack([z[lay.gam(k)] for k in range(lay.N)]),
    }
    return out


# scenario file handling

_SCENARIO_KEYS = {
    "model",
    "N",
    "substeps",
    "horizon",
    "x_init",
    "x_final",
    "mask_final",
    "path_constraints",
    "ctcs_epsilon",
    "cost",
    "seed",
    "bounds",
}
_HORIZON_KEYS = {"t_f", "fixed", "s_min", "s_max"}
_PATH_KEYS = {"joint_angle_limits", "body_height_bounds", "mixing"}
_COST_KEYS = {"torque_weight", "s_reg"}
_BOUND_KEYS = {"force_max", "impulse_max", "gamma_max", "guess_force_scale", "guess_impulse_scale"}


def _check_keys(d, allowed, what):
    extra = set(d) - allowed
    if extra:
        raise ValueError(f"unknown {what} keys: {sorted(extra)}")


def scenario_from_dict(data, base_dir="."):
    _check_keys(data, _SCENARIO_KEYS, "scenario")
    for req in ("model", "horizon", "x_init", "x_final"):
        if req not in data:
            raise ValueError(f"scenario missing required key {req!r}")
    model_entry = data["model"]
    if isinstance(model_entry, str):
        import os

        model = multibody.load_model(os.path.join(base_dir, model_entry))
    else:
        model = multibody.model_from_dict(model_entry)
    horizon = data["horizon"]
    _check_keys(horizon, _HORIZON_KEYS, "horizon")
    path = data.get("path_constraints", {})
    _check_keys(path, _PATH_KEYS, "path_constraints")
    cost_d = data.get("cost", {})
    _check_keys(cost_d, _COST_KEYS, "cost")
    bounds = data.get("bounds", {})
    _check_keys(bounds, _BOUND_KEYS, "bounds")
    kw = {}
    if "s_min" in horizon or "s_max" in horizon:
        kw["s_bounds"] = (horizon["s_min"], horizon["s_max"])
    if "mask_final" in data:
        kw["mask_final"] = np.asarray(data["mask_final"], dtype=bool)
    return ScenarioSpec(
        model=model,
        x_init=np.asarray(data["x_init"], dtype=float),
        x_final=np.asarray(data["x_final"], dtype=float),
        t_f=float(horizon["t_f"]),
        fixed_time=bool(horizon.get("fixed", True)),
        N=int(data.get("N", 15)),
        substeps=int(data.get("substeps", 10)),
        joint_angle_limits=tuple(tuple(r) for r in path.get("joint_angle_limits", ())),
        body_height_bounds=tuple(tuple(r) for r in path.get("body_height_bounds", ())),
        mixing=path.get("mixing", "identity"),
        ctcs_epsilon=float(data.get("ctcs_epsilon", 1e-4)),
        torque_weight=float(cost_d.get("torque_weight", 1.0)),
        s_reg=float(cost_d.get("s_reg", 0.0)),
        force_max=bounds.get("force_max"),
        impulse_max=bounds.get("impulse_max"),
        gamma_max=float(bounds.get("gamma_max", 10.0)),
        guess_force_scale=bounds.get("guess_force_scale"),
        guess_impulse_scale=float(bounds.get("guess_impulse_scale", 0.0)),
        seed=int(data.get("seed", 0)),
        **kw,
    )


def scenario_to_dict(scenario):
    return {
        "model": multibody.model_to_dict(scenario.model),
        "N": scenario.N,
        "substeps": scenario.substeps,
        "horizon": {
            "t_f": scenario.t_f,
            "fixed": scenario.fixed_time,
            "s_min": scenario.s_bounds[0],
            "s_max": scenario.s_bounds[1],
        },
        "x_init": scenario.x_init.tolist(),
        "x_final": scenario.x_final.tolist(),
        "mask_final": scenario.mask_final.astype(int).tolist(),
        "path_constraints": {
            "joint_angle_limits": [list(r) for r in scenario.joint_angle_limits],
            "body_height_bounds": [list(r) for r in scenario.body_height_bounds],
            "mixing": scenario.mixing,
        },
        "ctcs_epsilon": scenario.ctcs_epsilon,
        "cost": {"torque_weight": scenario.torque_weight, "s_reg": scenario.s_reg},
        "bounds": {
            "force_max": scenario.force_max,
            "impulse_max": scenario.impulse_max,
            "gamma_max": scenario.gamma_max,
            "guess_force_scale": scenario.guess_force_scale,
            "guess_impulse_scale": scenario.guess_impulse_scale,
        },
        "seed": scenario.seed,
    }


def load_scenario(path):
    import os

    with open(path) as f:
        data = json.load(f)
    return scenario_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))
