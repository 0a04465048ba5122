"""Prox-linear sequential convex programming with a backtracking homotopy.

Each outer iteration linearizes the interval integration map and the
node relations around the incumbent, builds a sparse SOCP whose
objective combines the torque cost, a quadratic proximal term on the
scaled step, and an exact l1 penalty on the linearized nonconvex rows,
solves it with the embedded interior-point method, and then updates the
complementarity-relaxation parameter delta: shrink geometrically on
progress, hold on a short stall, and backtrack by log-scale bisection
toward the iterate from n_stall steps ago on a long stall.
"""

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conic import ProgramBuilder, canonicalize, ipm_solve, precondition, unscale_solution
from .ocp import get_transcription

__all__ = [
    "SCPConfig",
    "IterateRecord",
    "LinearizedProblem",
    "linearize_all",
    "build_subproblem",
    "homotopy_step",
    "solve",
]


@dataclass
class SCPConfig:
    w_prox: float = 2000.0
    w_ep: float = 50000.0
    delta0: float = 1.0
    delta_min: float = 1e-3
    alpha: float = 0.85
    n_stall: int = 10
    eps_px: float = 1e-5
    eps_ep: float = 1e-5
    max_iters: int = 2000
    conic_tol: float = 1e-8
    jobs: int = 1

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        if not (self.delta_min < self.delta0):
            raise ValueError("delta_min must be below delta0")
        if self.w_prox <= 0 or self.w_ep <= 0:
            raise ValueError("weights must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass
class IterateRecord:
    z: np.ndarray
    delta: float
    j_px: float
    j_ep: float
    cost: float
    wall_time: float


@dataclass
class LinearizedProblem:
    """All first-order data at one reference point (physical units)."""

    z_ref: np.ndarray
    ends: np.ndarray  # (N-1, n_xt) integrated interval end states
    jx: np.ndarray  # (N-1, n_xt, n_xt)
    ju: np.ndarray  # (N-1, n_xt, 2 n_u)
    js: np.ndarray  # (N-1, n_xt)
    defects: np.ndarray  # (N-1, n_xt) multiple-shooting defects
    psi: np.ndarray  # (N-1, n_psi)
    psi_jac: np.ndarray  # (N-1, n_psi, 2 n_y)
    theta: np.ndarray  # (N, 6 n_c) eq rows then ineq rows
    theta_jac: np.ndarray
    imp_v: np.ndarray  # (N, n_q) impulse-map velocity defect
    imp_jac: np.ndarray


def linearize_all(tr, z, delta, epsilon=None, jobs=1):
    """Integrate and differentiate every interval and node relation at z.

    ``jobs`` > 1 fans the interval batch out over that many threads in
    fixed contiguous chunks; the assembled result is identical to the
    single-threaded one.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite reference point")
    lay = tr.layout
    starts = np.stack([z[lay.xp(k)] for k in range(lay.N - 1)])
    Us = np.stack([z[lay.u(k)] for k in range(lay.N - 1)])
    Ss = np.array([float(z[lay.s(k)][0]) for k in range(lay.N - 1)])
    if jobs > 1 and lay.N - 1 > 1:
        bounds = np.linspace(0, lay.N - 1, min(jobs, lay.N - 1) + 1).astype(int)
        with ThreadPoolExecutor(max_workers=len(bounds) - 1) as pool:
            parts = list(
                pool.map(
                    lambda ab: tr.discretizer.linearize_batch(
                        starts[ab[0] : ab[1]], Us[ab[0] : ab[1]], Ss[ab[0] : ab[1]]
                    ),
                    zip(bounds[:-1], bounds[1:]),
                )
            )
        ends, jx, ju, js = (np.concatenate(a) for a in zip(*parts))
    else:
        ends, jx, ju, js = tr.discretizer.linearize_batch(starts, Us, Ss)
    defects = np.stack([z[lay.xm(k + 1)] - ends[k] for k in range(lay.N - 1)])

    nc = tr.node_constraints(z, delta, epsilon)
    psi_j, th_j, imp_j = tr.node_jacobians(z, delta, epsilon)
    theta = np.concatenate([nc.theta_eq, nc.theta_ineq], axis=1)
    n_q = lay.n_q
    imp_v = nc.impulse_defect[:, n_q : 2 * n_q]
    return LinearizedProblem(
        z_ref=z.copy(),
        ends=ends,
        jx=jx,
        ju=ju,
        js=js,
        defects=defects,
        psi=nc.psi,
        psi_jac=psi_j,
        theta=theta,
        theta_jac=th_j,
        imp_v=imp_v,
        imp_jac=imp_j,
    )


class _SubproblemMeta:
    """Index bookkeeping for extracting steps and penalty values."""

    def __init__(self, z_idx, sp_idx, sm_idx, t_idx):
        self.z_idx = z_idx
        self.sp_idx = sp_idx
        self.sm_idx = sm_idx
        self.t_idx = t_idx

    def step_scaled(self, sol, z_j_scaled):
        return sol.x[self.z_idx] - z_j_scaled

    def j_px(self, sol, z_j_scaled):
        d = self.step_scaled(sol, z_j_scaled)
        return float(d @ d)

    def j_ep(self, sol):
        return float(
            np.sum(sol.x[self.sp_idx]) + np.sum(sol.x[self.sm_idx]) + np.sum(sol.x[self.t_idx])
        )


def build_subproblem(tr, lin, z_j, delta, config):
    """Assemble the convex subproblem at iterate z_j.

    Nonconvex rows (dynamics and impulse-velocity defects, impact
    complementarity, integral complementarity) are linearized and given
    l1-penalized slacks; convex rows of the original problem (boundary
    conditions, pose/accumulator copies through impact, friction cones,
    variable boxes, nonnegative accumulator increments, the fixed-time
    row) are kept exact.  Returns (ConicProgram, meta).
    """
    lay = tr.layout
    sc = tr.scenario
    sigma = tr.scaling.scale
    offset = tr.scaling.offset
    z_j_scaled = tr.scaling.apply(z_j)
    n_q, n_c, n_y, n_xt, n_u = lay.n_q, lay.n_c, lay.n_y, lay.n_xt, lay.n_u

    n_eq_slack = (lay.N - 1) * n_xt + lay.N * (n_q + 2 * n_c)
    n_in_slack = (lay.N - 1) * tr.n_psi + lay.N * 4 * n_c

    bld = ProgramBuilder()
    z_idx = bld.add_variables("z", lay.dim)
    sp_idx = bld.add_variables("slack_eq_pos", n_eq_slack)
    sm_idx = bld.add_variables("slack_eq_neg", n_eq_slack)
    t_idx = bld.add_variables("slack_ineq", n_in_slack)

    def eq(cols, vals, rhs, slack=None):
        """sum(vals * z_phys[cols]) = rhs, optionally split-slacked."""
        cols = np.asarray(cols, dtype=int)
        vals = np.asarray(vals, dtype=float)
        keep = vals != 0.0
        cols, vals = cols[keep], vals[keep]
        rhs = rhs - vals @ offset[cols]
        svals = vals * sigma[cols]
        if slack is None:
            bld.add_eq(cols, svals, rhs)
        else:
            bld.add_eq(
                np.concatenate([cols, [sp_idx[slack], sm_idx[slack]]]),
                np.concatenate([svals, [-1.0, 1.0]]),
                rhs,
            )

    def ineq(cols, vals, rhs, slack=None):
        """sum(vals * z_phys[cols]) <= rhs, optionally slacked."""
        cols = np.asarray(cols, dtype=int)
        vals = np.asarray(vals, dtype=float)
        keep = vals != 0.0
        cols, vals = cols[keep], vals[keep]
        rhs = rhs - vals @ offset[cols]
        svals = vals * sigma[cols]
        if slack is None:
            bld.add_ineq(cols, svals, rhs)
        else:
            bld.add_ineq(
                np.concatenate([cols, [t_idx[slack]]]), np.concatenate([svals, [-1.0]]), rhs
            )

    def soc_entry(cols, vals, off):
        cols = np.asarray(cols, dtype=int)
        vals = np.asarray(vals, dtype=float)
        return (cols, vals * sigma[cols], off + vals @ offset[cols])

    eq_s = 0
    in_s = 0

    # linearized multiple-shooting defects: x-_{k+1} - F(x+_k, U_k, S_k) = 0
    for k in range(lay.N - 1):
        xp_k, xm_n, u_k, s_k = lay.xp(k), lay.xm(k + 1), lay.u(k), lay.s(k)
        ref = np.concatenate([lin.z_ref[xp_k], lin.z_ref[u_k], lin.z_ref[s_k]])
        for r in range(n_xt):
            jrow = np.concatenate([lin.jx[k][r], lin.ju[k][r], [lin.js[k][r]]])
            cols = np.concatenate([[xm_n[r]], xp_k, u_k, s_k])
            vals = np.concatenate([[1.0], -jrow])
            rhs = lin.ends[k][r] - jrow @ ref
            eq(cols, vals, rhs, slack=eq_s)
            eq_s += 1

    # node relations
    for k in range(lay.N):
        xm_k, xp_k, phi_k, gam_k = lay.xm(k), lay.xp(k), lay.phi(k), lay.gam(k)
        vec_cols = np.concatenate(
            [xm_k[:n_q], xm_k[n_q : 2 * n_q], xp_k[n_q : 2 * n_q], phi_k, gam_k]
        )
        imp_cols = vec_cols[: 3 * n_q + 2 * n_c]
        vec_ref = lin.z_ref[vec_cols]
        imp_ref = vec_ref[: 3 * n_q + 2 * n_c]

        # linearized impulse-map velocity rows: imp_v + J (vec - ref) = 0
        for r in range(n_q):
            jrow = lin.imp_jac[k][r]
            eq(imp_cols, jrow, jrow @ imp_ref - lin.imp_v[k][r], slack=eq_s)
            eq_s += 1
        # pose and accumulators copy through the impact exactly
        for r in list(range(n_q)) + list(range(2 * n_q, n_xt)):
            eq([xp_k[r], xm_k[r]], [1.0, -1.0], 0.0)

        # impact complementarity: eq rows then ineq rows
        for r in range(2 * n_c):
            jrow = lin.theta_jac[k][r]
            eq(vec_cols, jrow, jrow @ vec_ref - lin.theta[k][r], slack=eq_s)
            eq_s += 1
        for r in range(2 * n_c, 6 * n_c):
            jrow = lin.theta_jac[k][r]
            ineq(vec_cols, jrow, jrow @ vec_ref - lin.theta[k][r], slack=in_s)
            in_s += 1

        # impulse boxes and friction cones; the cone subsumes the lower
        # bounds on Phi_n and both bounds on Phi_t, so only the upper
        # normal bound and the Gamma box stay as orthant rows
        _, hi = tr.impulse_bounds()
        for i in range(n_c):
            ineq([phi_k[2 * i + 1]], [1.0], hi[2 * i + 1])
            ineq([gam_k[i]], [1.0], hi[2 * n_c + i])
            ineq([gam_k[i]], [-1.0], 0.0)
        for i in range(n_c):
            mu = tr.model.contacts[i].friction_mu
            bld.add_soc(
                [
                    soc_entry([phi_k[2 * i + 1]], [-mu], 0.0),
                    soc_entry([phi_k[2 * i]], [-1.0], 0.0),
                ]
            )

    # integral complementarity rows per interval
    for k in range(lay.N - 1):
        pair_cols = np.concatenate([lay.y_of_xp(k), lay.y_of_xm(k + 1)])
        pair_ref = lin.z_ref[pair_cols]
        for r in range(tr.n_psi):
            jrow = lin.psi_jac[k][r]
            ineq(pair_cols, jrow, jrow @ pair_ref - lin.psi[k][r], slack=in_s)
            in_s += 1
        # nonnegative accumulator increments for the complementarity-paired
        # contact channels.  The ramped-distance channel gets a margin of
        # twice the accumulator budget: its rate dips below zero on the
        # sub-epsilon penetration excursions the budget deliberately
        # tolerates, and a hard zero bound there manufactures irreducible
        # penalty at touchdown.  Path accumulators are capped by the psi
        # rows instead.
        for i in range(5 * n_c):
            margin = 2.0 * sc.ctcs_epsilon if i % 5 == 4 else 0.0
            ineq([pair_cols[n_y + i], pair_cols[i]], [-1.0, 1.0], margin)

    # control boxes, friction cones, dilation boxes
    lo_u, hi_u = tr.control_bounds()
    for k in range(lay.N - 1):
        u_k, s_k = lay.u(k), lay.s(k)
        for side in range(2):
            base = side * n_u
            for i in range(lay.n_a):
                ineq([u_k[base + i]], [1.0], hi_u[i])
                ineq([u_k[base + i]], [-1.0], -lo_u[i])
            for i in range(n_c):
                # cone subsumes phi_n >= 0 and the tangential box
                ineq([u_k[base + lay.n_a + 2 * i + 1]], [1.0], hi_u[lay.n_a + 2 * i + 1])
                gi = lay.n_a + 2 * n_c + i
                ineq([u_k[base + gi]], [1.0], hi_u[gi])
                ineq([u_k[base + gi]], [-1.0], 0.0)
            for i in range(n_c):
                mu = tr.model.contacts[i].friction_mu
                fn = u_k[base + lay.n_a + 2 * i + 1]
                ft = u_k[base + lay.n_a + 2 * i]
                bld.add_soc([soc_entry([fn], [-mu], 0.0), soc_entry([ft], [-1.0], 0.0)])
        ineq(s_k, [1.0], sc.s_bounds[1])
        ineq(s_k, [-1.0], -sc.s_bounds[0])

    # boundary conditions
    x_dim = 2 * n_q
    for r in range(x_dim):
        eq([lay.xm(0)[r]], [1.0], sc.x_init[r])
    for r in range(n_y):
        eq([lay.y_of_xm(0)[r]], [1.0], 0.0)
    for r in range(x_dim):
        if sc.mask_final[r]:
            eq([lay.xp(lay.N - 1)[r]], [1.0], sc.x_final[r])
    if sc.fixed_time:
        cols = np.concatenate([lay.s(k) for k in range(lay.N - 1)])
        eq(cols, np.ones(lay.N - 1), sc.t_f)

    # objective: cost quadratic + proximal term + l1 penalty
    P_cost, c_cost = tr.cost_quadratic()
    bld.add_quad_diag(z_idx, P_cost * sigma**2)
    bld.add_linear(z_idx, sigma * (P_cost * offset + c_cost))
    bld.add_quad_diag(z_idx, np.full(lay.dim, 2.0 * config.w_prox))
    bld.add_linear(z_idx, -2.0 * config.w_prox * z_j_scaled)
    for idx in (sp_idx, sm_idx, t_idx):
        bld.add_linear(idx, np.full(idx.size, config.w_ep))
        for i in idx:
            bld.add_ineq([i], [-1.0], 0.0)

    assert eq_s == n_eq_slack and in_s == n_in_slack
    return canonicalize(bld), _SubproblemMeta(z_idx, sp_idx, sm_idx, t_idx)


def homotopy_step(history, j, config):
    """Next relaxation parameter after producing iterate j+1.

    history[i] is the record of iterate i (index 0 = the initial
    record with zero progress measures).
    """
    nxt = history[j + 1]
    M = max(j - config.n_stall, 1)
    ref = history[M]

    # progress below the convergence tolerances is indistinguishable from
    # subproblem-solver noise, so comparisons are clamped there; otherwise
    # the stall tests turn into coin flips that keep relaxing delta after
    # the iterate has effectively converged at the current tightness
    def px(rec):
        return max(rec.j_px, config.eps_px)

    def ep(rec):
        return max(rec.j_ep, config.eps_ep)

    if px(nxt) > px(ref) or ep(nxt) > ep(ref):
        return float(np.exp(0.5 * np.log(history[j].delta * ref.delta)))
    if px(nxt) > px(history[j]) or ep(nxt) > ep(history[j]):
        return history[j].delta
    # floor at delta_min: tightening further only makes the relaxation
    # nonsmooth without changing the converged feasible set
    return max(config.alpha * history[j].delta, config.delta_min)


def solve(scenario, config=None, log_path=None, z0=None):
    """Run the full SCP loop on a scenario.

    Returns (z_final, history, status) with status in
    {"converged", "max_iters", "solver_failure"}.
    """
    config = config or SCPConfig()
    tr = get_transcription(scenario)
    z = tr.initial_guess() if z0 is None else np.asarray(z0, dtype=float).copy()
    history = [
        IterateRecord(z=z.copy(), delta=config.delta0, j_px=0.0, j_ep=0.0, cost=tr.cost(z), wall_time=0.0)
    ]
    log_f = open(log_path, "w") if log_path else None
    status = "max_iters"
    warm_x = None
    j = 0
    try:
        while (
            history[j].j_px > config.eps_px
            or history[j].j_ep > config.eps_ep
            or history[j].delta > config.delta_min
        ):
            if j >= config.max_iters:
                status = "max_iters"
                break
            t0 = time.perf_counter()
            delta_j = history[j].delta
            sol = None
            for attempt in range(2):
                lin = linearize_all(tr, z, delta_j, jobs=config.jobs)
                prog, meta = build_subproblem(tr, lin, z, delta_j, config)
                scaled_prog, prec = precondition(prog)
                cand = unscale_solution(
                    prec, ipm_solve(scaled_prog, tol=config.conic_tol, x0=warm_x)
                )
                if cand.status == "optimal":
                    sol = cand
                    break
                if attempt == 0:
                    # one retry with delta relaxed halfway (log scale) to delta0
                    delta_j = float(np.exp(0.5 * np.log(delta_j * config.delta0)))
                    history[j].delta = delta_j
                    warm_x = None
            if sol is None:
                status = "solver_failure"
                break
            warm_x = sol.x
            z_j_scaled = tr.scaling.apply(z)
            z_new = tr.scaling.invert(sol.x[meta.z_idx])
            rec = IterateRecord(
                z=z_new.copy(),
                delta=delta_j,
                j_px=meta.j_px(sol, z_j_scaled),
                j_ep=meta.j_ep(sol),
                cost=tr.cost(z_new),
                wall_time=time.perf_counter() - t0,
            )
            history.append(rec)
            rec.delta = homotopy_step(history, j, config)
            z = z_new
            j += 1
            if log_f:
                log_f.write(
                    json.dumps(
                        {
                            "iter": j,
                            "delta": delta_j,
                            "delta_next": rec.delta,
                            "j_px": rec.j_px,
                            "j_ep": rec.j_ep,
                            "cost": rec.cost,
                            "ipm_iters": sol.iterations,
                            "ipm_status": sol.status,
                            "wall_time": rec.wall_time,
                        }
                    )
                    + "\n"
                )
                log_f.flush()
        else:
            status = "converged"
    finally:
        if log_f:
            log_f.close()
    return z, history, status
