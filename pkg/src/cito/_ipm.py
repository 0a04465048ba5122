"""Embedded primal-dual interior-point method for canonical-form SOCPs.

Nesterov-Todd scaling for second-order cones, Mehrotra
predictor-corrector steps, and a sparse LU factorization of the
statically regularized quasi-definite KKT system with one round of
iterative refinement against the unregularized matrix.  Solves

    minimize    (1/2) x' P x + c' x
    subject to  A x = b,   G x + s = h,   s in K,

with dual feasibility P x + c + A' y + G' z = 0, z in K*, s.z = 0.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .conic import ConicSolution

_REG = 1e-9
_REG_RETRY = 1e-7
_STEP_FRAC = 0.99
_MAX_ITER = 200


class _Scaling:
    """NT scaling point: diagonal part for the orthant, (eta, wbar) per SOC.

    For a second-order cone, with J = diag(1, -1, ..., -1) and the unit
    hyperbolic vector wbar (wbar' J wbar = 1),

        W = eta * [[w0, w1'], [w1, I + w1 w1' / (1 + w0)]],

    the symmetric square root of eta^2 (2 wbar wbar' - J), so that
    W z = W^{-1} s = lambda.
    """

    def __init__(self, cones, s, z):
        nn = cones.nonneg
        self.cones = cones
        self.w_diag = np.sqrt(s[:nn] / z[:nn]) if nn else np.zeros(0)
        self.soc = []
        start = nn
        for d in cones.soc:
            sb, zb = s[start : start + d], z[start : start + d]
            res_s = sb[0] ** 2 - sb[1:] @ sb[1:]
            res_z = zb[0] ** 2 - zb[1:] @ zb[1:]
            sbar = sb / np.sqrt(res_s)
            zbar = zb / np.sqrt(res_z)
            gamma = np.sqrt((1.0 + sbar @ zbar) / 2.0)
            wbar = sbar.copy()
            wbar[0] += zbar[0]
            wbar[1:] -= zbar[1:]
            wbar /= 2.0 * gamma
            eta = (res_s / res_z) ** 0.25
            self.soc.append((eta, wbar))
            start += d

    def _apply_soc(self, eta, wbar, v, inverse):
        # W^{-1} shares the form with wbar -> J wbar and eta -> 1/eta
        w0, w1 = wbar[0], wbar[1:]
        if inverse:
            w1 = -w1
        out = np.empty_like(v)
        out[0] = w0 * v[0] + w1 @ v[1:]
        out[1:] = v[0] * w1 + v[1:] + (w1 @ v[1:]) / (1.0 + w0) * w1
        return out / eta if inverse else out * eta

    def apply(self, v, inverse=False):
        """W v (or W^{-1} v)."""
        nn = self.cones.nonneg
        out = np.empty_like(v)
        out[:nn] = v[:nn] / self.w_diag if inverse else v[:nn] * self.w_diag
        start = nn
        for (eta, wbar), d in zip(self.soc, self.cones.soc):
            out[start : start + d] = self._apply_soc(eta, wbar, v[start : start + d], inverse)
            start += d
        return out

    def wtw(self):
        """W' W = W^2 as a sparse matrix (for the KKT (3,3) block)."""
        blocks = []
        nn = self.cones.nonneg
        if nn:
            blocks.append(sp.diags(self.w_diag**2))
        for (eta, wbar), d in zip(self.soc, self.cones.soc):
            H = 2.0 * np.outer(wbar, wbar) - np.diag(np.r_[1.0, -np.ones(d - 1)])
            blocks.append(sp.csc_matrix(eta**2 * H))
        if not blocks:
            return sp.csc_matrix((0, 0))
        return sp.block_diag(blocks, format="csc")

    def lam(self, z):
        return self.apply(z)


def _cone_e(cones):
    e = np.zeros(cones.total_rows)
    e[: cones.nonneg] = 1.0
    start = cones.nonneg
    for d in cones.soc:
        e[start] = 1.0
        start += d
    return e


def _jordan(cones, u, v):
    """Jordan product u o v on the cone algebra."""
    nn = cones.nonneg
    out = np.empty_like(u)
    out[:nn] = u[:nn] * v[:nn]
    start = nn
    for d in cones.soc:
        ub, vb = u[start : start + d], v[start : start + d]
        out[start] = ub @ vb
        out[start + 1 : start + d] = ub[0] * vb[1:] + vb[0] * ub[1:]
        start += d
    return out


def _jordan_div(cones, lam, d):
    """Solve lam o x = d."""
    nn = cones.nonneg
    out = np.empty_like(d)
    out[:nn] = d[:nn] / lam[:nn]
    start = nn
    for dim in cones.soc:
        a = lam[start]
        b = lam[start + 1 : start + dim]
        d0 = d[start]
        d1 = d[start + 1 : start + dim]
        det = a * a - b @ b
        x0 = (a * d0 - b @ d1) / det
        out[start] = x0
        out[start + 1 : start + dim] = (d1 - x0 * b) / a
        start += dim
    return out


def _pos_roots_quadratic(a, b, c):
    """Positive real roots of a t^2 + 2 b t + c = 0 (stable form)."""
    roots = []
    if abs(a) < 1e-300:
        if b != 0.0:
            roots.append(-c / (2.0 * b))
    else:
        disc = b * b - a * c
        if disc >= 0.0:
            sq = np.sqrt(disc)
            q = -(b + np.copysign(sq, b))
            if q != 0.0:
                roots.extend([q / a, c / q])
            else:
                roots.append(0.0)
    return [r for r in roots if r > 0.0]


def _max_step(cones, s, ds):
    """Largest alpha with s + alpha ds remaining in the cone."""
    alpha = np.inf
    nn = cones.nonneg
    neg = ds[:nn] < 0.0
    if np.any(neg):
        alpha = np.min(-s[:nn][neg] / ds[:nn][neg])
    start = nn
    for d in cones.soc:
        sb, db = s[start : start + d], ds[start : start + d]
        # membership holds until the first positive root of either the
        # quadratic s0^2 - |s1|^2 or the linear s0 along the ray
        a = db[0] ** 2 - db[1:] @ db[1:]
        b = sb[0] * db[0] - sb[1:] @ db[1:]
        c = sb[0] ** 2 - sb[1:] @ sb[1:]
        cand = _pos_roots_quadratic(a, b, c)
        if db[0] < 0.0:
            cand.append(-sb[0] / db[0])
        if cand:
            alpha = min(alpha, min(cand))
        start += d
    return alpha


_CENTRALITY = 1e-4


def _centrality(cones, s, z):
    """min_i (s o z)_i over Jordan eigen-pairs, relative to mu.

    Steps are backtracked to keep this above a small threshold; letting a
    single complementary pair die (s_i -> 0 with z_i finite) turns its
    search-direction component into regularization noise that then blocks
    every subsequent step.
    """
    mu = (s @ z) / cones.degree
    if mu <= 0.0:
        return -np.inf
    nn = cones.nonneg
    worst = np.min(s[:nn] * z[:nn]) if nn else np.inf
    start = nn
    for d in cones.soc:
        sb, zb = s[start : start + d], z[start : start + d]
        det_s = sb[0] ** 2 - sb[1:] @ sb[1:]
        det_z = zb[0] ** 2 - zb[1:] @ zb[1:]
        prod = det_s * det_z
        worst = min(worst, np.sqrt(prod) if prod > 0.0 else -np.inf)
        start += d
    return worst / mu


def _cone_margin(cones, v):
    nn = cones.nonneg
    margins = [np.min(v[:nn])] if nn else []
    start = nn
    for d in cones.soc:
        blk = v[start : start + d]
        margins.append(blk[0] - np.linalg.norm(blk[1:]))
        start += d
    return min(margins) if margins else np.inf


def _factor(P, A, G, W2, reg):
    n, p, m = P.shape[0], A.shape[0], G.shape[0]
    K = sp.bmat(
        [
            [P + reg * sp.eye(n), A.T, G.T],
            [A, -reg * sp.eye(p) if p else None, None],
            [G, None, -(W2 + reg * sp.eye(m)) if m else None],
        ],
        format="csc",
    )
    K_exact = sp.bmat(
        [[P, A.T, G.T], [A, None, None], [G, None, -W2 if m else None]], format="csc"
    )
    return splu(K), K_exact


def _solve_refined(lu, K_exact, rhs, rounds=1):
    sol = lu.solve(rhs)
    for _ in range(rounds):
        sol = sol + lu.solve(rhs - K_exact @ sol)
    return sol


class _PlanarRotation:
    """Orthogonal change of slack coordinates turning every dim-2
    second-order cone into a pair of orthant rows.

    (s0, s1) in SOC2 iff ((s0+s1)/sqrt2, (s0-s1)/sqrt2) >= 0, so planar
    cones can ride the (more degeneracy-tolerant) orthant central path;
    the transform is its own inverse up to transposition, and slacks and
    multipliers map back exactly.
    """

    def __init__(self, prog):
        from .conic import ConeSpec

        cones = prog.cones
        self.active = any(d == 2 for d in cones.soc)
        if not self.active:
            return
        m = prog.G.shape[0]
        nn = cones.nonneg
        r = np.sqrt(0.5)
        rows, cols, vals = list(range(nn)), list(range(nn)), [1.0] * nn
        new_row = nn
        n_d2 = 0
        big_dims = []
        big_starts = []
        start = nn
        for d in cones.soc:
            if d == 2:
                rows.extend([new_row, new_row, new_row + 1, new_row + 1])
                cols.extend([start, start + 1, start, start + 1])
                vals.extend([r, r, r, -r])
                new_row += 2
                n_d2 += 1
            else:
                big_dims.append(d)
                big_starts.append(start)
            start += d
        for s0, d in zip(big_starts, big_dims):
            for i in range(d):
                rows.append(new_row)
                cols.append(s0 + i)
                vals.append(1.0)
                new_row += 1
        self.Q = sp.csc_matrix(sp.coo_matrix((vals, (rows, cols)), shape=(m, m)))
        self.cones = ConeSpec(nonneg=nn + 2 * n_d2, soc=tuple(big_dims))

    def transform(self, prog):
        from .conic import ConicProgram

        G = sp.csc_matrix(self.Q @ prog.G)
        G.eliminate_zeros()
        G.sort_indices()
        return ConicProgram(
            P=prog.P, c=prog.c, A=prog.A, b=prog.b, G=G, h=self.Q @ prog.h, cones=self.cones
        )

    def restore(self, sol):
        sol.z = self.Q.T @ sol.z
        sol.s = self.Q.T @ sol.s
        return sol


def ipm_solve(prog, tol=1e-8, max_iter=_MAX_ITER, x0=None):
    """Solve a canonical-form SOCP; optional primal-only warm start x0."""
    rot = _PlanarRotation(prog)
    if rot.active:
        return rot.restore(_ipm_core(rot.transform(prog), tol, max_iter, x0))
    return _ipm_core(prog, tol, max_iter, x0)


def _ipm_core(prog, tol=1e-8, max_iter=_MAX_ITER, x0=None):
    P, c, A, b, G, h = prog.P, prog.c, prog.A, prog.b, prog.G, prog.h
    cones = prog.cones
    n, p, m = prog.n, A.shape[0], G.shape[0]

    def residual_report(x, y, z, s):
        rx = P @ x + c + A.T @ y + G.T @ z
        ry = A @ x - b if p else np.zeros(0)
        rz = G @ x + s - h if m else np.zeros(0)
        obj = 0.5 * (x @ (P @ x)) + c @ x
        pres = max(
            np.linalg.norm(ry, np.inf) / (1.0 + np.linalg.norm(b, np.inf)) if p else 0.0,
            np.linalg.norm(rz, np.inf) / (1.0 + np.linalg.norm(h, np.inf)) if m else 0.0,
        )
        dres = np.linalg.norm(rx, np.inf) / (1.0 + np.linalg.norm(c, np.inf))
        gap = abs(s @ z) / max(1.0, abs(obj)) if m else 0.0
        return obj, {"primal": float(pres), "dual": float(dres), "gap": float(gap)}

    def finish(x, y, z, s, status, iters):
        obj, res = residual_report(x, y, z, s)
        return ConicSolution(
            x=x, y=y, z=z, s=s, status=status, obj=float(obj), residuals=res, iterations=iters
        )

    if m == 0:
        # equality-constrained QP: one KKT solve
        try:
            lu, K_exact = _factor(P, A, sp.csc_matrix((0, n)), sp.csc_matrix((0, 0)), _REG)
        except RuntimeError:
            lu, K_exact = _factor(P, A, sp.csc_matrix((0, n)), sp.csc_matrix((0, 0)), _REG_RETRY)
        sol = _solve_refined(lu, K_exact, np.concatenate([-c, b]), rounds=2)
        x, y = sol[:n], sol[n:]
        out = finish(x, y, np.zeros(0), np.zeros(0), "optimal", 1)
        if max(out.residuals.values()) > tol:
            out.status = "numerical"
        return out

    e = _cone_e(cones)
    deg = cones.degree

    # initial point: KKT solve with identity scaling, then shift into the cone
    reg = _REG
    try:
        lu, K_exact = _factor(P, A, G, sp.eye(m, format="csc"), reg)
    except RuntimeError:
        reg = _REG_RETRY
        lu, K_exact = _factor(P, A, G, sp.eye(m, format="csc"), reg)
    sol = _solve_refined(lu, K_exact, np.concatenate([-c, b, h]))
    x, y, zt = sol[:n], sol[n : n + p], sol[n + p :]
    s = -zt.copy()
    z = zt.copy()
    ms = _cone_margin(cones, s)
    if ms <= 0.0:
        s = s + (1.0 - ms) * e
    mz = _cone_margin(cones, z)
    if mz <= 0.0:
        z = z + (1.0 - mz) * e
    if x0 is not None:
        x = np.asarray(x0, dtype=float).copy()

    for it in range(1, max_iter + 1):
        rx = P @ x + c + A.T @ y + G.T @ z
        ry = A @ x - b if p else np.zeros(0)
        rz = G @ x + s - h
        mu = (s @ z) / deg

        if not (np.isfinite(mu) and all(np.all(np.isfinite(v)) for v in (x, y, z, s))):
            return finish(x, y, z, s, "numerical", it)
        _, res = residual_report(x, y, z, s)
        if max(res.values()) <= tol:
            return finish(x, y, z, s, "optimal", it)
        if mu > 1e12:
            return finish(x, y, z, s, "numerical", it)

        W = _Scaling(cones, s, z)
        lam = W.lam(z)
        try:
            lu, K_exact = _factor(P, A, G, W.wtw(), reg)
        except RuntimeError:
            if reg < _REG_RETRY:
                reg = _REG_RETRY
                try:
                    lu, K_exact = _factor(P, A, G, W.wtw(), reg)
                except RuntimeError:
                    return finish(x, y, z, s, "numerical", it)
            else:
                return finish(x, y, z, s, "numerical", it)

        # predictor: d_lambda = -lam o lam, so rhs_z = -rz + s
        rhs = np.concatenate([-rx, -ry, -rz + s])
        sol = _solve_refined(lu, K_exact, rhs)
        dx_a, dy_a, dz_a = sol[:n], sol[n : n + p], sol[n + p :]
        ds_a = -rz - G @ dx_a

        alpha_a = min(1.0, _max_step(cones, s, ds_a), _max_step(cones, z, dz_a))
        gap_a = (s + alpha_a * ds_a) @ (z + alpha_a * dz_a)
        sigma = np.clip(gap_a / (s @ z), 0.0, 1.0) ** 3

        # corrector: d_lambda = -lam o lam - (W^-1 ds_a) o (W dz_a) + sigma mu e
        corr = _jordan(cones, W.apply(ds_a, inverse=True), W.apply(dz_a))
        d_lam = -_jordan(cones, lam, lam) - corr + sigma * mu * e
        rhs = np.concatenate([-rx, -ry, -rz - W.apply(_jordan_div(cones, lam, d_lam))])
        sol = _solve_refined(lu, K_exact, rhs)
        dx, dy, dz = sol[:n], sol[n : n + p], sol[n + p :]
        ds = -rz - G @ dx

        alpha = min(1.0, _STEP_FRAC * _max_step(cones, s, ds), _STEP_FRAC * _max_step(cones, z, dz))
        for _ in range(40):
            if alpha <= 1e-8 or _centrality(cones, s + alpha * ds, z + alpha * dz) >= _CENTRALITY:
                break
            alpha *= 0.8
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds

    return finish(x, y, z, s, "max_iter", max_iter)
