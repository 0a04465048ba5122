"""Canonical-form sparse SOCP container, assembly, and preconditioning.

Programs have the form

    minimize    (1/2) x' P x + c' x
    subject to  A x = b
                G x + s = h,   s in K

where K stacks a nonnegative orthant followed by second-order cones
(first coordinate bounds the norm of the rest).  All matrices are stored
in compressed-sparse-column layout.  :class:`ProgramBuilder` collects
rows in block form and doubles as a dense reference evaluator for
testing the canonicalizer.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ipm_solve",
    "ConeSpec",
    "ConicProgram",
    "ConicSolution",
    "Preconditioner",
    "ProgramBuilder",
    "canonicalize",
    "precondition",
    "unscale_solution",
    "check_kkt",
    "validate_csc",
    "dump_program",
]


@dataclass(frozen=True)
class ConeSpec:
    """Cone layout of the inequality block: orthant rows, then SOC dims."""

    nonneg: int = 0
    soc: tuple = ()

    @property
    def total_rows(self):
        return self.nonneg + sum(self.soc)

    @property
    def degree(self):
        """Barrier degree: one per orthant row, one per second-order cone."""
        return self.nonneg + len(self.soc)


@dataclass
class ConicProgram:
    P: sp.csc_matrix
    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    G: sp.csc_matrix
    h: np.ndarray
    cones: ConeSpec

    @property
    def n(self):
        return self.c.shape[0]

    def validate(self):
        n = self.n
        if self.P.shape != (n, n):
            raise ValueError("P dimension mismatch")
        if self.A.shape[1] != n or self.G.shape[1] != n:
            raise ValueError("constraint column mismatch")
        if self.A.shape[0] != self.b.shape[0] or self.G.shape[0] != self.h.shape[0]:
            raise ValueError("rhs dimension mismatch")
        if self.G.shape[0] != self.cones.total_rows:
            raise ValueError("cone dims do not sum to rows of G")
        if (abs(self.P - self.P.T) > 1e-12).nnz:
            raise ValueError("P is not symmetric")
        for M in (self.P, self.A, self.G):
            validate_csc(M)
        for v in (self.c, self.b, self.h, self.P.data, self.A.data, self.G.data):
            if v.size and not np.all(np.isfinite(v)):
                raise ValueError("non-finite coefficient in program")


@dataclass
class ConicSolution:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    status: str
    obj: float
    residuals: dict
    iterations: int


def validate_csc(M):
    """Check CSC structural invariants: sorted unique in-range row indices,
    monotone column offsets, no stored zeros."""
    if not sp.issparse(M) or M.format != "csc":
        raise ValueError("matrix is not CSC")
    indptr, indices = M.indptr, M.indices
    if indptr[0] != 0 or indptr[-1] != len(indices):
        raise ValueError("inconsistent column offsets")
    if np.any(np.diff(indptr) < 0):
        raise ValueError("column offsets not monotone")
    for j in range(M.shape[1]):
        rows = indices[indptr[j] : indptr[j + 1]]
        if rows.size:
            if np.any(rows < 0) or np.any(rows >= M.shape[0]):
                raise ValueError("row index out of range")
            if np.any(np.diff(rows) <= 0):
                raise ValueError("row indices not sorted/unique within column")
    if np.any(M.data == 0.0):
        raise ValueError("explicit zero stored")


def _to_csc(rows, cols, vals, shape):
    M = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsc()
    M.sum_duplicates()
    M.eliminate_zeros()
    M.sort_indices()
    return M


class ProgramBuilder:
    """Block-form subproblem assembly with a deterministic variable order.

    Variables are appended with :meth:`add_variables`; objective and
    constraint rows reference global indices.  Inequality rows follow the
    convention ``g . x <= rhs`` (orthant) and ``rhs_block - G_block x``
    in a second-order cone for SOC blocks.
    """

    def __init__(self):
        self.n = 0
        self.var_slices = {}
        self._quad = []  # (i, j, v) entries of P (both triangles)
        self._lin = []  # (i, v)
        self._eq = []  # (cols, vals, rhs)
        self._ineq = []  # (cols, vals, rhs)
        self._soc = []  # list of list of (cols, vals, offset)

    def add_variables(self, name, dim):
        if name in self.var_slices:
            raise ValueError(f"duplicate variable block {name!r}")
        sl = np.arange(self.n, self.n + dim)
        self.var_slices[name] = sl
        self.n += dim
        return sl

    def add_quad_diag(self, idx, vals):
        for i, v in zip(np.atleast_1d(idx), np.broadcast_to(vals, np.atleast_1d(idx).shape)):
            if v != 0.0:
                self._quad.append((int(i), int(i), float(v)))

    def add_quad(self, i, j, v):
        """Objective term (1/2) v x_i x_j (use once per unordered pair)."""
        if v != 0.0:
            self._quad.append((int(i), int(j), float(v)))

    def add_linear(self, idx, vals):
        for i, v in zip(np.atleast_1d(idx), np.broadcast_to(vals, np.atleast_1d(idx).shape)):
            if v != 0.0:
                self._lin.append((int(i), float(v)))

    def add_eq(self, cols, vals, rhs):
        self._eq.append((np.atleast_1d(cols).astype(int), np.atleast_1d(vals).astype(float), float(rhs)))

    def add_ineq(self, cols, vals, rhs):
        """Row ``sum(vals * x[cols]) <= rhs`` (nonnegative-orthant slack)."""
        self._ineq.append((np.atleast_1d(cols).astype(int), np.atleast_1d(vals).astype(float), float(rhs)))

    def add_soc(self, rows):
        """SOC block from rows of (cols, vals, offset): the vector with
        components ``offset_k - sum(vals_k * x[cols_k])`` must lie in a
        second-order cone."""
        if len(rows) < 2:
            raise ValueError("second-order cone needs at least 2 rows")
        self._soc.append(
            [
                (np.atleast_1d(c).astype(int), np.atleast_1d(v).astype(float), float(o))
                for c, v, o in rows
            ]
        )

    # dense reference evaluation (independent of the CSC assembly path)

    def eval_objective(self, x):
        obj = sum(v * x[i] for i, v in self._lin)
        obj += 0.5 * sum(v * x[i] * x[j] for i, j, v in self._quad)
        return obj

    def eval_eq(self, x):
        return np.array([vals @ x[cols] - rhs for cols, vals, rhs in self._eq])

    def eval_ineq(self, x):
        return np.array([vals @ x[cols] - rhs for cols, vals, rhs in self._ineq])

    def eval_soc(self, x):
        out = []
        for rows in self._soc:
            out.append(np.array([o - vals @ x[cols] for cols, vals, o in rows]))
        return out


def canonicalize(builder):
    """Assemble a :class:`ProgramBuilder` into a CSC :class:`ConicProgram`."""
    n = builder.n

    # symmetrize: entry (i, j, v) means (1/2) v x_i x_j in the objective,
    # so off-diagonal entries contribute v/2 to each triangle of P
    pr, pc, pv = [], [], []
    seen = {}
    for i, j, v in builder._quad:
        if i == j:
            seen[(i, i)] = seen.get((i, i), 0.0) + v
        else:
            seen[(i, j)] = seen.get((i, j), 0.0) + v / 2.0
            seen[(j, i)] = seen.get((j, i), 0.0) + v / 2.0
    for (i, j), v in seen.items():
        pr.append(i)
        pc.append(j)
        pv.append(v)
    P = _to_csc(pr, pc, pv, (n, n))

    c = np.zeros(n)
    for i, v in builder._lin:
        c[i] += v

    er, ec, ev, b = [], [], [], []
    for r, (cols, vals, rhs) in enumerate(builder._eq):
        er.extend([r] * len(cols))
        ec.extend(cols.tolist())
        ev.extend(vals.tolist())
        b.append(rhs)
    A = _to_csc(er, ec, ev, (len(builder._eq), n))

    gr, gc, gv, h = [], [], [], []
    for r, (cols, vals, rhs) in enumerate(builder._ineq):
        gr.extend([r] * len(cols))
        gc.extend(cols.tolist())
        gv.extend(vals.tolist())
        h.append(rhs)
    row = len(builder._ineq)
    soc_dims = []
    for rows in builder._soc:
        soc_dims.append(len(rows))
        for cols, vals, off in rows:
            gr.extend([row] * len(cols))
            gc.extend(cols.tolist())
            gv.extend(vals.tolist())
            h.append(off)
            row += 1
    G = _to_csc(gr, gc, gv, (row, n))

    prog = ConicProgram(
        P=P,
        c=c,
        A=A,
        b=np.asarray(b, dtype=float),
        G=G,
        h=np.asarray(h, dtype=float),
        cones=ConeSpec(nonneg=len(builder._ineq), soc=tuple(soc_dims)),
    )
    prog.validate()
    return prog


@dataclass
class Preconditioner:
    """Positive row scalings for A and G plus diagonal variable scalings."""

    row_scale_A: np.ndarray
    row_scale_G: np.ndarray
    var_scale: np.ndarray
    cost_scale: float = 1.0


def _row_inf_norms(M):
    M = sp.csr_matrix(M)
    out = np.zeros(M.shape[0])
    for i in range(M.shape[0]):
        block = M.data[M.indptr[i] : M.indptr[i + 1]]
        out[i] = np.max(np.abs(block)) if block.size else 0.0
    return out


def precondition(prog):
    """Row-normalize A and G to unit infinity norm; rows of one SOC share a
    common scaling so cone membership is preserved.  All-zero rows keep
    scaling 1."""
    ra = _row_inf_norms(prog.A)
    ra[ra == 0.0] = 1.0
    da = 1.0 / ra

    rg = _row_inf_norms(prog.G)
    nn = prog.cones.nonneg
    rg_scale = np.ones(prog.G.shape[0])
    nz = rg[:nn] != 0.0
    rg_scale[:nn][nz] = 1.0 / rg[:nn][nz]
    start = nn
    for d in prog.cones.soc:
        blk = rg[start : start + d]
        m = np.max(blk)
        if m > 0:
            rg_scale[start : start + d] = 1.0 / m
        start += d

    # normalize the objective too: heavily weighted penalty terms otherwise
    # push the dual variables to the penalty scale, which degrades the
    # interior-point KKT conditioning near active penalty rows
    omega = max(1.0, np.max(np.abs(prog.c)) if prog.c.size else 0.0)
    if prog.P.nnz:
        omega = max(omega, np.max(np.abs(prog.P.data)))

    Da = sp.diags(da)
    Dg = sp.diags(rg_scale)
    scaled = ConicProgram(
        P=prog.P / omega,
        c=prog.c / omega,
        A=sp.csc_matrix(Da @ prog.A),
        b=da * prog.b,
        G=sp.csc_matrix(Dg @ prog.G),
        h=rg_scale * prog.h,
        cones=prog.cones,
    )
    for M in (scaled.A, scaled.G):
        M.sort_indices()
    scaled.P = sp.csc_matrix(scaled.P)
    scaled.P.sort_indices()
    return scaled, Preconditioner(
        row_scale_A=da, row_scale_G=rg_scale, var_scale=np.ones(prog.n), cost_scale=omega
    )


def unscale_solution(prec, sol):
    """Map a solution of the preconditioned program back to the original."""
    return ConicSolution(
        x=sol.x / prec.var_scale,
        y=sol.y * prec.row_scale_A * prec.cost_scale,
        z=sol.z * prec.row_scale_G * prec.cost_scale,
        s=sol.s / prec.row_scale_G,
        status=sol.status,
        obj=sol.obj * prec.cost_scale,
        residuals=dict(sol.residuals),
        iterations=sol.iterations,
    )


def _cone_dist(cones, s):
    """Most negative margin of s with respect to K (>= 0 means member)."""
    margins = []
    nn = cones.nonneg
    if nn:
        margins.append(np.min(s[:nn]))
    start = nn
    for d in cones.soc:
        blk = s[start : start + d]
        margins.append(blk[0] - np.linalg.norm(blk[1:]))
        start += d
    return min(margins) if margins else 0.0


def check_kkt(prog, sol):
    """Independent KKT residual evaluation for an optimal-status solution."""
    x, y, z, s = sol.x, sol.y, sol.z, sol.s
    primal_eq = np.linalg.norm(prog.A @ x - prog.b) if prog.b.size else 0.0
    primal_in = np.linalg.norm(prog.G @ x + s - prog.h) if prog.h.size else 0.0
    dual = np.linalg.norm(prog.P @ x + prog.c + prog.A.T @ y + prog.G.T @ z)
    gap = abs(float(s @ z)) if s.size else 0.0
    return {
        "primal_eq": float(primal_eq),
        "primal_ineq": float(primal_in),
        "primal_cone_margin": float(_cone_dist(prog.cones, s)) if s.size else 0.0,
        "dual": float(dual),
        "dual_cone_margin": float(_cone_dist(prog.cones, z)) if z.size else 0.0,
        "gap": gap,
    }


def dump_program(prog, path):
    """Write a program to a documented sparse text format (dims/cones header,
    then COO triplets per matrix) for external cross-checking."""
    with open(path, "w") as f:
        f.write(f"n {prog.n}\n")
        f.write(f"eq {prog.A.shape[0]}\n")
        f.write(f"nonneg {prog.cones.nonneg}\n")
        f.write("soc " + " ".join(str(d) for d in prog.cones.soc) + "\n")
        for name, M in (("P", prog.P), ("A", prog.A), ("G", prog.G)):
            coo = M.tocoo()
            f.write(f"{name} {coo.nnz}\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                f.write(f"{i} {j} {v!r}\n")
        for name, vec in (("c", prog.c), ("b", prog.b), ("h", prog.h)):
            f.write(f"{name} {vec.size}\n")
            for v in vec:
                f.write(f"{v!r}\n")


from ._ipm import ipm_solve  # noqa: E402  (needs ConicSolution defined above)
