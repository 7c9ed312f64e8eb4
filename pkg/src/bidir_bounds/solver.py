"""Dense semidefinite programming in real symmetric standard form.

Problems are stated over named PSD blocks and free scalars, with a real
linear objective, affine equality constraints, and affine matrix
inequalities (PSD-cone memberships).  Complex Hermitian data enters through
the standard 2n real embedding ``[[Re, -Im], [Im, Re]]``; callers embed
their data and linear maps before building a problem.

The solver is an infeasible-start primal-dual interior-point method with
Nesterov-Todd scaling and a Mehrotra predictor-corrector step.  Problem
sizes in this package stay small (embedded blocks of side <= ~100), so all
linear algebra is dense.  The method is deterministic: identical inputs
produce bitwise identical iterates.

Primal form solved here:

    minimize    c.x
    subject to  A x = b
                C_j + sum_i x_i F_{j,i}  PSD   for every cone j

with dual

    maximize    b.y - sum_j <C_j, Z_j>
    subject to  sum_j F_j^*(Z_j) + A^T y = c,   Z_j PSD.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"


class SolverError(RuntimeError):
    """A solve did not reach status optimal (carries the SdpSolution)."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class ResourceLimitError(RuntimeError):
    """Problem exceeds the configured dense-solver size limits."""


@dataclass
class SdpTolerances:
    gap: float = 1e-8
    feas: float = 1e-8
    max_iters: int = 200
    # dense-cone guard: refuse problems whose coefficient stacks would not
    # stay comfortably in memory
    max_cone_side: int = 256
    max_coeff_bytes: int = int(1.5e9)


# -- complex-to-real embedding ------------------------------------------------


def hermitian_embed(h: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Embed a complex Hermitian n x n matrix as real symmetric 2n x 2n.

    The embedding [[Re, -Im], [Im, Re]] is PSD iff the input is, each
    eigenvalue appears twice, and the trace doubles.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(h - h.conj().T)) > tol:
        raise ValueError("matrix is not Hermitian within 1e-12")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def lift_vec_permutation(perm: np.ndarray, m: int) -> np.ndarray:
    """Lift a vec-index permutation on m x m matrices to the embedded space.

    Permutation maps (partial transposes, conjugation by real permutation
    matrices) act blockwise on the four m x m blocks of an embedded matrix,
    so their lift is again a vec permutation, on (2m) x (2m).
    """
    perm = np.asarray(perm, dtype=int)
    i_src, j_src = np.divmod(perm, m)  # indexed by (i_out * m + j_out)
    i_src = i_src.reshape(m, m)
    j_src = j_src.reshape(m, m)
    out = np.empty((2, m, 2, m), dtype=int)
    for a in range(2):
        for b in range(2):
            out[a, :, b, :] = (a * m + i_src) * (2 * m) + (b * m + j_src)
    return out.reshape(-1)


def lift_real_superop(superop: np.ndarray, m_in: int, m_out: int) -> np.ndarray:
    """Lift a real-coefficient map on m x m matrices to the embedded space.

    For a linear map Phi acting entrywise-real (partial transpose, partial
    trace, conjugation by real matrices), the embedded image of Phi(H)
    equals Phi applied blockwise to the four n x n blocks of the embedded
    H.  Input is the (m_out^2, m_in^2) matrix of Phi on vec (row-major);
    output acts on vec of (2 m_in) x (2 m_in) matrices.
    """
    k, m = m_out, m_in
    L = superop.reshape(k, k, m, m)
    out = np.zeros((2, k, 2, k, 2, m, 2, m))
    for a in range(2):
        for b in range(2):
            out[a, :, b, :, a, :, b, :] = L
    return out.reshape((2 * k) ** 2, (2 * m) ** 2)


# -- modeling layer ------------------------------------------------------------


@dataclass(frozen=True)
class BlockRef:
    name: str
    side: int

    @property
    def nparams(self) -> int:
        return self.side * (self.side + 1) // 2


@dataclass(frozen=True)
class ScalarRef:
    name: str


def _tri_indices(side: int):
    return np.tril_indices(side)


def _params_to_matrix(params: np.ndarray, side: int) -> np.ndarray:
    m = np.zeros((side, side))
    i, j = _tri_indices(side)
    m[i, j] = params
    m[j, i] = params
    return m


def _block_basis(side: int) -> np.ndarray:
    """Stack of symmetric basis matrices, one per lower-triangle parameter."""
    q = side * (side + 1) // 2
    basis = np.zeros((q, side, side))
    i, j = _tri_indices(side)
    r = np.arange(q)
    basis[r, i, j] = 1.0
    basis[r, j, i] = 1.0
    return basis


class MatExpr:
    """Affine real-symmetric-matrix expression in the problem variables."""

    def __init__(self, side: int, const: np.ndarray | None = None,
                 terms: dict | None = None):
        self.side = side
        self.const = np.zeros((side, side)) if const is None else np.asarray(const, float)
        # var name -> coefficient stack of shape (nparams_of_var, side, side)
        self.terms = {} if terms is None else terms

    @staticmethod
    def of_block(block: BlockRef) -> "MatExpr":
        return MatExpr(block.side, terms={block.name: _block_basis(block.side)})

    @staticmethod
    def of_scalar_times_identity(scalar: ScalarRef, side: int) -> "MatExpr":
        coeff = np.eye(side)[None, :, :].copy()
        return MatExpr(side, terms={scalar.name: coeff})

    @staticmethod
    def constant(mat: np.ndarray) -> "MatExpr":
        mat = np.asarray(mat, float)
        return MatExpr(mat.shape[0], const=mat)

    def copy(self) -> "MatExpr":
        return MatExpr(self.side, self.const.copy(),
                       {k: v.copy() for k, v in self.terms.items()})

    def __add__(self, other: "MatExpr") -> "MatExpr":
        if other.side != self.side:
            raise ValueError("side mismatch")
        out = self.copy()
        out.const = out.const + other.const
        for k, v in other.terms.items():
            out.terms[k] = out.terms.get(k, 0) + v
        return out

    def __sub__(self, other: "MatExpr") -> "MatExpr":
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "MatExpr":
        out = MatExpr(self.side, self.const * scalar,
                      {k: v * scalar for k, v in self.terms.items()})
        return out

    __rmul__ = __mul__

    def shift(self, mat: np.ndarray) -> "MatExpr":
        out = self.copy()
        out.const = out.const + np.asarray(mat, float)
        return out

    def apply_superop(self, superop: np.ndarray, out_side: int) -> "MatExpr":
        """Compose with a linear map given as an (out^2, in^2) vec matrix."""
        m, k = self.side, out_side
        const = (superop @ self.const.reshape(-1)).reshape(k, k)
        terms = {}
        for name, coeff in self.terms.items():
            flat = coeff.reshape(coeff.shape[0], m * m)
            terms[name] = (flat @ superop.T).reshape(coeff.shape[0], k, k)
        return MatExpr(k, const, terms)

    def permute_vec(self, perm: np.ndarray) -> "MatExpr":
        """Compose with a vec-index permutation map (same output side)."""
        m = self.side
        const = self.const.reshape(-1)[perm].reshape(m, m)
        terms = {name: coeff.reshape(coeff.shape[0], -1)[:, perm].reshape(coeff.shape)
                 for name, coeff in self.terms.items()}
        return MatExpr(m, const, terms)

    def trace(self) -> "LinExpr":
        out = LinExpr(const=float(np.trace(self.const)))
        for name, coeff in self.terms.items():
            out.terms[name] = np.einsum("iaa->i", coeff)
        return out


class LinExpr:
    """Affine real scalar expression in the problem variables."""

    def __init__(self, const: float = 0.0, terms: dict | None = None):
        self.const = float(const)
        self.terms = {} if terms is None else terms  # name -> (nparams,) vec

    @staticmethod
    def of_scalar(scalar: ScalarRef, coeff: float = 1.0) -> "LinExpr":
        return LinExpr(terms={scalar.name: np.array([float(coeff)])})

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return LinExpr(self.const + other, {k: v.copy() for k, v in self.terms.items()})
        out = LinExpr(self.const + other.const, {k: v.copy() for k, v in self.terms.items()})
        for k, v in other.terms.items():
            out.terms[k] = out.terms.get(k, 0) + v
        return out

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        return self + (-1.0) * other

    def __mul__(self, scalar: float):
        return LinExpr(self.const * scalar, {k: v * scalar for k, v in self.terms.items()})

    __rmul__ = __mul__


@dataclass
class SdpSolution:
    status: str
    primal_value: float
    dual_value: float
    gap: float
    block_values: dict
    scalar_values: dict
    iterations: int
    residuals: dict = field(default_factory=dict)
    message: str = ""

    def require_optimal(self) -> "SdpSolution":
        if self.status != OPTIMAL:
            raise SolverError(f"solver returned status {self.status}: {self.message}", self)
        return self


class SdpProblem:
    """Real symmetric-cone SDP assembled from blocks, scalars and constraints."""

    def __init__(self):
        self.psd_blocks: list[BlockRef] = []
        self.free_scalars: list[ScalarRef] = []
        self._names = set()
        self.objective = LinExpr()
        self.psd_constraints: list[MatExpr] = []
        self.eq_constraints: list[tuple[LinExpr, float]] = []

    # -- declarations --

    def _register(self, name: str):
        if name in self._names:
            raise ValueError(f"duplicate variable name {name!r}")
        self._names.add(name)

    def add_psd_block(self, name: str, side: int) -> BlockRef:
        self._register(name)
        ref = BlockRef(name, int(side))
        self.psd_blocks.append(ref)
        return ref

    def add_scalar(self, name: str) -> ScalarRef:
        self._register(name)
        ref = ScalarRef(name)
        self.free_scalars.append(ref)
        return ref

    def set_objective(self, expr: LinExpr):
        self.objective = expr

    def add_psd_constraint(self, expr: MatExpr):
        """Constrain the expression to the PSD cone."""
        self.psd_constraints.append(expr)

    def add_eq_constraint(self, expr: LinExpr, rhs: float = 0.0):
        self.eq_constraints.append((expr, float(rhs)))

    def add_matrix_eq_constraint(self, expr: MatExpr):
        """Constrain a symmetric matrix expression to vanish entrywise."""
        i, j = _tri_indices(expr.side)
        for a, b in zip(i, j):
            lin = LinExpr(const=expr.const[a, b])
            for name, coeff in expr.terms.items():
                lin.terms[name] = coeff[:, a, b].copy()
            self.add_eq_constraint(lin, 0.0)

    # -- canonicalization --

    def _layout(self):
        offsets, n = {}, 0
        for blk in self.psd_blocks:
            offsets[blk.name] = (n, blk.nparams)
            n += blk.nparams
        for sc in self.free_scalars:
            offsets[sc.name] = (n, 1)
            n += 1
        return offsets, n

    def _lin_vector(self, expr: LinExpr, offsets, n):
        v = np.zeros(n)
        for name, coeff in expr.terms.items():
            if name not in offsets:
                raise ValueError(f"expression references undeclared variable {name!r}")
            off, sz = offsets[name]
            if len(coeff) != sz:
                raise ValueError(f"coefficient size mismatch for {name!r}")
            v[off:off + sz] += coeff
        return v

    def _cone_data(self, expr: MatExpr, offsets):
        cols, stacks = [], []
        for name, coeff in expr.terms.items():
            if name not in offsets:
                raise ValueError(f"expression references undeclared variable {name!r}")
            off, sz = offsets[name]
            cols.append(np.arange(off, off + sz))
            stacks.append(0.5 * (coeff + np.transpose(coeff, (0, 2, 1))))
        cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
        F = np.concatenate(stacks) if stacks else np.zeros((0, expr.side, expr.side))
        C = 0.5 * (expr.const + expr.const.T)
        return _Cone(expr.side, C, cols, F)

    def compile(self, tol: SdpTolerances):
        offsets, n = self._layout()
        c = self._lin_vector(self.objective, offsets, n)
        obj_const = self.objective.const

        rows, rhs = [], []
        for expr, val in self.eq_constraints:
            rows.append(self._lin_vector(expr, offsets, n))
            rhs.append(val - expr.const)
        A = np.vstack(rows) if rows else np.zeros((0, n))
        b = np.array(rhs) if rhs else np.zeros(0)

        cones = []
        for blk in self.psd_blocks:
            cones.append(self._cone_data(MatExpr.of_block(blk), offsets))
        for expr in self.psd_constraints:
            cones.append(self._cone_data(expr, offsets))
        if not cones:
            raise ValueError("problem has no PSD blocks or constraints")

        total_bytes = sum(cn.F.nbytes for cn in cones)
        if total_bytes > tol.max_coeff_bytes or any(cn.m > tol.max_cone_side for cn in cones):
            raise ResourceLimitError(
                f"problem too large for the dense solver "
                f"(coefficients {total_bytes / 1e9:.2f} GB, "
                f"largest cone {max(cn.m for cn in cones)})")
        return _Compiled(n, c, obj_const, A, b, cones, offsets, self)


class _Cone:
    """One PSD constraint C + sum_i x_i F_i >= 0 in compiled form.

    Most coefficient matrices in this package touch a single symmetric
    entry pair (block variables, partial transposes, sign patterns), so
    each is stored as an (i, j, c) triple and the scaled Gram matrix
    <F_p, W F_q W> is assembled by an index formula; the few genuinely
    dense coefficients (epigraph identities, partial traces) fall back to
    matrix products.
    """

    def __init__(self, m: int, C: np.ndarray, cols: np.ndarray, F: np.ndarray):
        self.m = int(m)
        self.C = C
        self.cols = cols
        self.F = np.ascontiguousarray(F)
        nj = len(cols)
        self.F_flat = self.F.reshape(nj, self.m * self.m)
        ci = np.zeros(nj, dtype=int)
        cj = np.zeros(nj, dtype=int)
        cc = np.zeros(nj)
        dense = []
        for p in range(nj):
            ii, jj = np.nonzero(self.F[p])
            if len(ii) == 0:
                continue
            if len(ii) == 1 and ii[0] == jj[0]:
                ci[p], cj[p], cc[p] = ii[0], jj[0], self.F[p][ii[0], jj[0]]
            elif (len(ii) == 2 and ii[0] == jj[1] and ii[1] == jj[0]
                  and ii[0] != jj[0]):
                a, b = (ii[0], jj[0]) if ii[0] < jj[0] else (jj[0], ii[0])
                ci[p], cj[p], cc[p] = a, b, self.F[p][a, b]
            else:
                dense.append(p)
        self.dense = np.array(dense, dtype=int)
        mask = np.ones(nj, dtype=bool)
        mask[self.dense] = False
        self.coord = np.nonzero(mask)[0]
        self.ci, self.cj = ci[self.coord], cj[self.coord]
        cc = cc[self.coord]
        self.off = (self.ci != self.cj)
        self.cc = cc
        # weights for the pair formula: a diagonal entry counts once
        self.cw = cc * np.where(self.off, 1.0, 0.5)
        self.flat_up = self.ci * self.m + self.cj
        self.flat_lo = self.cj * self.m + self.ci
        self.F_dense = self.F[self.dense]

    def apply_linear(self, x: np.ndarray) -> np.ndarray:
        """sum_i x_i F_i."""
        xs = x[self.cols]
        m = self.m
        vals = xs[self.coord] * self.cc
        flat = np.bincount(self.flat_up, weights=vals, minlength=m * m)
        if self.off.any():
            flat += np.bincount(self.flat_lo[self.off], weights=vals[self.off],
                                minlength=m * m)
        out = flat.reshape(m, m)
        if len(self.dense):
            out = out + np.tensordot(xs[self.dense], self.F_dense, axes=(0, 0))
        return out

    def apply(self, x: np.ndarray) -> np.ndarray:
        """C + sum_i x_i F_i."""
        return self.C + self.apply_linear(x)

    def adjoint(self, Z: np.ndarray, out: np.ndarray):
        """out += F^*(Z) for symmetric Z."""
        contrib = np.zeros(len(self.cols))
        contrib[self.coord] = self.cc * np.where(self.off, 2.0, 1.0) * Z[self.ci, self.cj]
        if len(self.dense):
            contrib[self.dense] = self.F_dense.reshape(len(self.dense), -1) @ Z.reshape(-1)
        out[self.cols] += contrib

    def congruence_gram(self, Rinv: np.ndarray) -> np.ndarray:
        """<F_p, W F_q W> for W = Rinv^T Rinv."""
        nj = len(self.cols)
        W = Rinv.T @ Rinv
        ci, cj, cw = self.ci, self.cj, self.cw
        core = W[np.ix_(ci, ci)]
        core *= W[np.ix_(cj, cj)]
        mixed = W[np.ix_(ci, cj)]
        core += mixed * mixed.T
        core *= 2.0 * cw[:, None]
        core *= cw[None, :]
        if not len(self.dense):
            if len(self.coord) == nj:
                return core
            H = np.zeros((nj, nj))
            H[np.ix_(self.coord, self.coord)] = core
            return H
        H = np.zeros((nj, nj))
        H[np.ix_(self.coord, self.coord)] = core
        T = np.einsum("ab,qbc,cd->qad", W, self.F_dense, W, optimize=True)
        cross = 2.0 * cw[:, None] * T[:, ci, cj].T
        H[np.ix_(self.coord, self.dense)] = cross
        H[np.ix_(self.dense, self.coord)] = cross.T
        H[np.ix_(self.dense, self.dense)] = (
            self.F_dense.reshape(len(self.dense), -1)
            @ T.reshape(len(self.dense), -1).T)
        return H


@dataclass
class _Compiled:
    n: int
    c: np.ndarray
    obj_const: float
    A: np.ndarray
    b: np.ndarray
    cones: list
    offsets: dict
    problem: SdpProblem


def _eliminate_equalities(A, b):
    """Exact null-space reduction of the equality constraints.

    Returns a particular solution and an orthonormal null-space basis, or
    ``None`` when the system is inconsistent.  Substituting
    ``x = x_part + N v`` removes the equality block from the interior-point
    iteration entirely, which keeps the KKT system positive definite.
    """
    p, n = A.shape
    if p == 0:
        return np.zeros(n), np.eye(n)
    x_part, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.linalg.norm(A @ x_part - b) > 1e-9 * (1.0 + np.linalg.norm(b)):
        return None
    _, sig, Vt = np.linalg.svd(A, full_matrices=True)
    tol = max(A.shape) * np.finfo(float).eps * (sig[0] if sig.size else 0.0)
    rank = int(np.sum(sig > tol))
    return x_part, Vt[rank:].T.copy()


def _nt_scaling(S, Z):
    Ls = np.linalg.cholesky(S)
    Lz = np.linalg.cholesky(Z)
    U, sig, Vt = np.linalg.svd(Lz.T @ Ls)
    sqrt_sig = np.sqrt(sig)
    R = Ls @ (Vt.T / sqrt_sig)
    Rinv = (U / sqrt_sig).T @ Lz.T
    return R, Rinv, sig


def _max_step(L_inv, D):
    """Largest alpha with S + alpha D PSD, given inv(chol(S))."""
    G = L_inv @ D @ L_inv.T
    w = np.linalg.eigvalsh(0.5 * (G + G.T))
    wmin = w.min()
    return np.inf if wmin >= 0 else 1.0 / (-wmin)


def _chol_with_jitter(H):
    """Cholesky with escalating diagonal jitter; the interior-point endgame
    drives cond(H) ~ 1/mu^2, where bare factorization can hit a zero pivot."""
    scale = max(float(np.mean(np.abs(np.diag(H)))), 1e-300)
    for jitter in (0.0, 1e-14, 1e-11, 1e-8):
        try:
            return scipy.linalg.cho_factor(
                H + (jitter * scale) * np.eye(H.shape[0]), check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            continue
    return None


def solve(problem: SdpProblem, tolerances: SdpTolerances | None = None) -> SdpSolution:
    """Solve the program; never fabricates values on failure.

    Returns status ``optimal`` only when the relative duality gap is below
    ``tolerances.gap`` and all feasibility residuals are below
    ``tolerances.feas``.
    """
    tol = tolerances or SdpTolerances()
    comp = problem.compile(tol)
    res = _ipm(comp, tol)
    return res


def _extract(comp, x, status, pobj, dobj, gap, iters, residuals, message=""):
    blocks, scalars = {}, {}
    for blk in comp.problem.psd_blocks:
        off, sz = comp.offsets[blk.name]
        blocks[blk.name] = _params_to_matrix(x[off:off + sz], blk.side)
    for sc in comp.problem.free_scalars:
        off, _ = comp.offsets[sc.name]
        scalars[sc.name] = float(x[off])
    return SdpSolution(status, pobj, dobj, gap, blocks, scalars, iters,
                       residuals, message)


def _ipm(comp, tol: SdpTolerances) -> SdpSolution:
    n, c, A, b = comp.n, comp.c, comp.A, comp.b
    reduction = _eliminate_equalities(A, b)
    if reduction is None:
        return _extract(comp, np.zeros(n), INFEASIBLE, np.nan, np.nan, np.nan, 0,
                        {}, "equality constraints are inconsistent")
    x_part, N = reduction
    reduced = N.shape[1] < n or np.linalg.norm(x_part) > 0

    if reduced:
        cones = []
        for cn in comp.cones:
            C_new = cn.apply(x_part)
            F_new = np.tensordot(N[cn.cols], cn.F, axes=(0, 0))
            cones.append(_Cone(cn.m, C_new, np.arange(N.shape[1]), F_new))
        c_v = N.T @ c
        obj_shift = float(c @ x_part) + comp.obj_const
    else:
        cones = comp.cones
        c_v = c
        obj_shift = comp.obj_const
    nv = N.shape[1]
    deg = sum(cn.m for cn in cones)

    def to_full(v):
        return x_part + N @ v if reduced else v

    v = np.zeros(nv)
    S = [np.eye(cn.m) * max(1.0, np.linalg.norm(cn.C, 2)) for cn in cones]
    Z = [np.eye(cn.m) for cn in cones]

    norm_c = 1.0 + np.linalg.norm(c_v, np.inf)
    norm_C = [1.0 + np.linalg.norm(cn.C) for cn in cones]

    best = None
    message = "max iterations reached"
    stalls = 0

    for it in range(tol.max_iters):
        r_cone = [S[j] - cn.apply(v) for j, cn in enumerate(cones)]
        fz = np.zeros(nv)
        for j, cn in enumerate(cones):
            cn.adjoint(Z[j], fz)
        r_dual = c_v - fz

        gap = sum(np.vdot(S[j], Z[j]).real for j in range(len(cones)))
        mu = gap / deg
        pobj = float(c_v @ v) + obj_shift
        dobj = -sum(np.vdot(cn.C, Z[j]).real for j, cn in enumerate(cones)) + obj_shift

        rel_gap = abs(pobj - dobj) / max(1.0, abs(pobj))
        prim_res = max(np.linalg.norm(r_cone[j]) / norm_C[j] for j in range(len(cones)))
        dual_res = np.linalg.norm(r_dual, np.inf) / norm_c
        residuals = {"primal": float(prim_res), "dual": float(dual_res),
                     "rel_gap": float(rel_gap), "mu": float(mu)}

        if rel_gap < tol.gap and prim_res < tol.feas and dual_res < tol.feas:
            return _extract(comp, to_full(v), OPTIMAL, pobj, dobj, rel_gap, it,
                            residuals)
        best = (to_full(v), pobj, dobj, rel_gap, residuals, it)

        # a diverging dual (primal) improving ray is a Farkas certificate of
        # primal infeasibility (unboundedness)
        dual_surplus = -sum(np.vdot(cn.C, Z[j]).real for j, cn in enumerate(cones))
        if dual_surplus > 1e5 * norm_c:
            cert = np.zeros(nv)
            for j, cn in enumerate(cones):
                cn.adjoint(Z[j], cert)
            if np.linalg.norm(cert, np.inf) / dual_surplus < 1e-7:
                return _extract(comp, to_full(v), INFEASIBLE, np.nan, np.nan,
                                np.nan, it, residuals, "dual improving ray found")
        if pobj - obj_shift < -1e8 * norm_c and prim_res < 1e-7:
            return _extract(comp, to_full(v), UNBOUNDED, -np.inf, np.nan, np.nan,
                            it, residuals, "primal objective diverging")

        try:
            scal = [_nt_scaling(S[j], Z[j]) for j in range(len(cones))]
            eye_cache = [np.eye(cn.m) for cn in cones]
            S_linv = [scipy.linalg.solve_triangular(
                np.linalg.cholesky(S[j]), eye_cache[j], lower=True,
                check_finite=False) for j in range(len(cones))]
            Z_linv = [scipy.linalg.solve_triangular(
                np.linalg.cholesky(Z[j]), eye_cache[j], lower=True,
                check_finite=False) for j in range(len(cones))]
        except (np.linalg.LinAlgError, ValueError):
            message = "iterate left the cone"
            break

        H = np.zeros((nv, nv))
        Winv = []
        for j, cn in enumerate(cones):
            _, Rinv, _ = scal[j]
            Winv.append(Rinv.T @ Rinv)
            H[np.ix_(cn.cols, cn.cols)] += cn.congruence_gram(Rinv)
        H = 0.5 * (H + H.T)
        chol = _chol_with_jitter(H)
        if chol is None:
            message = "singular KKT system"
            break

        def newton(Gammas):
            g = -r_dual.copy()
            for j, cn in enumerate(cones):
                _, Rinv, _ = scal[j]
                Mj = Rinv.T @ Gammas[j] @ Rinv + Winv[j] @ r_cone[j] @ Winv[j]
                cn.adjoint(Mj, g)
            try:
                dv = scipy.linalg.cho_solve(chol, g, check_finite=False)
                for _ in range(2):  # refinement against the unjittered H
                    dv += scipy.linalg.cho_solve(chol, g - H @ dv, check_finite=False)
            except (np.linalg.LinAlgError, ValueError):
                return None
            dS, dZ = [], []
            for j, cn in enumerate(cones):
                _, Rinv, _ = scal[j]
                dSj = cn.apply_linear(dv) - r_cone[j]
                Ds_t = Rinv @ dSj @ Rinv.T
                dZj = Rinv.T @ (Gammas[j] - 0.5 * (Ds_t + Ds_t.T)) @ Rinv
                dS.append(0.5 * (dSj + dSj.T))
                dZ.append(0.5 * (dZj + dZj.T))
            return dv, dS, dZ

        def lyap_rhs(target):
            out = []
            for j in range(len(cones)):
                lam = scal[j][2]
                out.append(2.0 * target[j] / (lam[:, None] + lam[None, :]))
            return out

        # predictor
        aff_target = [-np.diag(scal[j][2] ** 2) for j in range(len(cones))]
        step = newton(lyap_rhs(aff_target))
        if step is None:
            message = "KKT solve failed"
            break
        dv_a, dS_a, dZ_a = step
        ap = min([1.0] + [_max_step(S_linv[j], dS_a[j]) for j in range(len(cones))])
        ad = min([1.0] + [_max_step(Z_linv[j], dZ_a[j]) for j in range(len(cones))])
        gap_aff = sum(np.vdot(S[j] + ap * dS_a[j], Z[j] + ad * dZ_a[j]).real
                      for j in range(len(cones)))
        sigma = min(1.0, max((max(gap_aff, 0.0) / gap) ** 3, 1e-8))

        # corrector + centering
        comb_target = []
        for j in range(len(cones)):
            R, Rinv, lam = scal[j]
            Ds_t = Rinv @ dS_a[j] @ Rinv.T
            Dz_t = R.T @ dZ_a[j] @ R
            cross = 0.5 * (Ds_t @ Dz_t + Dz_t @ Ds_t)
            comb_target.append(sigma * mu * np.eye(cones[j].m) - np.diag(lam ** 2) - cross)
        step = newton(lyap_rhs(comb_target))
        if step is None:
            message = "KKT solve failed"
            break
        dv, dS, dZ = step
        ap = min([1.0] + [0.99 * _max_step(S_linv[j], dS[j]) for j in range(len(cones))])
        ad = min([1.0] + [0.99 * _max_step(Z_linv[j], dZ[j]) for j in range(len(cones))])
        if not np.isfinite(ap) or not np.isfinite(ad) or min(ap, ad) < 1e-10:
            # fall back to a pure centering step before declaring a stall
            cent_target = [mu * np.eye(cones[j].m) - np.diag(scal[j][2] ** 2)
                           for j in range(len(cones))]
            step = newton(lyap_rhs(cent_target))
            if step is None:
                message = "KKT solve failed"
                break
            dv, dS, dZ = step
            ap = min([1.0] + [0.98 * _max_step(S_linv[j], dS[j])
                              for j in range(len(cones))])
            ad = min([1.0] + [0.98 * _max_step(Z_linv[j], dZ[j])
                              for j in range(len(cones))])
            stalls += 1
            if not np.isfinite(ap) or not np.isfinite(ad) or min(ap, ad) < 1e-12 \
                    or stalls > 4:
                message = "step size collapsed"
                break
        else:
            stalls = 0

        v = v + ap * dv
        for j in range(len(cones)):
            S[j] = S[j] + ap * dS[j]
            Z[j] = Z[j] + ad * dZ[j]

    if best is None:
        return _extract(comp, to_full(v), NUMERICAL_FAILURE, np.nan, np.nan,
                        np.nan, 0, {}, message)
    x_b, pobj, dobj, rel_gap, residuals, it_b = best
    return _extract(comp, x_b, NUMERICAL_FAILURE, pobj, dobj, rel_gap,
                    it_b + 1, residuals, message)


# -- epigraph gadgets ----------------------------------------------------------


def opnorm_epigraph(problem: SdpProblem, expr: MatExpr, name: str = "t",
                    psd_argument: bool = False) -> ScalarRef:
    """Add t with t*I >= expr (and t*I >= -expr unless the argument is PSD).

    At the optimum of ``minimize t`` the scalar equals the operator norm of
    the expression's value.
    """
    t = problem.add_scalar(name)
    tI = MatExpr.of_scalar_times_identity(t, expr.side)
    problem.add_psd_constraint(tI - expr)
    if not psd_argument:
        problem.add_psd_constraint(tI + expr)
    return t


def tracenorm_epigraph(problem: SdpProblem, expr: MatExpr, name: str = "tn"):
    """Add t = Tr P + Tr Q with expr = P - Q and P, Q PSD blocks.

    At the optimum of ``minimize t`` the scalar equals the trace norm of the
    expression's value.
    """
    P = problem.add_psd_block(f"{name}_pos", expr.side)
    Q = problem.add_psd_block(f"{name}_neg", expr.side)
    t = problem.add_scalar(name)
    problem.add_matrix_eq_constraint(expr - (MatExpr.of_block(P) - MatExpr.of_block(Q)))
    problem.add_eq_constraint(
        LinExpr.of_scalar(t) - MatExpr.of_block(P).trace() - MatExpr.of_block(Q).trace(), 0.0)
    return t, P, Q


# -- problem dump --------------------------------------------------------------


def dump_problem(problem: SdpProblem, tol: SdpTolerances | None = None) -> str:
    """Text standard form: sizes, objective, and sparse constraint triplets."""
    comp = problem.compile(tol or SdpTolerances())
    out = io.StringIO()
    out.write(f"nvars {comp.n}\n")
    out.write("objective " + " ".join(f"{i}:{v:.17g}" for i, v in enumerate(comp.c) if v) + "\n")
    out.write(f"equalities {comp.A.shape[0]}\n")
    for r in range(comp.A.shape[0]):
        row = " ".join(f"{i}:{v:.17g}" for i, v in enumerate(comp.A[r]) if v)
        out.write(f"eq {r} rhs {comp.b[r]:.17g} {row}\n")
    out.write(f"cones {len(comp.cones)}\n")
    for j, cn in enumerate(comp.cones):
        out.write(f"cone {j} side {cn.m}\n")
        ii, jj = np.nonzero(cn.C)
        for a, b2 in zip(ii, jj):
            if a <= b2:
                out.write(f"  const {a} {b2} {cn.C[a, b2]:.17g}\n")
        for k, col in enumerate(cn.cols):
            mi, mj = np.nonzero(cn.F[k])
            for a, b2 in zip(mi, mj):
                if a <= b2:
                    out.write(f"  var {col} {a} {b2} {cn.F[k][a, b2]:.17g}\n")
    return out.getvalue()
