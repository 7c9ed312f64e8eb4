"""State-level SDP entanglement quantities across a bipartite cut.

Implements the max-Rains information of a state (over the PPT' set of
subnormalized-partial-transpose operators), the PPT-relaxed max-relative
entropy of entanglement, a symmetric-extension tightening of the latter,
and a plain PPT membership test.  All values are in bits (log base 2).

The separable set is not SDP-representable, so the max-relative-entropy
routine optimizes over the PPT superset instead; every caller-facing
output is labeled with the feasible set actually used.  The SDP forms
solved here are written out in docs/state_sdp_forms.md.

Before embedding, states are restricted to the tensor product of their
local supports.  The restriction is exact for these programs (feasible
points transport both ways along the local isometries without changing
the objective), and it is what keeps the wide, low-rank states produced
by memory-cell channels at a solvable size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import operators as ops
from . import solver as sv

FEASIBLE_SET_PPT_PRIME = "PPT'"
FEASIBLE_SET_PPT_RELAXED = "PPT-relaxed"

_SUPPORT_EIG_TOL = 1e-13
_DPS_MAX_EXTENDED_DIM = 32


@dataclass(frozen=True)
class BipartiteCut:
    """Partition of a state's subsystem labels into left and right groups."""

    left: tuple[str, ...]
    right: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(self.left))
        object.__setattr__(self, "right", tuple(self.right))
        overlap = set(self.left) & set(self.right)
        if overlap:
            raise ops.LabelError(f"cut sides overlap: {sorted(overlap)}")

    def validate(self, system: ops.SystemDims):
        if set(self.left) | set(self.right) != set(system.labels):
            raise ops.LabelError(
                f"cut {self.left}|{self.right} does not cover labels {system.labels}")


class PptResult(NamedTuple):
    value: bool
    min_eigenvalue: float


def _bipartition(rho: ops.DenseOperator, cut: BipartiteCut):
    """Reorder to left-then-right and return (matrix, dim_left, dim_right)."""
    cut.validate(rho.dims)
    ordered = rho.reorder(cut.left + cut.right)
    d_left = int(np.prod([ordered.dims.dim_of(l) for l in cut.left]))
    d_right = ordered.dims.total // d_left
    return ordered.mat, d_left, d_right


def _local_support_restriction(mat: np.ndarray, d_left: int, d_right: int,
                               tol: float = _SUPPORT_EIG_TOL):
    """Restrict to the product of local supports (exact for these SDPs)."""
    t = mat.reshape(d_left, d_right, d_left, d_right)
    marg_l = np.einsum("arbr->ab", t)
    marg_r = np.einsum("rarb->ab", t)
    iso = []
    for marg, d in ((marg_l, d_left), (marg_r, d_right)):
        w, v = np.linalg.eigh(0.5 * (marg + marg.conj().T))
        keep = w > tol
        iso.append(v[:, keep] if keep.sum() < d else np.eye(d, dtype=complex))
    p = np.kron(iso[0], iso[1])
    small = p.conj().T @ mat @ p
    small = 0.5 * (small + small.conj().T)
    return small, iso[0].shape[1], iso[1].shape[1]


def _transpose_right_lifted(d_left: int, d_right: int) -> np.ndarray:
    perm = ops.transpose_vec_permutation((d_left, d_right), (1,))
    return sv.lift_vec_permutation(perm, d_left * d_right)


def max_rains_state(rho: ops.DenseOperator, cut: BipartiteCut,
                    tolerances: sv.SdpTolerances | None = None,
                    return_solution: bool = False):
    """Max-Rains information of a state across the cut, in bits.

    Computed as log2 of ``min Tr(P + Q)`` subject to P, Q PSD and
    ``T_right(P - Q) >= rho``; the optimum equals the smallest trace norm
    of ``T_right(M)`` over operators M dominating rho, i.e. the smallest
    lambda with rho <= 2^lambda sigma' for sigma' in PPT'.
    """
    ops.validate_density(rho)
    mat, dl, dr = _bipartition(rho, cut)
    mat, dl, dr = _local_support_restriction(mat, dl, dr)
    emb = sv.hermitian_embed(mat, tol=1e-10)
    side = 2 * dl * dr
    lift_t = _transpose_right_lifted(dl, dr)

    prob = sv.SdpProblem()
    P = prob.add_psd_block("P", side)
    Q = prob.add_psd_block("Q", side)
    diff = sv.MatExpr.of_block(P) - sv.MatExpr.of_block(Q)
    prob.add_psd_constraint(diff.permute_vec(lift_t) - sv.MatExpr.constant(emb))
    prob.set_objective(
        0.5 * (sv.MatExpr.of_block(P).trace() + sv.MatExpr.of_block(Q).trace()))
    sol = sv.solve(prob, tolerances).require_optimal()
    value = max(0.0, float(np.log2(sol.primal_value)))
    return (value, sol) if return_solution else value


def emax_ppt_state(rho: ops.DenseOperator, cut: BipartiteCut,
                   tolerances: sv.SdpTolerances | None = None,
                   return_solution: bool = False):
    """PPT-relaxed max-relative entropy of entanglement, in bits.

    log2 of ``min Tr X`` subject to ``X >= rho`` and ``T_right(X) >= 0``.
    Relaxing separable operators to PPT ones can only lower the value, so
    this is a lower bound on the separability-based quantity.
    """
    ops.validate_density(rho)
    mat, dl, dr = _bipartition(rho, cut)
    mat, dl, dr = _local_support_restriction(mat, dl, dr)
    emb = sv.hermitian_embed(mat, tol=1e-10)
    side = 2 * dl * dr
    lift_t = _transpose_right_lifted(dl, dr)

    prob = sv.SdpProblem()
    X = prob.add_psd_block("X", side)
    ex = sv.MatExpr.of_block(X)
    prob.add_psd_constraint(ex - sv.MatExpr.constant(emb))
    prob.add_psd_constraint(ex.permute_vec(lift_t))
    prob.set_objective(0.5 * ex.trace())
    sol = sv.solve(prob, tolerances).require_optimal()
    value = max(0.0, float(np.log2(sol.primal_value)))
    return (value, sol) if return_solution else value


def emax_dps_state(rho: ops.DenseOperator, cut: BipartiteCut, k: int,
                   tolerances: sv.SdpTolerances | None = None) -> float:
    """Tightening of emax_ppt_state by k-party symmetric extension.

    The dominating operator X must admit a symmetric extension to k copies
    of the right subsystem that stays PSD under partial transposition of
    every trailing group of copies.  Values are monotone non-decreasing in
    k and converge to the separability-based quantity.
    """
    if k < 1:
        raise ValueError("extension level k must be >= 1")
    ops.validate_density(rho)
    mat, dl, dr = _bipartition(rho, cut)
    mat, dl, dr = _local_support_restriction(mat, dl, dr)
    ext_dim = dl * dr**k
    if ext_dim > _DPS_MAX_EXTENDED_DIM:
        raise sv.ResourceLimitError(
            f"symmetric extension dimension {ext_dim} exceeds "
            f"{_DPS_MAX_EXTENDED_DIM}; lower k or the state dimension")

    emb = sv.hermitian_embed(mat, tol=1e-10)
    ext_dims = (dl,) + (dr,) * k
    side = 2 * ext_dim

    prob = sv.SdpProblem()
    Xt = prob.add_psd_block("Xext", side)
    ext = sv.MatExpr.of_block(Xt)

    # reduction to the original pair dominates rho
    red = ext
    if k > 1:
        pt = ops.ptrace_vec_matrix(ext_dims, range(2, k + 1))
        red = ext.apply_superop(sv.lift_real_superop(pt, ext_dim, dl * dr), 2 * dl * dr)
    prob.add_psd_constraint(red - sv.MatExpr.constant(emb))

    # PPT across every cut separating trailing copies
    for j in range(k):
        perm = ops.transpose_vec_permutation(ext_dims, range(j + 1, k + 1))
        prob.add_psd_constraint(ext.permute_vec(sv.lift_vec_permutation(perm, ext_dim)))

    # invariance under exchanging adjacent copies
    for j in range(1, k):
        swap = np.arange(ext_dim).reshape(ext_dims)
        swap = np.swapaxes(swap, j, j + 1).reshape(-1)
        perm = ops.conjugation_vec_permutation(swap)
        lifted = sv.lift_vec_permutation(perm, ext_dim)
        prob.add_matrix_eq_constraint(ext.permute_vec(lifted) - ext)

    prob.set_objective(0.5 * ext.trace())
    sol = sv.solve(prob, tolerances).require_optimal()
    return max(0.0, float(np.log2(sol.primal_value)))


def is_ppt(rho: ops.DenseOperator, cut: BipartiteCut,
           eig_tol: float = -1e-10) -> PptResult:
    """PPT membership: min eigenvalue of the right partial transpose."""
    cut.validate(rho.dims)
    pt = ops.partial_transpose(rho, cut.right)
    min_eig = float(np.linalg.eigvalsh(pt.mat).min())
    return PptResult(min_eig >= eig_tol, min_eig)
