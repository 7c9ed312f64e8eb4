"""Dense complex operator algebra over labeled tensor-product spaces.

Every operator carries an ordered list of labeled subsystems, and all
multipartite operations (partial trace, partial transpose, reordering,
channel application) address subsystems by label rather than by position.
With four-party operators like L_A A B L_B floating around, positional
indexing is how ordering bugs happen.

All values are immutable after construction; every operation returns a new
object, so operators can be shared freely across parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HERMITICITY_TOL = 1e-12
PSD_EIG_TOL = -1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-12


class LabelError(ValueError):
    """Unknown or colliding subsystem label."""


@dataclass(frozen=True)
class SystemDims:
    """Ordered list of labeled subsystem dimensions."""

    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.labels) != len(self.dims):
            raise ValueError("labels and dims must have equal length")
        if len(set(self.labels)) != len(self.labels):
            raise LabelError(f"duplicate labels in {self.labels}")
        if any(d < 1 for d in self.dims):
            raise ValueError("dimensions must be positive")

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.dims else 1

    def dim_of(self, label: str) -> int:
        return self.dims[self.index(label)]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown label {label!r}; have {self.labels}") from None

    def indices(self, labels: Iterable[str]) -> list[int]:
        return [self.index(lab) for lab in labels]

    def concat(self, other: "SystemDims") -> "SystemDims":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LabelError(f"label collision: {sorted(clash)}")
        return SystemDims(self.labels + other.labels, self.dims + other.dims)

    def drop(self, labels: Iterable[str]) -> "SystemDims":
        labs = set(labels)
        for lab in labs:
            self.index(lab)
        keep = [(l, d) for l, d in zip(self.labels, self.dims) if l not in labs]
        return SystemDims(tuple(l for l, _ in keep), tuple(d for _, d in keep))

    def select(self, labels: Sequence[str]) -> "SystemDims":
        return SystemDims(tuple(labels), tuple(self.dim_of(l) for l in labels))

    def __str__(self):
        return " ".join(f"{l}:{d}" for l, d in zip(self.labels, self.dims))


def dims(**labeled_dims: int) -> SystemDims:
    """Shorthand: dims(LA=2, A=2) -> SystemDims(('LA','A'), (2,2))."""
    return SystemDims(tuple(labeled_dims), tuple(labeled_dims.values()))


@dataclass(frozen=True)
class DenseOperator:
    """Complex matrix acting on a labeled tensor-product space.

    ``dims`` labels the row (output) space and ``codims`` the column (input)
    space; they coincide for square operators, which is the common case.
    Rectangular operators appear only as isometries.
    """

    mat: np.ndarray
    dims: SystemDims
    codims: SystemDims = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.codims is None:
            object.__setattr__(self, "codims", self.dims)
        m = np.array(self.mat, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)
        if m.ndim != 2 or m.shape != (self.dims.total, self.codims.total):
            raise ValueError(
                f"matrix shape {m.shape} inconsistent with dims "
                f"{self.dims.total}x{self.codims.total}"
            )

    # -- structure ----------------------------------------------------------

    @property
    def is_square(self) -> bool:
        return self.dims.total == self.codims.total and self.dims.dims == self.codims.dims

    def dagger(self) -> "DenseOperator":
        return DenseOperator(self.mat.conj().T, self.codims, self.dims)

    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        if self.mat.shape[0] != self.mat.shape[1]:
            return False
        return float(np.max(np.abs(self.mat - self.mat.conj().T))) <= tol

    def assert_hermitian(self, tol: float = HERMITICITY_TOL) -> None:
        if not self.is_hermitian(tol):
            raise ValueError("operator is not Hermitian within tolerance")

    def _tensor_view(self) -> np.ndarray:
        return self.mat.reshape(self.dims.dims + self.codims.dims)

    # -- arithmetic (labelwise; operands must share dims) --------------------

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        other = other.reorder(self.dims.labels)
        return DenseOperator(self.mat + other.mat, self.dims, self.codims)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        other = other.reorder(self.dims.labels)
        return DenseOperator(self.mat - other.mat, self.dims, self.codims)

    def __mul__(self, scalar) -> "DenseOperator":
        return DenseOperator(self.mat * scalar, self.dims, self.codims)

    __rmul__ = __mul__

    def __matmul__(self, other: "DenseOperator") -> "DenseOperator":
        if self.codims.dims != other.dims.dims:
            raise ValueError("dimension mismatch in composition")
        return DenseOperator(self.mat @ other.mat, self.dims, other.codims)

    def conjugate_by(self, u: "DenseOperator") -> "DenseOperator":
        """u @ self @ u† for an isometry/unitary u."""
        return DenseOperator(u.mat @ self.mat @ u.mat.conj().T, u.dims, u.dims)

    def reorder(self, labels: Sequence[str]) -> "DenseOperator":
        """Permute subsystems into the given label order (square ops only)."""
        if tuple(labels) == self.dims.labels:
            return self
        if not self.is_square or self.dims.labels != self.codims.labels:
            raise ValueError("reorder requires a square operator")
        perm = self.dims.indices(labels)
        if sorted(perm) != list(range(len(self.dims.labels))):
            raise LabelError("reorder labels must be a permutation of existing labels")
        k = len(self.dims.dims)
        t = self._tensor_view().transpose(perm + [p + k for p in perm])
        new_dims = self.dims.select(labels)
        return DenseOperator(t.reshape(new_dims.total, new_dims.total), new_dims)


def operator(mat, **labeled_dims: int) -> DenseOperator:
    """Build a square labeled operator: operator(m, A=2, B=2)."""
    return DenseOperator(np.asarray(mat, dtype=complex), dims(**labeled_dims))


@dataclass(frozen=True)
class PureState:
    """Unit vector on a labeled tensor-product space."""

    amplitudes: np.ndarray
    dims: SystemDims

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)
        if v.shape[0] != self.dims.total:
            raise ValueError("amplitude vector inconsistent with dims")
        if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
            raise ValueError("pure state must be normalized to 1e-12")

    def projector(self) -> DenseOperator:
        v = self.amplitudes
        return DenseOperator(np.outer(v, v.conj()), self.dims)


# -- core operations ---------------------------------------------------------


def tensor(a: DenseOperator, b: DenseOperator) -> DenseOperator:
    """Kronecker product with concatenated labels; labels must not clash."""
    return DenseOperator(
        np.kron(a.mat, b.mat), a.dims.concat(b.dims), a.codims.concat(b.codims)
    )


def tensor_all(ops: Sequence[DenseOperator]) -> DenseOperator:
    out = ops[0]
    for op in ops[1:]:
        out = tensor(out, op)
    return out


def partial_trace(op: DenseOperator, traced: Iterable[str]) -> DenseOperator:
    """Trace out the listed subsystems; remaining labels keep their order."""
    traced = list(traced)
    if not op.is_square:
        raise ValueError("partial trace requires a square operator")
    idx = op.dims.indices(traced)
    k = len(op.dims.dims)
    t = op._tensor_view()
    for ax in sorted(idx, reverse=True):
        t = np.trace(t, axis1=ax, axis2=ax + t.ndim // 2)
    new_dims = op.dims.drop(traced)
    return DenseOperator(t.reshape(new_dims.total, new_dims.total), new_dims)


def partial_transpose(op: DenseOperator, transposed: Iterable[str]) -> DenseOperator:
    """Transpose the indices of the listed subsystems (a linear involution)."""
    transposed = list(transposed)
    if not op.is_square:
        raise ValueError("partial transpose requires a square operator")
    idx = op.dims.indices(transposed)
    k = len(op.dims.dims)
    perm = list(range(2 * k))
    for ax in idx:
        perm[ax], perm[ax + k] = perm[ax + k], perm[ax]
    t = op._tensor_view().transpose(perm)
    return DenseOperator(t.reshape(op.mat.shape), op.dims, op.codims)


def trace_norm(op: DenseOperator) -> float:
    """Schatten 1-norm (sum of singular values)."""
    if op.mat.shape[0] != op.mat.shape[1]:
        raise ValueError("trace norm expects a square operator")
    return float(np.sum(np.linalg.svd(op.mat, compute_uv=False)))


def operator_norm(op: DenseOperator) -> float:
    """Largest singular value."""
    if op.mat.shape[0] != op.mat.shape[1]:
        raise ValueError("operator norm expects a square operator")
    return float(np.max(np.linalg.svd(op.mat, compute_uv=False)))


def trace_distance(a: DenseOperator, b: DenseOperator) -> float:
    return 0.5 * trace_norm(a - b)


def psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho: DenseOperator, sigma: DenseOperator) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 in [0, 1].

    The squared convention coincides with Tr[P rho] against a pure target P.
    """
    validate_density(rho)
    validate_density(sigma)
    s = psd_sqrt(rho.mat)
    inner = psd_sqrt(s @ sigma.reorder(rho.dims.labels).mat @ s)
    f = float(np.real(np.trace(inner))) ** 2
    return min(max(f, 0.0), 1.0)


def validate_density(op: DenseOperator, eig_tol: float = PSD_EIG_TOL,
                     trace_tol: float = TRACE_TOL) -> None:
    """Raise unless op is Hermitian, PSD to -1e-10, and unit trace to 1e-10."""
    op.assert_hermitian(1e-10)
    w = np.linalg.eigvalsh(op.mat)
    if w.min() < eig_tol:
        raise ValueError(f"not PSD: min eigenvalue {w.min():.3e}")
    if abs(op.trace().real - 1.0) > trace_tol:
        raise ValueError(f"trace {op.trace():.12f} != 1")


# -- standard states and matrices --------------------------------------------

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def identity(**labeled_dims: int) -> DenseOperator:
    d = dims(**labeled_dims)
    return DenseOperator(np.eye(d.total, dtype=complex), d)


def swap_matrix(d: int) -> np.ndarray:
    """S = sum_ij |ij><ji| on d x d."""
    s = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            s[i * d + j, j * d + i] = 1.0
    return s


def max_entangled_ket(d: int, normalized: bool = True) -> np.ndarray:
    """sum_i |ii> on two d-dimensional systems, optionally normalized."""
    v = np.zeros(d * d, dtype=complex)
    for i in range(d):
        v[i * d + i] = 1.0
    return v / np.sqrt(d) if normalized else v


def max_entangled_state(d: int, label_a: str, label_b: str) -> DenseOperator:
    v = max_entangled_ket(d)
    sd = SystemDims((label_a, label_b), (d, d))
    return DenseOperator(np.outer(v, v.conj()), sd)


def bell_state(kind: str, label_a: str = "A", label_b: str = "B") -> DenseOperator:
    """Two-qubit Bell projectors: kind in {'phi+','phi-','psi+','psi-'}."""
    r = 1 / np.sqrt(2)
    vecs = {
        "phi+": np.array([r, 0, 0, r]),
        "phi-": np.array([r, 0, 0, -r]),
        "psi+": np.array([0, r, r, 0]),
        "psi-": np.array([0, r, -r, 0]),
    }
    v = vecs[kind].astype(complex)
    sd = SystemDims((label_a, label_b), (2, 2))
    return DenseOperator(np.outer(v, v.conj()), sd)


def random_density(system: SystemDims, rng: np.random.Generator,
                   rank: int | None = None) -> DenseOperator:
    """Ginibre-induced random density operator."""
    n = system.total
    k = n if rank is None else rank
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    m = g @ g.conj().T
    return DenseOperator(m / np.trace(m).real, system)


def random_pure(system: SystemDims, rng: np.random.Generator) -> PureState:
    n = system.total
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return PureState(v / np.linalg.norm(v), system)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


# -- vec-space representations of the core linear maps ------------------------
#
# Row-major convention throughout: vec(M)[r*D + c] = M[r, c].


def transpose_vec_permutation(subsystem_dims: Sequence[int],
                              axes: Iterable[int]) -> np.ndarray:
    """Index permutation with vec(T(M)) = vec(M)[perm] for a partial transpose."""
    dims_t = tuple(int(d) for d in subsystem_dims)
    axes = set(axes)
    D = int(np.prod(dims_t))
    r, c = np.divmod(np.arange(D * D), D)
    rm = np.array(np.unravel_index(r, dims_t))
    cm = np.array(np.unravel_index(c, dims_t))
    for ax in axes:
        rm[ax], cm[ax] = cm[ax].copy(), rm[ax].copy()
    r2 = np.ravel_multi_index(tuple(rm), dims_t)
    c2 = np.ravel_multi_index(tuple(cm), dims_t)
    return r2 * D + c2


def ptrace_vec_matrix(subsystem_dims: Sequence[int],
                      axes: Iterable[int]) -> np.ndarray:
    """(K^2, D^2) real matrix with vec(Tr_axes M) = matrix @ vec(M)."""
    dims_t = tuple(int(d) for d in subsystem_dims)
    axes = set(axes)
    D = int(np.prod(dims_t))
    keep = [i for i in range(len(dims_t)) if i not in axes]
    kdims = [dims_t[i] for i in keep]
    K = int(np.prod(kdims)) if keep else 1
    r, c = np.divmod(np.arange(D * D), D)
    rm = np.array(np.unravel_index(r, dims_t))
    cm = np.array(np.unravel_index(c, dims_t))
    mask = np.ones(D * D, dtype=bool)
    for ax in axes:
        mask &= rm[ax] == cm[ax]
    if keep:
        rk = np.ravel_multi_index(tuple(rm[keep]), kdims)
        ck = np.ravel_multi_index(tuple(cm[keep]), kdims)
    else:
        rk = ck = np.zeros(D * D, dtype=int)
    out = np.zeros((K * K, D * D))
    src = np.nonzero(mask)[0]
    out[(rk * K + ck)[mask], src] = 1.0
    return out


def conjugation_vec_permutation(perm_matrix_rows: np.ndarray) -> np.ndarray:
    """vec permutation for M -> P M P^T given P as a row permutation array.

    ``perm_matrix_rows[i]`` is the source index moved to row i, i.e.
    (P M P^T)[i, j] = M[perm[i], perm[j]].
    """
    p = np.asarray(perm_matrix_rows, dtype=int)
    D = len(p)
    r, c = np.divmod(np.arange(D * D), D)
    return p[r] * D + p[c]


# -- text fixture format ------------------------------------------------------


def to_text(op: DenseOperator) -> str:
    """Serialize a square operator: dims header line, then matrix rows.

    Entries are whitespace-separated ``re+imj`` tokens parseable by
    ``complex()``.
    """
    if not op.is_square or op.dims.labels != op.codims.labels:
        raise ValueError("text format supports square operators only")
    lines = [str(op.dims)]
    for row in op.mat:
        lines.append(" ".join(f"{z.real!r}{z.imag:+}j".replace("+-", "-") for z in row))
    return "\n".join(lines) + "\n"


def from_text(text: str) -> DenseOperator:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    header = lines[0].split()
    labels, dvals = zip(*(tok.split(":") for tok in header))
    sd = SystemDims(tuple(labels), tuple(int(d) for d in dvals))
    rows = [[complex(tok) for tok in ln.split()] for ln in lines[1:]]
    return DenseOperator(np.array(rows, dtype=complex), sd)
