"""Two-party channels: constructors, Choi operators, covariance checks,
and teleportation simulation.

A bidirectional channel is a CPTP map from a joint input A'B' (one system
per party) to a joint output AB, stored as a Kraus list.  Choi operators
follow the unnormalized convention J = (id (x) N)(|Y><Y|) with
|Y> = sum_ij |ij>|ij>, so Tr J equals the input dimension; they are laid
out on the four systems LA A B LB with LA ~ A' and LB ~ B'.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from .entanglement import BipartiteCut, is_ppt

KRAUS_COMPLETENESS_TOL = 1e-10
CHOI_LABELS = ("LA", "A", "B", "LB")


@dataclass(frozen=True)
class BidirectionalChannel:
    """CPTP map between labeled two-party spaces, as a Kraus list."""

    kraus: tuple[np.ndarray, ...]
    in_dims: ops.SystemDims
    out_dims: ops.SystemDims
    name: str = "channel"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        for k in ks:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", ks)
        din, dout = self.in_dims.total, self.out_dims.total
        if any(k.shape != (dout, din) for k in ks):
            raise ValueError("Kraus shapes inconsistent with declared dims")
        acc = sum(k.conj().T @ k for k in ks)
        if np.max(np.abs(acc - np.eye(din))) > KRAUS_COMPLETENESS_TOL:
            raise ValueError("Kraus operators do not sum to identity (not CPTP)")

    @property
    def in_labels(self) -> tuple[str, ...]:
        return self.in_dims.labels

    @property
    def out_labels(self) -> tuple[str, ...]:
        return self.out_dims.labels

    def describe(self) -> dict:
        return {"name": self.name, "params": dict(self.params),
                "in_dims": list(self.in_dims.dims), "out_dims": list(self.out_dims.dims)}


def apply_channel(channel: BidirectionalChannel, state: ops.DenseOperator
                  ) -> ops.DenseOperator:
    """sum_k K rho K^dag; spectator subsystems are acted on by identity.

    The state must carry the channel's input labels; any extra labels ride
    along untouched, and the channel outputs take the input labels' slots.
    """
    in_labs = channel.in_labels
    spectators = [l for l in state.dims.labels if l not in in_labs]
    for lab in in_labs:
        if state.dims.dim_of(lab) != channel.in_dims.dim_of(lab):
            raise ValueError(f"dimension mismatch on {lab!r}")
    ordered = state.reorder(tuple(in_labs) + tuple(spectators))
    d_spec = int(np.prod([ordered.dims.dim_of(l) for l in spectators])) \
        if spectators else 1
    eye = np.eye(d_spec)
    out = None
    for k in channel.kraus:
        kf = np.kron(k, eye)
        term = kf @ ordered.mat @ kf.conj().T
        out = term if out is None else out + term
    out_dims = channel.out_dims.concat(ordered.dims.drop(in_labs))
    result = ops.DenseOperator(out, out_dims)
    # put channel outputs into the slots the inputs occupied
    slot_order = tuple(
        dict(zip(in_labs, channel.out_labels)).get(l, l) for l in state.dims.labels)
    return result.reorder(slot_order)


def choi_of_channel(channel: BidirectionalChannel) -> ops.DenseOperator:
    """Unnormalized Choi operator on LA A B LB (Tr J = |A'||B'|)."""
    da, db = channel.in_dims.dims
    la, lb = CHOI_LABELS[0], CHOI_LABELS[3]
    if set((la, lb)) & set(channel.in_labels + channel.out_labels):
        raise ops.LabelError("channel labels may not collide with LA/LB")
    # |Y> on (LA, LB, A', B') = sum_ij |ij>_{LA LB} |ij>_{A'B'}
    v = np.zeros((da, db, da, db), dtype=complex)
    for i in range(da):
        for j in range(db):
            v[i, j, i, j] = 1.0
    sd = ops.SystemDims((la, lb) + channel.in_labels, (da, db, da, db))
    ups = ops.DenseOperator(np.outer(v.reshape(-1), v.reshape(-1).conj()), sd)
    j_op = apply_channel(channel, ups)
    return j_op.reorder((la,) + channel.out_labels + (lb,))


def normalized_choi_state(channel: BidirectionalChannel) -> ops.DenseOperator:
    j = choi_of_channel(channel)
    return j * (1.0 / j.trace().real)


def apply_from_choi(choi: ops.DenseOperator, state: ops.DenseOperator
                    ) -> ops.DenseOperator:
    """Reconstruct the channel action from its Choi operator.

    N(rho) = Tr_{LA LB}[ (rho^T_{LA LB} (x) I_{out}) J ] under the
    unnormalized convention used here.
    """
    la, lb = CHOI_LABELS[0], CHOI_LABELS[3]
    out_labels = tuple(l for l in choi.dims.labels if l not in (la, lb))
    rho_t = ops.partial_transpose(state, state.dims.labels)  # full transpose
    rho_t = ops.DenseOperator(
        rho_t.mat, ops.SystemDims((la, lb), state.dims.dims))
    eye_out = ops.identity(**{l: choi.dims.dim_of(l) for l in out_labels})
    big = ops.tensor(rho_t, eye_out).reorder(choi.dims.labels)
    return ops.partial_trace(ops.DenseOperator(big.mat @ choi.mat, choi.dims),
                             (la, lb))


def channel_fidelity_check(channel: BidirectionalChannel,
                           state: ops.DenseOperator) -> float:
    """Max-abs difference between direct action and Choi reconstruction."""
    direct = apply_channel(channel, state)
    via_choi = apply_from_choi(choi_of_channel(channel), state)
    return float(np.max(np.abs(direct.mat - via_choi.reorder(direct.dims.labels).mat)))


# -- constructors -------------------------------------------------------------

_IN = ops.SystemDims(("Ap", "Bp"), (2, 2))
_OUT = ops.SystemDims(("A", "B"), (2, 2))


def identity_channel() -> BidirectionalChannel:
    return BidirectionalChannel((np.eye(4),), _IN, _OUT, "identity")


def swap_channel() -> BidirectionalChannel:
    return BidirectionalChannel((ops.swap_matrix(2),), _IN, _OUT, "swap")


def partial_swap(p: float) -> BidirectionalChannel:
    """Unitary interpolation sqrt(p) I + i sqrt(1-p) S between identity (p=1)
    and swap (p=0); the two-qubit analogue of a beamsplitter interaction."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    u = np.sqrt(p) * np.eye(4) + 1j * np.sqrt(1.0 - p) * ops.swap_matrix(2)
    return BidirectionalChannel((u,), _IN, _OUT, "partial-swap", {"p": p})


def partial_swap_traceout(p: float) -> BidirectionalChannel:
    """Partial swap followed by discarding Alice's output subsystem."""
    base = partial_swap(p)
    u = base.kraus[0]
    kraus = []
    for a in range(2):
        bra = np.zeros((1, 2), dtype=complex)
        bra[0, a] = 1.0
        kraus.append(np.kron(bra, np.eye(2)) @ u)
    out = ops.SystemDims(("A", "B"), (1, 2))
    return BidirectionalChannel(tuple(kraus), _IN, out,
                                "partial-swap-traceout", {"p": p})


def collective_dephasing_swap(p: float, phi: float) -> BidirectionalChannel:
    """Qubit swap followed by a collective phase |1> -> e^{i phi}|1> on both
    outputs, applied with probability 1 - p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    s = ops.swap_matrix(2)
    z = np.diag([1.0, np.exp(1j * phi)])
    kraus = (np.sqrt(p) * s, np.sqrt(1.0 - p) * np.kron(z, z) @ s)
    kraus = tuple(k for k in kraus if np.max(np.abs(k)) > 0)
    return BidirectionalChannel(kraus, _IN, _OUT,
                                "collective-dephasing", {"p": p, "phi": phi})


def cnot_matrix() -> np.ndarray:
    m = np.eye(4, dtype=complex)
    m[[2, 3]] = m[[3, 2]]
    return m


def cnot_channel() -> BidirectionalChannel:
    return BidirectionalChannel((cnot_matrix(),), _IN, _OUT, "cnot")


def noisy_cnot(q: float) -> BidirectionalChannel:
    """CNOT with probability q, complete replacement by I/4 otherwise."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    kraus = [np.sqrt(q) * cnot_matrix()]
    if q < 1.0:
        w = np.sqrt(1.0 - q) / 2.0
        for m in range(4):
            for n2 in range(4):
                e = np.zeros((4, 4), dtype=complex)
                e[m, n2] = w
                kraus.append(e)
    kraus = [k for k in kraus if np.max(np.abs(k)) > 0]
    return BidirectionalChannel(tuple(kraus), _IN, _OUT, "noisy-cnot", {"q": q})


def with_local_unitaries(channel: BidirectionalChannel,
                         pre_a=None, pre_b=None, post_a=None, post_b=None
                         ) -> BidirectionalChannel:
    """Conjugate by local unitaries: K -> (postA (x) postB) K (preA (x) preB)."""
    da_in, db_in = channel.in_dims.dims
    da_out, db_out = channel.out_dims.dims
    pre = np.kron(np.eye(da_in) if pre_a is None else pre_a,
                  np.eye(db_in) if pre_b is None else pre_b)
    post = np.kron(np.eye(da_out) if post_a is None else post_a,
                   np.eye(db_out) if post_b is None else post_b)
    kraus = tuple(post @ k @ pre for k in channel.kraus)
    return BidirectionalChannel(kraus, channel.in_dims, channel.out_dims,
                                channel.name + "+local", dict(channel.params))


# -- bicovariance --------------------------------------------------------------


@dataclass(frozen=True)
class GroupRepresentation:
    """Finite list of unitaries forming a one-design on one subsystem."""

    elements: tuple[np.ndarray, ...]
    dim: int

    def __post_init__(self):
        els = tuple(np.asarray(u, dtype=complex) for u in self.elements)
        for u in els:
            u.setflags(write=False)
            if u.shape != (self.dim, self.dim):
                raise ValueError("element dimension mismatch")
            if np.max(np.abs(u.conj().T @ u - np.eye(self.dim))) > 1e-12:
                raise ValueError("representation element is not unitary")
        object.__setattr__(self, "elements", els)
        # one-design property: the average of U . U^dag is the fully
        # depolarizing map
        d = self.dim
        twirl = sum(np.kron(u, u.conj()) for u in els) / len(els)
        expected = np.zeros((d * d, d * d))
        for i in range(d):
            for k2 in range(d):
                expected[i * d + i, k2 * d + k2] = 1.0 / d
        if np.max(np.abs(twirl - expected)) > 1e-10:
            raise ValueError("elements do not form a unitary one-design")

    def __len__(self):
        return len(self.elements)


def pauli_representation() -> GroupRepresentation:
    p = ops.PAULI
    return GroupRepresentation(
        (p["I"], p["X"], p["Z"], p["X"] @ p["Z"]), 2)


@dataclass(frozen=True)
class BicovarianceData:
    """Input one-designs and the matching output representations.

    ``out_a[i][j]`` / ``out_b[i][j]`` give the output corrections for input
    pair (element i of in_a, element j of in_b).
    """

    in_a: GroupRepresentation
    in_b: GroupRepresentation
    out_a: tuple
    out_b: tuple


def cnot_bicovariance() -> BicovarianceData:
    """Pauli one-designs with the conjugation-propagation outputs of CNOT.

    Conjugating X^a Z^b (x) X^c Z^d through CNOT gives, up to phase,
    X^a Z^(b+d) (x) X^(a+c) Z^d.
    """
    p = ops.PAULI
    rep = pauli_representation()

    def pw(a, b):
        return np.linalg.matrix_power(p["X"], a) @ np.linalg.matrix_power(p["Z"], b)

    idx = [(0, 0), (1, 0), (0, 1), (1, 1)]  # (a,b) per element of rep
    out_a, out_b = [], []
    for (a, b) in idx:
        row_a, row_b = [], []
        for (c, d) in idx:
            row_a.append(pw(a, (b + d) % 2))
            row_b.append(pw((a + c) % 2, d))
        out_a.append(tuple(row_a))
        out_b.append(tuple(row_b))
    return BicovarianceData(rep, rep, tuple(out_a), tuple(out_b))


def identity_bicovariance() -> BicovarianceData:
    rep = pauli_representation()
    out = tuple(tuple(rep.elements[i] for _ in rep.elements)
                for i in range(len(rep)))
    out_b = tuple(tuple(rep.elements[j] for j in range(len(rep)))
                  for _ in rep.elements)
    return BicovarianceData(rep, rep, out, out_b)


def check_bicovariance(channel: BidirectionalChannel,
                       data: BicovarianceData) -> float:
    """Worst-case trace-norm violation of the covariance condition.

    Sweeps all group element pairs and a complete matrix-unit basis of the
    input space; a channel is declared bicovariant when the returned
    deviation is below 1e-10.
    """
    da, db = channel.in_dims.dims
    if data.in_a.dim != da or data.in_b.dim != db:
        raise ValueError("representation dimensions do not match the channel")
    basis = []
    d = da * db
    for r in range(d):
        for c in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[r, c] = 1.0
            basis.append(ops.DenseOperator(e, channel.in_dims))
    worst = 0.0
    for gi, u in enumerate(data.in_a.elements):
        for hi, vmat in enumerate(data.in_b.elements):
            uv = np.kron(u, vmat)
            wt = np.kron(data.out_a[gi][hi], data.out_b[gi][hi])
            for e in basis:
                lhs = apply_channel(
                    channel, ops.DenseOperator(uv @ e.mat @ uv.conj().T, channel.in_dims))
                rhs = apply_channel(channel, e)
                diff = lhs.mat - wt @ rhs.mat @ wt.conj().T
                worst = max(worst, float(np.sum(np.linalg.svd(diff, compute_uv=False))))
    return worst


def _conjugate_index(rep: GroupRepresentation, i: int) -> int:
    """Index of the element equal (up to phase) to the conjugate of element i."""
    target = rep.elements[i].conj()
    d = rep.dim
    for j, u in enumerate(rep.elements):
        if abs(abs(np.trace(u.conj().T @ target)) - d) < 1e-9:
            return j
    raise ValueError("representation is not closed under complex conjugation")


def teleportation_simulate(channel: BidirectionalChannel,
                           state: ops.DenseOperator,
                           data: BicovarianceData | None = None
                           ) -> ops.DenseOperator:
    """Simulate the channel by consuming its normalized Choi state.

    Both parties measure their input together with their half of the
    resource state in the generalized Bell basis generated by the input
    one-designs, then undo the outcome twist with the matching output
    representations.  Refuses channels that fail the bicovariance check.
    """
    data = data or cnot_bicovariance()
    dev = check_bicovariance(channel, data)
    if dev > 1e-10:
        raise ValueError(f"channel is not bicovariant (deviation {dev:.3e})")
    da, db = channel.in_dims.dims
    if len(data.in_a) != da ** 2 or len(data.in_b) != db ** 2:
        raise ValueError("teleportation needs full Heisenberg-Weyl one-designs")

    la, lb = CHOI_LABELS[0], CHOI_LABELS[3]
    theta = normalized_choi_state(channel)
    joint = ops.tensor(state.reorder(channel.in_labels), theta)

    def bell_projector(rep_el, d, lab_in, lab_res):
        v = ops.max_entangled_ket(d)
        w = np.kron(np.eye(d), rep_el) @ v
        sd = ops.SystemDims((lab_in, lab_res), (d, d))
        return ops.DenseOperator(np.outer(w, w.conj()), sd)

    ap, bp = channel.in_labels
    out_sum = None
    for gi in range(len(data.in_a)):
        proj_a = bell_projector(data.in_a.elements[gi], da, ap, la)
        gci = _conjugate_index(data.in_a, gi)
        for hi in range(len(data.in_b)):
            proj_b = bell_projector(data.in_b.elements[hi], db, bp, lb)
            hci = _conjugate_index(data.in_b, hi)
            meas = ops.tensor(proj_a, proj_b)
            meas_full = ops.tensor(
                meas, ops.identity(**{l: theta.dims.dim_of(l)
                                      for l in channel.out_labels}))
            meas_full = meas_full.reorder(joint.dims.labels)
            branch = ops.partial_trace(
                ops.DenseOperator(meas_full.mat @ joint.mat @ meas_full.mat,
                                  joint.dims),
                (ap, bp, la, lb))
            corr = np.kron(data.out_a[gci][hci], data.out_b[gci][hci]).conj().T
            corrected = corr @ branch.reorder(channel.out_labels).mat @ corr.conj().T
            out_sum = corrected if out_sum is None else out_sum + corrected
    return ops.DenseOperator(out_sum, channel.out_dims)


def is_ppt_preserving(channel: BidirectionalChannel) -> bool:
    """A two-party channel preserves PPT states iff its Choi state is PPT
    across the LA A : B LB cut."""
    theta = normalized_choi_state(channel)
    cut = BipartiteCut((CHOI_LABELS[0], channel.out_labels[0]),
                       (channel.out_labels[1], CHOI_LABELS[3]))
    return is_ppt(theta, cut).value
