"""States and operators on tensor products of group algebras.

A :class:`LogicalSpace` is C[G_1] (x) ... (x) C[G_k]; basis states are
tuples of group elements, packed row-major with the first slot slowest.
Operators are scipy CSR matrices wrapped in :class:`LogicalOperator`.
States are kept unnormalised until a measurement renormalises them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .groups import Cocycle2, DiagonalSubgroup, FiniteGroup, Irrep

ATOL = 1e-10
PHASE_ATOL = 1e-9


class LogicalError(ValueError):
    pass


def make_rng(seed: int | None) -> np.random.Generator:
    """Counter-based generator so that seeded runs are reproducible."""
    return np.random.Generator(np.random.Philox(0 if seed is None else seed))


# ---------------------------------------------------------------- spaces


@dataclass(frozen=True, eq=False)
class LogicalSpace:
    slots: tuple[FiniteGroup, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.names:
            object.__setattr__(self, "names", tuple(f"s{i}" for i in range(len(self.slots))))
        if len(self.names) != len(self.slots):
            raise LogicalError("one name per slot")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(G.order for G in self.slots)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims)) if self.slots else 1

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LogicalSpace)
            and len(self.slots) == len(other.slots)
            and all(a is b for a, b in zip(self.slots, other.slots))
        )

    def __hash__(self) -> int:
        return hash(tuple(id(G) for G in self.slots))

    def slot_index(self, slot: int | str) -> int:
        if isinstance(slot, str):
            return self.names.index(slot)
        return slot

    def encode(self, elems) -> int:
        if len(elems) != len(self.slots):
            raise LogicalError(f"expected {len(self.slots)} elements, got {len(elems)}")
        idx = 0
        for G, e in zip(self.slots, elems):
            g = G.element(e)
            idx = idx * G.order + g
        return idx

    def decode(self, index: int) -> tuple[int, ...]:
        return tuple(int(x) for x in np.unravel_index(index, self.dims))

    def label(self, index: int) -> str:
        return " ".join(G.label(g) for G, g in zip(self.slots, self.decode(index)))

    def without(self, slot: int) -> "LogicalSpace":
        keep = [i for i in range(len(self.slots)) if i != slot]
        return LogicalSpace(tuple(self.slots[i] for i in keep), tuple(self.names[i] for i in keep))


# ---------------------------------------------------------------- states


@dataclass(frozen=True, eq=False)
class LogicalState:
    space: LogicalSpace
    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.space.dim,):
            raise LogicalError(f"amplitude vector has shape {a.shape}, space dim is {self.space.dim}")
        object.__setattr__(self, "amplitudes", a)
        if self.normalized and abs(self.norm - 1) > ATOL:
            raise LogicalError("state flagged normalised but has norm %.3g" % self.norm)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "LogicalState":
        n = self.norm
        if n < ATOL:
            raise LogicalError("cannot normalise the zero vector")
        return LogicalState(self.space, self.amplitudes / n, True)

    def tensor(self, other: "LogicalState") -> "LogicalState":
        space = LogicalSpace(self.space.slots + other.space.slots, self.space.names + other.space.names)
        return LogicalState(space, np.kron(self.amplitudes, other.amplitudes), self.normalized and other.normalized)

    def amplitude(self, *elems) -> complex:
        return complex(self.amplitudes[self.space.encode(elems)])

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.space.dims)

    def select(self, slot: int | str, g) -> "LogicalState":
        """Unnormalised (<g|_slot) applied to the state; the slot is removed."""
        i = self.space.slot_index(slot)
        G = self.space.slots[i]
        t = np.take(self.tensor_view(), G.element(g), axis=i)
        return LogicalState(self.space.without(i), t.reshape(-1))

    def to_json(self) -> dict:
        return {
            "slots": [G.name for G in self.space.slots],
            "names": list(self.space.names),
            "amplitudes": [
                [self.space.label(i), float(a.real), float(a.imag)]
                for i, a in enumerate(self.amplitudes)
                if abs(a) > 1e-14
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def basis_state(space: LogicalSpace, elems) -> LogicalState:
    v = np.zeros(space.dim, dtype=complex)
    v[space.encode(elems)] = 1.0
    return LogicalState(space, v, True)


def state_from_dict(space: LogicalSpace, coeffs: dict) -> LogicalState:
    """Build a state from {element tuple or label: amplitude}."""
    v = np.zeros(space.dim, dtype=complex)
    for key, c in coeffs.items():
        elems = key if isinstance(key, tuple) else (key,)
        v[space.encode(elems)] += c
    return LogicalState(space, v)


def load_state(space: LogicalSpace, data: dict | str) -> LogicalState:
    if isinstance(data, str):
        data = json.loads(data)
    if [G.name for G in space.slots] != data["slots"]:
        raise LogicalError("slot groups in dump do not match the space")
    v = np.zeros(space.dim, dtype=complex)
    for label, re, im in data["amplitudes"]:
        parts = label.split(" ")
        v[space.encode(parts)] = complex(re, im)
    return LogicalState(space, v)


# ---------------------------------------------------------------- operators


@dataclass(frozen=True, eq=False)
class LogicalOperator:
    space: LogicalSpace
    matrix: sp.csr_matrix
    label: str = ""

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise LogicalError("operator shape does not match the space")
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other):
        if isinstance(other, LogicalOperator):
            self._same(other)
            return LogicalOperator(self.space, self.matrix @ other.matrix, f"{self.label}{other.label}")
        if isinstance(other, LogicalState):
            self._same(other)
            return LogicalState(other.space, self.matrix @ other.amplitudes)
        return NotImplemented

    def __add__(self, other: "LogicalOperator") -> "LogicalOperator":
        self._same(other)
        return LogicalOperator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "LogicalOperator") -> "LogicalOperator":
        self._same(other)
        return LogicalOperator(self.space, self.matrix - other.matrix)

    def __rmul__(self, c: complex) -> "LogicalOperator":
        return LogicalOperator(self.space, c * self.matrix, self.label)

    def _same(self, other) -> None:
        if other.space != self.space:
            raise LogicalError("operands live on different spaces")

    @property
    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @property
    def adjoint(self) -> "LogicalOperator":
        return LogicalOperator(self.space, self.matrix.conj().T.tocsr(), self.label + "^dag")

    def power(self, k: int) -> "LogicalOperator":
        out = identity(self.space)
        for _ in range(k):
            out = out @ self
        return out

    @cached_property
    def is_normal(self) -> bool:
        m = self.matrix
        d = (m @ m.conj().T - m.conj().T @ m)
        return bool(abs(d).max() < PHASE_ATOL) if d.nnz else True

    def is_permutation(self) -> bool:
        m = self.matrix.tocsc()
        return bool(np.all(np.diff(m.indptr) == 1) and np.allclose(m.data, 1.0))

    def commutator_norm(self, other: "LogicalOperator") -> float:
        d = (self.matrix @ other.matrix - other.matrix @ self.matrix)
        return float(abs(d).max()) if d.nnz else 0.0


def identity(space: LogicalSpace) -> LogicalOperator:
    return LogicalOperator(space, sp.identity(space.dim, dtype=complex, format="csr"), "I")


def _embed(space: LogicalSpace, slot: int, local: sp.spmatrix) -> sp.csr_matrix:
    dims = space.dims
    left = int(np.prod(dims[:slot])) if slot else 1
    right = int(np.prod(dims[slot + 1 :])) if slot + 1 < len(dims) else 1
    out = sp.kron(sp.identity(left), sp.kron(local, sp.identity(right)))
    return sp.csr_matrix(out, dtype=complex)


def on_slot(space: LogicalSpace, slot: int | str, local, label: str = "") -> LogicalOperator:
    """Embed a single-slot matrix into the full space."""
    i = space.slot_index(slot)
    m = sp.csr_matrix(np.asarray(local) if not sp.issparse(local) else local, dtype=complex)
    if m.shape != (space.dims[i],) * 2:
        raise LogicalError(f"local operator shape {m.shape} does not fit slot {i}")
    return LogicalOperator(space, _embed(space, i, m), label)


def _perm_matrix(n: int, target: np.ndarray) -> sp.csr_matrix:
    """Column h has its unit entry in row target[h]."""
    return sp.csr_matrix((np.ones(n), (target, np.arange(n))), shape=(n, n), dtype=complex)


def left_mult(space: LogicalSpace, slot: int | str, g) -> LogicalOperator:
    """|h> -> |g h> on one slot."""
    i = space.slot_index(slot)
    G = space.slots[i]
    gi = G.element(g)
    local = _perm_matrix(G.order, G.mul_table[gi, :])
    return LogicalOperator(space, _embed(space, i, local), f"L^{G.label(gi)}")


def right_mult(space: LogicalSpace, slot: int | str, g) -> LogicalOperator:
    """|h> -> |h g^-1> on one slot."""
    i = space.slot_index(slot)
    G = space.slots[i]
    gi = G.element(g)
    local = _perm_matrix(G.order, G.mul_table[:, G.inv(gi)])
    return LogicalOperator(space, _embed(space, i, local), f"R^{G.label(gi)}")


def diagonal_op(space: LogicalSpace, slot: int | str, values, label: str = "") -> LogicalOperator:
    i = space.slot_index(slot)
    return LogicalOperator(space, _embed(space, i, sp.diags(np.asarray(values, dtype=complex))), label)


def irrep_diag(space: LogicalSpace, slot: int | str, R: Irrep, i: int, j: int) -> LogicalOperator:
    """|g> -> R(g)_{ij} |g>; indices are 1-based as in the usual notation."""
    if not (1 <= i <= R.dim and 1 <= j <= R.dim):
        raise LogicalError(f"matrix index ({i},{j}) outside irrep of dimension {R.dim}")
    s = space.slot_index(slot)
    G = space.slots[s]
    if R.group is not G or not R.domain.is_whole:
        raise LogicalError("irrep must be an irrep of the slot group")
    vals = R.matrices[:, i - 1, j - 1]
    return diagonal_op(space, s, vals, f"Z_{R.name}^{i}{j}")


def clock_op(space: LogicalSpace, slot: int | str) -> LogicalOperator:
    """The generalised Z on a cyclic or dihedral slot.

    For Z_n it multiplies |m^j> by exp(2 pi i j / n); for D_k it multiplies
    |r^j s^b> by exp(2 pi i j / k), ignoring the reflection bit.
    """
    s = space.slot_index(slot)
    G = space.slots[s]
    if G.family == "cyclic":
        n = G.param
        vals = np.exp(2j * np.pi * np.arange(n) / n)
    elif G.family in ("dihedral", "symmetric"):
        k = G.param
        vals = np.exp(2j * np.pi * (np.arange(G.order) % k) / k)
    else:
        raise LogicalError(f"no clock operator for {G.name}")
    return diagonal_op(space, s, vals, "Zc")


def gauge_projector(
    space: LogicalSpace,
    diag: DiagonalSubgroup,
    slots: tuple[int | str, int | str] = (0, 1),
    phi: Cocycle2 | None = None,
) -> LogicalOperator:
    """(1/|K|) sum_k Rbar^k (x) Lbar^{p(k)} on the two slots.

    Only the trivial cocycle is supported at this level; nontrivial phases
    are handled by the lattice module.
    """
    a, b = (space.slot_index(s) for s in slots)
    if space.slots[a] is not diag.G or space.slots[b] is not diag.Gp:
        raise LogicalError("slot groups do not match the diagonal subgroup")
    if phi is not None and not phi.is_trivial:
        raise NotImplementedError("logical gauge projector supports the trivial cocycle only")
    acc = None
    for h, ph in diag.pairs:
        term = right_mult(space, a, h).matrix @ left_mult(space, b, ph).matrix
        acc = term if acc is None else acc + term
    return LogicalOperator(space, acc / diag.order, "P_diag")


def canonical_index(
    space: LogicalSpace,
    diag: DiagonalSubgroup,
    index: int,
    slots: tuple[int | str, int | str] = (0, 1),
) -> int:
    """Smallest basis index in the gauge orbit (g k^-1, p(k) g') of ``index``.

    Merged states stay in the pre-merge space; this only picks a stable
    label for the otherwise overcomplete merged basis.
    """
    a, b = (space.slot_index(s) for s in slots)
    G, Gp = space.slots[a], space.slots[b]
    elems = list(space.decode(index))
    best = index
    for k, pk in diag.pairs:
        e = list(elems)
        e[a] = G.mul(elems[a], G.inv(k))
        e[b] = Gp.mul(pk, elems[b])
        best = min(best, space.encode(e))
    return best


def canonical_label(
    space: LogicalSpace,
    diag: DiagonalSubgroup,
    index: int,
    slots: tuple[int | str, int | str] = (0, 1),
) -> str:
    return space.label(canonical_index(space, diag, index, slots))


def subgroup_projector(space: LogicalSpace, slot: int | str, members) -> LogicalOperator:
    """Average of Rbar^k over a subgroup of one slot (a boundary gauging)."""
    s = space.slot_index(slot)
    ms = list(members)
    acc = sum(right_mult(space, s, k).matrix for k in ms)
    return LogicalOperator(space, acc / len(ms), "P_K")


# ---------------------------------------------------------------- measurement


@dataclass
class MeasurementRecord:
    entries: list[tuple[str, object]] = field(default_factory=list)
    seed: int | None = None

    def add(self, label: str, outcome) -> None:
        self.entries.append((label, outcome))

    def as_dict(self) -> dict:
        return dict(self.entries)

    def to_json(self) -> dict:
        def enc(o):
            if isinstance(o, complex):
                return [o.real, o.imag]
            return o

        return {"seed": self.seed, "entries": [[k, enc(v)] for k, v in self.entries]}


def eigenprojectors(op: LogicalOperator, tol: float = 1e-8) -> list[tuple[complex, np.ndarray]]:
    """Spectral projectors of a normal operator via complex Schur form.

    Eigenvalues closer than ``tol`` are merged.  The projectors are dense.
    """
    if not op.is_normal:
        raise LogicalError("measured operator is not normal")
    T, Z = scipy.linalg.schur(op.dense, output="complex")
    evals = np.diag(T)
    groups: list[tuple[complex, list[int]]] = []
    for k, lam in enumerate(evals):
        for gi, (mu, idx) in enumerate(groups):
            if abs(lam - mu) < tol:
                idx.append(k)
                break
        else:
            groups.append((complex(lam), [k]))
    out = []
    for lam, idx in groups:
        V = Z[:, idx]
        out.append((_clean(lam), V @ V.conj().T))
    out.sort(key=lambda t: (round(np.angle(t[0]) % (2 * np.pi), 8), round(abs(t[0]), 8)))
    return out


def _clean(z: complex) -> complex:
    re = 0.0 if abs(z.real) < 1e-12 else z.real
    im = 0.0 if abs(z.imag) < 1e-12 else z.imag
    return complex(re, im)


def root_projectors(op: LogicalOperator, order: int) -> dict[int, LogicalOperator]:
    """Projectors P_m = (1/q) sum_k w^{-mk} U^k for a unitary with U^q = 1.

    Keys are exponents m, eigenvalue exp(2 pi i m / q).  Exact and sparse.
    """
    powers = [identity(op.space)]
    for _ in range(order - 1):
        powers.append(powers[-1] @ op)
    if abs((powers[-1] @ op - identity(op.space)).matrix).max() > PHASE_ATOL:
        raise LogicalError(f"operator does not satisfy U^{order} = 1")
    w = np.exp(2j * np.pi / order)
    out = {}
    for m in range(order):
        acc = sum((w ** (-m * k)) * powers[k].matrix for k in range(order)) / order
        out[m] = LogicalOperator(op.space, sp.csr_matrix(acc), f"P[{op.label}={m}]")
    return out


def _choose(probs: list[float], rng: np.random.Generator | None) -> int:
    p = np.array(probs)
    p = p / p.sum()
    rng = rng or make_rng(0)
    return int(rng.choice(len(p), p=p))


def measure(
    state: LogicalState,
    op: LogicalOperator,
    rng: np.random.Generator | None = None,
    forced: complex | None = None,
    tol: float = 1e-8,
) -> tuple[complex, LogicalState, float]:
    """Projective measurement of a normal operator.

    Returns (eigenvalue, normalised post-state, probability).  With
    ``forced`` set, that eigenvalue is selected and its Born probability
    returned; a zero-probability forced outcome raises.
    """
    psi = state.normalize()
    branches = []
    for lam, P in eigenprojectors(op, tol):
        v = P @ psi.amplitudes
        branches.append((lam, v, float(np.vdot(v, v).real)))
    if forced is not None:
        for lam, v, p in branches:
            if abs(lam - forced) < tol:
                break
        else:
            raise LogicalError(f"{forced} is not an eigenvalue of {op.label or 'operator'}")
    else:
        lam, v, p = branches[_choose([b[2] for b in branches], rng)]
    if p < ATOL:
        raise LogicalError(f"outcome {lam} has zero probability")
    return lam, LogicalState(state.space, v / np.sqrt(p), True), p


def measure_computational(
    state: LogicalState,
    slot: int | str,
    rng: np.random.Generator | None = None,
    coarse=None,
    forced=None,
) -> tuple[object, LogicalState, float]:
    """Measure one slot in the group-element basis.

    ``coarse`` maps element index -> symbol; only the symbol is revealed.
    Returns (element or symbol, normalised post-state, probability); the
    slot is kept so the post-state lives in the same space.
    """
    s = state.space.slot_index(slot)
    G = state.space.slots[s]
    psi = state.normalize()
    t = psi.tensor_view()
    weights = np.sum(np.abs(np.moveaxis(t, s, 0).reshape(G.order, -1)) ** 2, axis=1)
    sym = (lambda g: g) if coarse is None else (lambda g: coarse(g) if callable(coarse) else coarse[g])
    symbols: dict = {}
    for g in range(G.order):
        symbols.setdefault(sym(g), []).append(g)
    keys = list(symbols)
    probs = [float(sum(weights[g] for g in symbols[k])) for k in keys]
    if forced is not None:
        if coarse is None and not isinstance(forced, (int, np.integer)):
            forced = G.element(forced)
        if forced not in symbols:
            raise LogicalError(f"{forced!r} is not a possible outcome")
        key = forced
    else:
        key = keys[_choose(probs, rng)]
    p = probs[keys.index(key)]
    if p < ATOL:
        raise LogicalError(f"outcome {key!r} has zero probability")
    mask = np.zeros(G.order)
    mask[symbols[key]] = 1.0
    shape = [1] * len(state.space.dims)
    shape[s] = G.order
    v = (t * mask.reshape(shape)).reshape(-1) / np.sqrt(p)
    return key, LogicalState(state.space, v, True), p


# ---------------------------------------------------------------- comparisons


def equal_up_to_global_phase(A, B, atol: float = PHASE_ATOL) -> tuple[bool, float]:
    """True iff A = exp(i theta) B entrywise within ``atol``; returns theta."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != B.shape:
        return False, 0.0
    k = int(np.argmax(np.abs(B)))
    if abs(B.flat[k]) < atol:
        return bool(np.allclose(A, 0, atol=atol)), 0.0
    ratio = A.flat[k] / B.flat[k]
    if abs(abs(ratio) - 1) > atol * 10:
        return False, 0.0
    phase = ratio / abs(ratio)
    ok = bool(np.max(np.abs(A - phase * B)) <= atol)
    theta = float(np.angle(phase))
    if abs(theta + np.pi) < 1e-12:
        theta = np.pi
    return ok, theta


def fidelity(a, b) -> float:
    """|<a|b>|^2 for normalised copies of two vectors or states."""
    va = a.amplitudes if isinstance(a, LogicalState) else np.asarray(a, dtype=complex)
    vb = b.amplitudes if isinstance(b, LogicalState) else np.asarray(b, dtype=complex)
    va = va / np.linalg.norm(va)
    vb = vb / np.linalg.norm(vb)
    return float(abs(np.vdot(va, vb)) ** 2)
