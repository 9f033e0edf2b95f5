"""Magic-state and gate-teleportation protocols at the logical level.

Every protocol is a :class:`ProtocolScript`: a list of steps acting on a
:class:`LogicalSpace`.  Measurements produce integer outcomes (an exponent
m for eigenvalue exp(2 pi i m / q), or an element/symbol for slot
readouts).  Corrections are looked up in a data table keyed by measurement
label and outcome, so branch coverage can be checked mechanically.

Branches are replayed without renormalisation, which makes the branch map
a Kraus operator; its squared norm on a normalised input is the Born
probability of the whole record.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import logical as lg
from .groups import FiniteGroup, build_group
from .logical import (
    LogicalOperator,
    LogicalSpace,
    LogicalState,
    MeasurementRecord,
    equal_up_to_global_phase,
    fidelity,
    left_mult,
    right_mult,
)

OMEGA8 = np.exp(1j * np.pi / 4)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
I2 = np.eye(2, dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


def T_root(n: int = 1) -> np.ndarray:
    """diag(1, exp(i pi / 4n)); n = 1 is the T gate."""
    return np.diag([1, np.exp(1j * np.pi / (4 * n))])


def rx(theta: float) -> np.ndarray:
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * X


class ProtocolError(ValueError):
    pass


# ---------------------------------------------------------------- steps


@dataclass(frozen=True)
class MeasureOp:
    """Measure a unitary of finite order; outcome m means eigenvalue w^m."""

    label: str
    op: LogicalOperator
    order: int


@dataclass(frozen=True)
class MeasureJoint:
    """Jointly measure commuting unitaries of finite order.

    The outcome is a tuple of exponents, one per operator.
    """

    label: str
    ops: tuple[LogicalOperator, ...]
    orders: tuple[int, ...]


@dataclass(frozen=True)
class MeasureSlot:
    """Group-basis readout of one slot, optionally coarse-grained."""

    label: str
    slot: int
    coarse: Callable[[int], object] | None = None


@dataclass(frozen=True)
class Correct:
    """Apply the correction-table entry for a recorded outcome.

    With ``given`` set, the table is keyed by the tuple of the listed
    earlier outcomes followed by this one.
    """

    label: str
    given: tuple[str, ...] = ()

    def key(self, record: dict):
        if not self.given:
            return record[self.label]
        return tuple(record[g] for g in self.given) + (record[self.label],)


@dataclass(frozen=True)
class Gate:
    op: LogicalOperator


@dataclass(frozen=True)
class ProjectSlot:
    """Contract a slot against a record-dependent vector and drop it."""

    slot: int
    vector: Callable[[dict], np.ndarray]


Step = MeasureOp | MeasureJoint | MeasureSlot | Correct | Gate | ProjectSlot


@dataclass
class ProtocolScript:
    name: str
    space: LogicalSpace
    steps: list
    corrections: dict[str, dict]
    operators: dict[str, LogicalOperator]
    output_slots: tuple[int, ...] = ()

    def __post_init__(self):
        labels = {s.label for s in self.steps if hasattr(s, "label") and not isinstance(s, Correct)}
        for key in self.corrections:
            if key not in labels:
                raise ProtocolError(f"correction table refers to unknown measurement {key!r}")
        for s in self.steps:
            if isinstance(s, Correct) and s.label not in labels:
                raise ProtocolError(f"correction step refers to unknown measurement {s.label!r}")

    @property
    def measurement_labels(self) -> list[str]:
        return [s.label for s in self.steps if isinstance(s, (MeasureOp, MeasureJoint, MeasureSlot))]

    def resolve(self, name: str) -> LogicalOperator:
        """Named operator, optionally raised to a power: ``"X_L"``, ``"Lr_D^3"``."""
        m = re.fullmatch(r"(.+?)(?:\^(-?\d+))?", name)
        base, p = m.group(1), int(m.group(2) or 1)
        if base not in self.operators:
            raise ProtocolError(f"unknown correction operator {base!r} in {self.name}")
        op = self.operators[base]
        if p < 0:
            op, p = op.adjoint, -p
        return op.power(p)

    def correction_for(self, label: str, outcome) -> list[str]:
        table = self.corrections.get(label, {})
        if outcome not in table:
            raise ProtocolError(f"{self.name}: no correction listed for {label}={outcome!r}")
        return list(table[outcome])


# ---------------------------------------------------------------- running


def _outcome_projector(step, space: LogicalSpace, cache: dict):
    key = id(step)
    if key not in cache:
        if isinstance(step, MeasureOp):
            cache[key] = lg.root_projectors(step.op, step.order)
        elif isinstance(step, MeasureJoint):
            per = [lg.root_projectors(o, q) for o, q in zip(step.ops, step.orders)]
            out = {}
            for combo in itertools.product(*[range(q) for q in step.orders]):
                P = per[0][combo[0]]
                for d, m in zip(per[1:], combo[1:]):
                    P = d[m] @ P
                out[combo] = P
            cache[key] = out
        else:
            raise TypeError(step)
    return cache[key]


def _slot_projector(state: LogicalState, slot: int, coarse, outcome) -> LogicalState:
    G = state.space.slots[slot]
    keep = np.array([(coarse(g) if coarse else g) == outcome for g in range(G.order)], dtype=float)
    shape = [1] * len(state.space.dims)
    shape[slot] = G.order
    v = (state.tensor_view() * keep.reshape(shape)).reshape(-1)
    return LogicalState(state.space, v)


def _slot_outcomes(step: MeasureSlot, G: FiniteGroup) -> list:
    vals = []
    for g in range(G.order):
        o = step.coarse(g) if step.coarse else g
        if o not in vals:
            vals.append(o)
    return vals


def _possible_outcomes(step, space: LogicalSpace, cache: dict) -> list:
    if isinstance(step, MeasureSlot):
        return _slot_outcomes(step, space.slots[step.slot])
    return list(_outcome_projector(step, space, cache))


@dataclass
class Branch:
    record: dict
    state: LogicalState  # unnormalised branch output
    probability: float


class Runner:
    """Replays a script; caches projectors between branches."""

    def __init__(self, script: ProtocolScript):
        self.script = script
        self._cache: dict = {}

    def _step(self, step, state: LogicalState, record: dict) -> LogicalState:
        sc = self.script
        if isinstance(step, (MeasureOp, MeasureJoint)):
            return _outcome_projector(step, state.space, self._cache)[record[step.label]] @ state
        if isinstance(step, MeasureSlot):
            return _slot_projector(state, step.slot, step.coarse, record[step.label])
        if isinstance(step, Correct):
            for name in sc.correction_for(step.label, step.key(record)):
                state = sc.resolve(name) @ state
            return state
        if isinstance(step, Gate):
            return step.op @ state
        if isinstance(step, ProjectSlot):
            vec = np.asarray(step.vector(record), dtype=complex)
            t = np.moveaxis(state.tensor_view(), step.slot, -1)
            return LogicalState(state.space.without(step.slot), (t @ vec.conj()).reshape(-1))
        raise TypeError(step)

    def apply(self, state: LogicalState, record: dict) -> LogicalState:
        """Apply all steps with the outcomes in ``record`` forced (no renormalisation)."""
        for step in self.script.steps:
            state = self._step(step, state, record)
        return state

    def sample(self, state: LogicalState, rng: np.random.Generator) -> tuple[dict, LogicalState]:
        """Sampled run: outcomes drawn with Born probabilities step by step."""
        sc = self.script
        state = state.normalize()
        record: dict = {}
        for step in sc.steps:
            if isinstance(step, (MeasureOp, MeasureJoint, MeasureSlot)):
                outs = _possible_outcomes(step, state.space, self._cache)
                posts = []
                for o in outs:
                    if isinstance(step, MeasureSlot):
                        posts.append(_slot_projector(state, step.slot, step.coarse, o))
                    else:
                        posts.append(_outcome_projector(step, state.space, self._cache)[o] @ state)
                probs = np.array([p.norm ** 2 for p in posts])
                k = int(rng.choice(len(outs), p=probs / probs.sum()))
                record[step.label] = outs[k]
                state = posts[k].normalize()
            else:
                state = self._step(step, state, record)
                if state.norm > lg.ATOL:
                    state = state.normalize()
        return record, state

    def branches(self, state: LogicalState, min_prob: float = 1e-12) -> list[Branch]:
        """Every record with nonzero Born probability, explored depth-first."""
        sc = self.script
        state = state.normalize()
        out: list[Branch] = []

        def rec(i: int, st: LogicalState, record: dict):
            if i == len(sc.steps):
                out.append(Branch(dict(record), st, st.norm ** 2))
                return
            step = sc.steps[i]
            if isinstance(step, (MeasureOp, MeasureJoint, MeasureSlot)):
                for o in _possible_outcomes(step, st.space, self._cache):
                    if isinstance(step, MeasureSlot):
                        nxt = _slot_projector(st, step.slot, step.coarse, o)
                    else:
                        nxt = _outcome_projector(step, st.space, self._cache)[o] @ st
                    if nxt.norm ** 2 > min_prob:
                        record[step.label] = o
                        rec(i + 1, nxt, record)
                        del record[step.label]
            else:
                rec(i + 1, self._step(step, st, record), record)

        rec(0, state, {})
        return out


def kraus_map(script: ProtocolScript, make_input: Callable[[int], LogicalState], n_inputs: int, record: dict) -> np.ndarray:
    """Columns are the unnormalised branch outputs on basis inputs."""
    runner = Runner(script)
    cols = [runner.apply(make_input(i), record).amplitudes for i in range(n_inputs)]
    return np.stack(cols, axis=1)


def unitary_from_kraus(K: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    """Rescale a Kraus operator proportional to a unitary; fail otherwise."""
    G = K.conj().T @ K
    c = np.trace(G).real / K.shape[1]
    if c < atol or not np.allclose(G, c * np.eye(K.shape[1]), atol=atol):
        raise ProtocolError("branch map is not proportional to a unitary")
    return K / np.sqrt(c)


# ---------------------------------------------------------------- results


@dataclass
class BranchResult:
    record: dict
    probability: float
    fidelity: float
    output: np.ndarray | None = None
    unitary: np.ndarray | None = None
    phase: float | None = None


@dataclass
class ProtocolResult:
    name: str
    final_state: LogicalState | None
    record: MeasurementRecord
    target: np.ndarray
    fidelity: float
    effective_unitary: np.ndarray | None = None
    global_phase: float | None = None
    branches: list[BranchResult] = field(default_factory=list)
    probability: float | None = None

    @property
    def total_probability(self) -> float:
        return float(sum(b.probability for b in self.branches))

    @property
    def min_fidelity(self) -> float:
        return min((b.fidelity for b in self.branches), default=self.fidelity)

    def to_json(self) -> dict:
        def mat(U):
            if U is None:
                return None
            return [[[float(z.real), float(z.imag)] for z in row] for row in U]

        return {
            "name": self.name,
            "record": self.record.to_json(),
            "fidelity": self.fidelity,
            "final_state": None if self.final_state is None else self.final_state.to_json(),
            "target": [[float(z.real), float(z.imag)] for z in np.ravel(self.target)],
            "effective_unitary": mat(self.effective_unitary),
            "global_phase": self.global_phase,
            "probability": self.probability,
            "branches": [
                {
                    "record": {k: _jsonable(v) for k, v in b.record.items()},
                    "probability": b.probability,
                    "fidelity": b.fidelity,
                    "phase": b.phase,
                }
                for b in self.branches
            ],
            "total_probability": self.total_probability if self.branches else None,
        }


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


# ---------------------------------------------------------------- states


def prepare_S_state(n: int = 1, group: FiniteGroup | None = None) -> LogicalState:
    """Unnormalised sum_j exp(i pi j^2 / 4n) |m^j> on C[Z_{4n}]."""
    if n < 1:
        raise ProtocolError("n must be positive")
    G = group or build_group(f"Z{4 * n}")
    j = np.arange(4 * n)
    return LogicalState(LogicalSpace((G,), ("A",)), np.exp(1j * np.pi * j**2 / (4 * n)))


def s_state_dihedral(n: int = 1, group: FiniteGroup | None = None) -> LogicalState:
    """Unnormalised sum_j exp(i pi j^2 / 4n) |r^j> on C[D_{4n}]."""
    G = group or build_group(f"D{4 * n}")
    v = np.zeros(G.order, dtype=complex)
    j = np.arange(4 * n)
    v[j] = np.exp(1j * np.pi * j**2 / (4 * n))
    return LogicalState(LogicalSpace((G,), ("D",)), v)


def magic_target_two_qubit() -> np.ndarray:
    """CZ (|-> (x) |T>), in |L R> order."""
    minus = np.array([1, -1]) / np.sqrt(2)
    t = np.array([1, OMEGA8]) / np.sqrt(2)
    return CZ @ np.kron(minus, t)


def gate_target_two_qubit() -> np.ndarray:
    HH = np.kron(H, H)
    return OMEGA8 * HH @ CZ @ np.kron(T_root(1).conj(), Z) @ HH


def gate_target_single_qubit(n: int = 1) -> np.ndarray:
    Xn = np.linalg.matrix_power(X, n)
    return H @ Xn @ T_root(n) @ Xn @ H


# ---------------------------------------------------------------- scripts


def _reflection_pair(G: FiniteGroup, j: int, sign: int) -> np.ndarray:
    """(|r^j> + sign |r^j s>)/sqrt 2 on a dihedral slot."""
    k = G.param
    v = np.zeros(G.order, dtype=complex)
    v[j % k] = 1
    v[k + j % k] = sign
    return v / np.sqrt(2)


def _sign(m: int) -> int:
    return 1 if m == 0 else -1


def teleport_script(n: int = 1) -> ProtocolScript:
    """Z_{4n} -> D_{4n} teleportation of the S state."""
    A, D = build_group(f"Z{4 * n}"), build_group(f"D{4 * n}")
    space = LogicalSpace((A, D), ("A", "D"))
    q = 4 * n
    U = right_mult(space, 0, 1) @ left_mult(space, 1, 1)
    ops = {"Zc_D": lg.clock_op(space, 1), "X_D": left_mult(space, 1, 1)}
    steps = [
        MeasureOp("m_XX", U, q),
        Correct("m_XX"),
        MeasureSlot("m_Z", 0),
        Correct("m_Z"),
        ProjectSlot(0, lambda rec: np.eye(q)[rec["m_Z"]]),
    ]
    corrections = {
        "m_XX": {m: [f"Zc_D^{m}"] if m else [] for m in range(q)},
        "m_Z": {k: [f"X_D^{k}"] if k else [] for k in range(q)},
    }
    return ProtocolScript(f"teleport-s-n{n}", space, steps, corrections, ops, (1,))


def teleport_S_to_dihedral(n: int = 1, record: dict | None = None, seed: int | None = None) -> ProtocolResult:
    """Teleport |S>_{Z4n} into the D_{4n} patch; returns every branch."""
    script = teleport_script(n)
    inp = prepare_S_state(n, script.space.slots[0]).tensor(
        lg.basis_state(LogicalSpace((script.space.slots[1],), ("D",)), ("id",))
    )
    inp = LogicalState(script.space, inp.amplitudes)
    target = s_state_dihedral(n, script.space.slots[1]).normalize().amplitudes
    return _run_state_protocol(script, inp, target, record, seed)


# Corrections for the two-qubit protocols.  L is the first qubit.
_MAGIC2_CORR = {
    "m_XLX": {0: [], 1: ["Z_L"]},
    "m_XXR": {0: [], 1: ["Z_R"]},
    "m_X": {0: [], 1: ["Z_R"]},
    "m_Z": {0: [], 1: ["X_L", "X_R"], 2: ["Z_R"], 3: ["X_L", "X_R", "Z_R"]},
}


def _two_qubit_script(name: str, corrections: dict) -> ProtocolScript:
    D, Q = build_group("D4"), build_group("Z2 x Z2")
    space = LogicalSpace((D, Q), ("D", "Q"))
    mL, mR = Q.element("m_L"), Q.element("m_R")
    U1 = right_mult(space, 0, "r^2") @ left_mult(space, 1, mL)
    U2 = right_mult(space, 0, "r^3s") @ left_mult(space, 1, mR)
    Rs = right_mult(space, 0, "s")
    ops = {
        "X_L": left_mult(space, 1, mL),
        "X_R": left_mult(space, 1, mR),
        "Z_L": lg.on_slot(space, 1, np.kron(Z, I2)),
        "Z_R": lg.on_slot(space, 1, np.kron(I2, Z)),
        "Y_L": lg.on_slot(space, 1, np.kron(Y, I2)),
        "Y_R": lg.on_slot(space, 1, np.kron(I2, Y)),
        "S_L": lg.on_slot(space, 1, np.kron(np.diag([1, 1j]), I2)),
        "S_R": lg.on_slot(space, 1, np.kron(I2, np.diag([1, 1j]))),
        "H_L": lg.on_slot(space, 1, np.kron(H, I2)),
        "H_R": lg.on_slot(space, 1, np.kron(I2, H)),
        "RxM_L": lg.on_slot(space, 1, np.kron(rx(-np.pi / 2), I2)),
        "RxM_R": lg.on_slot(space, 1, np.kron(I2, rx(-np.pi / 2))),
        "CZ": lg.on_slot(space, 1, CZ),
    }
    steps = [
        MeasureOp("m_XLX", U1, 2),
        Correct("m_XLX"),
        MeasureOp("m_XXR", U2, 2),
        Correct("m_XXR"),
        MeasureOp("m_X", Rs, 2),
        Correct("m_X"),
        MeasureSlot("m_Z", 0, coarse=lambda g: g % 4),
        Correct("m_Z"),
        ProjectSlot(0, lambda rec: _reflection_pair(D, rec["m_Z"], _sign(rec["m_X"]))),
    ]
    return ProtocolScript(name, space, steps, corrections, ops, (1,))


def magic_script_two_qubit() -> ProtocolScript:
    return _two_qubit_script("magic-two-qubit", _MAGIC2_CORR)


def magic_state_two_qubit(record: dict | None = None, seed: int | None = None) -> ProtocolResult:
    script = magic_script_two_qubit()
    D, Q = script.space.slots
    sD = s_state_dihedral(1, D).normalize()
    inp = LogicalState(script.space, np.kron(sD.amplitudes, np.eye(4)[0]))
    return _run_state_protocol(script, inp, magic_target_two_qubit(), record, seed)


# Every entry here commutes with the later measurements, so each is applied
# as soon as its outcome is known.
_GATE2_CORR = {
    "m_XLX": {0: [], 1: ["RxM_L", "X_R"]},
    "m_XXR": {0: [], 1: ["X_L"]},
    "m_X": {0: [], 1: ["X_L"]},
    "m_Z": {0: [], 1: ["X_L", "X_R"], 2: ["X_L"], 3: ["X_R"]},
}


def gate_script_two_qubit() -> ProtocolScript:
    return _two_qubit_script("gate-two-qubit", _GATE2_CORR)


def gate_teleport_two_qubit(psi: LogicalState | np.ndarray | None = None, record: dict | None = None,
                            seed: int | None = None) -> ProtocolResult:
    script = gate_script_two_qubit()
    D = script.space.slots[0]
    sD = s_state_dihedral(1, D).normalize().amplitudes
    return _run_gate_protocol(script, lambda v: np.kron(sD, v), 4, gate_target_two_qubit(), psi, record, seed)


# ---------------------------------------------------------------- single qubit


def _single_qubit_space(n: int):
    D, B = build_group(f"D{4 * n}"), build_group("Z2")
    return D, B, LogicalSpace((D, B), ("D", "B"))


def _single_ops(space: LogicalSpace, n: int) -> dict:
    pz = np.diag([1, np.exp(1j * np.pi / (4 * n))])
    return {
        "X": left_mult(space, 1, 1),
        "Z": lg.on_slot(space, 1, Z),
        "Y": lg.on_slot(space, 1, Y),
        # phase steps of pi/4n in the Z and X bases
        "Pz": lg.on_slot(space, 1, pz),
        "Qx": lg.on_slot(space, 1, H @ pz @ H),
    }


def _merge_element(D: FiniteGroup, n: int, flavour: str) -> int:
    if flavour == "r3s":
        return D.element(f"r^{2 * n + 1}s")
    return D.element("rs")


def _pow(name: str, k: int, modulus: int) -> list[str]:
    k %= modulus
    return [f"{name}^{k}"] if k else []


def magic_script_single_qubit(n: int = 1, flavour: str | None = None) -> ProtocolScript:
    """D_{4n} | Z2 merge with <(h, m)>, then Rbar^s and coarse Zbar readouts.

    ``flavour`` picks h: ``"r3s"`` (h = r^{2n+1}s) or ``"rs"``.  The default
    is ``"r3s"`` for n = 1 and ``"rs"`` otherwise.
    """
    flavour = flavour or ("r3s" if n == 1 else "rs")
    if flavour not in ("r3s", "rs"):
        raise ProtocolError(f"unknown flavour {flavour!r}")
    D, B, space = _single_qubit_space(n)
    h = _merge_element(D, n, flavour)
    U = right_mult(space, 0, h) @ left_mult(space, 1, 1)
    Rs = right_mult(space, 0, "s")
    k = 4 * n
    steps = [
        MeasureOp("m_XX", U, 2),
        Correct("m_XX"),
        MeasureOp("m_X", Rs, 2),
        Correct("m_X"),
        MeasureSlot("m_Z", 0, coarse=lambda g: g % k),
        Correct("m_Z"),
        ProjectSlot(0, lambda rec: _reflection_pair(D, rec["m_Z"], _sign(rec["m_X"]))),
    ]
    corr = single_qubit_magic_corrections(n, flavour)
    return ProtocolScript(f"magic-single-n{n}-{flavour}", space, steps, corr, _single_ops(space, n), (1,))


def single_qubit_magic_corrections(n: int, flavour: str) -> dict:
    """Readout j leaves a Z-basis phase; it is undone by Pz^{2j}, times Z
    for the r^{2n+1}s merge when j + n is even.

    For n > 1 these phase corrections are themselves non-Clifford.
    """
    N = 8 * n

    def zcorr(j: int) -> list[str]:
        extra = 4 * n if flavour == "r3s" and (j + n) % 2 == 0 else 0
        return _pow("Pz", 2 * j + extra, N)

    return {
        "m_XX": {0: [], 1: ["Z"]},
        "m_X": {0: [], 1: ["Z"]},
        "m_Z": {j: zcorr(j) for j in range(4 * n)},
    }


def magic_state_single_qubit(n: int = 1, record: dict | None = None, seed: int | None = None,
                             flavour: str | None = None) -> ProtocolResult:
    script = magic_script_single_qubit(n, flavour)
    D = script.space.slots[0]
    sD = s_state_dihedral(n, D).normalize().amplitudes
    inp = LogicalState(script.space, np.kron(sD, [1, 0]))
    target = np.array([1, np.exp(1j * np.pi / (4 * n))]) / np.sqrt(2)
    return _run_state_protocol(script, inp, target, record, seed)


def gate_script_single_qubit(n: int = 1, variant: str = "A") -> ProtocolScript:
    """D_{4n} | Z2 gate teleportation.

    The interface gauges <(h, m), (rs, id)> with h = r^3s for n = 1 and
    h = r^{2n} otherwise.  Variant ``"A"`` measures both generators jointly
    during the merge; variant ``"B"`` measures (h, m) during the merge and
    Rbar^{rs} after the split.
    """
    D, B, space = _single_qubit_space(n)
    hm = D.element("r^3s") if n == 1 else D.element(f"r^{2 * n}")
    U1 = right_mult(space, 0, hm) @ left_mult(space, 1, 1)
    U2 = right_mult(space, 0, "rs")
    Rs = right_mult(space, 0, "s")
    k = 4 * n
    if variant == "A":
        head = [MeasureJoint("m_merge", (U1, U2), (2, 2)), Correct("m_merge")]
        first = "m_merge"
    elif variant == "B":
        head = [MeasureOp("m_XX", U1, 2), Correct("m_XX"), MeasureOp("m_rs", U2, 2), Correct("m_rs", ("m_XX",))]
        first = "m_XX"
    else:
        raise ProtocolError(f"unknown variant {variant!r}")
    steps = head + [
        MeasureOp("m_X", Rs, 2),
        Correct("m_X"),
        MeasureSlot("m_Z", 0, coarse=lambda g: g % k),
        Correct("m_Z", (first,)),
        ProjectSlot(0, lambda rec: _reflection_pair(D, rec["m_Z"], _sign(rec["m_X"]))),
    ]
    corr = single_qubit_gate_corrections(n, variant)
    return ProtocolScript(f"gate-single-n{n}-{variant}", space, steps, corr, _single_ops(space, n), (1,))


def single_qubit_gate_corrections(n: int, variant: str) -> dict:
    """All byproducts are powers of Qx, the X-basis phase step of pi/4n.

    They commute with one another, but the readout correction flips sign
    with the (h, m) outcome, so that entry is keyed on it.
    """
    N = 8 * n

    def merge(a: int, b: int) -> int:
        rs = (2 * (-1) ** a if n == 1 else 4 * n) * b
        return 2 * (-1) ** n * a + rs

    def readout(a: int, j: int) -> int:
        return 4 * (-1) ** (n + j + a) * (j // 2)

    def first(a):
        return a[0] if isinstance(a, tuple) else a

    table = {
        "m_X": {0: [], 1: _pow("Qx", 4 * n, N)},
        "m_Z": {},
    }
    if variant == "A":
        keys = [(a, b) for a in range(2) for b in range(2)]
        table["m_merge"] = {(a, b): _pow("Qx", merge(a, b), N) for a, b in keys}
    else:
        keys = [0, 1]
        table["m_XX"] = {a: _pow("Qx", merge(a, 0), N) for a in keys}
        table["m_rs"] = {(a, b): _pow("Qx", merge(a, b) - merge(a, 0), N) for a in keys for b in range(2)}
    table["m_Z"] = {(a, j): _pow("Qx", readout(first(a), j), N) for a in keys for j in range(4 * n)}
    return table


def gate_teleport_single_qubit(n: int = 1, psi=None, variant: str = "A", record: dict | None = None,
                               seed: int | None = None) -> ProtocolResult:
    script = gate_script_single_qubit(n, variant)
    D = script.space.slots[0]
    sD = s_state_dihedral(n, D).normalize().amplitudes
    return _run_gate_protocol(script, lambda v: np.kron(sD, v), 2, gate_target_single_qubit(n), psi, record, seed)


# ---------------------------------------------------------------- S3 pipelines


def _r_power(S: FiniteGroup, g: int) -> int:
    r = S.element("r")
    return next(j for j in range(3) if g in (S.power(r, j), S.mul(S.power(r, j), S.element("s"))))


def _coset_pair(S: FiniteGroup, j: int, sign: int) -> np.ndarray:
    """(|r^j> + sign |r^j s>)/sqrt 2 on an S3 slot."""
    v = np.zeros(S.order, dtype=complex)
    g = S.power(S.element("r"), j)
    v[g] = 1
    v[S.mul(g, S.element("s"))] = sign
    return v / np.sqrt(2)


def _s3_pipeline(name: str, first: str, last: str, g_in, h_in, h_out, corrections: dict) -> ProtocolScript:
    """Teleport a ``first`` patch into S3 through <(g_in, h_in)>, then merge
    S3 with a ``last`` patch through <(h_out, generator)>, measure Rbar^s and
    read out the <s>-coset."""
    A, S, B = build_group(first), build_group("S3"), build_group(last)
    space = LogicalSpace((A, S, B), ("A", "S", "B"))
    tail = space.without(0)
    qa, qb = A.order, S.element_order(S.element(h_out))
    coset = [_r_power(S, g) for g in range(S.order)]
    ops = {
        "L_in": left_mult(space, 1, h_in),
        "Zc_S": lg.diagonal_op(space, 1, [np.exp(2j * np.pi * coset[g] / 3) for g in range(S.order)]),
        "Sg_S": lg.diagonal_op(space, 1, [1 - 2 * (g >= 3) for g in range(S.order)]),
        "X": left_mult(tail, 1, 1),
        "Z": lg.diagonal_op(tail, 1, np.exp(2j * np.pi * np.arange(B.order) / B.order)),
    }
    steps = [
        MeasureOp("m_in", right_mult(space, 0, g_in) @ left_mult(space, 1, h_in), qa),
        Correct("m_in"),
        MeasureSlot("m_A", 0),
        Correct("m_A"),
        ProjectSlot(0, lambda rec: np.eye(qa)[rec["m_A"]]),
        MeasureOp("m_XX", right_mult(tail, 0, h_out) @ left_mult(tail, 1, 1), qb),
        Correct("m_XX"),
        MeasureOp("m_X", right_mult(tail, 0, "s"), 2),
        Correct("m_X"),
        MeasureSlot("m_Z", 0, coarse=lambda g: coset[g]),
        Correct("m_Z"),
        ProjectSlot(0, lambda rec: _coset_pair(S, rec["m_Z"], _sign(rec["m_X"]))),
    ]
    return ProtocolScript(name, space, steps, corrections, ops, (2,))


_S3_QUBIT_CORR = {
    "m_in": {0: [], 1: ["Zc_S"], 2: ["Zc_S^2"]},
    "m_A": {0: [], 1: ["L_in"], 2: ["L_in^2"]},
    "m_XX": {0: [], 1: ["Z"]},
    "m_X": {0: [], 1: ["Z"]},
    "m_Z": {0: [], 1: [], 2: []},
}

# The qutrit map is not unitary, so only the head is corrected and the
# tail is post-selected on trivial outcomes.
_S3_QUTRIT_CORR = {
    "m_in": {0: [], 1: ["Sg_S"]},
    "m_A": {0: [], 1: ["L_in"]},
    "m_XX": {k: [] for k in range(3)},
    "m_X": {0: [], 1: []},
    "m_Z": {j: [] for j in range(3)},
}

QUTRIT_THETAS = (1, -1, 1j)


def s3_qubit_script() -> ProtocolScript:
    return _s3_pipeline("s3-qubit-magic", "Z3", "Z2", 1, "r", "r^2s", _S3_QUBIT_CORR)


def s3_qutrit_script() -> ProtocolScript:
    return _s3_pipeline("s3-qutrit-magic", "Z2", "Z3", 1, "r^2s", "r", _S3_QUTRIT_CORR)


def s3_qubit_magic(record: dict | None = None, seed: int | None = None) -> ProtocolResult:
    """Qutrit stabilizer state -> S3 -> qubit state (|0> + e^{2 pi i/3}|1>)/sqrt 2."""
    script = s3_qubit_script()
    w = np.exp(2j * np.pi / 3)
    phi = np.array([1, w, w * w]) / np.sqrt(3)
    inp = LogicalState(script.space, np.kron(np.kron(phi, np.eye(6)[0]), [1, 0]))
    return _run_state_protocol(script, inp, np.array([1, w]) / np.sqrt(2), record, seed)


def qutrit_magic_target(theta: complex, coefficients) -> np.ndarray:
    """a(|0> + t|1>) + b(|1> + t|2>) + c(|2> + t|0>), normalised."""
    psi = np.asarray(coefficients, dtype=complex)
    v = psi + theta * np.roll(psi, 1)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ProtocolError("coefficients are annihilated by the merge")
    return v / n


def s3_qutrit_magic(theta: complex = 1j, coefficients=(1, 0, 0), record: dict | None = None,
                    seed: int | None = None) -> ProtocolResult:
    """Qubit stabilizer state -> S3 -> qutrit magic state.

    Without ``record`` the run is post-selected on trivial tail outcomes;
    ``probability`` is the success probability of that record.
    """
    if not any(abs(theta - t) < 1e-12 for t in QUTRIT_THETAS):
        raise ProtocolError(f"theta must be one of {QUTRIT_THETAS}")
    psi = np.asarray(coefficients, dtype=complex)
    if psi.shape != (3,) or abs(np.linalg.norm(psi) - 1) > 1e-9:
        raise ProtocolError("qutrit coefficients must be a normalised 3-vector")
    script = s3_qutrit_script()
    target = qutrit_magic_target(theta, psi)
    inp = LogicalState(script.space, np.kron(np.kron(np.array([1, theta]) / np.sqrt(2), np.eye(6)[0]), psi))
    if record is None and seed is None:
        record = {"m_in": 0, "m_A": 0, "m_XX": 0, "m_X": 0, "m_Z": 0}
    return _run_state_protocol(script, inp, target, record, seed)


# ---------------------------------------------------------------- simultaneity


@dataclass
class SimultaneityReport:
    commutators: dict[str, float]
    order_gap: float
    ok: bool


def simultaneity_report(atol: float = 1e-12) -> SimultaneityReport:
    """Check that the Z4 | D4 and D4 | Z2 merges can run at the same time.

    Works on C[Z4] (x) C[D4] (x) C[Z2]: the two gauge projectors and the
    Z4 readout projectors are compared pairwise, and the readout is swapped
    past the second merge for every forced outcome pair.
    """
    A, D, B = build_group("Z4"), build_group("D4"), build_group("Z2")
    space = LogicalSpace((A, D, B), ("A", "D", "B"))
    U1 = right_mult(space, 0, 1) @ left_mult(space, 1, "r")
    U2 = right_mult(space, 1, "r^3s") @ left_mult(space, 2, 1)
    P1 = lg.root_projectors(U1, 4)[0]
    P2 = lg.root_projectors(U2, 2)[0]
    reads = [lg.subgroup_projector(space, 0, [k]) for k in range(4)]
    comm = {"merge|merge": P1.commutator_norm(P2)}
    comm["readout|second merge"] = max(R.commutator_norm(P2) for R in reads)
    comm["trivial|first merge"] = lg.identity(space).commutator_norm(P1)

    rng = lg.make_rng(7)
    v = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    st = P1 @ LogicalState(space, v / np.linalg.norm(v))
    gap = 0.0
    for m in range(2):
        Pm = lg.root_projectors(U2, 2)[m]
        for R in reads:
            a = (Pm @ (R @ st)).amplitudes
            b = (R @ (Pm @ st)).amplitudes
            gap = max(gap, float(np.max(np.abs(a - b))))
    ok = all(c < atol for c in comm.values()) and gap < atol
    return SimultaneityReport(comm, gap, ok)


def simultaneity_check(atol: float = 1e-12) -> bool:
    return simultaneity_report(atol).ok


# ---------------------------------------------------------------- Clifford hierarchy


def _paulis(nq: int) -> list[np.ndarray]:
    single = [I2, X, Y, Z]
    out = []
    for idx in itertools.product(range(4), repeat=nq):
        if any(idx):
            M = np.ones((1, 1), dtype=complex)
            for i in idx:
                M = np.kron(M, single[i])
            out.append(M)
    return out


def is_pauli(U: np.ndarray, atol: float = 1e-9) -> bool:
    """True if U is a Pauli string (identity included) up to a global phase."""
    U = np.asarray(U, dtype=complex)
    nq = int(round(np.log2(U.shape[0])))
    return any(equal_up_to_global_phase(U, P, atol)[0] for P in [np.eye(2**nq)] + _paulis(nq))


def clifford_level(U: np.ndarray, max_level: int = 6, atol: float = 1e-9) -> int | None:
    """Smallest k with U in the k-th level of the Clifford hierarchy.

    Level 1 is the Pauli group; U is in level k if U P U^dag is in level
    k - 1 for every Pauli P.  Returns None above ``max_level``.
    """
    U = np.asarray(U, dtype=complex)
    nq = int(round(np.log2(U.shape[0])))
    paulis = _paulis(nq)

    def within(V: np.ndarray, k: int) -> bool:
        if is_pauli(V, atol):
            return True
        if k <= 1:
            return False
        return all(within(V @ P @ V.conj().T, k - 1) for P in paulis)

    for k in range(1, max_level + 1):
        if within(U, k):
            return k
    return None


# ---------------------------------------------------------------- drivers


def _run_state_protocol(script: ProtocolScript, inp: LogicalState, target: np.ndarray,
                        record: dict | None, seed: int | None) -> ProtocolResult:
    runner = Runner(script)
    target = np.asarray(target, dtype=complex)
    target = target / np.linalg.norm(target)
    branches = runner.branches(inp)
    results = [
        BranchResult(b.record, b.probability, fidelity(b.state.amplitudes, target), b.state.normalize().amplitudes)
        for b in branches
    ]
    rec = MeasurementRecord(seed=seed)
    if record is not None:
        out = runner.apply(inp.normalize(), record)
        if out.norm < lg.ATOL:
            raise ProtocolError(f"forced record {record} has zero probability")
        chosen = record
    else:
        chosen, out = runner.sample(inp, lg.make_rng(seed))
    for label in script.measurement_labels:
        rec.add(label, chosen[label])
    prob = next((b.probability for b in results if b.record == chosen), 0.0)
    out = out.normalize()
    return ProtocolResult(script.name, out, rec, target, fidelity(out.amplitudes, target), branches=results,
                          probability=prob)


def _run_gate_protocol(script: ProtocolScript, embed: Callable[[np.ndarray], np.ndarray], dim: int,
                       target: np.ndarray, psi, record: dict | None, seed: int | None) -> ProtocolResult:
    runner = Runner(script)

    def make(i: int) -> LogicalState:
        return LogicalState(script.space, embed(np.eye(dim)[i]))

    # enumerate records on a generic input so no branch is missed
    rng = lg.make_rng(12345)
    generic = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    generic /= np.linalg.norm(generic)
    recs = [b.record for b in runner.branches(LogicalState(script.space, embed(generic)))]
    results = []
    for r in recs:
        K = kraus_map(script, make, dim, r)
        U = unitary_from_kraus(K)
        ok, theta = equal_up_to_global_phase(U, target)
        fid = float(abs(np.trace(target.conj().T @ U)) / dim) ** 2
        p = float(np.linalg.norm(K @ generic) ** 2)
        results.append(BranchResult(r, p, fid, unitary=U, phase=theta if ok else None))
    if psi is None:
        psi = np.eye(dim)[0]
    v = psi.amplitudes if isinstance(psi, LogicalState) else np.asarray(psi, dtype=complex)
    v = v / np.linalg.norm(v)
    inp = LogicalState(script.space, embed(v))
    rec = MeasurementRecord(seed=seed)
    if record is not None:
        chosen, out = record, runner.apply(inp, record)
        if out.norm < lg.ATOL:
            raise ProtocolError(f"forced record {record} has zero probability")
    else:
        chosen, out = runner.sample(inp, lg.make_rng(seed))
    for label in script.measurement_labels:
        rec.add(label, chosen[label])
    U = unitary_from_kraus(kraus_map(script, make, dim, chosen))
    ok, theta = equal_up_to_global_phase(U, target)
    out = out.normalize()
    return ProtocolResult(
        script.name,
        out,
        rec,
        target @ v,
        fidelity(out.amplitudes, target @ v),
        effective_unitary=U,
        global_phase=theta if ok else None,
        branches=results,
    )
