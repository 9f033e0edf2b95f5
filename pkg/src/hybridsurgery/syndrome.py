"""D(D4) as a non-commuting stabilizer code.

Each D4 edge is a 4-level qudit times a qubit, |r^j s^b> = |j>|b>, with
generalized Paulis X4 (shift), Z4 (clock, i^j), charge conjugation C4
(j -> -j) and the qubit X, Z.  The generators per vertex are A^(r) and
A^(s); per plaquette they are the diagonal S^(r) and S^(s) built from the
clock operators.  Everything here acts on lattice states through the
operator classes of the lattice module.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .center import Anyon, center
from .groups import FiniteGroup
from .lattice import (
    Diagonal,
    Factorized,
    LatticeOp,
    PatchLayout,
    Plaquette,
    Product,
    Vertex,
    build_patch,
    fiducial_state,
    group_commutator,
    op_distance,
)

ATOL = 1e-9


class SyndromeError(ValueError):
    pass


# ---------------------------------------------------------------- single-edge operators


def _jb(a: int) -> tuple[int, int]:
    return a % 4, a // 4


def _idx(j: int, b: int) -> int:
    return (j % 4) + 4 * b


def _single(perm_fn, phase_fn=None) -> tuple[np.ndarray, np.ndarray | None]:
    perm = np.array([_idx(*perm_fn(*_jb(a))) for a in range(8)])
    phase = None if phase_fn is None else np.array([phase_fn(*_jb(a)) for a in range(8)], dtype=complex)
    return perm, phase


QUDIT_OPS: dict[str, tuple[np.ndarray, np.ndarray | None]] = {
    "X4": _single(lambda j, b: (j + 1, b)),
    "X4^2": _single(lambda j, b: (j + 2, b)),
    "X4^3": _single(lambda j, b: (j + 3, b)),
    "Z4": _single(lambda j, b: (j, b), lambda j, b: 1j**j),
    "Z4^2": _single(lambda j, b: (j, b), lambda j, b: (-1) ** j),
    "Z4^3": _single(lambda j, b: (j, b), lambda j, b: (-1j) ** j),
    "X": _single(lambda j, b: (j, 1 - b)),
    "Z": _single(lambda j, b: (j, b), lambda j, b: (-1) ** b),
    # L^s = C4 X and R^r = X4^(-Z)
    "C4X": _single(lambda j, b: (-j, 1 - b)),
    "X4^-Z": _single(lambda j, b: (j - (-1) ** b, b)),
}

ERRORS = ("Z", "Z4", "Z4^2", "Z4^3", "X", "X4", "X4^2", "X4^3")
ERROR_DISPLAY = {"Z": "Z", "Z4": "𝒵", "Z4^2": "𝒵²", "Z4^3": "𝒵³", "X": "X", "X4": "𝒳", "X4^2": "𝒳²", "X4^3": "𝒳³"}


def edge_op(layout: PatchLayout, name: str, edge: int) -> LatticeOp:
    if name not in QUDIT_OPS:
        raise SyndromeError(f"unsupported error {name!r}; choose from {', '.join(ERRORS)}")
    perm, phase = QUDIT_OPS[name]
    return Factorized(layout.dims, ((edge, perm, phase),))


# ---------------------------------------------------------------- generators


@dataclass(frozen=True)
class StabilizerGenerator:
    kind: str  # "A" (vertex) or "S" (plaquette)
    label: str  # "r", "s", "r^2"
    site: tuple[int, int]
    op: LatticeOp = field(repr=False, compare=False)

    @property
    def name(self) -> str:
        return f"{self.kind}^({self.label})@{self.site}"


def _require_d4(layout: PatchLayout) -> FiniteGroup:
    G = layout.group
    if G.family != "dihedral" or G.param != 4:
        raise SyndromeError(f"the stabilizer code needs a D4 patch, got {G.name}")
    return G


def star_generator(layout: PatchLayout, v: Vertex, label: str) -> LatticeOp:
    """A_v^(r): X4 out, X4^-Z in; A_v^(s): C4 X out, X in; A_v^(r^2) = (A_v^(r))^2."""
    if label == "r^2":
        A = star_generator(layout, v, "r")
        return Product(layout.dims, (A, A))
    out_name, in_name = {"r": ("X4", "X4^-Z"), "s": ("C4X", "X")}[label]
    factors = []
    for leg in v.legs:
        perm, phase = QUDIT_OPS[out_name if leg.outgoing else in_name]
        factors.append((leg.edge, perm, phase))
    return Factorized(layout.dims, tuple(factors))


def _plaquette_roles(layout: PatchLayout, p: Plaquette) -> dict[int, int]:
    """Map role 1..4 (left, top, right, bottom) to edge index for present edges."""
    roles = {}
    for e, _, _ in p.walk:
        E = layout.edges[e]
        if E.kind == "v":
            roles[1 if E.x == p.x else 3] = e
        else:
            roles[2 if E.y == p.y + 1 else 4] = e
    return roles


def plaquette_generator(layout: PatchLayout, p: Plaquette, label: str) -> LatticeOp:
    """S^(r) = Z4_1 Z4_2^{Z_1} Z4_3^{-Z_4} Z4_4^{-1}; S^(s) = product of Z;
    S^(r^2) = (S^(r))^2.  Edges missing at rough sides are dropped."""
    roles = _plaquette_roles(layout, p)
    order = sorted(roles)
    edges = tuple(roles[k] for k in order)
    vals = np.zeros([8] * len(edges), dtype=complex)
    for idx in np.ndindex(*vals.shape):
        j = {k: _jb(a)[0] for k, a in zip(order, idx)}
        b = {k: _jb(a)[1] for k, a in zip(order, idx)}
        if label == "s":
            vals[idx] = (-1) ** sum(b.values())
            continue
        sg = lambda k: (-1) ** b.get(k, 0)  # noqa: E731
        expo = j.get(1, 0) + sg(1) * j.get(2, 0) - sg(4) * j.get(3, 0) - j.get(4, 0)
        vals[idx] = 1j ** (expo * (2 if label == "r^2" else 1))
    return Diagonal(layout.dims, edges, vals)


def d4_stabilizers(layout: PatchLayout, include_derived: bool = False) -> list[StabilizerGenerator]:
    """A^(r), A^(s) per vertex and S^(r), S^(s) per plaquette (plus the
    squares A^(r^2), S^(r^2) with ``include_derived``)."""
    _require_d4(layout)
    labels = ("r", "s", "r^2") if include_derived else ("r", "s")
    out = []
    for v in layout.vertices:
        for lab in labels:
            out.append(StabilizerGenerator("A", lab, (v.x, v.y), star_generator(layout, v, lab)))
    plabels = ("r", "s", "r^2") if include_derived else ("r", "s")
    for p in layout.plaquettes:
        for lab in plabels:
            out.append(StabilizerGenerator("S", lab, (p.x, p.y), plaquette_generator(layout, p, lab)))
    return out


def minimal_syndrome_patch() -> PatchLayout:
    """Two plaquettes side by side: one internal vertical line, 5 edges."""
    from .groups import build_group

    return build_patch(build_group("D4"), 2, 1)


# ---------------------------------------------------------------- commutators


@dataclass
class CommutatorReport:
    relations: list[tuple[str, float]]
    trivial_pairs: int
    nontrivial_pairs: list[str]

    @property
    def ok(self) -> bool:
        return all(d < ATOL for _, d in self.relations) and not self.nontrivial_pairs


def _find(gens, kind, label, site):
    for g in gens:
        if (g.kind, g.label, g.site) == (kind, label, site):
            return g
    raise SyndromeError(f"no generator {kind}^({label}) at {site}")


def commutator_relations(layout: PatchLayout | None = None) -> CommutatorReport:
    """The three nontrivial group commutators, and triviality of all other pairs.

    For a vertex v, p_NE is the plaquette with v as its lower-left corner and
    p_SW the one with v as its upper-right corner.
    """
    layout = layout or minimal_syndrome_patch()
    gens = d4_stabilizers(layout, include_derived=True)
    relations = []
    expected: dict[tuple[str, str], str] = {}
    plaq_sites = {(p.x, p.y) for p in layout.plaquettes}
    for v in layout.vertices:
        site = (v.x, v.y)
        Ar, As = _find(gens, "A", "r", site), _find(gens, "A", "s", site)
        rel = group_commutator(Ar.op, As.op)
        relations.append((f"[{Ar.name}, {As.name}] = A^(r^2)", op_distance(rel, _find(gens, "A", "r^2", site).op)))
        expected[(Ar.name, As.name)] = "A^(r^2)"
        ne = (v.x, v.y)
        if ne in plaq_sites:
            Sr = _find(gens, "S", "r", ne)
            rel = group_commutator(As.op, Sr.op)
            relations.append((f"[{As.name}, {Sr.name}] = S^(r^2)", op_distance(rel, _find(gens, "S", "r^2", ne).op)))
            expected[(As.name, Sr.name)] = "S^(r^2)"
        sw = (v.x - 1, v.y - 1)
        if sw in plaq_sites:
            Sr = _find(gens, "S", "r", sw)
            rel = group_commutator(Ar.op, Sr.op)
            relations.append((f"[{Ar.name}, {Sr.name}] = S^(s)", op_distance(rel, _find(gens, "S", "s", sw).op)))
            expected[(Ar.name, Sr.name)] = "S^(s)"
    base = [g for g in gens if g.label != "r^2"]
    trivial, bad = 0, []
    for i, a in enumerate(base):
        for b in base[i + 1:]:
            if (a.name, b.name) in expected or (b.name, a.name) in expected:
                continue
            if op_distance(a.op @ b.op, b.op @ a.op) < ATOL:
                trivial += 1
            else:
                bad.append(f"{a.name} vs {b.name}")
    return CommutatorReport(relations, trivial, bad)


# ---------------------------------------------------------------- syndromes


@dataclass
class SyndromeVector:
    error: str
    edge: str
    values: dict[str, complex]
    abelian_sector: bool
    eigenstate: bool
    violated: list[str]
    anyon: str

    def row(self) -> dict[str, str]:
        return {
            "error": ERROR_DISPLAY[self.error],
            "edge": self.edge,
            "syndrome": ", ".join(self.violated) + " = -1" if self.violated else "none",
            "anyon": self.anyon,
        }


def _charge_name(chi_r: int, chi_s: int) -> str:
    return {(1, 1): "1", (1, -1): "1_r", (-1, 1): "1_s", (-1, -1): "1_rs"}[(chi_r, chi_s)]


def classify(values: dict[str, complex], gens: list[StabilizerGenerator]) -> tuple[bool, list[str], str]:
    """Abelian-sector flag, violated generator kinds, and the anyon label."""
    derived = [g for g in gens if g.label == "r^2" or (g.kind == "S" and g.label == "s")]
    abelian = all(abs(values[g.name] - 1) < ATOL for g in derived)
    if not abelian:
        kinds = sorted({f"{g.kind}^({g.label})" for g in derived if abs(values[g.name] - 1) > ATOL})
        return False, kinds, "Non-Abelian"
    viol = [g for g in gens if g.label in ("r", "s") and abs(values[g.name] - 1) > ATOL]
    kinds = sorted({f"{g.kind}^({g.label})" for g in viol})
    chi_r = -1 if any(g.kind == "A" and g.label == "r" for g in viol) else 1
    chi_s = -1 if any(g.kind == "A" and g.label == "s" for g in viol) else 1
    flux = "[r^2]" if any(g.kind == "S" and g.label == "r" for g in viol) else "1"
    return True, kinds, f"({flux},{_charge_name(chi_r, chi_s)})"


def syndrome_of_error(
    layout: PatchLayout | None = None, error: str = "Z", edge: int | None = None
) -> SyndromeVector:
    """Apply a single-edge error to |Phi_id> and read off every generator.

    For abelian-sector errors the state is a joint eigenstate and the
    eigenvalues are reported; otherwise the values are expectations and
    only the violated non-abelian-sector kinds are listed.  The default
    probe is the internal vertical edge.
    """
    layout = layout or minimal_syndrome_patch()
    _require_d4(layout)
    if error not in ERRORS:
        raise SyndromeError(f"unsupported error {error!r}; choose from {', '.join(ERRORS)}")
    if edge is None:
        edge = next(e.index for e in layout.edges if e.kind == "v")
    psi = edge_op(layout, error, edge).apply(fiducial_state(layout).amplitudes)
    gens = d4_stabilizers(layout, include_derived=True)
    values, eigen = {}, True
    for g in gens:
        out = g.op.apply(psi)
        lam = complex(np.vdot(psi, out))
        values[g.name] = lam
        if np.max(np.abs(out - lam * psi)) > ATOL:
            eigen = False
    abelian, violated, anyon = classify(values, gens)
    return SyndromeVector(error, layout.edges[edge].name, values, abelian, eigen, violated, anyon)


def anyon_for_label(label: str) -> Anyon | None:
    """Center anyon for a ``(flux,charge)`` label, None for non-abelian defects."""
    if label == "Non-Abelian":
        return None
    from .center import parse_pair_label

    flux, charge = label.strip("()").split(",")
    g = "id" if flux == "1" else flux.strip("[]")
    return parse_pair_label(f"([{g}],{charge})", center("D4"))


def syndrome_table(layout: PatchLayout | None = None, edge: int | None = None) -> list[SyndromeVector]:
    layout = layout or minimal_syndrome_patch()
    return [syndrome_of_error(layout, e, edge) for e in ERRORS]


def syndrome_csv(rows: list[SyndromeVector]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["error", "edge", "syndrome", "anyon"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.row())
    return buf.getvalue()


# error -> (violated generator kinds, anyon) as listed in the error table
EXPECTED_TABLE: dict[str, tuple[tuple[str, ...], str]] = {
    "Z": (("A^(s)",), "(1,1_r)"),
    "Z4^2": (("A^(r)",), "(1,1_s)"),
    "X4^2": (("S^(r)",), "([r^2],1)"),
    "Z4": (("A^(r^2)",), "Non-Abelian"),
    "Z4^3": (("A^(r^2)",), "Non-Abelian"),
    "X4": (("S^(r^2)",), "Non-Abelian"),
    "X4^3": (("S^(r^2)",), "Non-Abelian"),
    "X": (("S^(s)",), "Non-Abelian"),
}


def check_table(rows: list[SyndromeVector]) -> list[tuple[str, bool, str]]:
    out = []
    for r in rows:
        kinds, anyon = EXPECTED_TABLE[r.error]
        ok = tuple(r.violated) == kinds and r.anyon == anyon
        if r.abelian_sector:
            ok = ok and r.eigenstate
        detail = "" if ok else f"got {r.violated} / {r.anyon}, expected {list(kinds)} / {anyon}"
        out.append((r.error, ok, detail))
    return out


__all__ = [
    "ERRORS",
    "EXPECTED_TABLE",
    "CommutatorReport",
    "StabilizerGenerator",
    "SyndromeError",
    "SyndromeVector",
    "anyon_for_label",
    "check_table",
    "classify",
    "commutator_relations",
    "d4_stabilizers",
    "edge_op",
    "minimal_syndrome_patch",
    "plaquette_generator",
    "star_generator",
    "syndrome_csv",
    "syndrome_of_error",
    "syndrome_table",
]
