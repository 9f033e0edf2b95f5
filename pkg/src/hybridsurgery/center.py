"""Anyon data of the quantum double D(G) and checks on condensable algebras.

An anyon is a pair (conjugacy class, irrep of the centralizer of the class
representative).  The representative is the smallest-index member of the
class.  Spins are chi_R(g)/d_R; the S-matrix is the usual double sum over
commuting pairs.

Folded objects live in Z(G) x Z(G').  A barred anyon of the second factor
has its charge conjugated and its flux kept, after which everything is
checked in the ordinary product theory.

Label grammar (ASCII, one algebra per line in fixture files)::

    sum    := term ("(+)" term)*
    term   := [INT ["*"]] factor* ["(" sum ")" factor*] ["|" factor*]
    factor := "[" word "]" [sub] | irrep | atom | "1"
    sub    := "_" chars | "_{" chars "}"     e.g. _i  _-1  _+-  _w  _w2
    atom   := ("e" | "m") ["_" ("L" | "R")] ["^" INT] ["bar"]

Factors before ``|`` belong to G and after it to G'.  Without ``|``,
barred atoms go to G' and everything else to G.  ``E(ebar (+) e^3bar)``
distributes.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .groups import (
    FiniteGroup,
    GroupError,
    Irrep,
    Subgroup,
    build_group,
    centralizer,
    conjugacy_classes,
    subgroup_irreps,
)


class CenterError(ValueError):
    pass


class LabelError(CenterError):
    def __init__(self, msg: str, text: str = "", pos: int | None = None):
        where = f" at position {pos} in {text!r}" if pos is not None else ""
        super().__init__(msg + where)
        self.text, self.pos = text, pos


_ROOTS = {"+": 1, "+1": 1, "1": 1, "-": -1, "-1": -1, "i": 1j, "-i": -1j,
          "w": np.exp(2j * np.pi / 3), "w2": np.exp(-2j * np.pi / 3), "w^2": np.exp(-2j * np.pi / 3)}


def _root_text(z: complex) -> str:
    for txt in ("+", "-", "i", "-i", "w", "w2"):
        if abs(z - _ROOTS[txt]) < 1e-9:
            return txt
    return f"{np.angle(z) / (2 * np.pi):.6g}"


@dataclass(frozen=True)
class Anyon:
    group: FiniteGroup = field(repr=False, compare=False)
    index: int
    cls: int
    irrep: int
    rep: int
    name: str
    qdim: int
    spin: complex

    def __str__(self) -> str:
        return self.name


class Center:
    """Anyons of D(G) with their S and T matrices."""

    def __init__(self, G: FiniteGroup):
        self.group = G
        self.classes = conjugacy_classes(G)
        self._cent: list[Subgroup] = []
        self._irreps: list[list[Irrep]] = []
        self._gens: list[list[int]] = []
        out = []
        for c, members in enumerate(self.classes):
            rep = members[0]
            C = centralizer(G, rep)
            reps = subgroup_irreps(C, rep)
            self._cent.append(C)
            self._irreps.append(reps)
            self._gens.append(_greedy_gens(C, rep))
            for k, R in enumerate(reps):
                spin = R.chi(rep) / R.dim
                name = self._name(c, k)
                out.append(Anyon(G, len(out), c, k, rep, name, len(members) * R.dim, complex(spin)))
        self.anyons: list[Anyon] = out
        self._by_key = {(a.cls, a.irrep): a for a in out}

    def __len__(self) -> int:
        return len(self.anyons)

    def __iter__(self):
        return iter(self.anyons)

    @property
    def vacuum(self) -> Anyon:
        return self.anyons[0]

    def anyon(self, cls: int, irrep: int) -> Anyon:
        return self._by_key[(cls, irrep)]

    def centralizer_irreps(self, cls: int) -> list[Irrep]:
        return self._irreps[cls]

    def class_of(self, g: int) -> int:
        for c, members in enumerate(self.classes):
            if g in members:
                return c
        raise CenterError(f"element {g} not in any class")

    # ---------------------------------------------------------------- naming

    def _name(self, c: int, k: int) -> str:
        G = self.group
        R = self._irreps[c][k]
        if G.is_abelian:
            return _abelian_name(G, self.classes[c][0], R)
        rep = self.classes[c][0]
        cls = "" if c == 0 else f"[{G.label(rep)}]"
        if self._cent[c].is_whole:
            if R.name == "1":
                return cls or "1"
            return cls + R.name
        vals = [R.chi(g) for g in self._gens[c]]
        if all(abs(v - 1) < 1e-9 for v in vals):
            return cls
        return cls + "_" + "".join(_root_text(v) for v in vals)

    def by_name(self, name: str) -> Anyon:
        return parse_anyon_label(name, self)

    # ---------------------------------------------------------------- modular data

    @cached_property
    def T(self) -> np.ndarray:
        return np.diag([a.spin for a in self.anyons])

    @cached_property
    def S(self) -> np.ndarray:
        """S_ab = 1/|G| sum over commuting g in [a], h in [b] of
        conj(chi_a(x_g^-1 h x_g)) conj(chi_b(x_h^-1 g x_h))."""
        G = self.group
        n = G.order
        # x with x rep x^-1 = g, for each class member
        transport = {}
        for members in self.classes:
            rep = members[0]
            for x in range(n):
                g = G.conj(x, rep)
                transport.setdefault(g, x)
        N = len(self.anyons)
        S = np.zeros((N, N), dtype=complex)
        for a in self.anyons:
            Ra = self._irreps[a.cls][a.irrep]
            for b in self.anyons:
                Rb = self._irreps[b.cls][b.irrep]
                tot = 0j
                for g in self.classes[a.cls]:
                    xg = transport[g]
                    for h in self.classes[b.cls]:
                        if G.mul(g, h) != G.mul(h, g):
                            continue
                        xh = transport[h]
                        u = G.prod(G.inv(xg), h, xg)
                        v = G.prod(G.inv(xh), g, xh)
                        tot += np.conj(Ra.chi(u)) * np.conj(Rb.chi(v))
                S[a.index, b.index] = tot / n
        return S

    def fusion(self, a: int, b: int, c: int) -> complex:
        """Verlinde multiplicity N_ab^c."""
        S = self.S
        return complex(np.sum(S[a] * S[b] * np.conj(S[c]) / S[0]))

    def total_dimension_squared(self) -> int:
        return int(round(sum(a.qdim ** 2 for a in self.anyons)))


def _greedy_gens(H: Subgroup, first: int) -> list[int]:
    G = H.parent
    gens: list[int] = []
    span = {0}
    for g in ([first] if first else []) + list(H.members):
        if g not in span:
            gens.append(g)
            span = set(G.subgroup(gens).members)
    return gens


def _abelian_name(G: FiniteGroup, flux: int, R: Irrep) -> str:
    """e^a m^b words; product factors carry _L/_R."""
    parts = []
    if G.family == "cyclic":
        n = G.order
        k = int(round(np.angle(R.chi(1)) / (2 * np.pi) * n)) % n
        parts += _pow_atoms("e", "", k)
        parts += _pow_atoms("m", "", flux)
    elif G.family == "product" and all(F.family == "cyclic" for F in G.factors):
        for side, F in zip("LR", G.factors):
            gen = G.pair(1, 0) if side == "L" else G.pair(0, 1)
            k = int(round(np.angle(R.chi(gen)) / (2 * np.pi) * F.order)) % F.order
            parts += _pow_atoms("e", "_" + side, k)
        for i, side in enumerate("LR"):
            parts += _pow_atoms("m", "_" + side, G.component(flux, i))
    else:
        return f"[{G.label(flux)}]{R.name}"
    return " ".join(parts) or "1"


def _pow_atoms(sym: str, sub: str, k: int) -> list[str]:
    if k == 0:
        return []
    return [f"{sym}{sub}" + (f"^{k}" if k > 1 else "")]


_CENTERS: dict[int, tuple[FiniteGroup, Center]] = {}


def center(G: FiniteGroup | str) -> Center:
    if isinstance(G, str):
        G = build_group(G)
    hit = _CENTERS.get(id(G))
    if hit is None or hit[0] is not G:
        hit = (G, Center(G))
        _CENTERS[id(G)] = hit
    return hit[1]


def anyons(G: FiniteGroup | str) -> list[Anyon]:
    return list(center(G).anyons)


def s_matrix(G: FiniteGroup | str) -> np.ndarray:
    return center(G).S


def t_matrix(G: FiniteGroup | str) -> np.ndarray:
    return center(G).T


# ---------------------------------------------------------------- algebra objects


@dataclass
class AlgebraObject:
    """A formal sum of anyons (or folded pairs) with multiplicities.

    Each key is a tuple of anyon indices, one per factor theory.
    """

    centers: tuple[Center, ...]
    terms: dict[tuple[int, ...], int]
    label: str = ""
    # Extra interface datum carried alongside (K, N, phi); stored, never used.
    epsilon: object = None

    @property
    def folded(self) -> bool:
        return len(self.centers) == 2

    def qdim(self, key: tuple[int, ...]) -> int:
        return int(np.prod([c.anyons[i].qdim for c, i in zip(self.centers, key)]))

    def spin(self, key: tuple[int, ...]) -> complex:
        return complex(np.prod([c.anyons[i].spin for c, i in zip(self.centers, key)]))

    @property
    def total_dimension(self) -> int:
        return sum(m * self.qdim(k) for k, m in self.terms.items())

    @property
    def ambient_order(self) -> int:
        return int(np.prod([c.group.order for c in self.centers]))

    def name(self, key: tuple[int, ...]) -> str:
        parts = [c.anyons[i].name for c, i in zip(self.centers, key)]
        if self.folded:
            return f"{parts[0]} | {parts[1]}"
        return parts[0]

    def __str__(self) -> str:
        out = []
        for k, m in self.terms.items():
            out.append((f"{m}*" if m > 1 else "") + self.name(k))
        return " (+) ".join(out)


def rough_lagrangian(G: FiniteGroup | str) -> AlgebraObject:
    """Condenses every pure charge (id, R) with multiplicity dim R."""
    Z = center(G)
    terms = {(a.index,): Z.centralizer_irreps(0)[a.irrep].dim for a in Z.anyons if a.cls == 0}
    return AlgebraObject((Z,), terms, "rough")


def smooth_lagrangian(G: FiniteGroup | str) -> AlgebraObject:
    """Condenses every pure flux ([g], 1)."""
    Z = center(G)
    terms = {(Z.anyon(c, 0).index,): 1 for c in range(len(Z.classes))}
    return AlgebraObject((Z,), terms, "smooth")


# ---------------------------------------------------------------- checks


@dataclass
class CondensabilityReport:
    total_dimension: int
    ambient_order: int
    spins_trivial: bool
    monodromy_trivial: bool
    integer_dimension: bool
    contains_vacuum: bool
    lagrangian: bool
    failures: list[str] = field(default_factory=list)

    @property
    def condensable(self) -> bool:
        return self.spins_trivial and self.monodromy_trivial and self.integer_dimension and self.contains_vacuum

    @property
    def ok(self) -> bool:
        return self.condensable

    def to_json(self) -> dict:
        return {
            "total_dimension": self.total_dimension,
            "ambient_order": self.ambient_order,
            "spins_trivial": self.spins_trivial,
            "monodromy_trivial": self.monodromy_trivial,
            "integer_dimension": self.integer_dimension,
            "contains_vacuum": self.contains_vacuum,
            "lagrangian": self.lagrangian,
            "condensable": self.condensable,
            "failures": list(self.failures),
        }


def _monodromy_ok(A: AlgebraObject, ka, kb, atol: float) -> bool:
    # S_ab S_00 = S_0a S_0b in the product theory
    lhs, rhs = 1 + 0j, 1 + 0j
    for Z, i, j in zip(A.centers, ka, kb):
        S = Z.S
        lhs *= S[i, j] * S[0, 0]
        rhs *= S[0, i] * S[0, j]
    return abs(lhs - rhs) < atol * abs(rhs)


def multiplicity_vector(A: AlgebraObject) -> np.ndarray:
    n = np.zeros([len(Z) for Z in A.centers])
    for k, m in A.terms.items():
        n[k] = m
    return n.reshape(-1)


def product_s_matrix(A: AlgebraObject) -> np.ndarray:
    S = np.ones((1, 1), dtype=complex)
    for Z in A.centers:
        S = np.kron(S, Z.S)
    return S


def check_condensable(A: AlgebraObject, atol: float = 1e-9) -> CondensabilityReport:
    """Spin, braiding and dimension checks.

    Two condensed non-abelian anyons can braid nontrivially in some fusion
    channels, so pairwise monodromy is only demanded of proper algebras.  A
    Lagrangian object is instead required to be S-invariant, S n = n, which
    is the braiding condition for a full condensate.
    """
    fails = []
    spins = True
    for k in A.terms:
        if abs(A.spin(k) - 1) > atol:
            spins = False
            fails.append(f"spin of {A.name(k)} is {_fmt(A.spin(k))}")
    dim = A.total_dimension
    lagrangian = dim == A.ambient_order
    mono = True
    if lagrangian:
        n = multiplicity_vector(A)
        gap = float(np.max(np.abs(product_s_matrix(A) @ n - n)))
        if gap > atol:
            mono = False
            fails.append(f"not S-invariant (max deviation {gap:.3g})")
    else:
        for ka, kb in itertools.combinations_with_replacement(list(A.terms), 2):
            if not _monodromy_ok(A, ka, kb, atol):
                mono = False
                fails.append(f"nontrivial monodromy between {A.name(ka)} and {A.name(kb)}")
    vac = tuple(0 for _ in A.centers) in A.terms
    if not vac:
        fails.append("vacuum missing")
    return CondensabilityReport(
        total_dimension=dim,
        ambient_order=A.ambient_order,
        spins_trivial=spins,
        monodromy_trivial=mono,
        integer_dimension=float(dim).is_integer() and dim > 0,
        contains_vacuum=vac,
        lagrangian=lagrangian,
        failures=fails,
    )


@dataclass
class FoldedReport:
    condensability: CondensabilityReport
    contains_unfolded: bool | None
    failures: list[str]

    @property
    def ok(self) -> bool:
        c = self.condensability
        return c.condensable and c.lagrangian and self.contains_unfolded is not False

    def first_failure(self) -> str | None:
        return self.failures[0] if self.failures else None

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "contains_unfolded": self.contains_unfolded,
            **self.condensability.to_json(),
            "failures": list(self.failures),
        }


def verify_folded_lagrangian(listed: AlgebraObject, unfolded: AlgebraObject | None = None,
                             atol: float = 1e-9) -> FoldedReport:
    """Dimension, spin, monodromy and A (x) 1 containment for a folded object."""
    if not listed.folded:
        raise CenterError("verify_folded_lagrangian needs a folded object")
    rep = check_condensable(listed, atol)
    fails = list(rep.failures)
    if not rep.lagrangian:
        fails.append(f"total dimension {rep.total_dimension} != {rep.ambient_order}")
    contains = None
    if unfolded is not None:
        contains = True
        for (i,), m in unfolded.terms.items():
            got = listed.terms.get((i, 0), 0)
            if got < m:
                contains = False
                fails.append(f"{unfolded.centers[0].anyons[i].name} (x) 1 missing")
    return FoldedReport(rep, contains, fails)


def _fmt(z: complex) -> str:
    z = complex(z)
    if abs(z.imag) < 1e-12:
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{z.imag:+.6g}i"


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<plus>\(\+\)|\\oplus)
  | (?P<lpar>\()
  | (?P<rpar>\))
  | (?P<bar>\|)
  | (?P<star>\*)
  | (?P<cls>\[(?P<word>[^\]]+)\](?:_\{(?P<csub1>[^}]*)\}|_(?P<csub2>[-+]?[-+iw0-9^,]*))?)
  | (?P<atom>(?P<sym>[em])(?:_\{?(?P<side>[LR12])\}?)?(?:\^\{?(?P<pow>-?\d+)\}?)?(?P<abar>bar)?)
  | (?P<irrep>(?:1|E|P)(?:_\{(?P<isub1>[^}]*)\}|_(?P<isub2>[A-Za-z0-9]+))?)
  | (?P<int>\d+)
    """,
    re.VERBOSE,
)


@dataclass
class _Factor:
    kind: str  # "cls", "atom", "irrep"
    pos: int
    word: str = ""
    sub: str | None = None
    sym: str = ""
    side: str | None = None
    power: int = 1
    barred: bool = False


def _tokenize(text: str) -> list[tuple[str, object, int]]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise LabelError("unexpected character", text, pos)
        kind = m.lastgroup
        # lastgroup names the innermost group; find the outer alternative
        for k in ("ws", "plus", "lpar", "rpar", "bar", "star", "cls", "atom", "irrep", "int"):
            if m.group(k) is not None:
                kind = k
                break
        if kind == "cls":
            sub = m.group("csub1") if m.group("csub1") is not None else m.group("csub2")
            out.append(("f", _Factor("cls", pos, word=m.group("word").strip(), sub=sub), pos))
        elif kind == "atom":
            side = m.group("side")
            side = {"1": "L", "2": "R"}.get(side, side)
            out.append(("f", _Factor("atom", pos, sym=m.group("sym"), side=side,
                                     power=int(m.group("pow") or 1), barred=bool(m.group("abar"))), pos))
        elif kind == "irrep":
            whole = m.group("irrep")
            base = whole.split("_")[0]
            sub = m.group("isub1") if m.group("isub1") is not None else m.group("isub2")
            out.append(("f", _Factor("irrep", pos, word=base, sub=sub), pos))
        elif kind == "int":
            out.append(("int", int(m.group("int")), pos))
        elif kind != "ws":
            out.append((kind, m.group(0), pos))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None, len(self.text))

    def take(self, kind):
        t = self.peek()
        if t[0] != kind:
            raise LabelError(f"expected {kind}", self.text, t[2])
        self.i += 1
        return t

    def parse(self) -> list[tuple[int, list[_Factor], list[_Factor] | None]]:
        out = self.sum()
        if self.peek()[0] is not None:
            raise LabelError("trailing input", self.text, self.peek()[2])
        return out

    # each term: (multiplicity, G factors, G' factors or None when unsplit)
    def sum(self):
        terms = self.term()
        while self.peek()[0] == "plus":
            self.i += 1
            terms += self.term()
        return terms

    def term(self):
        # "1" always lexes as the vacuum, so a leading integer is a multiplicity
        mult = 1
        if self.peek()[0] == "int":
            mult = self.take("int")[1]
            if self.peek()[0] == "star":
                self.i += 1
        prefix = self.factors()
        if self.peek()[0] == "lpar":
            self.i += 1
            inner = self.sum()
            self.take("rpar")
            suffix = self.factors()
            out = []
            for m, left, right in inner:
                if right is not None:
                    raise LabelError("'|' inside parentheses", self.text, self.peek()[2])
                out.append((mult * m, prefix + left + suffix, None))
        else:
            if not prefix:
                raise LabelError("empty term", self.text, self.peek()[2])
            out = [(mult, prefix, None)]
        if self.peek()[0] == "bar":
            self.i += 1
            right = self.factors()
            out = [(m, left, right) for m, left, _ in out]
        return out

    def factors(self) -> list[_Factor]:
        fs = []
        while True:
            t = self.peek()
            if t[0] == "f":
                fs.append(t[1])
                self.i += 1
            else:
                return fs


def _sub_values(sub: str, text: str, pos: int) -> list[complex]:
    sub = sub.replace(",", "").replace("\\omega", "w").replace("omega", "w").replace("{", "").replace("}", "")
    vals = []
    j = 0
    while j < len(sub):
        for tok in ("-1", "+1", "-i", "w^2", "w2", "w", "i", "+", "-"):
            if sub.startswith(tok, j):
                vals.append(_ROOTS[tok])
                j += len(tok)
                break
        else:
            raise LabelError(f"unknown irrep subscript {sub!r}", text, pos)
    return vals


def _build(Z: Center, fs: list[_Factor], text: str, conj: bool = False) -> Anyon:
    """Resolve the factors of one theory into an anyon."""
    G = Z.group
    flux = 0
    sub = None
    irrep_name = None
    charge: dict[int, complex] | None = None  # character on the whole group, abelian case
    pos = fs[0].pos if fs else 0
    for f in fs:
        if f.kind == "cls":
            try:
                flux = G.element(f.word)
            except GroupError as exc:
                raise LabelError(f"unknown class [{f.word}] for {G.name}", text, f.pos) from exc
            sub = f.sub
        elif f.kind == "irrep":
            if f.word == "1" and f.sub is None:
                continue
            irrep_name = f.word + (f"_{f.sub}" if f.sub else "")
        else:
            gen = _atom_generator(G, f, text)
            if f.sym == "m":
                flux = G.mul(flux, G.power(gen, f.power))
            else:
                if not G.is_abelian:
                    raise LabelError(f"charge atom on non-abelian {G.name}", text, f.pos)
                k = -f.power if (f.barred and conj) else f.power
                charge = charge or {g: 1 + 0j for g in range(G.order)}
                chi = _atom_character(G, f.side, k)
                charge = {g: charge[g] * chi[g] for g in range(G.order)}
    c = Z.class_of(flux)
    reps = Z.centralizer_irreps(c)
    C = Z._cent[c]
    if charge is not None:
        if irrep_name or sub:
            raise LabelError("mixed charge atoms and irrep names", text, pos)
        for k, R in enumerate(reps):
            if all(abs(R.chi(g) - charge[g]) < 1e-9 for g in C.members):
                return Z.anyon(c, k)
        raise LabelError("charge does not restrict to a centralizer irrep", text, pos)
    if irrep_name is not None:
        if not C.is_whole:
            raise LabelError(f"irrep {irrep_name} needs a central class", text, pos)
        for k, R in enumerate(reps):
            if R.name == irrep_name or R.name.replace("_", "") == irrep_name.replace("_", "").replace("{", "").replace("}", ""):
                R = reps[k]
                if conj and R.dim == 1:
                    return _conj_anyon(Z, Z.anyon(c, k))
                return Z.anyon(c, k)
        raise LabelError(f"unknown irrep {irrep_name!r} for {G.name}", text, pos)
    if sub:
        vals = _sub_values(sub, text, pos)
        gens = Z._gens[c]
        if len(vals) != len(gens):
            raise LabelError(f"subscript {sub!r} needs {len(gens)} value(s)", text, pos)
        for k, R in enumerate(reps):
            if R.dim == 1 and all(abs(R.chi(g) - v) < 1e-9 for g, v in zip(gens, vals)):
                a = Z.anyon(c, k)
                return _conj_anyon(Z, a) if conj else a
        raise LabelError(f"no centralizer character matches {sub!r}", text, pos)
    return Z.anyon(c, 0)


def _conj_anyon(Z: Center, a: Anyon) -> Anyon:
    """Same flux, complex-conjugate charge."""
    R = Z.centralizer_irreps(a.cls)[a.irrep]
    C = Z._cent[a.cls]
    for k, Rp in enumerate(Z.centralizer_irreps(a.cls)):
        if all(abs(Rp.chi(g) - np.conj(R.chi(g))) < 1e-9 for g in C.members):
            return Z.anyon(a.cls, k)
    raise CenterError("conjugate charge not found")


def _atom_generator(G: FiniteGroup, f: _Factor, text: str) -> int:
    if G.family == "cyclic":
        return 1
    if G.family == "product":
        if f.side is None:
            raise LabelError(f"atom {f.sym} needs _L or _R on {G.name}", text, f.pos)
        return G.pair(1, 0) if f.side == "L" else G.pair(0, 1)
    raise LabelError(f"e/m atoms need an abelian group, not {G.name}", text, f.pos)


def _atom_character(G: FiniteGroup, side: str | None, k: int) -> dict[int, complex]:
    if G.family == "cyclic":
        n = G.order
        return {g: np.exp(2j * np.pi * k * g / n) for g in range(n)}
    i = 0 if side == "L" else 1
    n = G.factors[i].order
    return {g: np.exp(2j * np.pi * k * G.component(g, i) / n) for g in range(G.order)}


def parse_algebra(text: str, G: FiniteGroup | str, Gp: FiniteGroup | str | None = None,
                  label: str = "") -> AlgebraObject:
    """Parse a sum of anyons in Z(G), or of folded pairs when ``Gp`` is given."""
    ZG = center(G)
    ZP = center(Gp) if Gp is not None else None
    terms: dict[tuple[int, ...], int] = {}
    for mult, left, right in _Parser(text).parse():
        if ZP is None:
            if right is not None or any(f.kind == "atom" and f.barred for f in left):
                raise LabelError("folded term in an unfolded algebra", text, left[0].pos if left else 0)
            key = (_build(ZG, left, text).index,)
        else:
            if right is None:
                right = [f for f in left if f.kind == "atom" and f.barred]
                left = [f for f in left if not (f.kind == "atom" and f.barred)]
            key = (_build(ZG, left, text).index, _build(ZP, right, text, conj=True).index)
        terms[key] = terms.get(key, 0) + mult
    return AlgebraObject((ZG,) if ZP is None else (ZG, ZP), terms, label)


def parse_anyon_label(text: str, Z: Center | FiniteGroup | str, Zp: Center | FiniteGroup | str | None = None):
    """A single anyon, or a folded pair (a, b) when a second theory is given."""
    ZG = Z if isinstance(Z, Center) else center(Z)
    ZP = None if Zp is None else (Zp if isinstance(Zp, Center) else center(Zp))
    A = parse_algebra(text, ZG.group, None if ZP is None else ZP.group)
    if len(A.terms) != 1 or next(iter(A.terms.values())) != 1:
        raise LabelError("expected a single anyon", text, 0)
    key = next(iter(A.terms))
    if ZP is None:
        return ZG.anyons[key[0]]
    return ZG.anyons[key[0]], ZP.anyons[key[1]]


_PAIR = re.compile(r"^\(\s*\[([^\]]+)\]\s*,\s*(.+?)\s*\)$")


def parse_pair_label(text: str, Z: Center | FiniteGroup | str) -> Anyon:
    """Parse the ``([g], R)`` form, e.g. ``([r],i)``, ``([s],+,-)``, ``([r^2],E)``.

    R is an irrep name when the centralizer is the whole group, otherwise
    the character values on the centralizer generators.
    """
    ZG = Z if isinstance(Z, Center) else center(Z)
    m = _PAIR.match(text.strip())
    if not m:
        raise LabelError("expected ([g], R)", text, 0)
    g_txt, r_txt = m.group(1).strip(), m.group(2).replace(" ", "")
    G = ZG.group
    try:
        g = G.element(g_txt)
    except Exception:
        raise LabelError(f"unknown group element {g_txt!r}", text, 1) from None
    c = ZG.class_of(g)
    flux = "" if c == 0 else f"[{G.label(ZG.classes[c][0])}]"
    vals = r_txt.split(",")
    if r_txt == "1":
        name = flux or "1"
    elif ZG._cent[c].is_whole:
        name = flux + r_txt
    else:
        name = flux + "_" + "".join(v if v not in ("1", "+1") else "+" for v in vals)
    return parse_anyon_label(name, ZG)


@dataclass
class AnyonRowResult:
    line: int
    label: str
    ok: bool
    detail: str = ""


def verify_anyon_rows(lines, Z: Center | FiniteGroup | str) -> list[AnyonRowResult]:
    """Check ``label ; colour ; dim ; T`` rows against the computed anyons."""
    ZG = Z if isinstance(Z, Center) else center(Z)
    out = []
    for no, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(";")]
        if len(parts) != 4:
            raise LabelError(f"line {no}: expected 4 fields, got {len(parts)}", line, 0)
        label, _colour, dim, spin = parts
        try:
            a = parse_pair_label(label, ZG)
        except LabelError as exc:
            out.append(AnyonRowResult(no, label, False, str(exc)))
            continue
        want_spin = _ROOTS.get(spin)
        if want_spin is None:
            raise LabelError(f"line {no}: bad spin {spin!r}", line, 0)
        problems = []
        if a.qdim != int(dim):
            problems.append(f"dim {a.qdim} != {dim}")
        if abs(a.spin - want_spin) > 1e-9:
            problems.append(f"spin {_root_text(a.spin)} != {spin}")
        out.append(AnyonRowResult(no, label, not problems, "; ".join(problems)))
    return out
