"""Finite groups given by multiplication tables.

Supported families are cyclic groups ``Z<n>``, dihedral groups ``D<k>`` of
order ``2k``, ``S3`` and binary direct products ``A x B``.  ``D4`` is the
symmetry group of the square (order 8); ``D<k>`` always means order ``2k``.

Elements are integers in ``[0, |G|)`` and 0 is the identity.  Dihedral
elements ``r^a s^b`` sit at index ``b*k + a``.  Product elements ``(a, b)``
sit at ``a*|B| + b`` and are labelled ``"a|b"``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DEFAULT_ORDER_CAP = 128
ATOL = 1e-10


class GroupError(ValueError):
    """Raised for malformed descriptors, labels or group data."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    """A finite group stored as a Cayley table.

    ``family`` is one of ``"cyclic"``, ``"dihedral"``, ``"symmetric"`` or
    ``"product"``; ``param`` is n, k or 3, and ``factors`` holds the two
    factors of a product.
    """

    name: str
    mul_table: np.ndarray
    inv_table: np.ndarray
    labels: tuple[str, ...]
    family: str
    param: int = 0
    factors: tuple["FiniteGroup", ...] = ()
    generator_symbol: str = "m"

    @property
    def order(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return self.order

    def __repr__(self) -> str:
        return f"FiniteGroup({self.name}, order={self.order})"

    def mul(self, a: int, b: int) -> int:
        return int(self.mul_table[a, b])

    def prod(self, *elems: int) -> int:
        out = 0
        for e in elems:
            out = int(self.mul_table[out, e])
        return out

    def inv(self, a: int) -> int:
        return int(self.inv_table[a])

    def conj(self, x: int, g: int) -> int:
        """Return x g x^-1."""
        return self.prod(x, g, self.inv(x))

    def power(self, g: int, n: int) -> int:
        if n < 0:
            g, n = self.inv(g), -n
        out = 0
        for _ in range(n):
            out = self.mul(out, g)
        return out

    def element_order(self, g: int) -> int:
        k, x = 1, g
        while x != 0:
            x = self.mul(x, g)
            k += 1
        return k

    @cached_property
    def is_abelian(self) -> bool:
        return bool(np.array_equal(self.mul_table, self.mul_table.T))

    def label(self, g: int) -> str:
        return self.labels[g]

    def element(self, label: str | int) -> int:
        """Parse an element label (see module docstring) into an index."""
        if isinstance(label, (int, np.integer)):
            if not 0 <= int(label) < self.order:
                raise GroupError(f"element index {label} out of range for {self.name}")
            return int(label)
        return _parse_element(self, label)

    def pair(self, a: int, b: int) -> int:
        """Index of (a, b) in a product group."""
        if self.family != "product":
            raise GroupError(f"{self.name} is not a product group")
        return a * self.factors[1].order + b

    def component(self, g: int, i: int) -> int:
        """The i-th factor of a product element."""
        if self.family != "product":
            raise GroupError(f"{self.name} is not a product group")
        n1 = self.factors[1].order
        return g // n1 if i == 0 else g % n1

    def subgroup(self, generators) -> "Subgroup":
        """Subgroup generated by elements (indices or labels)."""
        gens = [self.element(g) for g in generators]
        members = {0}
        frontier = [0]
        while frontier:
            x = frontier.pop()
            for g in gens:
                y = self.mul(x, g)
                if y not in members:
                    members.add(y)
                    frontier.append(y)
        return Subgroup(self, tuple(sorted(members)))

    @cached_property
    def whole(self) -> "Subgroup":
        return Subgroup(self, tuple(range(self.order)))

    @cached_property
    def trivial(self) -> "Subgroup":
        return Subgroup(self, (0,))

    def check_axioms(self) -> None:
        """Exhaustive associativity, identity and inverse checks."""
        m = self.mul_table
        n = self.order
        if m.shape != (n, n) or m.min() < 0 or m.max() >= n:
            raise GroupError(f"{self.name}: malformed table")
        if not (np.array_equal(m[0], np.arange(n)) and np.array_equal(m[:, 0], np.arange(n))):
            raise GroupError(f"{self.name}: element 0 is not the identity")
        for row in m:
            if len(set(row.tolist())) != n:
                raise GroupError(f"{self.name}: table is not a Latin square")
        if not np.all(m[np.arange(n), self.inv_table] == 0):
            raise GroupError(f"{self.name}: inverse table inconsistent")
        # (ab)c == a(bc) for all triples, vectorised over a and b
        left = m[m][:, :, None]  # placeholder shape trick below
        ab = m  # ab[a, b]
        lhs = m[ab]  # lhs[a, b, c] = (ab)c
        rhs = m[np.arange(n)[:, None, None], m[None, :, :]]  # a(bc)
        del left
        if not np.array_equal(lhs, rhs):
            a, b, c = np.argwhere(lhs != rhs)[0]
            raise GroupError(f"{self.name}: associativity fails at {a},{b},{c}")


@dataclass(frozen=True)
class Subgroup:
    parent: FiniteGroup
    members: tuple[int, ...]

    def __post_init__(self):
        ms = self.members
        if 0 not in ms:
            raise GroupError("subgroup must contain the identity")
        s = set(ms)
        G = self.parent
        for a in ms:
            if G.inv(a) not in s:
                raise GroupError("subgroup not closed under inverses")
            for b in ms:
                if G.mul(a, b) not in s:
                    raise GroupError("subgroup not closed under multiplication")

    @property
    def order(self) -> int:
        return len(self.members)

    def __contains__(self, g: int) -> bool:
        return g in self._set

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    @cached_property
    def _set(self) -> frozenset:
        return frozenset(self.members)

    @cached_property
    def position(self) -> dict[int, int]:
        return {g: i for i, g in enumerate(self.members)}

    @cached_property
    def is_abelian(self) -> bool:
        G = self.parent
        return all(G.mul(a, b) == G.mul(b, a) for a in self.members for b in self.members)

    def is_normal_in(self, other: "Subgroup") -> bool:
        G = self.parent
        return all(G.conj(x, n) in self for x in other.members for n in self.members)

    @property
    def is_whole(self) -> bool:
        return self.order == self.parent.order

    def labels(self) -> list[str]:
        return [self.parent.label(g) for g in self.members]


# ---------------------------------------------------------------- families


def _cyclic(n: int, symbol: str = "m") -> FiniteGroup:
    a = np.arange(n)
    mul = (a[:, None] + a[None, :]) % n
    inv = (-a) % n
    labels = tuple("id" if j == 0 else (symbol if j == 1 else f"{symbol}^{j}") for j in range(n))
    return FiniteGroup(f"Z{n}", _readonly(mul), _readonly(inv), labels, "cyclic", n, generator_symbol=symbol)


def _dihedral_label(a: int, b: int) -> str:
    if a == 0 and b == 0:
        return "id"
    r = "" if a == 0 else ("r" if a == 1 else f"r^{a}")
    return r + ("s" if b else "")


def _dihedral(k: int, name: str | None = None, family: str = "dihedral") -> FiniteGroup:
    n = 2 * k
    mul = np.empty((n, n), dtype=np.int64)
    inv = np.empty(n, dtype=np.int64)
    for b1, a1, b2, a2 in itertools.product(range(2), range(k), range(2), range(k)):
        # r^a1 s^b1 r^a2 s^b2 = r^(a1 + (-1)^b1 a2) s^(b1+b2)
        a = (a1 + (a2 if b1 == 0 else -a2)) % k
        mul[b1 * k + a1, b2 * k + a2] = ((b1 + b2) % 2) * k + a
    for b, a in itertools.product(range(2), range(k)):
        inv[b * k + a] = b * k + ((-a) % k if b == 0 else a)
    labels = tuple(_dihedral_label(a, b) for b in range(2) for a in range(k))
    return FiniteGroup(name or f"D{k}", _readonly(mul), _readonly(inv), labels, family, k, generator_symbol="r")


def _product(A: FiniteGroup, B: FiniteGroup) -> FiniteGroup:
    na, nb = A.order, B.order
    ia = np.repeat(np.arange(na), nb)
    ib = np.tile(np.arange(nb), na)
    mul = A.mul_table[ia[:, None], ia[None, :]] * nb + B.mul_table[ib[:, None], ib[None, :]]
    inv = A.inv_table[ia] * nb + B.inv_table[ib]
    labels = tuple(f"{A.labels[a]}|{B.labels[b]}" for a in range(na) for b in range(nb))
    return FiniteGroup(f"{A.name} x {B.name}", _readonly(mul), _readonly(inv), labels, "product", 0, (A, B))


def direct_product(A: FiniteGroup, B: FiniteGroup, cap: int = DEFAULT_ORDER_CAP) -> FiniteGroup:
    """A x B built from existing group objects, so element indices line up
    with ``A`` and ``B`` exactly (pair index a * |B| + b)."""
    if A.order * B.order > cap:
        raise GroupError(f"group order {A.order * B.order} exceeds cap {cap}")
    return _product(A, B)


_DESCRIPTOR = re.compile(r"^\s*(Z|D|S)\s*(\d+)\s*$")


def build_group(spec, cap: int = DEFAULT_ORDER_CAP) -> FiniteGroup:
    """Build and validate a group from a descriptor.

    ``spec`` is a string such as ``"Z4"``, ``"D4"``, ``"S3"`` or
    ``"Z2 x Z2"``, or a tuple ``("cyclic", n)``, ``("dihedral", k)``,
    ``("symmetric", 3)``, ``("product", specA, specB)``.
    """
    G = _build(spec, cap)
    G.check_axioms()
    return G


def _order_of(spec) -> int:
    if isinstance(spec, str):
        parts = [p for p in re.split(r"\s+x\s+", spec.strip())]
        if len(parts) > 1:
            out = 1
            for p in parts:
                out *= _order_of(p)
            return out
        m = _DESCRIPTOR.match(spec)
        if not m:
            raise GroupError(f"bad group descriptor {spec!r}")
        kind, n = m.group(1), int(m.group(2))
        if n <= 0:
            raise GroupError(f"group parameter must be positive, got {n}")
        return {"Z": n, "D": 2 * n, "S": 6}[kind]
    kind = spec[0]
    if kind == "product":
        return _order_of(spec[1]) * _order_of(spec[2])
    n = int(spec[1])
    if n <= 0:
        raise GroupError(f"group parameter must be positive, got {n}")
    return {"cyclic": n, "dihedral": 2 * n, "symmetric": 6}[kind]


def _build(spec, cap: int) -> FiniteGroup:
    order = _order_of(spec)
    if order > cap:
        raise GroupError(f"group order {order} exceeds cap {cap}")
    if isinstance(spec, str):
        parts = re.split(r"\s+x\s+", spec.strip())
        if len(parts) > 1:
            G = _build(parts[0], cap)
            for p in parts[1:]:
                G = _product(G, _build(p, cap))
            return G
        m = _DESCRIPTOR.match(spec)
        kind, n = m.group(1), int(m.group(2))
        spec = {"Z": ("cyclic", n), "D": ("dihedral", n), "S": ("symmetric", n)}[kind]
    kind = spec[0]
    if kind == "cyclic":
        return _cyclic(int(spec[1]))
    if kind == "dihedral":
        return _dihedral(int(spec[1]))
    if kind == "symmetric":
        if int(spec[1]) != 3:
            raise GroupError("only S3 is supported among symmetric groups")
        return _dihedral(3, name="S3", family="symmetric")
    if kind == "product":
        return _product(_build(spec[1], cap), _build(spec[2], cap))
    raise GroupError(f"unknown group family {kind!r}")


# ---------------------------------------------------------------- labels

_DIHEDRAL_TOKEN = re.compile(r"r(?:\^?(-?\d+))?|s")
_CYCLIC_TOKEN = re.compile(r"([a-zA-Z]+)(?:\^(-?\d+))?(?:_([A-Za-z0-9]+))?")
_SIDE = {"L": 0, "1": 0, "R": 1, "2": 1}


def _parse_simple(G: FiniteGroup, text: str) -> int:
    t = text.replace(" ", "")
    if t in ("id", "1", "e", ""):
        return 0
    if t in G.labels:
        return G.labels.index(t)
    if G.family in ("dihedral", "symmetric"):
        k = G.param
        g, pos = 0, 0
        while pos < len(t):
            m = _DIHEDRAL_TOKEN.match(t, pos)
            if not m:
                raise GroupError(f"cannot parse {text!r} as an element of {G.name} (position {pos})")
            if m.group(0) == "s":
                g = G.mul(g, k)
            else:
                a = int(m.group(1)) if m.group(1) is not None else 1
                g = G.mul(g, a % k)
            pos = m.end()
        return g
    if G.family == "cyclic":
        n = G.param
        m = re.fullmatch(r"([a-zA-Z]+)(?:\^(-?\d+))?", t)
        if not m or m.group(1) != G.generator_symbol:
            raise GroupError(f"cannot parse {text!r} as an element of {G.name}")
        return int(m.group(2) or 1) % n
    raise GroupError(f"cannot parse {text!r} as an element of {G.name}")


def _parse_element(G: FiniteGroup, text: str) -> int:
    t = text.strip()
    if G.family != "product":
        return _parse_simple(G, t)
    A, B = G.factors
    if "|" in t:
        a, b = t.split("|", 1)
        return G.pair(_parse_element(A, a), _parse_element(B, b))
    if t in ("id", "1", "e", ""):
        return 0
    # juxtaposed factor-tagged tokens such as "m_L m_R"
    out, pos = 0, 0
    t = t.replace(" ", "")
    while pos < len(t):
        m = _CYCLIC_TOKEN.match(t, pos)
        if not m or m.group(3) not in _SIDE:
            raise GroupError(f"cannot parse {text!r} as an element of {G.name} (position {pos})")
        side = _SIDE[m.group(3)]
        core = m.group(1) + (f"^{m.group(2)}" if m.group(2) else "")
        x = _parse_element(G.factors[side], core)
        out = G.mul(out, G.pair(x, 0) if side == 0 else G.pair(0, x))
        pos = m.end()
    return out


# ---------------------------------------------------------------- structure


def conjugacy_classes(G: FiniteGroup) -> list[tuple[int, ...]]:
    """Conjugacy classes, identity class first.

    Classes are sorted by (size, smallest member); members ascend.  For D4
    this gives [id], [r^2], [r], [s], [rs].
    """
    seen: set[int] = set()
    classes = []
    for g in range(G.order):
        if g in seen:
            continue
        cls = tuple(sorted({G.conj(x, g) for x in range(G.order)}))
        seen.update(cls)
        classes.append(cls)
    classes.sort(key=lambda c: (len(c), c[0]))
    return classes


def centralizer(G: FiniteGroup, g: int) -> Subgroup:
    return Subgroup(G, tuple(h for h in range(G.order) if G.mul(h, g) == G.mul(g, h)))


@dataclass(frozen=True, eq=False)
class GroupHom:
    """A homomorphism from a subgroup K of G into G'."""

    source: Subgroup
    target: FiniteGroup
    images: dict[int, int] = field(hash=False)

    def __post_init__(self):
        K, H = self.source, self.target
        G = K.parent
        if set(self.images) != set(K.members):
            raise GroupError("homomorphism must be defined on every element of K")
        for a in K:
            for b in K:
                if self.images[G.mul(a, b)] != H.mul(self.images[a], self.images[b]):
                    raise GroupError(
                        f"p is not a homomorphism: p({G.label(a)}*{G.label(b)}) != p({G.label(a)})p({G.label(b)})"
                    )
        if not self.kernel.is_normal_in(K):
            raise GroupError("kernel of p is not normal in K")

    def __call__(self, h: int) -> int:
        return self.images[h]

    @cached_property
    def kernel(self) -> Subgroup:
        return Subgroup(self.source.parent, tuple(h for h in self.source if self.images[h] == 0))

    @classmethod
    def from_generators(cls, K: Subgroup, target: FiniteGroup, gen_images: dict) -> "GroupHom":
        """Extend generator images to all of K, failing if inconsistent."""
        G = K.parent
        gens = {G.element(k): target.element(v) for k, v in gen_images.items()}
        images = {0: 0}
        frontier = [0]
        while frontier:
            x = frontier.pop()
            for g, pg in gens.items():
                y = G.mul(x, g)
                py = target.mul(images[x], pg)
                if y in images:
                    if images[y] != py:
                        raise GroupError("generator images do not define a homomorphism")
                else:
                    images[y] = py
                    frontier.append(y)
        if set(images) != set(K.members):
            raise GroupError("generators do not generate K")
        return cls(K, target, images)

    @classmethod
    def trivial(cls, K: Subgroup, target: FiniteGroup) -> "GroupHom":
        return cls(K, target, {h: 0 for h in K})


@dataclass(frozen=True, eq=False)
class DiagonalSubgroup:
    """K^diag = {(h, p(h)) : h in K} inside G x G'.

    The product group is never materialised; pairs are held directly.
    """

    G: FiniteGroup
    Gp: FiniteGroup
    K: Subgroup
    p: GroupHom

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(h, self.p(h)) for h in self.K]

    @property
    def order(self) -> int:
        return self.K.order

    def ambient_index(self, h: int) -> int:
        return h * self.Gp.order + self.p(h)

    def members_in(self, GGp: FiniteGroup) -> Subgroup:
        """Materialise as a subgroup of an explicit product group."""
        return Subgroup(GGp, tuple(sorted(self.ambient_index(h) for h in self.K)))

    def factorizes(self) -> bool:
        """True iff K^diag = K1 x K2 with K1 <= G and K2 <= G'."""
        p1 = {h for h, _ in self.pairs}
        p2 = {q for _, q in self.pairs}
        return len(p1) * len(p2) == self.order

    def describe(self) -> str:
        return "{" + ", ".join(f"({self.G.label(a)},{self.Gp.label(b)})" for a, b in self.pairs) + "}"


def diagonal_subgroup(G: FiniteGroup, Gp: FiniteGroup, K: Subgroup, p: GroupHom) -> DiagonalSubgroup:
    if K.parent is not G:
        raise GroupError("K must be a subgroup of G")
    if p.source != K or p.target is not Gp:
        raise GroupError("p must map K into G'")
    D = DiagonalSubgroup(G, Gp, K, p)
    # closure: (h1,p(h1))(h2,p(h2)) = (h1h2, p(h1h2)) holds because p is a hom
    pairs = set(D.pairs)
    for a, pa in D.pairs:
        for b, pb in D.pairs:
            if (G.mul(a, b), Gp.mul(pa, pb)) not in pairs:
                raise GroupError("diagonal subgroup is not closed")
    return D


def diagonal_from_generators(G: FiniteGroup, Gp: FiniteGroup, gens: dict) -> DiagonalSubgroup:
    """Convenience: K generated by the keys, p given on generators."""
    K = G.subgroup(list(gens))
    p = GroupHom.from_generators(K, Gp, gens)
    return diagonal_subgroup(G, Gp, K, p)


# ---------------------------------------------------------------- cocycles


@dataclass(frozen=True, eq=False)
class Cocycle2:
    domain: Subgroup
    values: np.ndarray  # indexed by member positions

    def __call__(self, a: int, b: int) -> complex:
        pos = self.domain.position
        return complex(self.values[pos[a], pos[b]])

    @classmethod
    def trivial(cls, K: Subgroup) -> "Cocycle2":
        return cls(K, np.ones((K.order, K.order), dtype=complex))

    @classmethod
    def from_function(cls, K: Subgroup, f) -> "Cocycle2":
        vals = np.array([[f(a, b) for b in K] for a in K], dtype=complex)
        return cls(K, vals)

    @property
    def is_trivial(self) -> bool:
        return bool(np.allclose(self.values, 1.0, atol=ATOL))


@dataclass
class CocycleReport:
    results: dict[str, tuple[bool, tuple | None]]

    @property
    def ok(self) -> bool:
        return all(ok for ok, _ in self.results.values())

    def failures(self) -> dict[str, tuple]:
        return {k: v[1] for k, v in self.results.items() if not v[0]}


def verify_cocycle(phi: Cocycle2, atol: float = ATOL) -> CocycleReport:
    """Check the cocycle condition and the four normalisation conditions."""
    K = phi.domain
    G = K.parent
    els = K.members
    lab = G.label

    def first(pred, arity):
        for tup in itertools.product(els, repeat=arity):
            if not pred(*tup):
                return tuple(lab(t) for t in tup)
        return None

    def close(x, y):
        return abs(x - y) <= atol

    checks = {
        "cocycle": first(lambda a, b, c: close(phi(a, b) * phi(G.mul(a, b), c), phi(a, G.mul(b, c)) * phi(b, c)), 3),
        "identity": first(lambda a: close(phi(0, a), 1) and close(phi(a, 0), 1), 1),
        "inverse_pair": first(lambda a: close(phi(a, G.inv(a)), 1), 1),
        "unit_modulus": first(lambda a, b: close(abs(phi(a, b)), 1), 2),
        "inverse_symmetry": first(lambda a, b: close(phi(G.inv(a), G.inv(b)) * phi(b, a), 1), 2),
    }
    return CocycleReport({k: (v is None, v) for k, v in checks.items()})


# ---------------------------------------------------------------- irreps


@dataclass(frozen=True, eq=False)
class Irrep:
    """A unitary irrep; ``matrices[i]`` is R of the i-th element of ``domain``."""

    domain: Subgroup
    name: str
    matrices: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def group(self) -> FiniteGroup:
        return self.domain.parent

    def __call__(self, g: int) -> np.ndarray:
        return self.matrices[self.domain.position[g]]

    def chi(self, g: int) -> complex:
        return complex(np.trace(self(g)))

    @cached_property
    def characters(self) -> np.ndarray:
        return np.trace(self.matrices, axis1=1, axis2=2)

    def __repr__(self) -> str:
        return f"Irrep({self.name}, dim={self.dim})"


def _from_generators(G: FiniteGroup, gen_mats: dict[int, np.ndarray]) -> np.ndarray:
    d = next(iter(gen_mats.values())).shape[0]
    mats: dict[int, np.ndarray] = {0: np.eye(d, dtype=complex)}
    frontier = [0]
    while frontier:
        x = frontier.pop()
        for g, M in gen_mats.items():
            y = G.mul(x, g)
            if y not in mats:
                mats[y] = mats[x] @ M
                frontier.append(y)
    return np.array([mats[g] for g in range(G.order)])


def _cyclic_irreps(G: FiniteGroup) -> list[Irrep]:
    n = G.param
    out = []
    for j in range(n):
        vals = np.exp(2j * np.pi * j * np.arange(n) / n)
        name = "1" if j == 0 else ("e" if j == 1 else f"e^{j}")
        out.append(Irrep(G.whole, name, vals.reshape(n, 1, 1)))
    return out


def _dihedral_irreps(G: FiniteGroup) -> list[Irrep]:
    k = G.param
    r, s = 1 % G.order, k
    one = lambda x: np.array([[x]], dtype=complex)  # noqa: E731
    specs = [("1", 1, 1), ("1_r", 1, -1)]  # (name, chi(r), chi(s))
    if k % 2 == 0:
        specs += [("1_s", -1, 1), ("1_rs", -1, -1)]
    if G.family == "symmetric":
        specs = [("1", 1, 1), ("P", 1, -1)]
    out = []
    for name, cr, cs in specs:
        gens = {s: one(cs)}
        if k > 1:
            gens[r] = one(cr)
        out.append(Irrep(G.whole, name, _from_generators(G, gens)))
    n2 = (k - 1) // 2
    for j in range(1, n2 + 1):
        w = np.exp(2j * np.pi * j / k)
        gens = {r: np.diag([w, np.conj(w)]), s: np.array([[0, 1], [1, 0]], dtype=complex)}
        name = "E" if n2 == 1 else f"E_{j}"
        out.append(Irrep(G.whole, name, _from_generators(G, gens)))
    return out


def _product_irreps(G: FiniteGroup) -> list[Irrep]:
    A, B = G.factors
    IA, IB = irreps(A), irreps(B)
    na, nb = A.order, B.order
    out = []
    for ra, rb in itertools.product(IA, IB):
        mats = np.array(
            [np.kron(ra.matrices[a], rb.matrices[b]) for a in range(na) for b in range(nb)]
        )
        out.append(Irrep(G.whole, f"{ra.name}|{rb.name}", mats))
    out.sort(key=lambda R: R.dim)  # stable: keeps lexicographic order per dim
    return out


_IRREP_CACHE: dict[int, list[Irrep]] = {}


def irreps(G: FiniteGroup) -> list[Irrep]:
    """Complete list of unitary irreps, one-dimensional first, trivial first."""
    key = id(G)
    if key in _IRREP_CACHE and _IRREP_CACHE[key][0].group is G:
        return _IRREP_CACHE[key]
    if G.family == "cyclic":
        out = _cyclic_irreps(G)
    elif G.family in ("dihedral", "symmetric"):
        out = _dihedral_irreps(G)
    elif G.family == "product":
        out = _product_irreps(G)
    else:
        raise GroupError(f"no irrep construction for {G.name}")
    check_irreps(G.whole, out)
    _IRREP_CACHE[key] = out
    return out


def check_irreps(H: Subgroup, reps: list[Irrep], atol: float = 1e-9) -> None:
    """Fail loudly unless ``reps`` is a complete set of unitary irreps of H."""
    n = H.order
    if sum(R.dim**2 for R in reps) != n:
        raise GroupError(f"sum of squared dimensions {sum(R.dim**2 for R in reps)} != |H| = {n}")
    G = H.parent
    for R in reps:
        for a in H:
            for b in H:
                if not np.allclose(R(a) @ R(b), R(G.mul(a, b)), atol=atol):
                    raise GroupError(f"{R.name} is not a homomorphism")
    for R in reps:
        for Rp in reps:
            # sum_g R(g)_ij conj(R'(g)_kl) = n/d delta delta delta
            M = np.einsum("gij,gkl->ijkl", R.matrices, Rp.matrices.conj())
            if R is Rp:
                d = R.dim
                target = np.einsum("ik,jl->ijkl", np.eye(d), np.eye(d)) * n / d
            else:
                target = np.zeros_like(M)
            if not np.allclose(M, target, atol=atol):
                raise GroupError(f"Schur orthogonality fails for {R.name}, {Rp.name}")


def abelian_characters(H: Subgroup, first: int | None = None) -> list[Irrep]:
    """Characters of an abelian subgroup, enumerated over a generating set.

    Generators are chosen greedily by smallest index, starting from
    ``first`` when given.  Characters are listed in lexicographic order of
    the exponents k_i, where chi(gen_i) = exp(2 pi i k_i / ord(gen_i)), with
    the first generator varying slowest.  Names are the generator values
    joined by commas.
    """
    if not H.is_abelian:
        raise GroupError("abelian_characters needs an abelian subgroup")
    G = H.parent
    gens: list[int] = []
    span = G.subgroup([]).members
    order_seq = ([first] if first not in (None, 0) else []) + list(H.members)
    for g in order_seq:
        if g not in span:
            gens.append(g)
            span = G.subgroup(gens).members
    orders = [G.element_order(g) for g in gens]
    out = []
    for ks in itertools.product(*[range(o) for o in orders]):
        vals = {g: np.exp(2j * np.pi * k / o) for g, k, o in zip(gens, ks, orders)}
        chi = {0: 1.0 + 0j}
        frontier, ok = [0], True
        while frontier and ok:
            x = frontier.pop()
            for g in gens:
                y = G.mul(x, g)
                v = chi[x] * vals[g]
                if y in chi:
                    if abs(chi[y] - v) > 1e-9:
                        ok = False
                        break
                else:
                    chi[y] = v
                    frontier.append(y)
        if not ok:
            continue
        mats = np.array([[[chi[h]]] for h in H.members], dtype=complex)
        name = ",".join(_root_name(vals[g]) for g in gens)
        out.append(Irrep(H, name, mats))
    check_irreps(H, out)
    return out


def _root_name(z: complex) -> str:
    for txt, v in (("+", 1), ("-", -1), ("i", 1j), ("-i", -1j)):
        if abs(z - v) < 1e-9:
            return txt
    ang = np.angle(z) / (2 * np.pi)
    return f"exp(2pi i {ang:.6g})"


def subgroup_irreps(H: Subgroup, first: int | None = None) -> list[Irrep]:
    """Irreps of a subgroup: the group's own list when H = G, else characters."""
    if H.is_whole:
        return irreps(H.parent)
    if H.is_abelian:
        return abelian_characters(H, first)
    raise GroupError(
        f"irreps of a non-abelian proper subgroup of {H.parent.name} are not supported"
    )
