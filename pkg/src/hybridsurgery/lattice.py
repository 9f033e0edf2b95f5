"""Exact state-vector simulation of quantum double code patches.

Every edge carries a group qudit. The amplitude array has one axis per
edge, in layout order, and the local basis is the group's element index.
Lattice operators are generalized permutations with phases, diagonal masks,
or joint maps on a handful of edges. No dense matrix is built at this level.

Geometry.  A patch with extents (w, h) has h + 1 rows of horizontal edges,
each row holding w edges, and vertical lines at x = 1 .. w-1.  Top and
bottom are smooth, so the outermost rows are ordinary horizontal edges.
Left and right are rough: the horizontal edges of the first and last column
dangle, and no vertices sit on those sides.  A side overridden to a
boundary condition (K, phi) with K nontrivial gains a column of vertical
edges constrained to K and the twisted vertex terms.  The minimal patch
(1, 1) has two edges and no vertices.

Edges are enumerated row by row, bottom to top; within a row the vertical
edges rising from that row come before its horizontal edges, each ordered
by x.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .groups import (
    Cocycle2,
    DiagonalSubgroup,
    FiniteGroup,
    Subgroup,
    abelian_characters,
    centralizer,
    conjugacy_classes,
    direct_product,
)

DEFAULT_CAP = 2**24
CAP_ENV = "HYBRIDSURGERY_CAP_AMPLITUDES"
ATOL = 1e-9


class LatticeError(ValueError):
    pass


class CapExceeded(LatticeError):
    def __init__(self, required: int, allowed: int):
        super().__init__(f"state needs {required} amplitudes, cap is {allowed}")
        self.required = required
        self.allowed = allowed


def default_cap() -> int:
    raw = os.environ.get(CAP_ENV)
    if raw:
        try:
            return int(float(raw))
        except ValueError:
            raise LatticeError(f"{CAP_ENV}={raw!r} is not a number") from None
    return DEFAULT_CAP


def check_cap(dims, cap: int | None = None) -> int:
    n = int(np.prod(dims, dtype=object)) if len(dims) else 1
    allowed = default_cap() if cap is None else cap
    if n > allowed:
        raise CapExceeded(n, allowed)
    return n


# ---------------------------------------------------------------- operators


def _tensor(psi: np.ndarray, dims) -> np.ndarray:
    batch = psi.shape[1] if psi.ndim == 2 else 1
    return psi.reshape(tuple(dims) + (batch,))


def _flat(t: np.ndarray, like: np.ndarray) -> np.ndarray:
    return t.reshape(like.shape)


class LatticeOp:
    """Base class.  ``apply`` accepts (N,) or (N, batch) arrays."""

    dims: tuple[int, ...]

    def apply(self, psi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self) -> "LatticeOp":
        raise NotImplementedError

    @property
    def support(self) -> frozenset[int]:
        raise NotImplementedError

    def __matmul__(self, other: "LatticeOp") -> "LatticeOp":
        return Product(self.dims, (self, other))

    def __add__(self, other: "LatticeOp") -> "LatticeOp":
        return Combination(self.dims, ((1.0, self), (1.0, other)))

    def __rmul__(self, c: complex) -> "LatticeOp":
        return Combination(self.dims, ((c, self),))

    def __call__(self, psi):
        if isinstance(psi, PhysicalState):
            return PhysicalState(psi.layout, self.apply(psi.amplitudes))
        return self.apply(psi)

    def to_dense(self, limit: int = 4096) -> np.ndarray:
        n = int(np.prod(self.dims))
        if n > limit:
            raise LatticeError(f"refusing to densify a {n}-dimensional operator")
        return self.apply(np.eye(n, dtype=complex))


@dataclass(frozen=True, eq=False)
class Factorized(LatticeOp):
    """Product of single-edge maps |a> -> phase[a] |perm[a]> on distinct edges."""

    dims: tuple[int, ...]
    factors: tuple[tuple[int, np.ndarray, np.ndarray | None], ...]

    def apply(self, psi):
        t = _tensor(psi, self.dims)
        for e, perm, phase in self.factors:
            out = np.empty_like(t)
            idx = [slice(None)] * t.ndim
            idx[e] = perm
            if phase is None:
                out[tuple(idx)] = t
            else:
                shape = [1] * t.ndim
                shape[e] = -1
                out[tuple(idx)] = t * phase.reshape(shape)
            t = out
        return _flat(t, psi)

    def adjoint(self):
        inv = []
        for e, perm, phase in self.factors:
            p = np.empty_like(perm)
            p[perm] = np.arange(len(perm))
            ph = None if phase is None else np.conj(phase)[p]
            inv.append((e, p, ph))
        return Factorized(self.dims, tuple(inv))

    @property
    def support(self):
        return frozenset(e for e, _, _ in self.factors)


@dataclass(frozen=True, eq=False)
class Diagonal(LatticeOp):
    """Multiplication by ``values`` indexed by the listed edges' basis labels."""

    dims: tuple[int, ...]
    edges: tuple[int, ...]
    values: np.ndarray

    def apply(self, psi):
        t = _tensor(psi, self.dims)
        order = np.argsort(self.edges)
        v = np.transpose(self.values, order)
        shape = [1] * t.ndim
        for e in self.edges:
            shape[e] = self.dims[e]
        return _flat(t * v.reshape(shape), psi)

    def adjoint(self):
        return Diagonal(self.dims, self.edges, np.conj(self.values))

    @property
    def support(self):
        return frozenset(self.edges)


@dataclass(frozen=True, eq=False)
class JointMap(LatticeOp):
    """|c> -> coeff[c] |target[c]> on the joint basis of a few edges.

    Entries with zero coefficient are dropped; the remaining targets must be
    distinct.
    """

    dims: tuple[int, ...]
    edges: tuple[int, ...]
    target: np.ndarray
    coeff: np.ndarray

    def apply(self, psi):
        t = _tensor(psi, self.dims)
        k = len(self.edges)
        moved = np.moveaxis(t, self.edges, range(k))
        shape = moved.shape
        flat = moved.reshape(int(np.prod(shape[:k])), -1)
        out = np.zeros_like(flat)
        nz = self.coeff != 0
        out[self.target[nz]] = self.coeff[nz, None] * flat[nz]
        back = np.moveaxis(out.reshape(shape), range(k), self.edges)
        return _flat(np.ascontiguousarray(back), psi)

    def adjoint(self):
        nz = self.coeff != 0
        tgt = np.zeros_like(self.target)
        cf = np.zeros_like(self.coeff)
        tgt[self.target[nz]] = np.nonzero(nz)[0]
        cf[self.target[nz]] = np.conj(self.coeff[nz])
        return JointMap(self.dims, self.edges, tgt, cf)

    @property
    def support(self):
        return frozenset(self.edges)


@dataclass(frozen=True, eq=False)
class Product(LatticeOp):
    """ops[0] @ ops[1] @ ... ; the last one acts first."""

    dims: tuple[int, ...]
    ops: tuple[LatticeOp, ...]

    def apply(self, psi):
        for op in reversed(self.ops):
            psi = op.apply(psi)
        return psi

    def adjoint(self):
        return Product(self.dims, tuple(op.adjoint() for op in reversed(self.ops)))

    @property
    def support(self):
        return frozenset().union(*(op.support for op in self.ops))


@dataclass(frozen=True, eq=False)
class Combination(LatticeOp):
    dims: tuple[int, ...]
    terms: tuple[tuple[complex, LatticeOp], ...]

    def apply(self, psi):
        out = np.zeros_like(psi, dtype=complex)
        for c, op in self.terms:
            if c != 0:
                out += c * op.apply(psi)
        return out

    def adjoint(self):
        return Combination(self.dims, tuple((np.conj(c), op.adjoint()) for c, op in self.terms))

    @property
    def support(self):
        return frozenset().union(*(op.support for _, op in self.terms))


def identity_op(dims) -> LatticeOp:
    return Factorized(tuple(dims), ())


def op_distance(A: LatticeOp, B: LatticeOp, samples: int = 3, seed: int = 0) -> float:
    """Max deviation of A and B on random states (exact identities give ~1e-15)."""
    rng = np.random.default_rng(seed)
    n = int(np.prod(A.dims))
    psi = rng.normal(size=(n, samples)) + 1j * rng.normal(size=(n, samples))
    psi /= np.linalg.norm(psi, axis=0)
    return float(np.max(np.abs(A.apply(psi) - B.apply(psi))))


def group_commutator(A: LatticeOp, B: LatticeOp) -> LatticeOp:
    """A B A^-1 B^-1 for unitary A, B."""
    return Product(A.dims, (A, B, A.adjoint(), B.adjoint()))


# ---------------------------------------------------------------- layout


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary data (K, phi) for one side of a patch."""

    K: Subgroup
    phi: Cocycle2 | None = None

    def __post_init__(self):
        if self.phi is not None and self.phi.domain != self.K:
            raise LatticeError("cocycle must be defined on the boundary subgroup")

    @property
    def is_rough(self) -> bool:
        return self.K.order == 1

    @property
    def is_smooth(self) -> bool:
        return self.K.is_whole and (self.phi is None or self.phi.is_trivial)

    @classmethod
    def rough(cls, G: FiniteGroup) -> "BoundaryCondition":
        return cls(G.trivial)

    @classmethod
    def smooth(cls, G: FiniteGroup) -> "BoundaryCondition":
        return cls(G.whole)


@dataclass(frozen=True)
class Edge:
    index: int
    kind: str  # "h", "v" or "i" (interface)
    x: int
    y: int
    group: FiniteGroup

    @property
    def name(self) -> str:
        return f"{self.kind.upper()}({self.x},{self.y})"

    @property
    def endpoints(self) -> tuple[tuple[int, int], tuple[int, int]]:
        if self.kind == "h":
            return (self.x, self.y), (self.x + 1, self.y)
        return (self.x, self.y), (self.x, self.y + 1)


@dataclass(frozen=True)
class Leg:
    """One edge of a vertex star.

    ``embed[k]`` is the edge-group element the gauge element k acts with
    (-1 where undefined).  ``role`` is "x" for the vertical edge below a
    twisted boundary vertex and "y" for the one above; ``project`` maps edge
    values back to gauge elements for the cocycle phases.
    """

    edge: int
    outgoing: bool
    embed: np.ndarray
    role: str | None = None
    project: np.ndarray | None = None


@dataclass(frozen=True)
class Vertex:
    x: int
    y: int
    legs: tuple[Leg, ...]
    gauge: Subgroup
    phi: Cocycle2 | None = None
    kind: str = "bulk"

    @property
    def name(self) -> str:
        return f"v({self.x},{self.y})"

    @property
    def degree(self) -> int:
        return len(self.legs)


@dataclass(frozen=True)
class Plaquette:
    """Clockwise walk from the left edge: left, top, right, bottom.

    Each step is (edge, sign, component); sign -1 means the edge runs
    against the clockwise direction.  ``component`` selects a factor of a
    product-group interface edge.
    """

    x: int
    y: int
    walk: tuple[tuple[int, int, int | None], ...]
    group: FiniteGroup

    @property
    def name(self) -> str:
        return f"p({self.x},{self.y})"


@dataclass
class Layout:
    edges: list[Edge]
    vertices: list[Vertex]
    plaquettes: list[Plaquette]
    constraints: list[tuple[int, frozenset]] = field(default_factory=list)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(e.group.order for e in self.edges)

    @property
    def n_amplitudes(self) -> int:
        return int(np.prod(self.dims, dtype=object))

    @property
    def stabilizer_vertices(self) -> list[Vertex]:
        """Vertices whose terms enter the Hamiltonian; twisted corners are left out."""
        return [v for v in self.vertices if v.kind != "corner"]

    def edge(self, kind: str, x: int, y: int) -> int:
        for e in self.edges:
            if (e.kind, e.x, e.y) == (kind, x, y):
                return e.index
        raise LatticeError(f"no edge {kind.upper()}({x},{y})")

    def vertex(self, x: int, y: int) -> Vertex:
        for v in self.vertices:
            if (v.x, v.y) == (x, y):
                return v
        raise LatticeError(f"no vertex at ({x},{y})")

    def plaquette(self, x: int, y: int) -> Plaquette:
        for p in self.plaquettes:
            if (p.x, p.y) == (x, y):
                return p
        raise LatticeError(f"no plaquette at ({x},{y})")

    def describe(self) -> dict:
        return {
            "edges": [[e.name, e.group.name] for e in self.edges],
            "vertices": [v.name for v in self.vertices],
            "plaquettes": [p.name for p in self.plaquettes],
        }


@dataclass
class PatchLayout(Layout):
    group: FiniteGroup = None
    w: int = 1
    h: int = 1
    left: BoundaryCondition = None
    right: BoundaryCondition = None

    @property
    def left_column(self) -> list[int]:
        return [self.edge("h", 0, y) for y in range(self.h + 1)]

    @property
    def right_column(self) -> list[int]:
        return [self.edge("h", self.w - 1, y) for y in range(self.h + 1)]

    def describe(self) -> dict:
        d = super().describe()
        d.update(group=self.group.name, w=self.w, h=self.h,
                 left=self.left.K.labels(), right=self.right.K.labels())
        return d


def _identity_embed(G: FiniteGroup) -> np.ndarray:
    return np.arange(G.order)


def _member_project(G: FiniteGroup, K: Subgroup) -> np.ndarray:
    out = -np.ones(G.order, dtype=int)
    for k in K:
        out[k] = k
    return out


def build_patch(
    G: FiniteGroup,
    w: int = 1,
    h: int = 1,
    left: BoundaryCondition | None = None,
    right: BoundaryCondition | None = None,
    top: BoundaryCondition | None = None,
    bottom: BoundaryCondition | None = None,
    cap: int | None = None,
) -> PatchLayout:
    """A code patch with smooth top/bottom and rough (or overridden) left/right."""
    if w < 1 or h < 1:
        raise LatticeError("patch extents must be at least 1")
    for side, bc in (("top", top), ("bottom", bottom)):
        if bc is not None and not bc.is_smooth:
            raise LatticeError(f"only the smooth condition is supported on the {side} side")
    left = left or BoundaryCondition.rough(G)
    right = right or BoundaryCondition.rough(G)
    for bc in (left, right):
        if bc.K.parent is not G:
            raise LatticeError("boundary subgroup must belong to the patch group")
    lines = list(range(1, w))
    if not left.is_rough:
        lines = [0] + lines
    if not right.is_rough:
        lines = lines + [w]

    edges: list[Edge] = []
    for y in range(h + 1):
        if y < h:
            for x in lines:
                edges.append(Edge(len(edges), "v", x, y, G))
        for x in range(w):
            edges.append(Edge(len(edges), "h", x, y, G))
    check_cap([e.group.order for e in edges], cap)
    index = {(e.kind, e.x, e.y): e.index for e in edges}
    ident = _identity_embed(G)

    vertices = []
    for y in range(h + 1):
        for x in lines:
            legs = []
            bc = left if x == 0 else right if x == w else None
            if ("h", x - 1, y) in index:
                legs.append(Leg(index["h", x - 1, y], False, ident))
            if ("h", x, y) in index:
                legs.append(Leg(index["h", x, y], True, ident))
            twisted = bc is not None and bc.phi is not None
            proj = _member_project(G, bc.K) if bc is not None else None
            if ("v", x, y - 1) in index:
                legs.append(Leg(index["v", x, y - 1], False, ident, "x" if twisted else None, proj))
            if ("v", x, y) in index:
                legs.append(Leg(index["v", x, y], True, ident, "y" if twisted else None, proj))
            if bc is None:
                kind = "bulk" if 0 < y < h else "smooth"
                vertices.append(Vertex(x, y, tuple(legs), G.whole, None, kind))
            else:
                # with one twisted leg the term is only a projective representation
                corner = twisted and not bc.phi.is_trivial and y in (0, h)
                vertices.append(Vertex(x, y, tuple(legs), bc.K, bc.phi, "corner" if corner else "boundary"))

    plaquettes = []
    for y in range(h):
        for x in range(w):
            walk = []
            if ("v", x, y) in index:
                walk.append((index["v", x, y], +1, None))
            walk.append((index["h", x, y + 1], +1, None))
            if ("v", x + 1, y) in index:
                walk.append((index["v", x + 1, y], -1, None))
            walk.append((index["h", x, y], -1, None))
            plaquettes.append(Plaquette(x, y, tuple(walk), G))

    constraints = []
    for bc, x in ((left, 0), (right, w)):
        if not bc.is_rough and not bc.K.is_whole:
            for y in range(h):
                constraints.append((index["v", x, y], frozenset(bc.K.members)))
    return PatchLayout(edges, vertices, plaquettes, constraints, G, w, h, left, right)


# ---------------------------------------------------------------- local terms


def _vertex_action(layout: Layout, v: Vertex, k: int) -> Factorized:
    if k not in v.gauge:
        raise LatticeError(f"{v.gauge.parent.label(k)} is not in the gauge group at {v.name}")
    factors = []
    for leg in v.legs:
        E = layout.edges[leg.edge].group
        g = int(leg.embed[k])
        if g < 0:
            raise LatticeError(f"no image for gauge element at {v.name}")
        perm = E.mul_table[g, :] if leg.outgoing else E.mul_table[:, E.inv(g)]
        phase = None
        if v.phi is not None and leg.role is not None:
            K = v.gauge.parent
            vals = np.ones(E.order, dtype=complex)
            for a in range(E.order):
                c = int(leg.project[a])
                if c >= 0:
                    vals[a] = v.phi(c, K.inv(k)) if leg.role == "x" else v.phi(k, c)
            phase = vals
        factors.append((leg.edge, np.asarray(perm), phase))
    return Factorized(layout.dims, tuple(factors))


def vertex_op(layout: Layout, v: Vertex | tuple[int, int], g: int) -> LatticeOp:
    """A_v^(g): L^g on outgoing and R^g on incoming edges of the (truncated) star."""
    if not isinstance(v, Vertex):
        v = layout.vertex(*v)
    return _vertex_action(layout, v, g)


def boundary_vertex_op(layout: Layout, v: Vertex | tuple[int, int], k: int) -> LatticeOp:
    """The twisted boundary term A~_v^(k), phases phi(x, k^-1) phi(k, y)."""
    if not isinstance(v, Vertex):
        v = layout.vertex(*v)
    if v.kind not in ("boundary", "corner", "interface"):
        raise LatticeError(f"{v.name} is not a boundary vertex")
    return _vertex_action(layout, v, k)


def vertex_projector(layout: Layout, v: Vertex, weights=None) -> LatticeOp:
    """(1/|K|) sum_k w(k) A_v^(k); the default weights give the stabilizer projector."""
    terms = []
    for k in v.gauge:
        c = 1.0 if weights is None else weights(k)
        terms.append((c / v.gauge.order, _vertex_action(layout, v, k)))
    return Combination(layout.dims, tuple(terms))


def holonomy_table(layout: Layout, p: Plaquette) -> np.ndarray:
    """Clockwise holonomy as an array over the walk edges' basis labels."""
    G = p.group
    hol = np.zeros((), dtype=int)
    for e, sign, comp in p.walk:
        E = layout.edges[e].group
        vals = np.arange(E.order)
        if comp is not None:
            vals = np.array([E.component(a, comp) for a in vals])
        if sign < 0:
            vals = G.inv_table[vals]
        hol = G.mul_table[hol[..., None], vals]
    return hol


def plaquette_op(layout: Layout, p: Plaquette | tuple[int, int], g: int) -> LatticeOp:
    """B_p^(g): projector onto clockwise holonomy g (truncated at rough sides)."""
    if not isinstance(p, Plaquette):
        p = layout.plaquette(*p)
    mask = (holonomy_table(layout, p) == g).astype(complex)
    return Diagonal(layout.dims, tuple(e for e, _, _ in p.walk), mask)


def constraint_op(layout: Layout, edge: int, allowed) -> LatticeOp:
    """B_p^K on a boundary edge: projector onto values in K."""
    d = layout.edges[edge].group.order
    mask = np.array([1.0 if a in allowed else 0.0 for a in range(d)], dtype=complex)
    return Diagonal(layout.dims, (edge,), mask)


def stabilizer_terms(layout: Layout) -> list[tuple[str, LatticeOp]]:
    terms = [(f"A_{v.name}", vertex_projector(layout, v)) for v in layout.stabilizer_vertices]
    terms += [(f"B_{p.name}", plaquette_op(layout, p, 0)) for p in layout.plaquettes]
    terms += [(f"BK_{layout.edges[e].name}", constraint_op(layout, e, a)) for e, a in layout.constraints]
    return terms


def code_projector(layout: Layout) -> LatticeOp:
    return Product(layout.dims, tuple(op for _, op in stabilizer_terms(layout)))


def _flat_mask(layout: Layout) -> np.ndarray:
    n = layout.n_amplitudes
    ones = np.ones(n, dtype=complex)
    flat = np.ones(n, dtype=bool)
    for p in layout.plaquettes:
        flat &= plaquette_op(layout, p, 0).apply(ones).real > 0.5
    for e, allowed in layout.constraints:
        flat &= constraint_op(layout, e, allowed).apply(ones).real > 0.5
    return flat


def _monomial_diagonal(layout: Layout, ops: list[Factorized]) -> np.ndarray:
    """Diagonal of a product of single-edge monomial maps, as an outer product."""
    perms = [np.arange(d) for d in layout.dims]
    phases = [np.ones(d, dtype=complex) for d in layout.dims]
    for op in ops:
        for e, perm, phase in op.factors:
            ph = np.ones(len(perm), dtype=complex) if phase is None else phase
            phases[e] = phases[e] * ph[perms[e]]
            perms[e] = perm[perms[e]]
    diag = np.ones((), dtype=complex)
    for perm, ph in zip(perms, phases):
        diag = np.multiply.outer(diag, np.where(perm == np.arange(len(perm)), ph, 0))
    return diag.reshape(-1)


def code_space_dimension(layout: Layout, batch: int = 64, max_terms: int = 4096) -> int:
    """Trace of the code projector over flat basis configurations.

    The vertex projectors expand into a sum of monomial operators whose
    diagonals factor over edges; that sum is used when it has at most
    ``max_terms`` terms, and batched basis vectors otherwise.
    """
    n = layout.n_amplitudes
    flat = _flat_mask(layout)
    vs = layout.stabilizer_vertices
    sizes = [v.gauge.order for v in vs]
    if int(np.prod(sizes, dtype=object)) <= max_terms:
        total = 0.0
        for ks in itertools.product(*(list(v.gauge) for v in vs)):
            ops = [_vertex_action(layout, v, k) for v, k in zip(vs, ks)]
            total += float(np.sum(_monomial_diagonal(layout, ops)[flat]).real)
        return int(round(total / float(np.prod(sizes))))
    idx = np.nonzero(flat)[0]
    verts = [vertex_projector(layout, v) for v in vs]
    total = 0.0
    for start in range(0, len(idx), batch):
        chunk = idx[start:start + batch]
        psi = np.zeros((n, len(chunk)), dtype=complex)
        psi[chunk, np.arange(len(chunk))] = 1.0
        for op in verts:
            psi = op.apply(psi)
        total += float(np.sum(psi[chunk, np.arange(len(chunk))].real))
    return int(round(total))


# ---------------------------------------------------------------- states


@dataclass
class PhysicalState:
    layout: Layout
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.layout.n_amplitudes,):
            raise LatticeError("amplitude vector does not match the layout")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PhysicalState":
        nrm = self.norm
        if nrm < 1e-14:
            raise LatticeError("cannot normalise a zero state")
        return PhysicalState(self.layout, self.amplitudes / nrm)

    def inner(self, other: "PhysicalState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def expectation(self, op: LatticeOp) -> complex:
        return complex(np.vdot(self.amplitudes, op.apply(self.amplitudes)))

    def energy_report(self) -> dict[str, float]:
        """Expectation of every stabilizer term (all 1 for a code state)."""
        return {name: self.expectation(op).real for name, op in stabilizer_terms(self.layout)}

    def is_code_state(self, atol: float = ATOL) -> bool:
        return all(abs(v - 1) < atol for v in self.energy_report().values())

    def save(self, path: str | Path) -> None:
        """JSON description plus a little-endian complex64 sidecar buffer."""
        path = Path(path)
        meta = {"layout": self.layout.describe(), "dtype": "<c8", "length": len(self.amplitudes)}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=1, sort_keys=True))
        self.amplitudes.astype("<c8").tofile(path.with_suffix(".bin"))


def load_amplitudes(path: str | Path) -> np.ndarray:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    data = np.fromfile(path.with_suffix(".bin"), dtype=meta["dtype"])
    if len(data) != meta["length"]:
        raise LatticeError("snapshot buffer length does not match its description")
    return data.astype(complex)


def product_basis_state(layout: Layout, values=None) -> PhysicalState:
    values = [0] * len(layout.edges) if values is None else list(values)
    idx = int(np.ravel_multi_index(values, layout.dims)) if layout.edges else 0
    amps = np.zeros(layout.n_amplitudes, dtype=complex)
    amps[idx] = 1.0
    return PhysicalState(layout, amps)


def fiducial_state(layout: Layout) -> PhysicalState:
    """|Phi_id>: the vertex projectors applied to the all-identity product state."""
    psi = product_basis_state(layout).amplitudes
    for v in layout.stabilizer_vertices:
        psi = vertex_projector(layout, v).apply(psi)
    return PhysicalState(layout, psi).normalized()


def logical_left(layout: PatchLayout, g: int) -> LatticeOp:
    """Lbar^g: L^g on every horizontal edge of the leftmost column."""
    G = layout.group
    return Factorized(layout.dims, tuple((e, np.asarray(G.mul_table[g, :]), None) for e in layout.left_column))


def logical_right(layout: PatchLayout, g: int) -> LatticeOp:
    """Rbar^g: R^g on every horizontal edge of the rightmost column."""
    G = layout.group
    return Factorized(
        layout.dims, tuple((e, np.asarray(G.mul_table[:, G.inv(g)]), None) for e in layout.right_column)
    )


def logical_basis_state(layout: PatchLayout, g: int) -> PhysicalState:
    return logical_left(layout, g)(fiducial_state(layout))


def logical_basis(layout: PatchLayout) -> np.ndarray:
    """Columns are |Phi_g> for g in element order."""
    fid = fiducial_state(layout)
    return np.stack([logical_left(layout, g).apply(fid.amplitudes) for g in range(layout.group.order)], axis=1)


def encode(layout: PatchLayout, coefficients) -> PhysicalState:
    c = np.asarray(coefficients, dtype=complex)
    return PhysicalState(layout, logical_basis(layout) @ c)


def decode(layout: PatchLayout, state: PhysicalState | np.ndarray) -> np.ndarray:
    amps = state.amplitudes if isinstance(state, PhysicalState) else state
    return logical_basis(layout).conj().T @ amps


# ---------------------------------------------------------------- ribbons


@dataclass(frozen=True)
class RibbonStep:
    """A direct triangle (along an edge) or a dual triangle (across one).

    For direct steps ``aligned`` says the edge points along the ribbon; for
    dual steps it says the crossed edge points towards the direct path.
    """

    kind: str
    edge: int
    aligned: bool


@dataclass(frozen=True)
class Ribbon:
    steps: tuple[RibbonStep, ...]

    @property
    def edges(self) -> tuple[int, ...]:
        return tuple(s.edge for s in self.steps)


def validate_ribbon(layout: Layout, ribbon: Ribbon) -> None:
    """Reject ribbons that revisit an edge, jump along the direct path, or
    cross edges that do not share a plaquette or a dangling boundary cell."""
    if not ribbon.steps:
        raise LatticeError("empty ribbon")
    seen = set()
    for s in ribbon.steps:
        if s.kind not in ("direct", "dual"):
            raise LatticeError(f"bad ribbon step kind {s.kind!r}")
        if not 0 <= s.edge < len(layout.edges):
            raise LatticeError(f"ribbon edge {s.edge} is not in the layout")
        if s.edge in seen:
            raise LatticeError("ribbon overlaps itself")
        seen.add(s.edge)
    direct = [layout.edges[s.edge] for s in ribbon.steps if s.kind == "direct"]
    for a, b in zip(direct, direct[1:]):
        if not set(a.endpoints) & set(b.endpoints):
            raise LatticeError(f"direct path breaks between {a.name} and {b.name}")
    dual = [layout.edges[s.edge] for s in ribbon.steps if s.kind == "dual"]
    cells = {}
    for p in layout.plaquettes:
        for e, _, _ in p.walk:
            cells.setdefault(e, set()).add((p.x, p.y))
    for a, b in zip(dual, dual[1:]):
        if not cells.get(a.index, set()) & cells.get(b.index, set()):
            raise LatticeError(f"dual path breaks between {a.name} and {b.name}")


def ribbon_op(layout: Layout, ribbon: Ribbon, h: int, g: int, group: FiniteGroup | None = None) -> LatticeOp:
    """F^{h,g}: select direct-path product g, multiply crossed edges by
    conjugates yhat^-1 h yhat of the flux, where yhat is the direct-path
    product accumulated so far."""
    validate_ribbon(layout, ribbon)
    G = group or layout.edges[ribbon.steps[0].edge].group
    edges = ribbon.edges
    if any(layout.edges[e].group is not G for e in edges):
        raise LatticeError("ribbon edges must carry the same group")
    dims = [G.order] * len(edges)
    vals = np.indices(dims).reshape(len(edges), -1)
    new = vals.copy()
    mul, inv = G.mul_table, G.inv_table
    yhat = np.zeros(vals.shape[1], dtype=int)
    for i, s in enumerate(ribbon.steps):
        a = vals[i]
        if s.kind == "direct":
            yhat = mul[yhat, a if s.aligned else inv[a]]
        else:
            c = mul[mul[inv[yhat], h], yhat]
            new[i] = mul[a, inv[c]] if s.aligned else mul[c, a]
    target = np.ravel_multi_index(tuple(new), dims)
    coeff = (yhat == g).astype(complex)
    return JointMap(layout.dims, edges, target, coeff)


def coset_representatives(G: FiniteGroup, g: int) -> list[tuple[int, int]]:
    """(c_j, p_j) with c_j = p_j g p_j^-1, class members in index order and
    p_j the smallest-index element that conjugates g to c_j."""
    cls = next(c for c in conjugacy_classes(G) if g in c)
    out = []
    for c in sorted(cls):
        p = min(x for x in range(G.order) if G.conj(x, g) == c)
        out.append((c, p))
    return out


def ribbon_anyon_op(layout: Layout, ribbon: Ribbon, anyon, u, v) -> LatticeOp:
    """Anyon-basis ribbon for a ``center.Anyon`` ([g], pi); u = (i, j) and
    v = (i', j') are 1-based coset and irrep indices.

    The operator is (dim pi / |C|) sum_{k in C} pi(k^-1)_{j j'}
    F^{(c_i^-1, p_i k p_i'^-1)}, with C the centralizer of the class
    representative g and (c_i, p_i) from ``coset_representatives``.
    """
    from .center import center

    G = layout.edges[ribbon.steps[0].edge].group
    if anyon.group is not G:
        raise LatticeError("anyon belongs to a different group")
    g = anyon.rep
    C = centralizer(G, g)
    pi = center(G).centralizer_irreps(anyon.cls)[anyon.irrep]
    cp = coset_representatives(G, g)
    (i, j), (i2, j2) = u, v
    if not (1 <= i <= len(cp) and 1 <= i2 <= len(cp) and 1 <= j <= pi.dim and 1 <= j2 <= pi.dim):
        raise LatticeError("anyon-basis indices out of range")
    ci, pi_ = cp[i - 1]
    _, pi2 = cp[i2 - 1]
    terms = []
    for k in C:
        w = pi(G.inv(k))[j - 1, j2 - 1]
        if abs(w) < 1e-15:
            continue
        gg = G.prod(pi_, k, G.inv(pi2))
        terms.append((pi.dim / C.order * w, ribbon_op(layout, ribbon, G.inv(ci), gg, G)))
    return Combination(layout.dims, tuple(terms))


def horizontal_ribbon(layout: PatchLayout, row: int | None = None) -> Ribbon:
    """Left-to-right ribbon along a row of horizontal edges (the top row by
    default), crossing the vertical edges that hang below it."""
    y = layout.h if row is None else row
    steps = []
    for x in range(layout.w):
        if x > 0 and y > 0:
            try:
                steps.append(RibbonStep("dual", layout.edge("v", x, y - 1), True))
            except LatticeError:
                pass
        steps.append(RibbonStep("direct", layout.edge("h", x, y), True))
    return Ribbon(tuple(steps))


def vertical_ribbon(layout: PatchLayout, column: int) -> Ribbon:
    """Bottom-to-top magnetic ribbon crossing the horizontal edges H(column, y),
    with its direct path on the vertical line at x = column (edges point away
    from it).  Column 0 has no direct edges and reproduces Lbar."""
    steps = []
    for y in range(layout.h + 1):
        steps.append(RibbonStep("dual", layout.edge("h", column, y), False))
        if y < layout.h:
            try:
                steps.append(RibbonStep("direct", layout.edge("v", column, y), True))
            except LatticeError:
                pass
    return Ribbon(tuple(steps))


def magnetic_class_op(layout: PatchLayout, ribbon: Ribbon, g: int) -> LatticeOp:
    """sum over h in [g] and all g' of F^{h,g'}: the pure-flux line for the class."""
    G = layout.group
    cls = next(c for c in conjugacy_classes(G) if g in c)
    terms = [(1.0, ribbon_op(layout, ribbon, h, x, G)) for h in cls for x in range(G.order)]
    return Combination(layout.dims, tuple(terms))


def logical_left_class(layout: PatchLayout, g: int) -> LatticeOp:
    G = layout.group
    cls = next(c for c in conjugacy_classes(G) if g in c)
    return Combination(layout.dims, tuple((1.0, logical_left(layout, h)) for h in cls))


# ---------------------------------------------------------------- ancilla readout


@dataclass
class AncillaBranch:
    """One reported eigenvalue.  ``state`` is the unnormalised post-measurement
    state when the branch is pure; ``mixed`` marks branches where the
    ancilla outcomes leave different system states."""

    eigenvalue: complex
    probability: float
    state: np.ndarray
    mixed: bool = False


def _cyclic_eigvecs(G: FiniteGroup, g: int, side: str) -> list[tuple[complex, np.ndarray]]:
    """Eigenbasis of L^g ("left") or R^g ("right") on C[G], grouped by eigenvalue."""
    n = G.element_order(g)
    seen, out = set(), []
    for c in range(G.order):
        if c in seen:
            continue
        orbit = [G.mul(G.power(g, k), c) if side == "left" else G.mul(c, G.power(g, k)) for k in range(n)]
        seen.update(orbit)
        for q in range(n):
            alpha = np.exp(2j * np.pi * q / n)
            vec = np.zeros(G.order, dtype=complex)
            for k, x in enumerate(orbit):
                vec[x] = alpha ** (-k if side == "left" else k) / np.sqrt(n)
            out.append((alpha, vec, c))
    return out


def ancilla_vertex_measurement(
    layout: Layout, state: PhysicalState, v: Vertex, g: int, readout: str = "right"
) -> list[AncillaBranch]:
    """Measure A_v^(g) through an ancilla qudit in |1_trivial>.

    Controlled multiplications entangle the ancilla, which is then measured
    in the eigenbasis of L^g (``readout="left"``) or R^g.  Each ancilla
    outcome (alpha, c) is undone with A_v^(c^-1) and the branches are
    merged by the reported A_v^(g) eigenvalue: alpha* for the left readout,
    alpha for the right one.
    """
    G = v.gauge.parent
    if not v.gauge.is_whole:
        raise LatticeError("ancilla readout is implemented for full-group vertices")
    psi = state.amplitudes
    stack = np.stack([_vertex_action(layout, v, h).apply(psi) for h in range(G.order)], axis=1)
    stack /= np.sqrt(G.order)
    branches: dict[int, list] = {}
    n = G.element_order(g)
    for alpha, vec, c in _cyclic_eigvecs(G, g, readout):
        post = stack @ vec.conj()
        post = _vertex_action(layout, v, G.inv(c)).apply(post)
        lam = np.conj(alpha) if readout == "left" else alpha
        q = int(round(np.angle(lam) / (2 * np.pi) * n)) % n
        branches.setdefault(q, []).append(post)
    out = []
    for q in sorted(branches):
        posts = branches[q]
        prob = float(sum(np.vdot(p, p).real for p in posts))
        mixed = any(np.max(np.abs(p - posts[0])) > ATOL for p in posts[1:])
        state = posts[0] * np.sqrt(len(posts))
        out.append(AncillaBranch(np.exp(2j * np.pi * q / n), prob, state, mixed))
    return out


def direct_vertex_measurement(layout: Layout, state: PhysicalState, v: Vertex, g: int) -> list[AncillaBranch]:
    """Projective measurement of A_v^(g) through its spectral projectors."""
    G = v.gauge.parent
    n = G.element_order(g)
    ops = [_vertex_action(layout, v, G.power(g, k)).apply(state.amplitudes) for k in range(n)]
    out = []
    for q in range(n):
        lam = np.exp(2j * np.pi * q / n)
        post = sum(lam ** (-k) * o for k, o in enumerate(ops)) / n
        out.append(AncillaBranch(lam, float(np.vdot(post, post).real), post))
    return out


# ---------------------------------------------------------------- surgery


@dataclass(frozen=True)
class InterfaceSpec:
    """A rough-merge interface: K^diag = {(h, p(h))} with cocycle phi on K."""

    diag: DiagonalSubgroup
    phi: Cocycle2 | None = None

    def __post_init__(self):
        if self.phi is not None and self.phi.domain != self.diag.K:
            raise LatticeError("interface cocycle must live on K")


@dataclass
class HybridLayout(Layout):
    left: PatchLayout = None
    right: PatchLayout = None
    spec: InterfaceSpec = None
    pair_group: FiniteGroup = None
    n_left: int = 0
    n_right: int = 0

    @property
    def interface_edges(self) -> list[int]:
        return list(range(self.n_left + self.n_right, len(self.edges)))

    @property
    def interface_vertices(self) -> list[Vertex]:
        return [v for v in self.vertices if v.kind == "interface"]

    def describe(self) -> dict:
        d = super().describe()
        d.update(left=self.left.describe(), right=self.right.describe(), diag=self.spec.diag.describe())
        return d


def hybrid_layout(left: PatchLayout, right: PatchLayout, spec: InterfaceSpec, cap: int | None = None) -> HybridLayout:
    """Left patch, right patch and one column of (G x G')-qudits between them."""
    D = spec.diag
    if left.group is not D.G or right.group is not D.Gp:
        raise LatticeError("patch groups do not match the interface subgroup")
    if left.h != right.h:
        raise LatticeError(f"row mismatch: {left.h} vs {right.h}")
    if not left.right.is_rough or not right.left.is_rough:
        raise LatticeError("merged sides must both be rough")
    G, Gp = D.G, D.Gp
    GG = direct_product(G, Gp)
    n1, n2 = len(left.edges), len(right.edges)
    w1 = left.w
    edges = list(left.edges)
    for e in right.edges:
        edges.append(Edge(n1 + e.index, e.kind, e.x + w1, e.y, e.group))
    for y in range(left.h):
        edges.append(Edge(len(edges), "i", w1, y, GG))
    check_cap([e.group.order for e in edges], cap)
    iface = {e.y: e.index for e in edges if e.kind == "i"}

    def shift_leg(leg: Leg) -> Leg:
        return Leg(leg.edge + n1, leg.outgoing, leg.embed, leg.role, leg.project)

    vertices = list(left.vertices)
    for v in right.vertices:
        vertices.append(Vertex(v.x + w1, v.y, tuple(shift_leg(l) for l in v.legs), v.gauge, v.phi, v.kind))

    emb_g = -np.ones(G.order, dtype=int)
    emb_pair = -np.ones(G.order, dtype=int)
    emb_p = -np.ones(G.order, dtype=int)
    for h, ph in D.pairs:
        emb_g[h] = h
        emb_pair[h] = GG.pair(h, ph)
        emb_p[h] = ph
    proj = -np.ones(GG.order, dtype=int)
    for h, ph in D.pairs:
        proj[GG.pair(h, ph)] = h
    twisted = spec.phi is not None
    for y in range(left.h + 1):
        legs = [Leg(left.edge("h", w1 - 1, y), False, emb_g)]
        if y > 0:
            legs.append(Leg(iface[y - 1], False, emb_pair, "x" if twisted else None, proj))
        if y < left.h:
            legs.append(Leg(iface[y], True, emb_pair, "y" if twisted else None, proj))
        legs.append(Leg(n1 + right.edge("h", 0, y), True, emb_p))
        vertices.append(Vertex(w1, y, tuple(legs), D.K, spec.phi, "interface"))

    plaquettes = []
    for p in left.plaquettes:
        walk = list(p.walk)
        if p.x == w1 - 1:
            walk.insert(len(walk) - 1, (iface[p.y], -1, 0))
        plaquettes.append(Plaquette(p.x, p.y, tuple(walk), G))
    for p in right.plaquettes:
        walk = [(e + n1, s, c) for e, s, c in p.walk]
        if p.x == 0:
            walk.insert(0, (iface[p.y], +1, 1))
        plaquettes.append(Plaquette(p.x + w1, p.y, tuple(walk), Gp))

    allowed = frozenset(GG.pair(h, ph) for h, ph in D.pairs)
    constraints = list(left.constraints) + [(e + n1, a) for e, a in right.constraints]
    constraints += [(iface[y], allowed) for y in range(left.h)]
    return HybridLayout(edges, vertices, plaquettes, constraints, left, right, spec, GG, n1, n2)


def disjoint_layout(left: PatchLayout, right: PatchLayout) -> Layout:
    """The two patches side by side with no interface column."""
    n1 = len(left.edges)
    edges = list(left.edges) + [Edge(n1 + e.index, e.kind, e.x + left.w, e.y, e.group) for e in right.edges]
    verts = list(left.vertices) + [
        Vertex(v.x + left.w, v.y, tuple(Leg(l.edge + n1, l.outgoing, l.embed, l.role, l.project) for l in v.legs),
               v.gauge, v.phi, v.kind)
        for v in right.vertices
    ]
    plaqs = list(left.plaquettes) + [
        Plaquette(p.x + left.w, p.y, tuple((e + n1, s, c) for e, s, c in p.walk), p.group) for p in right.plaquettes
    ]
    cons = list(left.constraints) + [(e + n1, a) for e, a in right.constraints]
    return Layout(edges, verts, plaqs, cons)


@dataclass
class MergeResult:
    layout: HybridLayout
    state: PhysicalState
    outcomes: list[str]
    probability: float


def _draw(probs: np.ndarray, rng: np.random.Generator | None) -> int:
    probs = np.clip(probs, 0, None)
    total = probs.sum()
    if total < 1e-14:
        raise LatticeError("all branches have zero probability")
    if rng is None:
        return int(np.argmax(probs))
    return int(rng.choice(len(probs), p=probs / total))


def merge(
    left: PhysicalState,
    right: PhysicalState,
    spec: InterfaceSpec,
    mode: str = "project",
    rng: np.random.Generator | None = None,
    forced: list[int] | None = None,
    cap: int | None = None,
) -> MergeResult:
    """Rough merge of two patch states.

    ``mode="project"`` applies the interface projectors directly (the
    trivial-outcome branch).  ``mode="measure"`` measures the character
    sector of every interface vertex term (K must be abelian); outcomes are
    character indices, sampled with ``rng`` or taken from ``forced``, and
    the stabilizers are understood as redefined by them.
    """
    if not isinstance(left.layout, PatchLayout) or not isinstance(right.layout, PatchLayout):
        raise LatticeError("merge expects two patch states")
    H = hybrid_layout(left.layout, right.layout, spec, cap)
    n_if = len(H.interface_edges)
    anc = np.zeros(int(np.prod([H.pair_group.order] * n_if)), dtype=complex)
    anc[0] = 1.0
    psi = np.kron(np.kron(left.amplitudes, right.amplitudes), anc)
    norm0 = np.vdot(psi, psi).real
    outcomes: list[str] = []
    prob = 1.0
    if mode == "project":
        for v in H.interface_vertices:
            psi = vertex_projector(H, v).apply(psi)
        prob = float(np.vdot(psi, psi).real / norm0)
        outcomes = ["1"] * len(H.interface_vertices)
    elif mode == "measure":
        K = spec.diag.K
        chars = abelian_characters(K)
        for i, v in enumerate(H.interface_vertices):
            posts = [vertex_projector(H, v, weights=lambda k, R=R: np.conj(R.chi(k))).apply(psi) for R in chars]
            probs = np.array([np.vdot(p, p).real for p in posts]) / np.vdot(psi, psi).real
            q = forced[i] if forced is not None else _draw(probs, rng)
            if probs[q] < 1e-14:
                raise LatticeError(f"forced outcome {q} has zero probability at {v.name}")
            prob *= probs[q]
            psi = posts[q]
            outcomes.append(chars[q].name)
    else:
        raise LatticeError(f"unknown merge mode {mode!r}")
    nrm = np.linalg.norm(psi)
    if nrm < 1e-14:
        raise LatticeError("merge annihilated the state")
    return MergeResult(H, PhysicalState(H, psi / nrm), outcomes, prob)


@dataclass
class SplitResult:
    layout: Layout
    left: PatchLayout
    right: PatchLayout
    state: PhysicalState
    outcomes: list[tuple[str, str]]
    probability: float
    flagged: list[tuple[str, dict[str, float]]]
    corrections: list[str]

    def logical(self) -> np.ndarray:
        """Coefficients <Phi_g (x) Phi_g'|psi> as a |G| x |G'| matrix."""
        B1, B2 = logical_basis(self.left), logical_basis(self.right)
        psi = self.state.amplitudes.reshape(B1.shape[0], B2.shape[0])
        return B1.conj().T @ psi @ B2.conj()


def split_outcome_probabilities(merged: MergeResult) -> np.ndarray:
    H = merged.layout
    n_if = len(H.interface_edges)
    d = H.pair_group.order
    t = merged.state.amplitudes.reshape(-1, d**n_if)
    return np.sum(np.abs(t) ** 2, axis=0).reshape([d] * n_if)


def _holonomy_distribution(layout: Layout, p: Plaquette, psi: np.ndarray) -> dict[str, float]:
    hol = holonomy_table(layout, p)
    G = p.group
    dist = {}
    for g in range(G.order):
        mask = Diagonal(layout.dims, tuple(e for e, _, _ in p.walk), (hol == g).astype(complex))
        w = float(np.vdot(psi, mask.apply(psi)).real)
        if w > 1e-12:
            dist[G.label(g)] = w
    return dist


def split(
    merged: MergeResult,
    rng: np.random.Generator | None = None,
    forced: list[int] | None = None,
    correct: bool = True,
) -> SplitResult:
    """Measure every interface edge and return the disjoint patches.

    ``forced`` lists the measured G-components h_l (bottom to top); the
    G'-components follow as p(h_l).  Boundary plaquettes whose holonomy is
    no longer trivial are reported in ``flagged``; with ``correct`` the
    string R^{h_0...h_{y-1}} (left) and L^{p(...)} (right) is applied on row
    y so both patches return to the standard code.
    """
    H = merged.layout
    D = H.spec.diag
    G, Gp, GG = D.G, D.Gp, H.pair_group
    n_if = len(H.interface_edges)
    probs = split_outcome_probabilities(merged)
    if forced is not None:
        if len(forced) != n_if:
            raise LatticeError(f"expected {n_if} forced outcomes, got {len(forced)}")
        if any(h not in D.K for h in forced):
            raise LatticeError("forced outcomes must lie in K")
        hs = list(forced)
        cfg = tuple(GG.pair(h, D.p(h)) for h in hs)
    else:
        flat = _draw(probs.reshape(-1), rng)
        cfg = np.unravel_index(flat, probs.shape)
        hs = [GG.component(int(c), 0) for c in cfg]
    prob = float(probs[tuple(cfg)]) if n_if else 1.0
    if prob < 1e-14:
        raise LatticeError("split outcome has zero probability")
    d = GG.order
    t = merged.state.amplitudes.reshape(-1, d**n_if)
    col = int(np.ravel_multi_index(cfg, [d] * n_if)) if n_if else 0
    psi = t[:, col] / np.sqrt(prob)
    L, R = H.left, H.right
    out_layout = disjoint_layout(L, R)
    n1 = len(L.edges)
    flagged = []
    for p in out_layout.plaquettes:
        if (p.x == L.w - 1 and p.group is G and p.walk[0][0] < n1) or (p.x == L.w and p.walk[0][0] >= n1):
            dist = _holonomy_distribution(out_layout, p, psi)
            if abs(dist.get(p.group.label(0), 0.0) - 1.0) > 1e-9:
                flagged.append((p.name, dist))
    corrections = []
    if correct:
        c = 0
        factors = []
        for y in range(L.h + 1):
            if y > 0:
                c = G.mul(c, hs[y - 1])
            if c != 0:
                e1 = L.edge("h", L.w - 1, y)
                e2 = n1 + R.edge("h", 0, y)
                pc = D.p(c)
                factors.append((e1, np.asarray(G.mul_table[:, G.inv(c)]), None))
                factors.append((e2, np.asarray(Gp.mul_table[pc, :]), None))
                corrections.append(f"R^{G.label(c)} on {out_layout.edges[e1].name}")
                corrections.append(f"L^{Gp.label(pc)} on {out_layout.edges[e2].name}")
        if factors:
            psi = Factorized(out_layout.dims, tuple(factors)).apply(psi)
    outcomes = [(G.label(h), Gp.label(D.p(h))) for h in hs]
    return SplitResult(out_layout, L, R, PhysicalState(out_layout, psi), outcomes, prob, flagged, corrections)


def hybrid_horizontal_op(layout: HybridLayout, h: int, hp: int) -> LatticeOp:
    """T^{(h,h')}: sum over (l,l') in K^diag of the projector onto top-row
    products (h l^-1, l' h'^-1) on the two sides."""
    L, R = layout.left, layout.right
    G, Gp = L.group, R.group
    top_l = [L.edge("h", x, L.h) for x in range(L.w)]
    top_r = [layout.n_left + R.edge("h", x, R.h) for x in range(R.w)]

    def products(Gx, k):
        acc = np.zeros((), dtype=int)
        for _ in range(k):
            acc = Gx.mul_table[acc[..., None], np.arange(Gx.order)]
        return acc

    pl, pr = products(G, len(top_l)), products(Gp, len(top_r))
    vals = np.zeros(pl.shape + pr.shape, dtype=complex)
    for l, lp in layout.spec.diag.pairs:
        a = G.mul(h, G.inv(l))
        b = Gp.mul(lp, Gp.inv(hp))
        vals += np.multiply.outer(pl == a, pr == b)
    return Diagonal(layout.dims, tuple(top_l + top_r), vals)


# ---------------------------------------------------------------- cross-check


@dataclass
class BranchDeviation:
    outcomes: list[tuple[str, str]]
    probability: float
    deviation: float
    flagged: int


@dataclass
class CrossCheckReport:
    fragment: str
    rows: int
    inputs: str
    branches: list[BranchDeviation]
    merge_probability: float

    @property
    def max_deviation(self) -> float:
        return max(b.deviation for b in self.branches)

    @property
    def total_probability(self) -> float:
        return float(sum(b.probability for b in self.branches))

    def ok(self, atol: float = ATOL) -> bool:
        return self.max_deviation < atol and abs(self.total_probability - 1) < atol

    def to_json(self) -> dict:
        return {
            "fragment": self.fragment,
            "rows": self.rows,
            "inputs": self.inputs,
            "merge_probability": round(self.merge_probability, 12),
            "max_deviation": float(f"{self.max_deviation:.3e}"),
            "total_probability": round(self.total_probability, 12),
            "branches": [
                {"outcomes": [list(o) for o in b.outcomes], "probability": round(b.probability, 12),
                 "deviation": float(f"{b.deviation:.3e}"), "flagged_plaquettes": b.flagged}
                for b in self.branches
            ],
            "ok": self.ok(),
        }


@dataclass(frozen=True)
class Fragment:
    name: str
    left: str
    right: str
    generators: tuple[tuple[str, str], ...]
    description: str


FRAGMENTS = {
    "z4-d4": Fragment("z4-d4", "Z4", "D4", (("m", "r"),), "<(m, r)> between Z4 and D4"),
    "d4-z2z2": Fragment("d4-z2z2", "D4", "Z2 x Z2", (("r^2", "m_L"), ("r^3s", "m_R")),
                        "<(r^2, m_L), (r^3 s, m_R)> between D4 and Z2 x Z2"),
    "d4-z2": Fragment("d4-z2", "D4", "Z2", (("r^3s", "m"),), "<(r^3 s, m)> between D4 and Z2"),
    "trivial": Fragment("trivial", "D4", "Z2", (), "K = {id}: disjoint patches"),
}


def fragment_spec(fragment: Fragment, G: FiniteGroup, Gp: FiniteGroup) -> InterfaceSpec:
    from .groups import diagonal_from_generators

    gens = {G.element(a): Gp.element(b) for a, b in fragment.generators}
    return InterfaceSpec(diagonal_from_generators(G, Gp, gens))


def _fragment_inputs(fragment: Fragment, G: FiniteGroup, Gp: FiniteGroup, kind: str, seed: int):
    if kind == "random":
        rng = np.random.default_rng(seed)
        a = rng.normal(size=G.order) + 1j * rng.normal(size=G.order)
        b = rng.normal(size=Gp.order) + 1j * rng.normal(size=Gp.order)
        return a / np.linalg.norm(a), b / np.linalg.norm(b)
    a = np.zeros(G.order, dtype=complex)
    if G.family == "cyclic":
        j = np.arange(G.order)
        a[:] = np.exp(1j * np.pi * j**2 / G.order)
    else:
        k = G.param
        a[:k] = np.exp(1j * np.pi * np.arange(k) ** 2 / k)
    b = np.zeros(Gp.order, dtype=complex)
    b[0] = 1.0
    return a / np.linalg.norm(a), b


def lattice_vs_logical(
    fragment: str = "z4-d4",
    rows: int = 1,
    inputs: str = "paper",
    seed: int = 0,
    cap: int | None = None,
    on_merge=None,
) -> CrossCheckReport:
    """Merge and split on the lattice, every split branch, against the
    logical gauge projector.

    ``inputs="paper"`` uses the S-type state on the left patch and the
    identity state on the right; ``"random"`` draws both from ``seed``.
    ``on_merge`` is called with the MergeResult before splitting.
    """
    from .groups import build_group
    from .logical import LogicalSpace, LogicalState, gauge_projector

    if inputs not in ("paper", "random"):
        raise LatticeError(f"inputs must be 'paper' or 'random', got {inputs!r}")
    if fragment not in FRAGMENTS:
        raise LatticeError(f"unknown fragment {fragment!r}; choose from {sorted(FRAGMENTS)}")
    frag = FRAGMENTS[fragment]
    G, Gp = build_group(frag.left), build_group(frag.right)
    spec = fragment_spec(frag, G, Gp)
    L = build_patch(G, 1, rows, cap=cap)
    R = build_patch(Gp, 1, rows, cap=cap)
    GG_order = G.order * Gp.order
    check_cap([G.order] * len(L.edges) + [Gp.order] * len(R.edges) + [GG_order] * rows, cap)
    a, b = _fragment_inputs(frag, G, Gp, inputs, seed)

    space = LogicalSpace((G, Gp), ("L", "R"))
    P = gauge_projector(space, spec.diag)
    expected = P.matrix @ np.kron(a, b)
    expected = expected / np.linalg.norm(expected)

    merged = merge(encode(L, a), encode(R, b), spec, cap=cap)
    if on_merge is not None:
        on_merge(merged)
    probs = split_outcome_probabilities(merged)
    branches = []
    for cfg in zip(*np.nonzero(probs > 1e-14)):
        hs = [merged.layout.pair_group.component(int(c), 0) for c in cfg]
        res = split(merged, forced=hs)
        got = res.logical().reshape(-1)
        leak = abs(1 - np.linalg.norm(got))
        dev = float(max(np.max(np.abs(got - expected)), leak))
        branches.append(BranchDeviation(res.outcomes, res.probability, dev, len(res.flagged)))
    return CrossCheckReport(fragment, rows, inputs, branches, merged.probability)
