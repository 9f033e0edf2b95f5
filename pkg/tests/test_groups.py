import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridsurgery.groups import (
    Cocycle2,
    GroupError,
    GroupHom,
    build_group,
    centralizer,
    check_irreps,
    conjugacy_classes,
    diagonal_from_generators,
    direct_product,
    irreps,
    subgroup_irreps,
    verify_cocycle,
)

NAMES = ["Z2", "Z3", "Z4", "D3", "D4", "S3", "D8", "Z2 x Z2"]


@pytest.mark.parametrize("name", NAMES)
def test_axioms_and_class_equation(name):
    G = build_group(name)
    G.check_axioms()
    classes = conjugacy_classes(G)
    assert sum(len(c) for c in classes) == G.order
    assert classes[0] == (0,)
    for c in classes:
        assert len(c) * centralizer(G, c[0]).order == G.order


@pytest.mark.parametrize("name", NAMES)
def test_irreps_are_complete(name):
    G = build_group(name)
    reps = irreps(G)
    check_irreps(G.whole, reps)
    assert sum(R.dim**2 for R in reps) == G.order
    assert len(reps) == len(conjugacy_classes(G))


def test_d4_labels_and_indexing():
    D = build_group("D4")
    assert D.order == 8
    # r^a s^b lives at a + 4b
    assert D.element("r^3s") == 7
    assert D.label(D.element("rs")) == "rs"
    r, s = D.element("r"), D.element("s")
    assert D.prod(s, r, s) == D.inv(r)


def test_order_cap_refuses_large_groups():
    with pytest.raises(GroupError):
        build_group("Z200")


def test_direct_product_components():
    P = direct_product(build_group("D4"), build_group("Z2"))
    assert P.order == 16
    for a in range(8):
        for b in range(2):
            g = P.pair(a, b)
            assert (P.component(g, 0), P.component(g, 1)) == (a, b)


elements = st.integers(min_value=0, max_value=7)


@given(elements, elements, elements)
def test_d4_associativity(a, b, c):
    D = build_group("D4")
    assert D.mul(D.mul(a, b), c) == D.mul(a, D.mul(b, c))


@given(elements, st.integers(min_value=-9, max_value=9))
def test_power_respects_order(g, n):
    D = build_group("D4")
    k = D.element_order(g)
    assert D.power(g, n) == D.power(g, n % k)


@given(elements, elements)
def test_irreps_are_homomorphisms(a, b):
    D = build_group("D4")
    for R in irreps(D):
        assert np.allclose(R(D.mul(a, b)), R(a) @ R(b))
        assert np.allclose(R(a) @ R(a).conj().T, np.eye(R.dim))


@pytest.mark.parametrize("name", ["D4", "S3", "D8"])
def test_centralizer_irreps_complete(name):
    G = build_group(name)
    for c in conjugacy_classes(G):
        C = centralizer(G, c[0])
        reps = subgroup_irreps(C, c[0])
        check_irreps(C, reps)
        assert sum(R.dim**2 for R in reps) == C.order


def test_diagonal_subgroup_from_generators():
    D, Z = build_group("D4"), build_group("Z2 x Z2")
    diag = diagonal_from_generators(D, Z, {D.element("r^2"): Z.element("m_L"), D.element("r^3s"): Z.element("m_R")})
    assert diag.order == 4
    assert not diag.factorizes()
    assert set(diag.K.labels()) == {"id", "r^2", "r^3s", "rs"}


def test_non_homomorphism_rejected():
    D, Z = build_group("D4"), build_group("Z4")
    with pytest.raises(GroupError):
        GroupHom.from_generators(D.subgroup([D.element("s")]), Z, {"s": "m"})


def test_kernel_is_normal():
    D, Z = build_group("D4"), build_group("Z2")
    K = D.subgroup([D.element("r"), D.element("s")])
    p = GroupHom.from_generators(K, Z, {"r": "id", "s": "m"})
    assert p.kernel.order == 4
    assert p.kernel.is_normal_in(K)


def _pauli_cocycle(D):
    """A nontrivial 2-cocycle on <r^2, s> ~ Z2 x Z2."""
    K = D.subgroup([D.element("r^2"), D.element("s")])

    def coords(g):
        return (g % 4) // 2, g // 4

    def phi(a, b):
        a1, a2 = coords(a)
        b1, b2 = coords(b)
        c1, c2 = (a1 + b1) % 2, (a2 + b2) % 2
        return 1j ** (a1 * a2 + b1 * b2 - c1 * c2) * (-1) ** (a2 * b1)

    return Cocycle2.from_function(K, phi)


def test_cocycle_checks():
    D = build_group("D4")
    phi = _pauli_cocycle(D)
    assert verify_cocycle(phi).ok
    assert not phi.is_trivial
    K = phi.domain
    assert verify_cocycle(Cocycle2.trivial(K)).ok
    bad = Cocycle2.from_function(K, lambda a, b: -1 if (a, b) == (K.members[1], K.members[2]) else 1)
    assert not verify_cocycle(bad).ok
    assert "cocycle" in verify_cocycle(bad).failures()


def test_class_function_orthogonality():
    D = build_group("D8")
    reps = irreps(D)
    chi = np.array([[R.chi(g) for g in range(D.order)] for R in reps])
    assert np.allclose(chi @ chi.conj().T / D.order, np.eye(len(reps)))


@pytest.mark.parametrize("a,b", list(itertools.combinations(["Z2", "Z3", "D4"], 2)))
def test_product_irreps_count(a, b):
    P = direct_product(build_group(a), build_group(b))
    assert len(irreps(P)) == len(irreps(build_group(a))) * len(irreps(build_group(b)))
