import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridsurgery import lattice as L
from hybridsurgery import logical as lg
from hybridsurgery.center import center
from hybridsurgery.groups import Cocycle2, abelian_characters, build_group, conjugacy_classes

from conftest import random_vector

D4 = build_group("D4")


@pytest.fixture(scope="module")
def patch():
    return L.build_patch(D4)


@pytest.fixture(scope="module")
def basis(patch):
    return L.logical_basis(patch)


def pauli_cocycle(G):
    K = G.subgroup([G.element("r^2"), G.element("s")])

    def coords(g):
        return (g % 4) // 2, g // 4

    def phi(a, b):
        a1, a2 = coords(a)
        b1, b2 = coords(b)
        c1, c2 = (a1 + b1) % 2, (a2 + b2) % 2
        return 1j ** (a1 * a2 + b1 * b2 - c1 * c2) * (-1) ** (a2 * b1)

    return K, Cocycle2.from_function(K, phi)


# ---------------------------------------------------------------- layout and code space


def test_minimal_patch_shape(patch):
    assert len(patch.edges) == 2
    assert patch.vertices == []
    assert len(patch.plaquettes) == 1


@pytest.mark.parametrize(
    "group,w,h,dim",
    [("D4", 1, 1, 8), ("Z2", 2, 2, 2), ("Z4", 1, 2, 4), ("D4", 2, 1, 8), ("S3", 2, 1, 6)],
)
def test_code_space_dimension(group, w, h, dim):
    assert L.code_space_dimension(L.build_patch(build_group(group), w, h)) == dim


def test_smooth_left_side_kills_degeneracy():
    P = L.build_patch(D4, left=L.BoundaryCondition.smooth(D4))
    assert L.code_space_dimension(P) == 1


def test_top_must_be_smooth():
    with pytest.raises(L.LatticeError):
        L.build_patch(D4, top=L.BoundaryCondition.rough(D4))


def test_cap_is_enforced():
    with pytest.raises(L.CapExceeded) as exc:
        L.build_patch(D4, 2, 2, cap=1000)
    assert exc.value.required > exc.value.allowed == 1000


def test_cap_from_environment(monkeypatch):
    monkeypatch.setenv(L.CAP_ENV, "10")
    assert L.default_cap() == 10
    with pytest.raises(L.CapExceeded):
        L.build_patch(D4)


@pytest.mark.parametrize("w,h", [(1, 1), (2, 1)])
def test_logical_basis_orthonormal_code_states(w, h):
    P = L.build_patch(D4, w, h)
    B = L.logical_basis(P)
    assert np.allclose(B.conj().T @ B, np.eye(8), atol=1e-12)
    for g in range(8):
        assert L.PhysicalState(P, B[:, g]).is_code_state()


def test_right_logical_action(patch, basis):
    for g in range(8):
        Rg = L.logical_right(patch, g)
        for h in range(8):
            assert np.allclose(Rg.apply(basis[:, h]), basis[:, D4.mul(h, D4.inv(g))])


def test_left_logical_action(patch, basis):
    for g in range(8):
        for h in range(8):
            assert np.allclose(L.logical_left(patch, g).apply(basis[:, h]), basis[:, D4.mul(g, h)])


@settings(max_examples=15)
@given(st.lists(st.floats(-1, 1), min_size=16, max_size=16).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_encode_decode_roundtrip(v):
    P = L.build_patch(D4)
    c = np.array(v[:8]) + 1j * np.array(v[8:])
    assert np.allclose(L.decode(P, L.encode(P, c)), c)


def test_vertex_terms_compose():
    P = L.build_patch(D4, 2, 1)
    v = P.vertex(1, 0)
    rng = np.random.default_rng(0)
    psi = random_vector(rng, P.n_amplitudes)
    for a in range(8):
        for b in range(8):
            lhs = L.vertex_op(P, v, a).apply(L.vertex_op(P, v, b).apply(psi))
            assert np.allclose(lhs, L.vertex_op(P, v, D4.mul(a, b)).apply(psi))


def test_holonomy_partition(patch):
    total = sum((L.plaquette_op(patch, patch.plaquettes[0], g) for g in range(1, 8)), L.plaquette_op(patch, patch.plaquettes[0], 0))
    assert L.op_distance(total, L.identity_op(patch.dims)) < 1e-12


def test_state_snapshot_roundtrip(tmp_path, patch, basis):
    st_ = L.PhysicalState(patch, basis[:, 3])
    st_.save(tmp_path / "snap")
    back = L.load_amplitudes(tmp_path / "snap")
    assert np.allclose(back, basis[:, 3], atol=1e-6)
    assert (tmp_path / "snap.json").exists()


# ---------------------------------------------------------------- twisted boundaries


def test_twisted_boundary_composes_on_boundary_sites():
    K, phi = pauli_cocycle(D4)
    P = L.build_patch(D4, 1, 2, left=L.BoundaryCondition(K, phi))
    v = P.vertex(0, 1)
    assert v.kind == "boundary"
    rng = np.random.default_rng(3)
    psi = random_vector(rng, P.n_amplitudes)
    for e, allowed in P.constraints:
        psi = L.constraint_op(P, e, allowed).apply(psi)
    for a in K:
        A = L.boundary_vertex_op(P, v, a)
        assert L.op_distance(A.adjoint(), L.boundary_vertex_op(P, v, D4.inv(a))) < 1e-12
        for b in K:
            lhs = A.apply(L.boundary_vertex_op(P, v, b).apply(psi))
            assert np.allclose(lhs, L.boundary_vertex_op(P, v, D4.mul(a, b)).apply(psi))


def test_twisted_corners_are_projective():
    K, phi = pauli_cocycle(D4)
    P = L.build_patch(D4, 1, 2, left=L.BoundaryCondition(K, phi))
    corner = P.vertex(0, 0)
    assert corner.kind == "corner"
    assert corner not in P.stabilizer_vertices
    rng = np.random.default_rng(4)
    psi = random_vector(rng, P.n_amplitudes)
    for e, allowed in P.constraints:
        psi = L.constraint_op(P, e, allowed).apply(psi)
    a, b = D4.element("r^2"), D4.element("s")
    lhs = L.boundary_vertex_op(P, corner, a).apply(L.boundary_vertex_op(P, corner, b).apply(psi))
    rhs = L.boundary_vertex_op(P, corner, D4.mul(a, b)).apply(psi)
    # equal up to the cocycle value phi(a, b), which is not 1 here
    assert abs(phi(a, b) - 1) > 0.5
    assert np.allclose(lhs, phi(a, b) * rhs)


def test_twisted_stabilizers_commute_and_project():
    K, phi = pauli_cocycle(D4)
    P = L.build_patch(D4, 1, 2, left=L.BoundaryCondition(K, phi))
    terms = [op for _, op in L.stabilizer_terms(P)]
    for i, a in enumerate(terms):
        for b in terms[i + 1:]:
            assert L.op_distance(a @ b, b @ a, samples=1) < 1e-12
    Pc = L.code_projector(P)
    assert L.op_distance(Pc @ Pc, Pc, samples=1) < 1e-12


def test_untwisted_boundary_subgroup():
    K, _ = pauli_cocycle(D4)
    P = L.build_patch(D4, 1, 2, left=L.BoundaryCondition(K))
    assert L.code_space_dimension(P) == 2


# ---------------------------------------------------------------- ribbons


def test_horizontal_ribbon_selects_element(patch, basis):
    rib = L.horizontal_ribbon(patch)
    for h in range(8):
        F = L.ribbon_op(patch, rib, 0, h)
        for g in range(8):
            assert np.allclose(F.apply(basis[:, g]), (g == h) * basis[:, g])


def test_horizontal_ribbon_wide_patch():
    P = L.build_patch(D4, 2, 1)
    B = L.logical_basis(P)
    rib = L.horizontal_ribbon(P)
    for g in (0, 3, 6):
        F = L.ribbon_op(P, rib, 0, g)
        assert abs(np.vdot(B[:, g], F.apply(B[:, g])) - 1) < 1e-12


def test_vertical_ribbon_on_left_column_is_logical():
    P = L.build_patch(D4, 2, 1)
    rib = L.vertical_ribbon(P, 0)
    for h in range(8):
        F = sum((L.ribbon_op(P, rib, h, g) for g in range(1, 8)), L.ribbon_op(P, rib, h, 0))
        assert L.op_distance(F, L.logical_left(P, h)) < 1e-12


def test_magnetic_class_sums_match_on_code_space():
    P = L.build_patch(D4, 2, 1)
    B = L.logical_basis(P)
    rib = L.vertical_ribbon(P, 1)
    for cls in conjugacy_classes(D4):
        a = L.magnetic_class_op(P, rib, cls[0]).apply(B)
        b = L.logical_left_class(P, cls[0]).apply(B)
        assert np.allclose(a, b)


def test_ribbon_commutes_away_from_endpoints():
    S3 = build_group("S3")
    P = L.build_patch(S3, 2, 2)
    F = L.ribbon_op(P, L.vertical_ribbon(P, 1), S3.element("r"), S3.element("s"))
    for g in ("r", "s"):
        A = L.vertex_op(P, (1, 1), S3.element(g))
        assert L.op_distance(F @ A, A @ F, samples=1) < 1e-12
    for p in P.plaquettes:
        B = L.plaquette_op(P, p, 0)
        assert L.op_distance(F @ B, B @ F, samples=1) < 1e-12
    A = L.vertex_op(P, (1, 0), S3.element("s"))
    assert L.op_distance(F @ A, A @ F, samples=1) > 1e-6


def test_ribbon_validation(patch):
    with pytest.raises(L.LatticeError):
        L.validate_ribbon(patch, L.Ribbon(()))
    e = patch.edges[0].index
    with pytest.raises(L.LatticeError):
        L.validate_ribbon(patch, L.Ribbon((L.RibbonStep("direct", e, True), L.RibbonStep("direct", e, True))))


def test_charge_ribbons_in_anyon_basis(patch, basis):
    Z = center(D4)
    rib = L.horizontal_ribbon(patch)
    for a in Z.anyons:
        if a.cls != 0:
            continue
        R = Z.centralizer_irreps(0)[a.irrep]
        op = L.ribbon_anyon_op(patch, rib, a, (1, 1), (1, 1))
        for g in range(8):
            want = R.dim / 8 * R(D4.inv(g))[0, 0]
            assert np.allclose(op.apply(basis[:, g]), want * basis[:, g])


def test_anyon_ribbon_index_range(patch):
    a = center(D4).by_name("[r]_i")
    with pytest.raises(L.LatticeError):
        L.ribbon_anyon_op(patch, L.horizontal_ribbon(patch), a, (3, 1), (1, 1))


# ---------------------------------------------------------------- ancilla readout


def _compare(branches, direct):
    assert len(branches) == len(direct)
    for a, b in zip(branches, direct):
        assert abs(a.eigenvalue - b.eigenvalue) < 1e-12
        assert abs(a.probability - b.probability) < 1e-12
        if not a.mixed:
            assert np.allclose(a.state / max(np.linalg.norm(a.state), 1e-30) * np.sqrt(a.probability),
                               b.state, atol=1e-10)


@pytest.mark.parametrize("g", ["r", "s", "rs", "r^2"])
def test_ancilla_readout_matches_direct_measurement(g):
    P = L.build_patch(D4, 2, 1)
    rng = np.random.default_rng(5)
    psi = L.PhysicalState(P, random_vector(rng, P.n_amplitudes))
    v = P.vertex(1, 0)
    k = D4.element(g)
    got = L.ancilla_vertex_measurement(P, psi, v, k)
    want = L.direct_vertex_measurement(P, psi, v, k)
    _compare(got, want)


def test_left_readout_only_agrees_for_central_elements():
    P = L.build_patch(D4, 2, 1)
    rng = np.random.default_rng(6)
    psi = L.PhysicalState(P, random_vector(rng, P.n_amplitudes))
    v = P.vertex(1, 0)
    central = D4.element("r^2")
    _compare(L.ancilla_vertex_measurement(P, psi, v, central, "left"), L.direct_vertex_measurement(P, psi, v, central))
    r = D4.element("r")
    got = L.ancilla_vertex_measurement(P, psi, v, r, "left")
    want = L.direct_vertex_measurement(P, psi, v, r)
    assert max(abs(a.probability - b.probability) for a, b in zip(got, want)) > 1e-6


# ---------------------------------------------------------------- merge and split


@pytest.mark.parametrize("fragment", ["z4-d4", "d4-z2z2", "d4-z2", "trivial"])
@pytest.mark.parametrize("inputs", ["paper", "random"])
def test_lattice_matches_logical(fragment, inputs):
    rep = L.lattice_vs_logical(fragment, 1, inputs, seed=4)
    assert rep.max_deviation < 1e-9
    assert abs(rep.total_probability - 1) < 1e-9
    for b in rep.branches:
        trivial = all(o[0] == "id" for o in b.outcomes)
        assert b.flagged == (0 if trivial else 2)


def test_two_row_patches():
    rep = L.lattice_vs_logical("d4-z2", 2, "random", seed=1)
    assert rep.ok()


def test_two_row_z4_d4_exceeds_cap():
    with pytest.raises(L.CapExceeded):
        L.lattice_vs_logical("z4-d4", 2)


def test_split_without_gauging_returns_inputs():
    G, Gp = D4, build_group("Z2")
    spec = L.fragment_spec(L.FRAGMENTS["trivial"], G, Gp)
    rng = np.random.default_rng(2)
    a, b = random_vector(rng, 8), random_vector(rng, 2)
    merged = L.merge(L.encode(L.build_patch(G), a), L.encode(L.build_patch(Gp), b), spec)
    res = L.split(merged)
    assert np.allclose(res.logical(), np.outer(a, b))
    assert res.flagged == [] and res.corrections == []


def test_split_flags_and_corrections():
    A, G = build_group("Z4"), D4
    spec = L.fragment_spec(L.FRAGMENTS["z4-d4"], A, G)
    rng = np.random.default_rng(8)
    merged = L.merge(L.encode(L.build_patch(A), random_vector(rng, 4)), L.encode(L.build_patch(G), random_vector(rng, 8)), spec)
    for j in (1, 2, 3):
        res = L.split(merged, forced=[j])
        assert res.outcomes == [(A.label(j), G.label(j))]
        # the cut leaves holonomy m^j on the left and r^-j on the right
        assert dict(res.flagged) == {"p(0,0)": {A.label(j): pytest.approx(1.0)},
                                     "p(1,0)": {G.label(G.inv(j)): pytest.approx(1.0)}}
        assert res.corrections == [f"R^{A.label(j)} on H(0,1)", f"L^{G.label(j)} on H(1,1)"]
        raw = L.split(merged, forced=[j], correct=False)
        assert raw.corrections == []
        assert not np.allclose(raw.state.amplitudes, res.state.amplitudes)


def test_forced_split_outside_k_rejected():
    G, Gp = D4, build_group("Z2")
    spec = L.fragment_spec(L.FRAGMENTS["d4-z2"], G, Gp)
    merged = L.merge(L.encode(L.build_patch(G), np.eye(8)[0]), L.encode(L.build_patch(Gp), [1, 0]), spec)
    with pytest.raises(L.LatticeError):
        L.split(merged, forced=[G.element("r")])


def test_measured_merge_matches_logical_measurement():
    A, G = build_group("Z4"), D4
    spec = L.fragment_spec(L.FRAGMENTS["z4-d4"], A, G)
    rng = np.random.default_rng(9)
    a, b = random_vector(rng, 4), random_vector(rng, 8)
    left, right = L.encode(L.build_patch(A), a), L.encode(L.build_patch(G), b)
    chars = abelian_characters(spec.diag.K)
    m = A.element("m")
    lattice = {}
    for q0 in range(4):
        for q1 in range(4):
            res = L.merge(left, right, spec, mode="measure", forced=[q0, q1])
            key = complex(np.round(chars[q0].chi(m) * chars[q1].chi(m), 9))
            lattice[key] = lattice.get(key, 0.0) + res.probability
    space = lg.LogicalSpace((A, G))
    U = lg.right_mult(space, 0, m) @ lg.left_mult(space, 1, "r")
    psi = lg.LogicalState(space, np.kron(a, b))
    for lam in (1, 1j, -1, -1j):
        _, _, p = lg.measure(psi, U, forced=lam)
        assert abs(lattice.get(complex(lam), 0.0) - p) < 1e-10


def test_horizontal_operator_on_merged_code():
    G, Gp = D4, build_group("Z2")
    spec = L.fragment_spec(L.FRAGMENTS["d4-z2"], G, Gp)
    H = L.hybrid_layout(L.build_patch(G), L.build_patch(Gp), spec)
    K = spec.diag
    rng = np.random.default_rng(11)
    merged = L.merge(L.encode(L.build_patch(G), random_vector(rng, 8)), L.encode(L.build_patch(Gp), random_vector(rng, 2)), spec)
    psi = merged.state.amplitudes
    total = 0.0
    for h in range(8):
        for hp in range(2):
            T = L.hybrid_horizontal_op(H, h, hp)
            total += np.vdot(psi, T.apply(psi)).real
    # each (h, h') class is counted |K| times
    assert abs(total - K.order) < 1e-9
