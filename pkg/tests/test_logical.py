import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridsurgery import logical as lg
from hybridsurgery.groups import build_group, diagonal_from_generators, irreps
from hybridsurgery.logical import (
    LogicalError,
    LogicalSpace,
    LogicalState,
    basis_state,
    equal_up_to_global_phase,
    gauge_projector,
    left_mult,
    load_state,
    measure,
    measure_computational,
    right_mult,
    root_projectors,
)

from conftest import random_vector


@pytest.fixture(scope="module")
def space():
    return LogicalSpace((build_group("Z4"), build_group("D4")), ("A", "D"))


def test_encode_decode_roundtrip(space):
    for i in range(space.dim):
        assert space.encode(space.decode(i)) == i
    assert space.encode(("m", "r^3s")) == 1 * 8 + 7


@given(st.integers(0, 7), st.integers(0, 7))
def test_left_and_right_multiplication(g, h):
    D = build_group("D4")
    sp = LogicalSpace((D,))
    L = left_mult(sp, 0, g) @ basis_state(sp, (h,))
    R = right_mult(sp, 0, g) @ basis_state(sp, (h,))
    assert L.amplitude(D.mul(g, h)) == 1
    assert R.amplitude(D.mul(h, D.inv(g))) == 1


@given(st.integers(0, 7), st.integers(0, 7))
def test_left_right_commute(g, h):
    sp = LogicalSpace((build_group("D4"),))
    assert left_mult(sp, 0, g).commutator_norm(right_mult(sp, 0, h)) == 0.0


def test_gauge_projector_is_projector(space):
    A, D = space.slots
    diag = diagonal_from_generators(A, D, {A.element("m"): D.element("r")})
    P = gauge_projector(space, diag)
    M = P.dense
    assert np.allclose(M @ M, M)
    assert np.allclose(M, M.conj().T)
    assert round(np.trace(M).real) == space.dim // diag.order


def test_canonical_label_picks_one_per_gauge_orbit(space):
    A, D = space.slots
    diag = diagonal_from_generators(A, D, {A.element("m"): D.element("r")})
    M = gauge_projector(space, diag).dense
    reps = {lg.canonical_index(space, diag, i) for i in range(space.dim)}
    assert len(reps) == space.dim // diag.order
    for i in range(space.dim):
        c = lg.canonical_index(space, diag, i)
        assert c <= i and np.allclose(M[:, i], M[:, c])
    assert lg.canonical_label(space, diag, space.encode(("m", "r^3"))) == "id id"


def test_gauge_projector_rejects_wrong_slots(space):
    A, D = space.slots
    other = build_group("Z4")
    diag = diagonal_from_generators(other, D, {other.element("m"): D.element("r")})
    with pytest.raises(LogicalError):
        gauge_projector(space, diag)


def test_root_projectors_resolve_identity(space):
    U = right_mult(space, 0, 1) @ left_mult(space, 1, 1)
    Ps = root_projectors(U, 4)
    total = sum(P.dense for P in Ps.values())
    assert np.allclose(total, np.eye(space.dim))
    w = np.exp(2j * np.pi / 4)
    for m, P in Ps.items():
        assert np.allclose(U.dense @ P.dense, w**m * P.dense)


def test_root_projectors_reject_wrong_order(space):
    U = right_mult(space, 0, 1)
    with pytest.raises(LogicalError):
        root_projectors(U, 3)


def test_measure_born_rule(space, rng):
    psi = LogicalState(space, random_vector(rng, space.dim))
    U = right_mult(space, 0, 1) @ left_mult(space, 1, 1)
    probs = []
    for lam in (1, 1j, -1, -1j):
        val, post, p = measure(psi, U, forced=lam)
        assert abs(val - lam) < 1e-9
        assert np.allclose((U @ post).amplitudes, lam * post.amplitudes)
        probs.append(p)
    assert abs(sum(probs) - 1) < 1e-12


def test_measure_forced_non_eigenvalue(space, rng):
    psi = LogicalState(space, random_vector(rng, space.dim))
    with pytest.raises(LogicalError):
        measure(psi, right_mult(space, 0, 2), forced=1j)


def test_measure_computational_coarse(space, rng):
    psi = LogicalState(space, random_vector(rng, space.dim))
    total = 0.0
    for j in range(4):
        key, post, p = measure_computational(psi, "D", coarse=lambda g: g % 4, forced=j)
        t = post.tensor_view()
        assert np.allclose(np.delete(t, [j, j + 4], axis=1), 0)
        total += p
    assert abs(total - 1) < 1e-12


def test_irrep_diag_bounds(space):
    E = [R for R in irreps(space.slots[1]) if R.dim == 2][0]
    op = lg.irrep_diag(space, "D", E, 1, 2)
    assert op.space is space
    with pytest.raises(LogicalError):
        lg.irrep_diag(space, "D", E, 3, 1)


def test_state_json_roundtrip(space, rng):
    psi = LogicalState(space, random_vector(rng, space.dim))
    back = load_state(space, psi.dumps())
    assert np.allclose(back.amplitudes, psi.amplitudes)


@given(st.floats(-np.pi, np.pi))
def test_global_phase_detection(theta):
    U = np.array([[1, 2j], [0.5, -1]])
    ok, got = equal_up_to_global_phase(np.exp(1j * theta) * U, U)
    assert ok
    assert abs(np.exp(1j * got) - np.exp(1j * theta)) < 1e-9


def test_global_phase_rejects_different_matrices():
    ok, _ = equal_up_to_global_phase(np.eye(2), np.diag([1, -1]))
    assert not ok


def test_seeded_rng_is_reproducible():
    a = lg.make_rng(3).random(5)
    b = lg.make_rng(3).random(5)
    assert np.array_equal(a, b)
