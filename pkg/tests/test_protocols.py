import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridsurgery import protocols as P
from hybridsurgery.logical import equal_up_to_global_phase

TOL = 1e-9
OMEGA8 = np.exp(1j * np.pi / 4)


def test_s_state_teleportation_every_branch():
    res = P.teleport_S_to_dihedral(1)
    assert len(res.branches) == 16
    assert abs(res.total_probability - 1) < 1e-12
    target = np.array([1, OMEGA8, -1, OMEGA8, 0, 0, 0, 0]) / 2
    for b in res.branches:
        assert b.fidelity >= 1 - TOL
        ok, _ = equal_up_to_global_phase(b.output, target)
        assert ok, b.record


@pytest.mark.parametrize("n", [2, 3])
def test_teleportation_larger_dihedral(n):
    res = P.teleport_S_to_dihedral(n)
    assert len(res.branches) == (4 * n) ** 2
    assert res.min_fidelity >= 1 - TOL


def test_forced_record_is_reproduced():
    rec = {"m_XX": 2, "m_Z": 3}
    res = P.teleport_S_to_dihedral(1, record=rec)
    assert res.record.as_dict() == rec
    assert res.fidelity >= 1 - TOL


def test_zero_probability_record_raises():
    # the S state has no weight on m_Z outside 0..3 and m_XX is ok; force an impossible pair
    with pytest.raises(P.ProtocolError):
        P.s3_qutrit_magic(1, (1, 0, 0), record={"m_in": 0, "m_A": 0, "m_XX": 0, "m_X": 0, "m_Z": 5})


def test_seeded_runs_are_deterministic():
    a = P.magic_state_two_qubit(seed=11)
    b = P.magic_state_two_qubit(seed=11)
    assert a.record.as_dict() == b.record.as_dict()


def test_two_qubit_magic_state():
    target = P.magic_target_two_qubit()
    direct = P.CZ @ np.kron(np.array([1, -1]) / np.sqrt(2), np.array([1, OMEGA8]) / np.sqrt(2))
    assert np.allclose(target, direct)
    res = P.magic_state_two_qubit()
    assert len(res.branches) == 32
    assert abs(res.total_probability - 1) < 1e-12
    assert all(b.fidelity >= 1 - TOL for b in res.branches)


def test_two_qubit_gate_every_branch():
    res = P.gate_teleport_two_qubit()
    U = P.gate_target_two_qubit()
    assert all(b.phase is not None for b in res.branches)
    for b in res.branches:
        assert equal_up_to_global_phase(b.unitary, U)[0]


def test_single_qubit_gate_matrix():
    w = OMEGA8
    expected = 0.5 * np.array([[1 + w, -1 + w], [-1 + w, 1 + w]])
    assert np.allclose(P.gate_target_single_qubit(1), expected)
    assert np.allclose(expected, w * P.H @ P.T_root(1).conj().T @ P.H)


@pytest.mark.parametrize("n", [1, 2])
def test_variants_agree_branch_by_branch(n):
    a = P.gate_teleport_single_qubit(n, variant="A")
    b = P.gate_teleport_single_qubit(n, variant="B")
    by_key = {}
    for br in a.branches:
        r = br.record
        by_key[(r["m_merge"], r["m_X"], r["m_Z"])] = br
    assert len(by_key) == len(b.branches)
    for br in b.branches:
        r = br.record
        other = by_key[((r["m_XX"], r["m_rs"]), r["m_X"], r["m_Z"])]
        assert abs(other.probability - br.probability) < 1e-12
        assert equal_up_to_global_phase(other.unitary, br.unitary)[0]


@pytest.mark.parametrize("n", [1, 2, 3])
def test_root_t_family(n):
    m = P.magic_state_single_qubit(n)
    target = np.array([1, np.exp(1j * np.pi / (4 * n))]) / np.sqrt(2)
    assert np.allclose(m.target, target)
    assert m.min_fidelity >= 1 - TOL
    g = P.gate_teleport_single_qubit(n)
    assert all(b.phase is not None for b in g.branches)


@pytest.mark.parametrize("n,level", [(1, 3), (2, 4), (4, 5)])
def test_hierarchy_level(n, level):
    assert P.clifford_level(P.gate_target_single_qubit(n)) == level


def test_hierarchy_level_of_cliffords():
    assert P.clifford_level(np.eye(2)) == 1
    assert P.clifford_level(P.H) == 2
    assert P.clifford_level(P.CZ) == 2


settings_fast = settings(max_examples=10)


@settings_fast
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_gate_acts_on_arbitrary_input(v):
    psi = np.array(v[:2]) + 1j * np.array(v[2:])
    psi = psi / np.linalg.norm(psi)
    res = P.gate_teleport_single_qubit(1, psi=psi, seed=5)
    assert res.fidelity >= 1 - TOL


def test_s3_qubit_magic():
    res = P.s3_qubit_magic()
    w = np.exp(2j * np.pi / 3)
    assert np.allclose(res.target, np.array([1, w]) / np.sqrt(2))
    assert res.min_fidelity >= 1 - TOL
    assert abs(res.total_probability - 1) < 1e-12


@pytest.mark.parametrize("theta", P.QUTRIT_THETAS)
def test_s3_qutrit_magic(theta):
    res = P.s3_qutrit_magic(theta)
    expected = np.array([1, theta, 0]) / np.sqrt(2)
    assert np.allclose(res.target, expected)
    assert res.fidelity >= 1 - TOL
    assert 0 < res.probability < 1


def test_qutrit_theta_validated():
    with pytest.raises(P.ProtocolError):
        P.s3_qutrit_magic(2)


def test_qutrit_target_cycle():
    psi = np.array([0.6, 0.8, 0])
    t = P.qutrit_magic_target(-1, psi)
    assert np.allclose(t * np.linalg.norm(psi + -1 * np.roll(psi, 1)), psi - np.roll(psi, 1))


def test_simultaneity():
    rep = P.simultaneity_report()
    assert rep.ok
    assert max(rep.commutators.values()) < 1e-12
    assert rep.order_gap < 1e-12


def test_unitary_from_kraus_rejects_nonunitary():
    with pytest.raises(P.ProtocolError):
        P.unitary_from_kraus(np.array([[1, 0], [0, 0]], dtype=complex))


def test_conjugate_merge_elements_agree():
    # <(r^3 s, m)> and <(rs, m)> are conjugate in D4; both give the same n = 1 magic state
    a = P.magic_state_single_qubit(1, flavour="r3s")
    b = P.magic_state_single_qubit(1, flavour="rs")
    assert a.min_fidelity >= 1 - TOL and b.min_fidelity >= 1 - TOL
    assert np.allclose(a.target, b.target)
    assert abs(a.total_probability - b.total_probability) < 1e-12
