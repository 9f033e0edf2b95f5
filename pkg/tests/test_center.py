import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridsurgery.center import (
    LabelError,
    center,
    check_condensable,
    parse_algebra,
    parse_anyon_label,
    parse_pair_label,
    rough_lagrangian,
    smooth_lagrangian,
    verify_anyon_rows,
    verify_folded_lagrangian,
)
from hybridsurgery.groups import build_group

GROUPS = ["Z2", "Z3", "Z4", "Z2 x Z2", "S3", "D4", "D8"]


@pytest.mark.parametrize("name", GROUPS)
def test_modular_data(name):
    Z = center(name)
    G = build_group(name)
    assert Z.total_dimension_squared() == G.order**2
    S = Z.S
    assert np.allclose(S @ S.conj().T, np.eye(len(Z)), atol=1e-12)
    assert np.allclose(S, S.T, atol=1e-12)
    # S^2 is charge conjugation: a permutation matrix
    C = S @ S
    assert np.allclose(np.abs(C).sum(axis=1), 1)
    assert np.allclose(C @ C, np.eye(len(Z)))


@pytest.mark.parametrize("name", ["Z2", "S3", "D4"])
def test_modular_relation(name):
    Z = center(name)
    S, T = Z.S, Z.T
    ST3 = np.linalg.matrix_power(S @ T, 3)
    # (ST)^3 = p+ S^2 / D with p+ = D for quantum doubles
    assert np.allclose(ST3, S @ S, atol=1e-10)


def test_d4_anyon_names_and_count():
    Z = center("D4")
    assert len(Z) == 22
    names = [a.name for a in Z]
    assert names[:5] == ["1", "1_r", "1_s", "1_rs", "E"]
    assert "[r]_i" in names and "[s]_+-" in names
    assert sorted(a.qdim for a in Z).count(2) == 14


def test_toric_code_names():
    assert [a.name for a in center("Z2")] == ["1", "e", "m", "e m"]


@given(st.integers(0, 21), st.integers(0, 21), st.integers(0, 21))
def test_verlinde_fusion_is_nonnegative_integer(a, b, c):
    N = center("D4").fusion(a, b, c)
    assert abs(N.imag) < 1e-9
    assert abs(N.real - round(N.real)) < 1e-9
    assert round(N.real) >= 0


@given(st.integers(0, 21))
def test_vacuum_is_fusion_unit(a):
    Z = center("D4")
    for c in range(len(Z)):
        assert round(Z.fusion(0, a, c).real) == (a == c)


@pytest.mark.parametrize("name", GROUPS)
def test_canonical_lagrangians(name):
    for A in (rough_lagrangian(name), smooth_lagrangian(name)):
        rep = check_condensable(A)
        assert rep.condensable and rep.lagrangian, rep.failures


def test_fermion_is_rejected():
    rep = check_condensable(parse_algebra("1 (+) e m", "Z2"))
    assert not rep.condensable
    assert not rep.spins_trivial


def test_proper_algebra_is_condensable_not_lagrangian():
    rep = check_condensable(parse_algebra("1 (+) 1_r", "D4"))
    assert rep.condensable and not rep.lagrangian


def test_folded_toric_interface():
    A = parse_algebra("1 (+) m mbar (+) e ebar (+) e m ebar mbar", "Z2", "Z2")
    rep = verify_folded_lagrangian(A, parse_algebra("1", "Z2"))
    assert rep.ok


def test_folded_missing_term_fails():
    A = parse_algebra("1 (+) m mbar (+) e ebar", "Z2", "Z2")
    rep = verify_folded_lagrangian(A)
    assert not rep.ok
    assert "total dimension" in rep.first_failure()


def test_folded_containment_failure():
    A = parse_algebra("1 (+) m mbar (+) e ebar (+) e m ebar mbar", "Z2", "Z2")
    rep = verify_folded_lagrangian(A, parse_algebra("1 (+) e", "Z2"))
    assert rep.contains_unfolded is False


def test_bar_conjugates_charge():
    a, b = parse_anyon_label("1 | e", "Z3", "Z3")
    a2, b2 = parse_anyon_label("ebar", "Z3", "Z3")
    assert b2.name == "e^2" and b.name == "e"


@pytest.mark.parametrize(
    "text,name",
    [("([r],i)", "[r]_i"), ("([s],+,-)", "[s]_+-"), ("([r^2],E)", "[r^2]E"), ("([id],1_rs)", "1_rs"), ("([id],1)", "1")],
)
def test_pair_labels(text, name):
    assert parse_pair_label(text, "D4").name == name


@pytest.mark.parametrize("bad", ["[r] (+)", "1 (+) q", "[x]"])
def test_label_errors(bad):
    with pytest.raises(LabelError):
        parse_algebra(bad, "D4")


def test_anyon_rows_detect_mismatch():
    rows = verify_anyon_rows(["([r],i) ; red ; 2 ; i", "([r],i) ; red ; 2 ; -i", "([s],+,+) ; blue ; 3 ; +"], "D4")
    assert [r.ok for r in rows] == [True, False, False]
    assert "spin" in rows[1].detail and "dim" in rows[2].detail
