import numpy as np
import pytest
from hypothesis import given, strategies as st

from calogero.errors import CapabilityError
from calogero.liealg import (build_model, chevalley_involution, diagram_automorphism, fold,
                             folded_vector_residuals, folding_automorphism,
                             golden_folded_sets, identity_automorphism)

MODELS = [("A", 1), ("A", 2), ("A", 3), ("D", 3), ("D", 4)]


@pytest.mark.parametrize("family,rank", MODELS)
@pytest.mark.parametrize("form", ["split", "compact"])
def test_structure_constants(family, rank, form, rng):
    m = build_model(family, rank, form).model
    assert m.commutator_residual() < 1e-12
    assert m.invariance_residual() < 1e-12
    assert m.jacobi_residual(rng) < 1e-11


@pytest.mark.parametrize("family,rank,dim", [("A", 1, 3), ("A", 2, 8), ("A", 3, 15),
                                             ("D", 4, 28), ("D", 5, 45)])
def test_dimensions(family, rank, dim):
    b = build_model(family, rank)
    assert b.model.dim == dim
    assert b.split.r == rank
    assert b.split.m == dim - rank


def test_pairing_scale_is_trace_form():
    a = build_model("A", 2).model
    d = build_model("D", 4).model
    assert a.scale == 1.0
    assert d.scale == 0.5
    x, y = np.random.default_rng(1).standard_normal((2, a.dim))
    assert np.isclose(a.pairing(x, y), np.trace(a.to_matrix(x) @ a.to_matrix(y)).real)


@given(st.lists(st.floats(-3, 3), min_size=8, max_size=8))
def test_coefficient_round_trip(values):
    m = build_model("A", 2, "compact").model
    x = np.array(values)
    assert np.allclose(m.to_coeffs(m.to_matrix(x)), x, atol=1e-12)


@given(st.integers(0, 2 ** 31))
def test_ad_is_a_derivation(seed):
    m = build_model("A", 2).model
    x, y, z = np.random.default_rng(seed).standard_normal((3, m.dim))
    lhs = m.ad(x) @ m.bracket(y, z)
    rhs = m.bracket(m.ad(x) @ y, z) + m.bracket(y, m.ad(x) @ z)
    assert np.allclose(lhs, rhs, atol=1e-10)


@given(st.integers(0, 2 ** 31))
def test_bracket_matches_matrix_commutator(seed):
    m = build_model("D", 3, "compact").model
    x, y = np.random.default_rng(seed).standard_normal((2, m.dim))
    X, Y = m.to_matrix(x), m.to_matrix(y)
    assert np.allclose(m.to_matrix(m.bracket(x, y)), X @ Y - Y @ X, atol=1e-10)


@pytest.mark.parametrize("form", ["split", "compact"])
def test_split_projectors(form):
    sp = build_model("A", 3, form).split
    assert max(sp.projector_residuals().values()) < 1e-12


@pytest.mark.parametrize("family,rank", [("A", 2), ("A", 3), ("D", 4)])
def test_diagram_automorphism_is_involutive(family, rank):
    b = build_model(family, rank)
    tau = diagram_automorphism(b.model)
    assert np.allclose(tau.operator @ tau.operator, np.eye(b.model.dim), atol=1e-12)
    assert tau.check()


def test_identity_automorphism_fixes_everything():
    m = build_model("A", 2).model
    assert np.allclose(identity_automorphism(m).operator, np.eye(m.dim))


def test_chevalley_involution_is_minus_transpose():
    x = np.arange(9.0).reshape(3, 3)
    assert np.allclose(chevalley_involution(chevalley_involution(x)), x)


# Literal folded root data, written out by hand for the smallest cases.
GOLDEN = {
    ("A", 3): ({(1, -1), (1, 1), (2, 0), (0, 2)}, {(1, 1), (1, -1)}),
    ("A", 2): ({(1,)}, {(1,), (2,)}),
    ("A", 4): ({(1, -1), (1, 1), (1, 0), (0, 1)},
               {(1, -1), (1, 1), (1, 0), (0, 1), (2, 0), (0, 2)}),
    ("D", 3): ({(1, -1), (1, 1), (1, 0), (0, 1)}, {(1, 0), (0, 1)}),
    ("D", 2): ({(1,)}, {(1,)}),
    ("A", 1): ({(2,)}, set()),
}


@pytest.mark.parametrize("key", sorted(GOLDEN))
def test_golden_sets_match_literal_tables(key):
    delta, gamma = golden_folded_sets(*key)
    assert (delta, gamma) == GOLDEN[key]


@pytest.mark.parametrize("key", sorted(GOLDEN))
@pytest.mark.parametrize("form", ["split", "compact"])
def test_fold_reproduces_tables(key, form):
    b = build_model(*key, form)
    tau = folding_automorphism(b)
    fd = fold(b, tau)
    assert set(fd.delta_plus) == GOLDEN[key][0]
    assert set(fd.gamma_plus) == GOLDEN[key][1]
    assert max(folded_vector_residuals(fd, b.model.scale, tau.matrix_map).values()) < 1e-12


def test_unsupported_family():
    with pytest.raises(CapabilityError):
        build_model("E", 6)


def test_sl2_pairing_values():
    m = build_model("A", 1).model
    h, e, f = np.eye(3)
    assert np.isclose(m.pairing(e, f), 1.0)
    assert m.pairing(e, e) == 0.0
    assert np.isclose(m.pairing(h, h), 2.0)
    assert np.allclose(m.bracket(e, f), h)
    assert np.allclose(m.bracket(h, e), 2 * e)


def test_sl3_diagram_map_sends_e12_to_e23():
    tau = diagram_automorphism(build_model("A", 2).model)
    e12 = np.zeros((3, 3))
    e12[0, 1] = 1.0
    expected = np.zeros((3, 3))
    expected[1, 2] = 1.0
    assert np.allclose(tau.matrix_map(e12), expected)


def test_diagram_map_preserves_compact_form():
    m = build_model("A", 3, "compact").model
    tau = diagram_automorphism(m)
    for a in range(m.dim):
        img = tau.matrix_map(m.to_matrix(np.eye(m.dim)[a]))
        assert m.realness_residual(img) < 1e-12
        assert m.span_residual(img) < 1e-12
