import numpy as np
import pytest
from hypothesis import given, strategies as st

from calogero.dynamics import (PhaseState, anomaly_from_cdybe, anomaly_residual, casimir2,
                               constraint_residual, eom_rhs, gauge_slice_momentum,
                               gauge_transform, hamiltonian, hamiltonian_observable, lax,
                               lax_jacobian, match_spectra, momentum_constraint_check,
                               p_coordinate, poisson_bracket, poisson_tensor, q_coordinate,
                               spectral_invariants, xi_coordinate)
from calogero.errors import PreconditionError
from calogero.matfun import expm
from calogero.models import get_model, random_state

NAMES = ["A1-split", "A2-compact", "A2-split-folded", "A1-compact-cyclic2",
         "A2-split-rational"]


def _flow(spec, state):
    return np.concatenate(eom_rhs(spec, state))


def test_sl2_force_oracle():
    # H = p^2 - ab / (4 sinh^2 q) on sl2 with a = b = 1 at q = 1, p = 0:
    # dp_cov/dt = -(1/2) coth(1) / sinh^2(1)
    e = get_model("A1-split")
    s = PhaseState([1.0], [0.0], [0.0, 1.0, 1.0])
    q_dot, p_dot, _ = eom_rhs(e.spec, s)
    cov = e.split.gram_k @ p_dot
    assert np.isclose(cov[0], -0.475359254863009745870884249701, atol=1e-13)
    assert np.isclose(q_dot[0], 0.0)


def test_sl2_lax_and_force_with_e_minus_f():
    e = get_model("A1-split")
    s = PhaseState([1.0], [0.0], [0.0, 1.0, -1.0])
    L = lax(e.spec, s).L
    assert np.allclose(L, [0.0, -1.0 / (1 - np.exp(-2.0)), 1.0 / (1 - np.exp(2.0))], atol=1e-15)
    # the coupling flips sign relative to E + F, so does the force
    cov = e.split.gram_k @ eom_rhs(e.spec, s)[1]
    assert np.isclose(cov[0], 0.475359254863009745870884249701, atol=1e-13)
    fd = -hamiltonian_observable(e.spec).gradient(s)[0]
    assert np.isclose(cov[0], fd, atol=1e-8)


def test_free_particle_limits():
    e = get_model("A2-compact")
    s = PhaseState([0.4, 0.1], [0.3, -0.7], np.zeros(8))
    assert np.allclose(lax(e.spec, s).L, e.split.embed(s.p))
    assert np.isclose(hamiltonian(e.spec, s), 0.5 * e.model.pairing(e.split.embed(s.p),
                                                                    e.split.embed(s.p)))
    q_dot, p_dot, xi_dot = eom_rhs(e.spec, s)
    assert np.allclose(q_dot, s.p) and np.allclose(p_dot, 0) and np.allclose(xi_dot, 0)
    a = get_model("A2-split")
    tr = spectral_invariants(a.model, a.split.embed([0.5, 0.2]), 2).traces
    assert np.isclose(tr[1], 0.5 ** 2 + 0.3 ** 2 + 0.2 ** 2)
    assert np.allclose(spectral_invariants(a.model, np.zeros(8), 3).traces, 0.0)


def test_momentum_map_trivial_point():
    e = get_model("A2-split")
    J = e.split.embed([0.3, -0.2])
    assert momentum_constraint_check(e.spec, [1.0, 0.4], J, np.zeros(8)) == (0.0, 0.0)


def test_sl2_lax_oracle():
    # L = p - R_+ xi for xi = E + F at q = 1: coefficients -(coth(1)/2 + 1/2) and
    # coth(1)/2 - 1/2 = 1/(e^2 - 1)
    e = get_model("A1-split")
    L = lax(e.spec, PhaseState([1.0], [0.3], [0.0, 1.0, 1.0])).L
    assert np.allclose(L, [0.3, -1.15651764274966565, 1.0 / (np.e ** 2 - 1.0)], atol=1e-15)


@pytest.mark.parametrize("name", NAMES)
def test_canonical_brackets(name):
    e = get_model(name)
    s = random_state(e, np.random.default_rng(1), constrained=False)
    r = e.split.r
    for i in range(r):
        for j in range(r):
            pb = poisson_bracket(e.spec, q_coordinate(i), p_coordinate(e.spec, j), s)
            assert np.isclose(pb, float(i == j), atol=1e-12)
            assert abs(poisson_bracket(e.spec, q_coordinate(i), q_coordinate(j), s)) < 1e-14


def test_lie_poisson_brackets_are_structure_constants():
    e = get_model("A2-split")
    m = e.model
    s = random_state(e, np.random.default_rng(2), constrained=False)
    cov = m.gram @ s.xi
    for a, b in [(0, 3), (2, 5), (4, 7)]:
        pb = poisson_bracket(e.spec, xi_coordinate(e.spec, a), xi_coordinate(e.spec, b), s)
        assert np.isclose(pb, m.structure_constants[a, b] @ cov, atol=1e-12)


@pytest.mark.parametrize("name", NAMES)
def test_equations_of_motion_are_hamiltonian(name):
    e = get_model(name)
    s = random_state(e, np.random.default_rng(3), constrained=False)
    grad = hamiltonian_observable(e.spec).gradient(s)
    assert np.allclose(poisson_tensor(e.spec, s) @ grad, _flow(e.spec, s), atol=1e-7)


@pytest.mark.parametrize("name", NAMES)
def test_hamiltonian_is_half_lax_square_on_constraint(name):
    e = get_model(name)
    rng = np.random.default_rng(4)
    for _ in range(5):
        s = random_state(e, rng)
        L = lax(e.spec, s).L
        assert abs(hamiltonian(e.spec, s) - 0.5 * e.model.pairing(L, L)) < 1e-12


@pytest.mark.parametrize("name", NAMES)
def test_spectrum_and_casimir_stationary(name):
    e = get_model(name)
    s = random_state(e, np.random.default_rng(5))
    jac = lax_jacobian(e.spec, s, "analytic")
    l_dot = jac @ _flow(e.spec, s)
    L = lax(e.spec, s).L
    mat, dmat = e.model.to_matrix(L), e.model.to_matrix(l_dot)
    for k in (2, 3):
        d_tr = k * np.trace(np.linalg.matrix_power(mat, k - 1) @ dmat)
        assert abs(d_tr) < 1e-10
    xi_dot = eom_rhs(e.spec, s)[2]
    assert abs(e.model.pairing(s.xi, xi_dot)) < 1e-10
    assert constraint_residual(e.spec, s.replace(xi=xi_dot)) < 1e-12


@pytest.mark.parametrize("name", NAMES)
def test_lax_jacobian_analytic_matches_fd(name):
    e = get_model(name)
    s = random_state(e, np.random.default_rng(6), constrained=False)
    a = lax_jacobian(e.spec, s, "analytic")
    assert np.allclose(a, lax_jacobian(e.spec, s, "fd"), atol=1e-7)


@pytest.mark.parametrize("name", NAMES)
def test_anomaly_identity_and_detector(name):
    e = get_model(name)
    s = random_state(e, np.random.default_rng(7), constrained=False)
    assert np.max(np.abs(anomaly_residual(e.spec, s))) < 1e-6
    assert np.max(np.abs(anomaly_residual(e.spec.corrupted(), s))) > 1e-3


@pytest.mark.parametrize("name", ["A1-split", "A2-compact", "A2-split-rational"])
def test_anomaly_residual_is_cdybe_pairing(name):
    # for any R the residual equals <xi, E(R, T^a, T^b)>, so it measures the CDYBE defect
    e = get_model(name)
    s = random_state(e, np.random.default_rng(8), constrained=False)
    bad = e.spec.corrupted()
    res = anomaly_residual(bad, s, jacobian="analytic")
    assert np.max(np.abs(res)) > 1e-2
    assert np.allclose(res, anomaly_from_cdybe(bad, s), atol=1e-12)
    assert np.max(np.abs(anomaly_from_cdybe(e.spec, s))) < 1e-10


@given(st.integers(0, 2 ** 31))
def test_gauge_invariance(seed):
    e = get_model("A2-split")
    rng = np.random.default_rng(seed)
    s = random_state(e, rng)
    kappa = rng.standard_normal(e.split.r)
    L = lax(e.spec, s)
    s2, L2 = gauge_transform(e.spec, s, L, kappa)
    assert np.allclose(lax(e.spec, s2).L, L2.L, atol=1e-9 * (1 + np.max(np.abs(L.L))))
    assert np.isclose(hamiltonian(e.spec, s2), hamiltonian(e.spec, s), rtol=1e-10, atol=1e-10)
    ev1 = spectral_invariants(e.model, L, 3).eigenvalues
    ev2 = spectral_invariants(e.model, L2, 3).eigenvalues
    assert match_spectra(ev1, ev2) < 1e-9 * (1 + np.max(np.abs(ev1)))
    assert np.isclose(casimir2(e.spec, s2), casimir2(e.spec, s))


@given(st.lists(st.floats(-5, 5), min_size=11, max_size=11), st.floats(0, 10))
def test_phase_state_json_round_trip(values, t):
    s = PhaseState(values[:1], values[1:2], values[2:], t)
    back = PhaseState.from_json(s.to_json())
    assert np.array_equal(back.flat(), s.flat()) and back.t == s.t


def test_phase_state_validation():
    with pytest.raises(PreconditionError):
        PhaseState([0.0, 1.0], [0.0], [0.0])
    with pytest.raises(PreconditionError):
        PhaseState.from_json('{"q": [1.0]}')
    with pytest.raises(PreconditionError):
        lax(get_model("A2-split").spec, PhaseState([1.0], [0.0], np.zeros(3)))


@pytest.mark.parametrize("name", ["A2-split", "A2-compact-folded", "A1-split-cyclic3"])
def test_momentum_map_slice(name):
    e = get_model(name)
    rng = np.random.default_rng(9)
    for _ in range(5):
        q = random_state(e, rng).q
        J = gauge_slice_momentum(e.spec, q, rng.standard_normal(e.split.r),
                                 rng.standard_normal(e.split.m))
        xi = -e.spec.theta.operator @ J + expm(-e.model.ad(e.split.embed(q))) @ J
        a, b = momentum_constraint_check(e.spec, q, J, xi)
        assert a < 1e-10 and b < 1e-10
        a, b = momentum_constraint_check(e.spec, q, J + 0.1 * rng.standard_normal(J.size), xi)
        assert a > 1e-4 and b > 1e-4


def test_momentum_map_rejects_rational():
    e = get_model("A1-split-rational")
    with pytest.raises(PreconditionError):
        momentum_constraint_check(e.spec, [1.0], np.zeros(3), np.zeros(3))
